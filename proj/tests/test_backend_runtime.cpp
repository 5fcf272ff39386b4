#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mpcc/approx/library.hpp"
#include "mpcc/backend/cost.hpp"
#include "mpcc/backend/lower.hpp"
#include "mpcc/backend/typecheck.hpp"
#include "mpcc/fixtures/random_graph.hpp"
#include "mpcc/runtime/trace.hpp"

using namespace mpcc;

namespace {

// Modular oracles, written with plain wrapping unsigned arithmetic.
u64 mask_of(int n) { return n == 64 ? ~u64{0} : (u64{1} << n) - 1; }

struct Two {
  Graph g;
  Annotation ann{{"x", OwnerSet::single(0)}, {"y", OwnerSet::single(1)}};
};

// x (party 0) and y (party 1) of the given shapes, result of f(b, x, y) revealed.
template <class F>
Graph two_party(const Shape& sx, const Shape& sy, F f, DType dx = DType::f64()) {
  Graph g;
  GraphBuilder b(g);
  const int x = b.input("x", sx, dx);
  const int y = b.input("y", sy);
  b.output(f(b, x, y));
  return run_frontend(g, {{"x", OwnerSet::single(0)}, {"y", OwnerSet::single(1)}});
}

std::size_t count_op(const PartyProgram& p, Opcode op) {
  std::size_t n = 0;
  for (const auto& i : p.instrs) n += i.op == op;
  return n;
}

bool has_violation(const std::vector<TypeViolation>& vs, const std::string& needle) {
  for (const auto& v : vs)
    if (to_string(v).find(needle) != std::string::npos) return true;
  return false;
}

double chi_square_uniform(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const double e = static_cast<double>(total) / static_cast<double>(counts.size());
  double chi = 0;
  for (auto c : counts) chi += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
  return chi;
}

SharePair share_values(const Ring& R, const std::vector<u64>& v, Rng& rng, std::int64_t scale = 1) {
  RingTensor t({static_cast<std::int64_t>(v.size())}, v);
  for (auto& x : t.data) x = R.reduce(x);
  return share(R, t, scale, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Shares

TEST(Shares, ReconstructAndLinearOpsMatchModularOracle) {
  for (int n : {64, 33, 16}) {
    const Ring R(n);
    const u64 m = mask_of(n);
    Rng rng(n);
    std::vector<u64> xs(500), ys(500);
    for (auto& v : xs) v = rng() & m;
    for (auto& v : ys) v = rng() & m;
    const auto a = share_values(R, xs, rng), b = share_values(R, ys, rng);
    const RingTensor c({500}, ys);
    const auto ra = reconstruct(R, a);
    const auto sum = reconstruct(R, add_shares(R, a[0], b[0]), add_shares(R, a[1], b[1]));
    const auto diff = reconstruct(R, sub_shares(R, a[0], b[0]), sub_shares(R, a[1], b[1]));
    const auto pub = reconstruct(R, add_public(R, a[0], c), add_public(R, a[1], c));
    const auto scaled = reconstruct(R, mul_public(R, a[0], c), mul_public(R, a[1], c));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ASSERT_EQ(ra[i], xs[i]);
      ASSERT_EQ(sum[i], (xs[i] + ys[i]) & m);
      ASSERT_EQ(diff[i], (xs[i] - ys[i]) & m);
      ASSERT_EQ(pub[i], (xs[i] + ys[i]) & m);
      ASSERT_EQ(scaled[i], (xs[i] * ys[i]) & m);
    }
  }
}

TEST(Shares, PublicAddendEntersAtPartyZeroOnly) {
  const Ring R;
  Rng rng(3);
  const auto a = share_values(R, {10, 20}, rng);
  const RingTensor c({2}, std::vector<u64>{5, 5});
  EXPECT_EQ(add_public(R, a[1], c).values, a[1].values);
  EXPECT_NE(add_public(R, a[0], c).values, a[0].values);
}

TEST(Shares, SingleShareIsUniform) {
  // Ring of 16 elements: share0 of a fixed secret must be uniform, whatever the secret.
  const Ring R(4);
  Rng rng(11);
  for (u64 secret : {0u, 7u, 15u}) {
    std::vector<std::size_t> counts(16, 0);
    for (int t = 0; t < 16000; ++t) ++counts[share_values(R, {secret}, rng)[0].values[0]];
    EXPECT_LT(chi_square_uniform(counts), 37.7) << "secret " << secret;  // 15 dof, p = 0.001
  }
}

TEST(Shares, EncodeDecodeRoundTrip) {
  const Ring R;
  for (double x : {0.0, 1.5, -2.25, 1234.5678, -0.0001}) {
    EXPECT_NEAR(decode_fixed(R, encode_fixed(R, x, 1 << 16), 1 << 16), x, 1.0 / (1 << 16));
  }
}

TEST(Shares, TruncationErrorIsAtMostOneUlp) {
  const Ring R;
  Rng rng(5);
  std::uniform_int_distribution<std::int64_t> d(-(std::int64_t{1} << 40), std::int64_t{1} << 40);
  int far = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::int64_t x = d(rng);
    const auto s = share_values(R, {R.from_signed(x)}, rng, 1 << 16);
    const auto r = reconstruct(R, trunc_local(R, s[0], 1 << 8), trunc_local(R, s[1], 1 << 8));
    const std::int64_t got = R.to_signed(r[0]);
    const std::int64_t want = x >> 8;
    if (std::llabs(got - want) > 1) ++far;  // wraps happen with probability ~2^-23 here
  }
  EXPECT_EQ(far, 0);
}

// ---------------------------------------------------------------------------
// Dealer, channel, rounds

TEST(Dealer, TriplesAreCorrect) {
  const Ring R;
  Dealer d(R, 9);
  const auto t = d.arith(100);
  for (std::size_t i = 0; i < 100; ++i) {
    const u64 a = t.a[0][i] + t.a[1][i], b = t.b[0][i] + t.b[1][i], c = t.c[0][i] + t.c[1][i];
    ASSERT_EQ(c, a * b);
  }
  const auto bt = d.boolean(100);
  for (std::size_t i = 0; i < 100; ++i) {
    ASSERT_EQ(bt.c[0][i] ^ bt.c[1][i], (bt.a[0][i] ^ bt.a[1][i]) & (bt.b[0][i] ^ bt.b[1][i]));
  }
  const auto db = d.dabits(100);
  for (std::size_t i = 0; i < 100; ++i) ASSERT_EQ(db.arith[0][i] + db.arith[1][i], u64(db.bit[0][i] ^ db.bit[1][i]));
}

TEST(Dealer, ReuseAndExhaustionAreRejected) {
  const Ring R;
  Dealer d(R, 1, TripleUsage{10, 0, 0});
  const auto t = d.arith(6);
  d.consume(t.id);
  EXPECT_THROW(d.consume(t.id), ProtocolError);
  EXPECT_THROW(d.arith(5), ProtocolError);
  EXPECT_THROW(d.boolean(1), ProtocolError);
}

TEST(Channel, PackingRoundTrips) {
  const Ring R(33);
  const std::vector<u64> v{0, 1, R.mask(), 12345678901ull & R.mask()};
  EXPECT_EQ(pack_ring(R, v).size(), 4u * 5);
  EXPECT_EQ(unpack_ring(R, pack_ring(R, v), 4), v);
  const std::vector<std::uint8_t> bits{1, 0, 1, 1, 0, 0, 0, 1, 1};
  EXPECT_EQ(pack_bits(bits).size(), 2u);
  EXPECT_EQ(unpack_bits(pack_bits(bits), bits.size()), bits);
}

TEST(Channel, RoundsCountDirectionChanges) {
  Channel one;
  one.send(0, 1, {1});
  one.recv(1, 0);
  EXPECT_EQ(one.rounds(), 1u);

  Channel exchange;  // simultaneous exchange is one round
  exchange.send(0, 1, {1});
  exchange.send(1, 0, {1});
  exchange.recv(0, 1);
  exchange.recv(1, 0);
  EXPECT_EQ(exchange.rounds(), 1u);

  Channel ping;  // reply depends on the request
  ping.send(0, 1, {1});
  ping.recv(1, 0);
  ping.send(1, 0, {1});
  ping.recv(0, 1);
  EXPECT_EQ(ping.rounds(), 2u);

  Channel empty;
  EXPECT_THROW(empty.recv(0, 1), ProtocolError);
}

// ---------------------------------------------------------------------------
// Protocols

TEST(Beaver, ElementwiseAndMatmulMatchOracle) {
  const Ring R;
  Rng rng(21);
  Channel ch;
  Dealer d(R, 4);
  MpcContext ctx{R, ch, d, {}};
  std::vector<u64> xs(64), ys(64);
  for (auto& v : xs) v = rng();
  for (auto& v : ys) v = rng();
  auto x = share_values(R, xs, rng), y = share_values(R, ys, rng);
  auto t = d.arith(64);
  const auto z = reconstruct(R, beaver_mul(ctx, x, y, MulKind::Elementwise, t));
  for (std::size_t i = 0; i < 64; ++i) ASSERT_EQ(z[i], xs[i] * ys[i]);
  EXPECT_THROW(beaver_mul(ctx, x, y, MulKind::Elementwise, t), ProtocolError);  // same batch again

  // [2,3] x [3,2]
  for (int p = 0; p < 2; ++p) {
    x[p].values.shape = {8, 8};
    y[p].values.shape = {8, 8};
  }
  auto tm = d.arith(512);
  const auto zm = reconstruct(R, beaver_mul(ctx, x, y, MulKind::MatMul, tm));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      u64 acc = 0;
      for (std::size_t k = 0; k < 8; ++k) acc += xs[i * 8 + k] * ys[k * 8 + j];
      ASSERT_EQ(zm[i * 8 + j], acc);
    }
}

TEST(Ltz, SignOracleAtFullWidth) {
  const Ring R;
  Rng rng(8);
  Channel ch;
  Dealer d(R, 2);
  MpcContext ctx{R, ch, d, {}};
  std::vector<u64> xs(2000);
  for (auto& v : xs) v = rng();
  xs[0] = 0;
  xs[1] = ~u64{0};
  xs[2] = u64{1} << 63;
  xs[3] = (u64{1} << 63) - 1;
  const auto out = reconstruct(R, ltz_protocol(ctx, share_values(R, xs, rng), 64));
  for (std::size_t i = 0; i < xs.size(); ++i) ASSERT_EQ(out[i], static_cast<std::int64_t>(xs[i]) < 0 ? 1u : 0u) << i;
}

TEST(Ltz, WindowEdges) {
  const Ring R;
  Rng rng(9);
  for (int w : {8, 21, 33}) {
    Channel ch;
    Dealer d(R, 3);
    MpcContext ctx{R, ch, d, {}};
    const std::int64_t h = std::int64_t{1} << (w - 1);
    std::vector<std::int64_t> vals{-h, -h + 1, -1, 0, 1, h - 1};
    std::uniform_int_distribution<std::int64_t> dist(-h, h - 1);
    for (int i = 0; i < 200; ++i) vals.push_back(dist(rng));
    std::vector<u64> xs;
    for (auto v : vals) xs.push_back(R.from_signed(v));
    const auto out = reconstruct(R, ltz_protocol(ctx, share_values(R, xs, rng), w));
    for (std::size_t i = 0; i < vals.size(); ++i) ASSERT_EQ(out[i], vals[i] < 0 ? 1u : 0u) << "w=" << w << " x=" << vals[i];
  }
  Channel ch;
  Dealer d(R, 3);
  MpcContext ctx{R, ch, d, {}};
  EXPECT_THROW(ltz_protocol(ctx, share_values(R, {1}, rng), 65), ProtocolError);
  EXPECT_THROW(ltz_protocol(ctx, share_values(R, {1}, rng), 0), ProtocolError);
}

TEST(Ltz, TrafficMatchesCostModel) {
  const Ring R;
  Rng rng(10);
  for (int w : {2, 8, 33, 64}) {
    Channel ch;
    Dealer d(R, 3);
    MpcContext ctx{R, ch, d, {}};
    std::vector<u64> xs(37, 5);
    ltz_protocol(ctx, share_values(R, xs, rng), w);
    std::size_t bytes = 0;
    for (const auto& ph : ltz_phases(37, w)) bytes += ph[0].bytes;
    EXPECT_EQ(ch.bytes()[0], bytes);
    EXPECT_EQ(ch.bytes()[1], bytes);
    EXPECT_EQ(ch.rounds(), ltz_phases(1, w).size());
    // Independent AND count for a Kogge-Stone prefix over w-1 bits.
    std::size_t ands = static_cast<std::size_t>(w - 1);
    for (int dd = 1; dd < w - 1; dd *= 2) ands += 2 * static_cast<std::size_t>(w - 1 - dd);
    EXPECT_EQ(d.used().boolean, 37 * (w > 1 ? ands : 0));
  }
}

TEST(Ltz, OpenedValuesLookUniform) {
  // Party 1's view of a Beaver opening (x - a) in a 16-element ring.
  const Ring R(4);
  Rng rng(12);
  for (u64 secret : {0u, 9u}) {
    std::vector<std::size_t> counts(16, 0);
    for (int t = 0; t < 8000; ++t) {
      Channel ch;
      ch.on_recv = [&](int at, const Bytes& b) {
        if (at == 1) ++counts[b[0] & 0xf];
      };
      Dealer d(R, static_cast<std::uint64_t>(t) + 100);
      MpcContext ctx{R, ch, d, {}};
      auto tr = d.arith(1);
      beaver_mul(ctx, share_values(R, {secret}, rng), share_values(R, {3}, rng), MulKind::Elementwise, tr);
    }
    EXPECT_LT(chi_square_uniform(counts), 37.7) << "secret " << secret;
  }
}

TEST(MaxKernel, EightElementsTakeSevenComparisonsAtDepthThree) {
  const Ring R;
  Rng rng(13);
  std::uniform_int_distribution<std::int64_t> d(-(1 << 20), 1 << 20);
  for (int trial = 0; trial < 50; ++trial) {
    Channel ch;
    Dealer dl(R, 5);
    std::size_t calls = 0;
    MpcContext ctx{R, ch, dl, [&](const SharePair& in, const SharePair&, int) { calls += in[0].values.size(); }};
    std::vector<std::int64_t> v(8);
    std::vector<u64> xs;
    for (auto& e : v) {
      e = d(rng);
      xs.push_back(R.from_signed(e));
    }
    MaxStats st;
    const auto out = reconstruct(R, max_kernel(ctx, share_values(R, xs, rng), {{0, 1, 2, 3, 4, 5, 6, 7}}, {1}, 64, &st));
    ASSERT_EQ(st.comparisons, 7u);
    ASSERT_EQ(st.depth, 3u);
    ASSERT_EQ(calls, 7u);
    ASSERT_EQ(R.to_signed(out[0]), *std::max_element(v.begin(), v.end()));
  }
}

TEST(MaxKernel, OddGroupsCarryTheLeftover) {
  const Ring R;
  Rng rng(14);
  Channel ch;
  Dealer dl(R, 5);
  MpcContext ctx{R, ch, dl, {}};
  const std::vector<std::int64_t> v{3, -9, 12, 5, 5, -1, 0};
  std::vector<u64> xs;
  for (auto e : v) xs.push_back(R.from_signed(e));
  MaxStats st;
  const auto out = reconstruct(R, max_kernel(ctx, share_values(R, xs, rng), {{0, 1, 2}, {3, 4, 5, 6}}, {2}, 64, &st));
  EXPECT_EQ(R.to_signed(out[0]), 12);
  EXPECT_EQ(R.to_signed(out[1]), 5);
  EXPECT_EQ(st.comparisons, 1u + 3u + 1u);  // level 1: 1+2, level 2: 1+1
  EXPECT_EQ(st.depth, 2u);
}

// ---------------------------------------------------------------------------
// Lowering and typing rules

TEST(Lowering, SecretMulIsBeaverThenTruncByMinScale) {
  const Graph g = two_party({4}, {4}, [](GraphBuilder& b, int x, int y) { return b.mul(x, y); });
  const auto low = lower_both(g);
  for (const auto& p : low.programs) {
    ASSERT_EQ(count_op(p, Opcode::MulMPC), 1u);
    for (std::size_t k = 0; k < p.instrs.size(); ++k) {
      if (p.instrs[k].op != Opcode::MulMPC) continue;
      const Instr& t = p.instrs[k + 1];
      EXPECT_EQ(t.op, Opcode::Trunc);
      EXPECT_EQ(t.in, std::vector<int>{p.instrs[k].out});
      EXPECT_EQ(t.scale_from, 1 << 16);
      EXPECT_EQ(t.type.scale, 1 << 16);
    }
  }
  EXPECT_TRUE(typecheck_lowered(low.programs).empty());
}

TEST(Lowering, PublicAddendOnlyAtPartyZero) {
  const Graph g = two_party({3}, {3}, [](GraphBuilder& b, int x, int) { return b.add_scalar(x, 2.5); });
  const auto low = lower_both(g);
  EXPECT_EQ(count_op(low.programs[0], Opcode::AddPublic), 1u);
  EXPECT_EQ(count_op(low.programs[1], Opcode::AddPublic), 0u);
  EXPECT_EQ(count_op(low.programs[1], Opcode::EncodePublic), 0u);
  const auto res = execute(low.programs, TensorMap{{"x", DTensor({3}, std::vector<double>{1, -2, 0.25})},
                                                   {"y", DTensor({3}, 0.0)}});
  EXPECT_NEAR(res.outputs[0][0], 3.5, 1e-4);
  EXPECT_NEAR(res.outputs[0][1], 0.5, 1e-4);
  EXPECT_NEAR(res.outputs[0][2], 2.75, 1e-4);
}

TEST(Lowering, IntegerSecretPlusFloatKeepsTheFraction) {
  // x is an integer secret (scale 1); 1.5 encoded at scale 1 would round to 2.
  const Graph g = two_party({1}, {1}, [](GraphBuilder& b, int x, int) { return b.add_scalar(x, 1.5); }, DType::i64());
  const auto low = lower_both(g);
  for (const auto& i : low.programs[0].instrs) {
    if (i.op == Opcode::EncodePublic) EXPECT_EQ(i.scale_to, 1 << 16);
  }
  const auto res = execute(low.programs, TensorMap{{"x", DTensor({1}, 3.0)}, {"y", DTensor({1}, 0.0)}});
  EXPECT_NEAR(res.outputs[0][0], 4.5, 1.0 / (1 << 16));
}

TEST(Lowering, LtzOutputsScaleOne) {
  const Graph g = two_party({5}, {5}, [](GraphBuilder& b, int x, int y) { return b.ltz(b.sub(x, y)); });
  const auto low = lower_both(g);
  for (const auto& p : low.programs)
    for (const auto& i : p.instrs)
      if (i.op == Opcode::LtzMPC) EXPECT_EQ(i.type.scale, 1);
}

TEST(Lowering, ScaleOverflowIsReported) {
  LowerConfig cfg;
  cfg.ring_width = 32;
  cfg.scale = 1 << 16;
  const Graph g = two_party({2}, {2}, [](GraphBuilder& b, int x, int y) { return b.mul(x, y); });
  try {
    lower_both(g, cfg);
    FAIL() << "expected scale overflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), Stage::Backend);
    EXPECT_NE(std::string(e.what()).find("scale overflow"), std::string::npos);
  }
}

TEST(Lowering, UnapproximatedOperatorIsRejected) {
  const Graph g = two_party({2}, {2}, [](GraphBuilder& b, int x, int) { return b.exp(x); });
  EXPECT_THROW(lower_both(g), Error);
}

TEST(Typecheck, DetectsHandBuiltViolations) {
  const Graph g = two_party({4}, {4}, [](GraphBuilder& b, int x, int y) {
    return b.ltz(b.add_scalar(b.mul(x, y), 1.0));
  });
  const auto base = lower_both(g).programs;
  ASSERT_TRUE(typecheck_lowered(base).empty());

  auto find = [](PartyProgram& p, Opcode op) -> Instr& {
    for (auto& i : p.instrs)
      if (i.op == op) return i;
    throw std::runtime_error("opcode not present");
  };
  {
    auto p = base;
    auto& t = find(p[0], Opcode::Trunc);
    t.op = Opcode::Copy;  // product consumed without truncation
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "mul_mpc not followed by trunc"));
  }
  {
    auto p = base;
    find(p[1], Opcode::LtzMPC).type.scale = 1 << 16;
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "ltz output scale"));
  }
  {
    auto p = base;
    auto& m = find(p[0], Opcode::MulMPC);
    m.op = Opcode::MulPublic;
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "plain mul on two secrets"));
  }
  {
    auto p = base;
    find(p[1], Opcode::Copy).op = Opcode::AddPublic;
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "public addend outside party 0"));
  }
  {
    auto p = base;
    find(p[0], Opcode::LtzMPC).window = 33;  // parties disagree on the width
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "misaligned"));
  }
  {
    auto p = base;
    find(p[0], Opcode::Trunc).type.scale = 1 << 10;
    EXPECT_TRUE(has_violation(typecheck_lowered(p), "trunc result scale"));
  }
}

TEST(Typecheck, ShareAddScaleMismatch) {
  const Graph g = two_party({4}, {4}, [](GraphBuilder& b, int x, int y) { return b.add(x, y); });
  auto p = lower_both(g).programs;
  for (auto& i : p[0].instrs)
    if (i.op == Opcode::ShareSend) i.type.scale = 1 << 8;
  EXPECT_TRUE(has_violation(typecheck_lowered(p), "scale mismatch"));
}

// ---------------------------------------------------------------------------
// Cost model

TEST(Cost, HundredProductsCost1600BytesPerParty) {
  const Graph g = two_party({100}, {100}, [](GraphBuilder& b, int x, int y) { return b.mul(x, y); });
  const auto c = static_cost(lower_both(g).programs);
  EXPECT_EQ(c.categories.at("mul").bytes[0], 1600u);
  EXPECT_EQ(c.categories.at("mul").bytes[1], 1600u);
  EXPECT_EQ(c.categories.at("mul").rounds, 1u);
  EXPECT_EQ(c.triples.arith, 100u);
}

TEST(Cost, NarrowWindowRoughlyHalvesComparisonBytes) {
  std::size_t b33 = 0, b64 = 0;
  for (const auto& p : ltz_phases(1000, 33)) b33 += p[0].bytes;
  for (const auto& p : ltz_phases(1000, 64)) b64 += p[0].bytes;
  const double ratio = static_cast<double>(b33) / static_cast<double>(b64);
  EXPECT_NEAR(ratio, 33 * std::log2(33.0) / (64 * 6.0), 0.05 * 0.4335);
}

TEST(Cost, MeasuredEqualsStaticOnFixedGraph) {
  const Graph g = two_party({3, 4}, {4, 2}, [](GraphBuilder& b, int x, int y) {
    const int m = b.matmul(x, y);
    return b.with_axis(OpKind::Max, b.relu(m), -1);
  });
  const Graph post = rewrite_fixpoint(g, builtin_passes()).graph;
  const auto low = lower_both(post);
  TensorMap in{{"x", DTensor({3, 4}, std::vector<double>{1, 2, 3, 4, -1, -2, -3, -4, 0.5, 0, 0, 1})},
               {"y", DTensor({4, 2}, std::vector<double>{1, -1, 0.5, 0.25, -2, 1, 0, 3})}};
  const auto res = execute(low.programs, in);
  EXPECT_TRUE(counters_match(static_cost(low.programs), res.measured));
  EXPECT_EQ(cost_from_json(cost_to_json(res.measured)), res.measured);
}

TEST(Cost, EmptyProgramCostsNothing) {
  Graph g;
  GraphBuilder b(g);
  b.output(b.input("x", {2}));
  g = run_frontend(g, {{"x", OwnerSet::all()}});
  const auto c = static_cost(lower_both(g).programs);
  EXPECT_EQ(c.total_bytes(), 0u);
  EXPECT_EQ(c.rounds, 0u);
}

// ---------------------------------------------------------------------------
// End to end

TEST(Runtime, RandomGraphsAgreeWithPlaintext) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto rc = fixtures::random_supported_case(seed);
    const auto low = lower_both(rc.graph);
    ASSERT_TRUE(typecheck_lowered(low.programs).empty()) << seed;
    ExecOptions opt;
    opt.keep_registers = true;
    const auto res = execute(low.programs, rc.inputs, opt);
    ASSERT_TRUE(counters_match(static_cast<const CostReport&>(static_cost(low.programs)), res.measured)) << seed;
    // Every intermediate node, decoded at its lowered scale, tracks the plaintext value.
    const auto plain = interpret_values(rc.graph, rc.inputs);
    for (const auto& [id, v] : node_values(low, res)) {
      const auto& ref = plain.at(id);
      for (std::size_t i = 0; i < ref.size(); ++i) {
        ASSERT_NEAR(v[i], ref[i], 1e-2 * std::max(1.0, std::abs(ref[i]))) << "seed " << seed << " node " << id;
      }
    }
  }
}

TEST(Runtime, InstructionCountsFollowTheGraph) {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    const auto rc = fixtures::random_supported_case(seed);
    const auto low = lower_both(rc.graph);
    std::size_t muls = 0, ltz = 0;
    for (int id : live_nodes(rc.graph)) {
      const Node& n = rc.graph.node(id);
      const auto secret = [&](int in) { return low.node_types.at(in).is_secret(); };
      if (is_mul_like(n.op) && secret(n.inputs[0]) && secret(n.inputs[1])) ++muls;
      if (n.op == OpKind::Ltz && secret(n.inputs[0])) ++ltz;
    }
    EXPECT_EQ(count_op(low.programs[0], Opcode::MulMPC), muls) << seed;
    EXPECT_EQ(count_op(low.programs[0], Opcode::LtzMPC), ltz) << seed;
  }
}

TEST(Runtime, DeterministicGivenSeed) {
  const auto rc = fixtures::random_supported_case(7);
  const auto low = lower_both(rc.graph);
  ExecOptions a;
  a.seed = 42;
  const auto r1 = execute(low.programs, rc.inputs, a);
  const auto r2 = execute(low.programs, rc.inputs, a);
  EXPECT_EQ(r1.transcript, r2.transcript);
  EXPECT_EQ(r1.outputs, r2.outputs);
  a.seed = 43;
  const auto r3 = execute(low.programs, rc.inputs, a);
  EXPECT_EQ(r3.measured, r1.measured);
  if (!r1.transcript.empty()) EXPECT_NE(r3.transcript, r1.transcript);
}

TEST(Runtime, DesynchronizedProgramsFailLoudly) {
  const Graph g = two_party({4}, {4}, [](GraphBuilder& b, int x, int y) { return b.mul(x, y); });
  auto p = lower_both(g).programs;
  for (auto it = p[1].instrs.begin(); it != p[1].instrs.end(); ++it) {
    if (it->op == Opcode::MulMPC) {
      it->op = Opcode::Copy;
      it->in.resize(1);
      break;
    }
  }
  TensorMap in{{"x", DTensor({4}, 1.0)}, {"y", DTensor({4}, 2.0)}};
  try {
    execute(p, in);
    FAIL() << "expected a protocol error";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.stage(), Stage::Runtime);
    EXPECT_NE(std::string(e.what()).find("instruction"), std::string::npos);
  }
}

TEST(Runtime, MissingInputIsAnError) {
  const Graph g = two_party({4}, {4}, [](GraphBuilder& b, int x, int y) { return b.add(x, y); });
  EXPECT_THROW(execute(lower_both(g).programs, TensorMap{{"x", DTensor({4}, 1.0)}}), Error);
}
