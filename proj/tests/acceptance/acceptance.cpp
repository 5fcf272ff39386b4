// Acceptance checks. `acceptance <id>` runs one criterion, prints a single
// PASS/FAIL line and exits 0 or 4. `acceptance all` runs every criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "mpcc/cli/commands.hpp"
#include "mpcc/fixtures/models.hpp"
#include "mpcc/fixtures/random_graph.hpp"

using namespace mpcc;

namespace {

const fs::path kFixtures = fs::path(MPCC_SOURCE_DIR) / "tests" / "fixtures";

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SharePair share_values(const Ring& R, const std::vector<u64>& v, Rng& rng, std::int64_t scale = 1) {
  RingTensor t({static_cast<std::int64_t>(v.size())}, v);
  for (auto& x : t.data) x = R.reduce(x);
  return share(R, t, scale, rng);
}

Graph exp_graph(int n, int t, int clamp) {
  Graph g;
  GraphBuilder b(g);
  b.output(b.exp(b.input("x", {n})));
  g = run_frontend(g, {{"x", OwnerSet::single(0)}});
  return rewrite_fixpoint(g, builtin_passes(), {{{g.node(1).site, "t"}, t}, {{g.node(1).site, "clamp"}, clamp}}).graph;
}

std::vector<double> run_exp(int t, int clamp, const std::vector<double>& xs) {
  const auto g = exp_graph(static_cast<int>(xs.size()), t, clamp);
  return interpret(g, {{"x", DTensor({static_cast<std::int64_t>(xs.size())}, xs)}})[0].data;
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  return v;
}

Outcome share_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  const Ring R;
  Rng rng(101);
  std::vector<u64> xs(10000), ys(10000);
  for (auto& v : xs) v = rng();
  for (auto& v : ys) v = rng();
  const auto a = share_values(R, xs, rng), b = share_values(R, ys, rng);
  const RingTensor c({10000}, ys);
  const auto ra = reconstruct(R, a);
  const auto sum = reconstruct(R, add_shares(R, a[0], b[0]), add_shares(R, a[1], b[1]));
  const auto pub = reconstruct(R, add_public(R, a[0], c), add_public(R, a[1], c));
  const auto prod = reconstruct(R, mul_public(R, a[0], c), mul_public(R, a[1], c));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    bad += ra[i] != xs[i];
    bad += sum[i] != xs[i] + ys[i];
    bad += pub[i] != xs[i] + ys[i];
    bad += prod[i] != xs[i] * ys[i];
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 1.0, fmt("%zu mismatches over 10^4 values, %.3f s (limit 1 s)", bad, secs)};
}

Outcome beaver() {
  const Ring R;
  Rng rng(202);
  Channel ch;
  Dealer d(R, 7);
  MpcContext ctx{R, ch, d, {}};
  std::vector<u64> xs(1000), ys(1000);
  for (auto& v : xs) v = rng();
  for (auto& v : ys) v = rng();
  const auto x = share_values(R, xs, rng), y = share_values(R, ys, rng);
  auto t = d.arith(1000);
  const auto z = reconstruct(R, beaver_mul(ctx, x, y, MulKind::Elementwise, t));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) bad += z[i] != xs[i] * ys[i];
  bool rejected = false;
  try {
    beaver_mul(ctx, x, y, MulKind::Elementwise, t);
  } catch (const ProtocolError&) {
    rejected = true;
  }
  return {bad == 0 && rejected, fmt("%zu mismatches over 10^3 products, reuse %s", bad, rejected ? "rejected" : "accepted")};
}

Outcome comparison() {
  const Ring R;
  Rng rng(303);
  auto ltz_errors = [&](const std::vector<std::int64_t>& vals, int w) {
    Channel ch;
    Dealer d(R, 11);
    MpcContext ctx{R, ch, d, {}};
    std::vector<u64> xs;
    for (auto v : vals) xs.push_back(R.from_signed(v));
    const auto out = reconstruct(R, ltz_protocol(ctx, share_values(R, xs, rng), w));
    std::size_t bad = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) bad += out[i] != (vals[i] < 0 ? 1u : 0u);
    return bad;
  };
  std::vector<std::int64_t> full(10000);
  for (auto& v : full) v = static_cast<std::int64_t>(rng());
  const std::int64_t h = std::int64_t{1} << 32;
  std::vector<std::int64_t> win{-h, -h + 1, -1, 0, 1, h - 1};
  std::uniform_int_distribution<std::int64_t> dist(-h, h - 1);
  while (win.size() < 10000) win.push_back(dist(rng));
  const std::size_t e64 = ltz_errors(full, 64), e33 = ltz_errors(win, 33);

  std::size_t b33 = 0, b64 = 0;
  for (const auto& p : ltz_phases(1000, 33)) b33 += p[0].bytes;
  for (const auto& p : ltz_phases(1000, 64)) b64 += p[0].bytes;
  const double ratio = static_cast<double>(b33) / static_cast<double>(b64);
  const double target = 33 * std::log2(33.0) / (64 * std::log2(64.0));
  const bool ok = e64 == 0 && e33 == 0 && std::abs(ratio - target) <= 0.05 * target;
  return {ok, fmt("w=64 errors %zu/10^4, w=33 errors %zu/10^4 in [-2^32, 2^32), byte ratio %.4f vs %.4f +-5%%", e64, e33,
                  ratio, target)};
}

Outcome truncation() {
  const Ring R(16);
  const std::int64_t s = 16;
  Rng rng(404);
  std::size_t wraps = 0, trials = 0;
  for (std::int64_t x : {std::int64_t{1} << 10, -(std::int64_t{1} << 10)}) {
    for (int i = 0; i < 50000; ++i, ++trials) {
      const auto sh = share_values(R, {R.from_signed(x)}, rng, s);
      const auto r = reconstruct(R, trunc_local(R, sh[0], s), trunc_local(R, sh[1], s));
      if (std::llabs(R.to_signed(r[0]) - x / s) > 1) ++wraps;
    }
  }
  const double rate = 100.0 * static_cast<double>(wraps) / static_cast<double>(trials);
  const double target = 100.0 * std::ldexp(1.0, 10 - 16);
  return {std::abs(rate - target) <= 0.5, fmt("wrap rate %.4f%% over %zu sharings vs %.4f%% +-0.5pp", rate, trials, target)};
}

Outcome exp_diverges() {
  const double y = run_exp(8, 0, {-600})[0];
  return {std::abs(y) >= 1e6, fmt("t=8 unclamped at x=-600 gives %.4g (need |y| >= 1e6)", y)};
}

Outcome exp_clamp() {
  std::size_t bad = 0, n = 0;
  for (int t = 0; t <= kExpMaxT; ++t) {
    const double edge = -std::ldexp(1.0, t);
    auto xs = grid(edge - 100, edge + 50, 601);
    xs.push_back(edge);
    const auto c = run_exp(t, 1, xs), u = run_exp(t, 0, xs);
    for (std::size_t i = 0; i < xs.size(); ++i, ++n) bad += xs[i] < edge ? c[i] != 0.0 : c[i] != u[i];
  }
  return {bad == 0, fmt("%zu of %zu points differ (clamped == unclamped for x >= -2^t, 0 below)", bad, n)};
}

Outcome exp_t0() {
  const auto xs = grid(-3, 3, 601);
  const auto y = run_exp(0, 1, xs);
  std::size_t bad = 0;
  double worst = 0, at = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double want = 1 + std::max(0.0, xs[i]);
    if (y[i] != want) {
      ++bad;
      if (std::abs(y[i] - want) > worst) worst = std::abs(y[i] - want), at = xs[i];
    }
  }
  return {bad == 0, fmt("t=0 clamped vs 1+ReLU(x): %zu of %zu points differ, worst |diff| %.3g at x=%.3g", bad, xs.size(),
                        worst, at)};
}

Outcome exp_accuracy() {
  const auto xs = grid(-10, 2, 1201);
  const auto y = run_exp(8, 0, xs);
  double worst = 0, at = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double rel = std::abs(y[i] - std::exp(xs[i])) / std::exp(xs[i]);
    if (rel > worst) worst = rel, at = xs[i];
  }
  return {worst <= 0.01, fmt("t=8 max pointwise relative error on [-10, 2] is %.4f%% at x=%.2f (limit 1%%)", 100 * worst, at)};
}

Outcome exp_structure() {
  std::size_t bad = 0;
  for (int t = 0; t <= kExpMaxT; ++t)
    for (int clamp : {0, 1}) {
      const auto low = lower_both(exp_graph(4, t, clamp));
      for (const auto& p : low.programs) {
        std::size_t mul = 0, ltz = 0;
        for (const auto& i : p.instrs) {
          mul += i.op == Opcode::MulMPC;
          ltz += i.op == Opcode::LtzMPC;
        }
        bad += mul != static_cast<std::size_t>(t + clamp) || ltz != static_cast<std::size_t>(clamp);
      }
    }
  return {bad == 0, fmt("%zu party programs deviate from t mul_MPC + clamp(ltz + mul_MPC), t in 0..%d", bad, kExpMaxT)};
}

Outcome lowering_soundness() {
  std::size_t typed = 0, counted = 0, accurate = 0;
  double worst = 0;
  fixtures::RandomGraphOptions opt;
  opt.max_nodes = 12;
  opt.value_range = 4.0;
  for (std::uint64_t seed = 6000; seed < 6050; ++seed) {
    const auto rc = fixtures::random_supported_case(seed, opt);
    const Graph post = rewrite_fixpoint(rc.graph, builtin_passes()).graph;
    const auto low = lower_both(post);
    typed += typecheck_lowered(low.programs).empty();
    const auto res = execute(low.programs, rc.inputs);
    counted += counters_match(static_cost(low.programs), res.measured);
    const auto plain = interpret(post, rc.inputs);
    double dev = 0;
    for (std::size_t k = 0; k < plain.size(); ++k)
      for (std::size_t i = 0; i < plain[k].size(); ++i) dev = std::max(dev, std::abs(plain[k][i] - res.outputs[k][i]));
    accurate += dev <= std::ldexp(1.0, -8);
    worst = std::max(worst, dev);
  }
  return {typed == 50 && counted == 50 && accurate == 50,
          fmt("50 graphs: typecheck %zu, byte-exact counters %zu, within 2^-8 %zu (worst %.3g)", typed, counted, accurate,
              worst)};
}

Outcome typing_rules() {
  std::vector<std::string> bad;
  // Random graphs: structural rules over every lowered instruction.
  for (std::uint64_t seed = 7000; seed < 7050; ++seed) {
    const auto rc = fixtures::random_supported_case(seed);
    const auto low = lower_both(rewrite_fixpoint(rc.graph, builtin_passes()).graph);
    for (int p = 0; p < 2; ++p) {
      const auto& is = low.programs[static_cast<std::size_t>(p)].instrs;
      std::map<int, std::int64_t> reg_scale;
      for (const auto& i : is) reg_scale[i.out] = i.type.scale;
      for (std::size_t k = 0; k < is.size(); ++k) {
        if (is[k].op == Opcode::AddPublic && p != 0) bad.push_back("public addend at party 1");
        if (is[k].op == Opcode::LtzMPC && is[k].type.scale != 1) bad.push_back("ltz scale");
        if (is[k].op == Opcode::MulMPC) {
          const bool next_trunc = k + 1 < is.size() && is[k + 1].op == Opcode::Trunc && is[k + 1].in == std::vector<int>{is[k].out};
          if (!next_trunc) {
            bad.push_back("mul_MPC without trunc");
            continue;
          }
          const std::int64_t want = std::min(reg_scale.at(is[k].in[0]), reg_scale.at(is[k].in[1]));
          if (is[k + 1].scale_from != want || is[k].type.scale != reg_scale.at(is[k].in[0]) * reg_scale.at(is[k].in[1]))
            bad.push_back("trunc not by s_min");
        }
      }
    }
  }
  // Integer secret plus 1.5: encoding at scale 1 would give 2.
  Graph g;
  GraphBuilder b(g);
  b.output(b.add_scalar(b.input("x", {1}, DType::i64()), 1.5));
  g = run_frontend(g, {{"x", OwnerSet::single(0)}});
  const auto low = lower_both(g);
  for (const auto& i : low.programs[0].instrs)
    if (i.op == Opcode::EncodePublic && i.scale_to != 65536) bad.push_back("encode at s instead of max(s, s_d)");
  const double y = execute(low.programs, {{"x", DTensor({1}, 3.0)}}).outputs[0][0];
  if (std::abs(y - 4.5) > std::ldexp(1.0, -16)) bad.push_back(fmt("3 + 1.5 gave %.8f", y));
  return {bad.empty(), bad.empty() ? "public addends at party 0, mul_MPC+trunc(s_min), ltz scale 1, 3+1.5=4.5"
                                   : fmt("%zu violations, first: %s", bad.size(), bad[0].c_str())};
}

// The transformer fixture's full 256-sample tuning set.
struct TransformerSetup {
  fixtures::ModelFixture f = fixtures::transformer_fixture(256);
  Graph g = run_frontend(f.graph, f.annotation);
  Evaluator ev{g, builtin_passes(), f.dataset, f.loss};
};

Outcome tuner_threshold_zero() {
  const auto t0 = std::chrono::steady_clock::now();
  TransformerSetup s;
  const auto sites = s.ev.sites({});
  const auto max = maximal_knobs(sites);
  const double base = s.ev(max).quality;
  TunerConfig cfg;
  cfg.threshold = 0;
  cfg.loss = s.f.loss;
  for (const auto& tk : detail::tunable_knobs(sites, {})) {
    const KnobKey key{tk.site, tk.spec.name};
    const auto next = tk.spec.below(max.at(key));
    if (!next) continue;
    auto k = max;
    k[key] = *next;
    if (s.ev(k).quality > base) cfg.only.insert(key);
  }
  const auto r = tune(s.ev, cfg);
  const bool ok = !cfg.only.empty() && r.knobs == max;
  return {ok, fmt("%zu of %zu knobs strictly hurt when decremented; threshold 0 returns %s knobs (%.1f s)", cfg.only.size(),
                  max.size(), r.knobs == max ? "maximal" : "non-maximal", seconds_since(t0))};
}

TuneResult transformer_tune(double* secs) {
  const auto t0 = std::chrono::steady_clock::now();
  TransformerSetup s;
  TunerConfig cfg;
  cfg.loss = s.f.loss;
  cfg.threshold = s.f.threshold;
  auto r = tune(s.ev, cfg);
  *secs = seconds_since(t0);
  return r;
}

Outcome tuner_feasible() {
  double secs = 0;
  const auto r = transformer_tune(&secs);
  const double delta = r.final_quality - r.baseline_quality;
  const double threshold = fixtures::transformer_fixture(1).threshold;
  return {delta <= threshold && secs <= 600,
          fmt("loss delta %.6f <= threshold %.6f, tune took %.1f s (limit 600 s)", delta, threshold, secs)};
}

Outcome tuner_cost() {
  double secs = 0;
  const auto r = transformer_tune(&secs);
  std::size_t accepted = 0;
  for (const auto& h : r.history) accepted += h.accepted;
  const bool ok = accepted == 0 || r.cost_after < r.cost_before;
  return {ok, fmt("%zu decrements accepted, bytes %llu -> %llu", accepted, static_cast<unsigned long long>(r.cost_before),
                  static_cast<unsigned long long>(r.cost_after))};
}

Outcome tuner_per_site() {
  const auto f = fixtures::two_softmax_fixture();
  TunerConfig cfg;
  cfg.loss = f.loss;
  cfg.threshold = f.threshold;
  const auto r = tune(run_frontend(f.graph, f.annotation), builtin_passes(), f.dataset, cfg);
  const int a = r.knobs.at({"softmax/2.3", "t"}), b = r.knobs.at({"softmax/3.3", "t"});
  return {a != b, fmt("exp t at the narrow-range softmax %d, at the wide-range softmax %d", a, b)};
}

Outcome max_kernel_check() {
  const Ring R;
  Rng rng(909);
  std::uniform_int_distribution<std::int64_t> d(-(std::int64_t{1} << 40), std::int64_t{1} << 40);
  std::size_t bad = 0, structure = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Channel ch;
    Dealer dl(R, static_cast<std::uint64_t>(trial));
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
    structure += st.comparisons != 7 || st.depth != 3 || calls != 7;
    bad += R.to_signed(out[0]) != *std::max_element(v.begin(), v.end());
  }
  return {bad == 0 && structure == 0,
          fmt("1000 vectors of 8: %zu wrong maxima, %zu runs not 7 ltz at depth 3", bad, structure)};
}

Outcome hummingbird() {
  const auto f = fixtures::mlp_fixture();
  const Graph post = rewrite_fixpoint(run_frontend(f.graph, f.annotation), builtin_passes()).graph;
  const auto ranges = record_ranges(post, f.dataset.samples, 2.0);
  bool fits = true;
  for (const auto& [site, r] : ranges) fits = fits && r.window < kStaticWindow;
  const auto base = lower_both(post).programs;
  const auto rec = apply_windows(base, ranges);
  const auto stat = apply_windows(base, {});
  auto ltz_bytes = [](const CostReport& c) {
    return c.categories.at("comparison").bytes[0] + c.categories.at("comparison").bytes[1] + c.categories.at("max").bytes[0] +
           c.categories.at("max").bytes[1];
  };
  const auto br = ltz_bytes(static_cost(rec)), bs = ltz_bytes(static_cost(stat));
  ExecOptions opt;
  opt.check_ltz = true;
  std::size_t checked = 0, errors = 0;
  for (const auto& s : f.dataset.samples) {
    const auto r = execute(rec, s, opt);
    checked += r.ltz_checked;
    errors += r.ltz_errors;
  }
  const bool ok = errors == 0 && checked > 0 && fits && br < bs;
  return {ok, fmt("%zu sites, %zu comparisons checked, %zu errors; comparison bytes %zu recorded vs %zu static", ranges.size(),
                  checked, errors, static_cast<std::size_t>(br), static_cast<std::size_t>(bs))};
}

Outcome determinism() {
  const auto cfg = load_config(kFixtures / "mlp" / "config.json");
  const auto inputs = load_inputs(cfg.inputs.value());
  const fs::path root = fs::temp_directory_path() / "mpcc_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  for (const char* d : {"a", "b"}) {
    cmd_compile(cfg, root / d, sink);
    cmd_run(cfg, inputs, root / d, true, sink);
    cmd_report(root / d, sink);
  }
  std::size_t files = 0, differ = 0;
  std::string first;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / e.path().filename();
    if (!fs::exists(other) || read_text(e.path()) != read_text(other)) {
      ++differ;
      if (first.empty()) first = e.path().filename().string();
    }
  }
  const bool has_transcript = fs::exists(root / "a" / "transcript.json");
  return {differ == 0 && has_transcript && files > 8,
          fmt("%zu artifacts compared, %zu differ%s%s", files, differ, first.empty() ? "" : ", first: ", first.c_str())};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> c = {
      {"1", share_algebra},     {"2", beaver},           {"3", comparison},         {"4", truncation},
      {"5a", exp_diverges},     {"5b", exp_clamp},       {"5c", exp_t0},            {"5d", exp_accuracy},
      {"5e", exp_structure},    {"6", lowering_soundness}, {"7", typing_rules},     {"8a", tuner_threshold_zero},
      {"8b", tuner_feasible},   {"8c", tuner_cost},      {"8d", tuner_per_site},    {"9", max_kernel_check},
      {"10", hummingbird},      {"11", determinism}};
  return c;
}

bool run_one(const std::string& id, const std::function<Outcome()>& f) {
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str());
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion|all>\n");
    return 1;
  }
  const std::string want = argv[1];
  bool ok = true, found = false;
  for (const auto& [id, f] : criteria()) {
    if (want != "all" && want != id) continue;
    found = true;
    ok = run_one(id, f) && ok;
  }
  if (!found) {
    std::fprintf(stderr, "unknown criterion '%s'\n", want.c_str());
    return 1;
  }
  return ok ? 0 : exit_code_for(Stage::Acceptance);
}
