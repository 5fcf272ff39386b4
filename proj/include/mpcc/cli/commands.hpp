#pragma once

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mpcc/backend/typecheck.hpp"
#include "mpcc/cli/config.hpp"
#include "mpcc/ir/serialize.hpp"
#include "mpcc/runtime/engine.hpp"

namespace mpcc {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitCompile = 2, kExitProtocol = 3, kExitMismatch = 4 };

inline int exit_code_for(Stage s) {
  switch (s) {
    case Stage::Config:
    case Stage::Parse: return kExitConfig;
    case Stage::Runtime: return kExitProtocol;
    case Stage::Acceptance: return kExitMismatch;
    default: return kExitCompile;
  }
}

struct Compiled {
  Graph graph;  // after the frontend
  Annotation annotation;
  RewriteResult rewrite;
  KnobAssignment knobs;
  LowerConfig lower;
  Lowered lowered;  // programs carry the final comparison windows
  HbMode mode = HbMode::Off;
  RangeMap ranges;
  std::vector<std::string> warnings;
  CostReport cost;
};

inline Dataset project_dataset(const ProjectConfig& c, bool calibration) {
  const auto& p = calibration && c.calibration ? c.calibration : c.tuner.dataset;
  if (!p) throw ConfigError(calibration ? "recorded windows need a calibration dataset" : "tuning needs tuner.dataset");
  return load_dataset(*p);
}

// Frontend, approximation (configured knobs), optional windows, lowering, typecheck.
inline Compiled compile_project(const ProjectConfig& c) {
  check_config(c);
  Compiled out;
  out.annotation = parse_annotation(read_json(c.annotation));
  out.graph = run_frontend(deserialize(read_text(c.graph)), out.annotation);
  const auto passes = build_passes(c);
  if (c.knobs) out.knobs = knobs_from_json(read_json(*c.knobs));
  out.rewrite = rewrite_fixpoint(out.graph, passes, out.knobs);
  out.lower = lower_config(c, out.graph, out.annotation);
  out.lowered = lower_both(out.rewrite.graph, out.lower);
  out.mode = parse_hb_mode(c.hummingbird);
  if (out.mode == HbMode::Recorded) {
    const Dataset cal = project_dataset(c, true);
    check_dataset(out.rewrite.graph, cal, Stage::Hummingbird);
    out.ranges = record_ranges(out.rewrite.graph, cal.samples, c.margin, out.lower);
    out.warnings = window_warnings(out.ranges);
  }
  out.lowered.programs = apply_mode(std::move(out.lowered.programs), out.mode, out.ranges);
  const auto violations = typecheck_lowered(out.lowered.programs);
  if (!violations.empty()) {
    std::string msg = "typecheck failed:";
    for (const auto& v : violations) msg += "\n  " + to_string(v);
    throw Error(Stage::Backend, msg);
  }
  out.cost = static_cost(out.lowered.programs);
  return out;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(1) + "\n"; }

inline void cmd_compile(const ProjectConfig& c, const fs::path& out_dir, std::ostream& log = std::cerr) {
  const Compiled r = compile_project(c);
  write_text(out_dir / "graph.approx.json", serialize(r.rewrite.graph));
  write_text(out_dir / "program0.json", dump(program_to_json(r.lowered.programs[0])));
  write_text(out_dir / "program1.json", dump(program_to_json(r.lowered.programs[1])));
  write_text(out_dir / "cost.json", dump(cost_to_json(r.cost)));
  write_text(out_dir / "ranges.json", dump(ranges_to_json(r.ranges)));
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : r.rewrite.sites) sites.push_back({{"site", s.site}, {"pass", s.pass}, {"knobs", s.values}});
  write_text(out_dir / "compile.json", dump({{"hummingbird", hb_mode_name(r.mode)},
                                             {"ring_width", r.lower.ring_width},
                                             {"scale", r.lower.scale},
                                             {"reveal_to", r.lower.reveal_to},
                                             {"sites", sites},
                                             {"warnings", r.warnings},
                                             {"typecheck", "ok"}}));
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
  log << "compiled: " << r.lowered.programs[0].instrs.size() << " instructions per party, " << r.cost.total_bytes()
      << " bytes, " << r.cost.rounds << " rounds\n";
}

inline TuneResult cmd_tune(const ProjectConfig& c, const fs::path& out_dir, std::ostream& log = std::cerr) {
  check_config(c);
  const Annotation ann = parse_annotation(read_json(c.annotation));
  const Graph g = run_frontend(deserialize(read_text(c.graph)), ann);
  TunerConfig tc;
  tc.strategy = parse_strategy(c.tuner.strategy);
  tc.loss = parse_loss(c.tuner.loss);
  tc.threshold = c.tuner.threshold;
  tc.max_steps = c.tuner.max_steps;
  tc.seed = c.tuner.seed;
  Evaluator ev(g, build_passes(c), project_dataset(c, false), tc.loss, lower_config(c, g, ann));
  const TuneResult r = tune(ev, tc);
  write_text(out_dir / "knobs.json", dump(knobs_to_json(r.knobs)));
  write_text(out_dir / "tuning_report.json", dump(tune_report_json(r, tc)));
  if (r.warning) log << "warning: " << *r.warning << "\n";
  log << "tuned: loss " << r.baseline_quality << " -> " << r.final_quality << ", bytes " << r.cost_before << " -> "
      << r.cost_after << "\n";
  return r;
}

// {"name": "file"} relative to the JSON file.
inline TensorMap load_inputs(const fs::path& file) {
  const auto j = read_json(file);
  if (!j.is_object()) throw ConfigError(file.string() + ": inputs must map names to tensor files");
  TensorMap m;
  for (const auto& [name, f] : j.items()) {
    const fs::path p = fs::path(f.get<std::string>());
    m[name] = read_tensor(p.is_absolute() ? p : file.parent_path() / p);
  }
  return m;
}

struct RunSummary {
  std::vector<DTensor> outputs;
  double max_abs_deviation = 0;
  bool counters_ok = false;
  ExecResult exec;
};

inline RunSummary cmd_run(const ProjectConfig& c, const TensorMap& inputs, const fs::path& out_dir, bool write_transcript = true,
                          std::ostream& log = std::cerr) {
  const Compiled comp = compile_project(c);
  ExecOptions opt;
  opt.seed = c.seed;
  opt.check_ltz = true;
  RunSummary s;
  s.exec = execute(comp.lowered.programs, inputs, opt);
  s.outputs = s.exec.outputs;
  const auto plain = interpret(comp.rewrite.graph, inputs);
  for (std::size_t k = 0; k < plain.size() && k < s.outputs.size(); ++k)
    for (std::size_t i = 0; i < plain[k].size(); ++i)
      s.max_abs_deviation = std::max(s.max_abs_deviation, std::abs(plain[k][i] - s.outputs[k][i]));
  s.counters_ok = counters_match(comp.cost, s.exec.measured);

  for (std::size_t k = 0; k < s.outputs.size(); ++k) write_csv(out_dir / ("output" + std::to_string(k) + ".csv"), s.outputs[k]);
  write_text(out_dir / "measured_cost.json", dump(cost_to_json(s.exec.measured)));
  if (write_transcript) write_text(out_dir / "transcript.json", dump(transcript_to_json(s.exec.transcript)));
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : s.outputs) outs.push_back({{"shape", o.shape}, {"values", o.data}});
  write_text(out_dir / "run.json", dump({{"outputs", outs},
                                         {"output_party", comp.lower.reveal_to},
                                         {"max_abs_deviation", s.max_abs_deviation},
                                         {"counters_match", s.counters_ok},
                                         {"comparisons_checked", s.exec.ltz_checked},
                                         {"comparison_errors", s.exec.ltz_errors},
                                         {"seed", c.seed}}));
  log << "run: " << s.exec.measured.total_bytes() << " bytes, " << s.exec.measured.rounds << " rounds, max |mpc - plain| = "
      << s.max_abs_deviation << "\n";
  if (!s.counters_ok) {
    throw Error(Stage::Acceptance, "measured communication differs from the static cost model (see cost.json vs measured_cost.json)");
  }
  return s;
}

struct BreakdownRow {
  std::string category;
  std::uint64_t bytes = 0;
  std::uint64_t rounds = 0;
  double bytes_pct = 0;
  double rounds_pct = 0;
};

// Per-category shares of operator bytes and rounds; categories without
// traffic and input/output movement are omitted.
inline std::vector<BreakdownRow> breakdown(const CostReport& r) {
  std::uint64_t tb = 0, tr = 0;
  for (const auto& [name, c] : r.categories) {
    if (!is_operator_category(name)) continue;
    tb += c.bytes[0] + c.bytes[1];
    tr += c.rounds;
  }
  std::vector<BreakdownRow> rows;
  for (const auto& name : cost_categories()) {
    if (!is_operator_category(name)) continue;
    auto it = r.categories.find(name);
    if (it == r.categories.end()) continue;
    const auto b = it->second.bytes[0] + it->second.bytes[1];
    if (b == 0 && it->second.rounds == 0) continue;
    rows.push_back({name, b, it->second.rounds, tb ? 100.0 * static_cast<double>(b) / static_cast<double>(tb) : 0.0,
                    tr ? 100.0 * static_cast<double>(it->second.rounds) / static_cast<double>(tr) : 0.0});
  }
  return rows;
}

inline std::string format_breakdown(const std::vector<BreakdownRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "category" << std::right << std::setw(12) << "bytes" << std::setw(9) << "bytes%"
     << std::setw(9) << "rounds" << std::setw(9) << "rounds%" << "\n";
  os << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.category << std::right << std::setw(12) << r.bytes << std::setw(9) << r.bytes_pct
       << std::setw(9) << r.rounds << std::setw(9) << r.rounds_pct << "\n";
  }
  return os.str();
}

// Reads measured_cost.json when a run happened, else the static cost.json.
inline std::vector<BreakdownRow> cmd_report(const fs::path& out_dir, std::ostream& os = std::cout) {
  const bool measured = fs::exists(out_dir / "measured_cost.json");
  const fs::path src = out_dir / (measured ? "measured_cost.json" : "cost.json");
  if (!fs::exists(src)) throw ConfigError("no cost report in " + out_dir.string() + " (run compile first)");
  CostReport r;
  try {
    r = cost_from_json(read_json(src));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(src.string() + ": " + e.what());
  }
  const auto rows = breakdown(r);
  os << format_breakdown(rows);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    j.push_back({{"category", row.category}, {"bytes", row.bytes}, {"bytes_pct", row.bytes_pct}, {"rounds", row.rounds},
                 {"rounds_pct", row.rounds_pct}});
  }
  const auto io = r.categories.count("io") ? r.categories.at("io") : CategoryCost{};
  os << "io (excluded): " << io.bytes[0] + io.bytes[1] << " bytes, " << io.rounds << " rounds\n";
  write_text(out_dir / "report.json", dump({{"source", measured ? "measured" : "static"},
                                            {"total_bytes", r.total_bytes()},
                                            {"io_bytes", io.bytes[0] + io.bytes[1]},
                                            {"rounds", r.rounds},
                                            {"breakdown", j}}));
  return rows;
}

}  // namespace mpcc
