// mpcc: compile | tune | run | report
#include <iostream>

#include "CLI11.hpp"
#include "mpcc/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace mpcc;
  CLI::App app{"Two-party MPC compiler for ML graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config, out_dir = "out", hummingbird, strategy, inputs, knobs;
  std::optional<std::uint64_t> seed;
  std::optional<int> ring_width;
  std::optional<std::int64_t> scale;
  std::optional<double> threshold;
  bool no_transcript = false;
  app.add_option("--config", config, "project config (JSON)");
  app.add_option("--out-dir", out_dir, "artifact directory");
  app.add_option("--hummingbird", hummingbird, "comparison windows: off, static or recorded");
  app.add_option("--seed", seed, "runtime seed");
  app.add_option("--ring-width", ring_width, "ring bit width N");
  app.add_option("--scale", scale, "default fixed-point scale");
  app.add_option("--threshold", threshold, "tuner loss-delta threshold");
  app.add_option("--strategy", strategy, "tuner strategy: greedy-linear or hill-climbing");
  app.add_option("--inputs", inputs, "run inputs (JSON name -> tensor file)");
  app.add_option("--knobs", knobs, "knob assignment (JSON) to compile with");
  app.add_flag("--no-transcript", no_transcript, "skip transcript.json on run");

  auto* compile = app.add_subcommand("compile", "lower to party programs and write the static cost");
  auto* tune = app.add_subcommand("tune", "search approximation knobs");
  auto* run = app.add_subcommand("run", "execute both parties and cross-check counters");
  auto* report = app.add_subcommand("report", "per-category communication breakdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const fs::path out = out_dir;
    if (report->parsed()) {
      cmd_report(out);
      return kExitOk;
    }
    if (config.empty()) throw ConfigError("--config is required");
    ProjectConfig cfg = load_config(config);
    if (!hummingbird.empty()) cfg.hummingbird = hummingbird;
    if (seed) cfg.seed = *seed;
    if (ring_width) cfg.ring_width = *ring_width;
    if (scale) cfg.scale = *scale;
    if (threshold) cfg.tuner.threshold = *threshold;
    if (!strategy.empty()) cfg.tuner.strategy = strategy;
    if (!knobs.empty()) {
      if (!fs::exists(knobs)) throw ConfigError("knobs file not found: " + knobs);
      cfg.knobs = knobs;
    }
    if (!inputs.empty()) {
      if (!fs::exists(inputs)) throw ConfigError("inputs file not found: " + inputs);
      cfg.inputs = inputs;
    }
    if (compile->parsed()) {
      cmd_compile(cfg, out);
    } else if (tune->parsed()) {
      cmd_tune(cfg, out);
    } else if (run->parsed()) {
      if (!cfg.inputs) throw ConfigError("run needs inputs (config 'inputs' or --inputs)");
      cmd_run(cfg, load_inputs(*cfg.inputs), out, !no_transcript);
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.stage());
  } catch (const std::exception& e) {
    std::cerr << "error: [config] " << e.what() << "\n";
    return kExitConfig;
  }
}
