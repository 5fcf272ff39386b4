#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mpcc/approx/pass.hpp"
#include "mpcc/backend/cost.hpp"
#include "mpcc/backend/lower.hpp"
#include "mpcc/tuner/dataset.hpp"
#include "mpcc/tuner/loss.hpp"

namespace mpcc {

enum class Strategy { Greedy, HillClimbing };

inline const char* strategy_name(Strategy s) { return s == Strategy::Greedy ? "greedy-linear" : "hill-climbing"; }

inline Strategy parse_strategy(const std::string& s) {
  if (s == "greedy" || s == "greedy-linear") return Strategy::Greedy;
  if (s == "hill-climbing" || s == "hill") return Strategy::HillClimbing;
  throw ConfigError("unknown tuner strategy '" + s + "' (expected greedy-linear or hill-climbing)");
}

using KnobKey = std::pair<std::string, std::string>;  // (site, knob)

struct TunerConfig {
  Strategy strategy = Strategy::Greedy;
  LossKind loss = LossKind::CrossEntropy;  // loss moves in finer steps than accuracy
  double threshold = 0.0;                  // absolute loss delta over the maximal-knob baseline
  std::size_t max_steps = 0;               // hill-climbing; 0 means 10 x knobs
  std::uint64_t seed = 1;
  std::set<KnobKey> only;                  // restricts the search; empty means every knob
  KnobAssignment start;                    // overrides for knobs outside `only`
};

struct Evaluation {
  double quality = 0;
  std::uint64_t cost = 0;
};

struct HistoryEntry {
  std::string site;
  std::string knob;
  int value = 0;
  double quality = 0;
  double delta = 0;
  std::uint64_t cost = 0;
  bool accepted = false;
};

struct TuneResult {
  KnobAssignment knobs;
  Graph graph;
  std::vector<SiteRecord> sites;
  double baseline_quality = 0;
  double final_quality = 0;
  std::uint64_t cost_before = 0;
  std::uint64_t cost_after = 0;
  std::vector<HistoryEntry> history;
  std::size_t steps = 0;
  std::optional<std::string> warning;
};

// Plaintext evaluation of knob assignments; results are memoized since the
// search revisits assignments after rollbacks.
class Evaluator {
 public:
  Evaluator(Graph graph, std::vector<PassDescriptor> passes, Dataset data, LossKind loss, LowerConfig lower = {})
      : graph_(std::move(graph)), passes_(std::move(passes)), data_(std::move(data)), loss_(loss), lower_(lower) {
    if (!fully_owned(graph_)) throw Error(Stage::Tuner, "graph must be owner-annotated before tuning");
    check_dataset(graph_, data_, Stage::Tuner);
    if (graph_.outputs.empty()) throw Error(Stage::Tuner, "graph has no outputs to score");
    if (data_.references.empty()) {
      // No labels: score against the exact model.
      for (const auto& s : data_.samples) data_.references.push_back(interpret(graph_, s).front());
    }
  }

  Evaluation operator()(const KnobAssignment& knobs) {
    if (auto it = cache_.find(knobs); it != cache_.end()) return it->second;
    const RewriteResult rw = rewrite_fixpoint(graph_, passes_, knobs);
    std::vector<DTensor> outs;
    outs.reserve(data_.size());
    for (const auto& s : data_.samples) outs.push_back(interpret(rw.graph, s).front());
    Evaluation e{mean_loss(loss_, outs, data_.references), static_cost(lower_both(rw.graph, lower_).programs).total_bytes()};
    cache_.emplace(knobs, e);
    ++evaluations_;
    return e;
  }

  std::vector<SiteRecord> sites(const KnobAssignment& knobs) const { return rewrite_fixpoint(graph_, passes_, knobs).sites; }
  const Graph& graph() const { return graph_; }
  const std::vector<PassDescriptor>& passes() const { return passes_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  Graph graph_;
  std::vector<PassDescriptor> passes_;
  Dataset data_;
  LossKind loss_;
  LowerConfig lower_;
  std::map<KnobAssignment, Evaluation> cache_;
  std::size_t evaluations_ = 0;
};

inline Evaluation evaluate_candidate(const Graph& g, const std::vector<PassDescriptor>& passes, const KnobAssignment& knobs,
                                     const Dataset& data, LossKind loss, const LowerConfig& lower = {}) {
  Evaluator ev(g, passes, data, loss, lower);
  return ev(knobs);
}

namespace detail {

struct TunableKnob {
  std::string site;
  KnobSpec spec;
};

// Visit order: sites in graph order; within a site, value knobs before flags.
inline std::vector<TunableKnob> tunable_knobs(const std::vector<SiteRecord>& sites, const std::set<KnobKey>& only) {
  std::vector<TunableKnob> out;
  for (const auto& s : sites) {
    for (bool flags : {false, true})
      for (const auto& k : s.knobs)
        if (k.flag == flags && (only.empty() || only.count({s.site, k.name}))) out.push_back({s.site, k});
  }
  return out;
}

inline void greedy(Evaluator& ev, const std::vector<TunableKnob>& knobs, double threshold, double baseline,
                   TuneResult& res) {
  for (const auto& k : knobs) {
    const KnobKey key{k.site, k.spec.name};
    while (auto next = k.spec.below(res.knobs.at(key))) {
      KnobAssignment cand = res.knobs;
      cand[key] = *next;
      const Evaluation e = ev(cand);
      const double delta = e.quality - baseline;
      const bool ok = delta <= threshold;
      res.history.push_back({k.site, k.spec.name, *next, e.quality, delta, e.cost, ok});
      ++res.steps;
      if (!ok) break;  // roll back and move on to the next knob
      res.knobs = std::move(cand);
    }
  }
}

inline void hill_climb(Evaluator& ev, const std::vector<TunableKnob>& knobs, double threshold, double baseline,
                       std::size_t max_steps, TuneResult& res) {
  Evaluation cur = ev(res.knobs);
  for (;;) {
    std::optional<std::size_t> best;
    double best_ratio = -1;
    Evaluation best_eval;
    int best_value = 0;
    for (std::size_t i = 0; i < knobs.size(); ++i) {
      const KnobKey key{knobs[i].site, knobs[i].spec.name};
      const auto next = knobs[i].spec.below(res.knobs.at(key));
      if (!next) continue;
      KnobAssignment cand = res.knobs;
      cand[key] = *next;
      const Evaluation e = ev(cand);
      if (e.quality - baseline > threshold || e.cost >= cur.cost) continue;
      const double ratio = static_cast<double>(cur.cost - e.cost) / std::max(e.quality - cur.quality, 1e-12);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = i;
        best_eval = e;
        best_value = *next;
      }
    }
    if (!best) return;
    if (res.steps >= max_steps) {
      res.warning = "max_steps (" + std::to_string(max_steps) + ") exhausted; returning best-so-far assignment";
      return;
    }
    const auto& k = knobs[*best];
    res.knobs[{k.site, k.spec.name}] = best_value;
    res.history.push_back({k.site, k.spec.name, best_value, best_eval.quality, best_eval.quality - baseline,
                           best_eval.cost, true});
    ++res.steps;
    cur = best_eval;
  }
}

}  // namespace detail

inline TuneResult tune(Evaluator& ev, const TunerConfig& cfg) {
  if (!(cfg.threshold >= 0)) throw ConfigError("tuner threshold must be >= 0");
  const std::vector<SiteRecord> sites = ev.sites({});
  TuneResult res;
  res.knobs = maximal_knobs(sites);
  Evaluation base;
  try {
    base = ev(res.knobs);
  } catch (const Error& e) {
    throw Error(Stage::Tuner, std::string("baseline evaluation failed: ") + e.what());
  }
  if (!std::isfinite(base.quality)) throw Error(Stage::Tuner, "baseline evaluation produced a non-finite loss");
  res.baseline_quality = base.quality;
  res.cost_before = base.cost;

  for (const auto& [key, v] : cfg.start) {
    if (!res.knobs.count(key)) throw ConfigError("knob " + key.second + " is not tunable at site " + key.first);
    res.knobs[key] = v;
  }
  const auto knobs = detail::tunable_knobs(sites, cfg.only);
  if (cfg.strategy == Strategy::Greedy) {
    detail::greedy(ev, knobs, cfg.threshold, base.quality, res);
  } else {
    const std::size_t steps = cfg.max_steps ? cfg.max_steps : 10 * std::max<std::size_t>(knobs.size(), 1);
    detail::hill_climb(ev, knobs, cfg.threshold, base.quality, steps, res);
  }
  const Evaluation fin = ev(res.knobs);
  res.final_quality = fin.quality;
  res.cost_after = fin.cost;
  const RewriteResult rw = rewrite_fixpoint(ev.graph(), ev.passes(), res.knobs);
  res.graph = rw.graph;
  res.sites = rw.sites;
  return res;
}

inline TuneResult tune(const Graph& g, const std::vector<PassDescriptor>& passes, const Dataset& data,
                       const TunerConfig& cfg, const LowerConfig& lower = {}) {
  Evaluator ev(g, passes, data, cfg.loss, lower);
  return tune(ev, cfg);
}

// ---------------------------------------------------------------------------
// Persistence: {"site": {"knob": value}}.

inline nlohmann::json knobs_to_json(const KnobAssignment& ka) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, v] : ka) j[key.first][key.second] = v;
  return j;
}

inline KnobAssignment knobs_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("knob file must be an object of sites");
  KnobAssignment ka;
  for (const auto& [site, ks] : j.items()) {
    if (!ks.is_object()) throw ConfigError("knobs for site " + site + " must be an object");
    for (const auto& [name, v] : ks.items()) {
      if (!v.is_number_integer()) throw ConfigError("knob " + site + "/" + name + " must be an integer");
      ka[{site, name}] = v.get<int>();
    }
  }
  return ka;
}

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json tune_report_json(const TuneResult& r, const TunerConfig& cfg) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"site", h.site}, {"knob", h.knob}, {"value", h.value}, {"quality", detail::finite_or_null(h.quality)},
                    {"delta", detail::finite_or_null(h.delta)}, {"cost", h.cost}, {"accepted", h.accepted}});
  }
  return {{"strategy", strategy_name(cfg.strategy)},
          {"loss", loss_name(cfg.loss)},
          {"threshold", cfg.threshold},
          {"seed", cfg.seed},
          {"baseline_quality", r.baseline_quality},
          {"final_quality", detail::finite_or_null(r.final_quality)},
          {"delta", detail::finite_or_null(r.final_quality - r.baseline_quality)},
          {"cost_before", r.cost_before},
          {"cost_after", r.cost_after},
          {"knobs", knobs_to_json(r.knobs)},
          {"steps", r.steps},
          {"history", hist},
          {"warning", r.warning ? nlohmann::json(*r.warning) : nlohmann::json(nullptr)}};
}

}  // namespace mpcc
