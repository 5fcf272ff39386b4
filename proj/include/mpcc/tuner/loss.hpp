#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mpcc/core/error.hpp"
#include "mpcc/core/tensor.hpp"

namespace mpcc {

enum class LossKind { CrossEntropy, Mse, ErrorRate };

inline const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::Mse: return "mse";
    case LossKind::ErrorRate: return "error_rate";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  if (s == "mse") return LossKind::Mse;
  if (s == "error_rate") return LossKind::ErrorRate;
  throw ConfigError("unknown loss '" + s + "' (expected cross_entropy, mse or error_rate)");
}

namespace detail {

inline std::size_t argmax(const DTensor& t) {
  return static_cast<std::size_t>(std::max_element(t.data.begin(), t.data.end()) - t.data.begin());
}

// A single-element reference is a class index; a wider one is a target whose
// argmax is the class.
inline std::size_t class_of(const DTensor& ref, std::size_t classes) {
  const std::size_t c = ref.size() == 1 ? static_cast<std::size_t>(std::llround(ref[0])) : argmax(ref);
  if (c >= classes) throw Error(Stage::Tuner, "label " + std::to_string(c) + " out of range for " + std::to_string(classes) + " classes");
  return c;
}

}  // namespace detail

// Loss of one sample; non-finite outputs count as infinitely bad.
inline double sample_loss(LossKind k, const DTensor& out, const DTensor& ref) {
  const double inf = std::numeric_limits<double>::infinity();
  for (double v : out.data)
    if (!std::isfinite(v)) return k == LossKind::ErrorRate ? 1.0 : inf;
  switch (k) {
    case LossKind::CrossEntropy: {
      const double p = out[detail::class_of(ref, out.size())];
      return -std::log(std::max(p, 1e-12));
    }
    case LossKind::Mse: {
      if (ref.size() != out.size()) throw Error(Stage::Tuner, "mse reference has " + std::to_string(ref.size()) +
                                                                  " values for an output of " + std::to_string(out.size()));
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - ref[i]) * (out[i] - ref[i]);
      return s / static_cast<double>(out.size());
    }
    case LossKind::ErrorRate: return detail::argmax(out) == detail::class_of(ref, out.size()) ? 0.0 : 1.0;
  }
  return inf;
}

inline double mean_loss(LossKind k, const std::vector<DTensor>& outs, const std::vector<DTensor>& refs) {
  if (outs.size() != refs.size() || outs.empty()) throw Error(Stage::Tuner, "loss needs one reference per output");
  double s = 0;
  for (std::size_t i = 0; i < outs.size(); ++i) s += sample_loss(k, outs[i], refs[i]);
  const double m = s / static_cast<double>(outs.size());
  return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

}  // namespace mpcc
