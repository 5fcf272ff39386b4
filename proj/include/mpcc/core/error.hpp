#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mpcc {

// Pipeline stage that raised an error. The CLI maps stages onto exit codes.
enum class Stage { Config, Parse, GraphIR, Frontend, Approx, Hummingbird, Backend, Tuner, Runtime, Acceptance };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Config: return "config";
    case Stage::Parse: return "parse";
    case Stage::GraphIR: return "graph-ir";
    case Stage::Frontend: return "frontend";
    case Stage::Approx: return "approx";
    case Stage::Hummingbird: return "hummingbird";
    case Stage::Backend: return "backend";
    case Stage::Tuner: return "tuner";
    case Stage::Runtime: return "mpc-runtime";
    case Stage::Acceptance: return "acceptance";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, const std::string& msg, std::string site = {})
      : std::runtime_error(format(stage, msg, site)), stage_(stage), site_(std::move(site)), detail_(msg) {}

  Stage stage() const { return stage_; }
  const std::string& site() const { return site_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string format(Stage stage, const std::string& msg, const std::string& site) {
    std::string out = std::string("[") + stage_name(stage) + "] " + msg;
    if (!site.empty() && msg.find(site) == std::string::npos) out += " (site " + site + ")";
    return out;
  }

  Stage stage_;
  std::string site_;
  std::string detail_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(Stage::Config, msg) {}
};

struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error(Stage::Parse, msg + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line(line),
        column(column) {}
  std::size_t line, column;
};

struct ProtocolError : Error {
  explicit ProtocolError(const std::string& msg) : Error(Stage::Runtime, msg) {}
};

}  // namespace mpcc
