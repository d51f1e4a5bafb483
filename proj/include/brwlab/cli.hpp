#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "brwlab/models.hpp"

namespace brwlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Raised for bad flags, bad spec files and missing inputs (exit status 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::optional<std::string> model;  // zoo name
  nlohmann::json parameters = nlohmann::json::object();
  std::optional<std::string> spec_path;
  std::vector<double> lambdas;
  std::uint64_t trials = 2000;
  double horizon = 100.0;
  std::uint64_t cap = 100000;
  std::uint64_t seed = 1;
  std::optional<std::size_t> depth;
  std::optional<double> epsilon;
  std::optional<std::string> out;
  unsigned threads = 0;
};

/// "a,b,c" or "lo:hi:step" (inclusive, step > 0).
std::vector<double> parse_lambda_grid(const std::string& text);

/// Model-spec JSON: {"constructor": name, "parameters": {...}, "truncation": {...}}.
/// Errors carry the line and field.
BrwModel load_model_spec(const std::string& text);

/// Builds the model named by the config (zoo name or spec file).
BrwModel resolve_model(const RunConfig& config);

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_zoo(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace brwlab
