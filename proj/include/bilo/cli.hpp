#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bilo/engine.hpp"

namespace bilo {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitBudget = 4,
};

struct RunConfig {
  std::string data_dir;
  std::optional<std::string> target;
  bool all = false;
  SearchMode mode = SearchMode::bilevel;
  double budget_seconds = 3600.0;
  std::optional<std::size_t> total_evaluations;
  std::optional<double> lower_seconds;
  std::optional<std::size_t> lower_evaluations;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> portfolio_path;
  std::string out_dir = "bilopt-out";
  double holdout_fraction = 0.10;
  bool drop_unsupported = false;
  std::optional<std::size_t> threads;
  TpeSettings tpe;
  std::optional<std::size_t> tabu_max_len;

  // Engine options implied by the mode and budget fields.
  CpdpOptions options() const;
  void validate() const;  // throws ConfigError
};

// `key = value` lines; `#` starts a comment. Throws ConfigError with the line
// number on malformed input or duplicate keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Applies recognized keys to `config`; unknown keys are rejected.
void apply_settings(RunConfig& config, const std::map<std::string, std::string>& values);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bilo
