#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "bilo/seed.hpp"

namespace bilo {

enum class ParamKind { integer, real, categorical };

// Symbols usable as a data-dependent upper bound. They are resolved against
// the task's instance counts when a portfolio is bound.
enum class BoundSymbol { n_source, n_target, max_source_target, source_tenth };

std::string_view to_string(ParamKind kind);
std::string_view to_string(BoundSymbol symbol);
std::optional<BoundSymbol> parse_bound_symbol(std::string_view text);

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> choices;
  std::optional<BoundSymbol> upper_symbol;

  static ParamSpec integer(std::string name, std::int64_t lower, std::int64_t upper);
  static ParamSpec real(std::string name, double lower, double upper);
  static ParamSpec categorical(std::string name, std::vector<std::string> choices);

  bool resolved() const { return !upper_symbol.has_value(); }
  bool numeric() const { return kind != ParamKind::categorical; }
  // Reals spanning at least three orders of magnitude are handled in log space.
  bool log_scale() const;

  // Internal continuous coordinate shared by the samplers and the TPE
  // surrogate. Integers occupy [lower - 0.5, upper + 0.5] and round back.
  std::pair<double, double> internal_range() const;
  double to_internal(double value) const;
  double from_internal(double u) const;
};

using ParamValue = std::variant<std::int64_t, double, std::string>;

std::string format_value(const ParamValue& value);

struct Configuration {
  std::map<std::string, ParamValue> values;

  bool contains(const std::string& name) const { return values.count(name) != 0; }
  const ParamValue& at(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  double get_real(const std::string& name) const;
  const std::string& get_choice(const std::string& name) const;

  bool operator==(const Configuration&) const = default;
};

class ConfigSpace {
 public:
  ConfigSpace() = default;
  explicit ConfigSpace(std::vector<ParamSpec> params);

  // Throws ConfigError when the name is taken or the spec is malformed.
  void add(ParamSpec spec);

  const std::vector<ParamSpec>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  const ParamSpec* find(std::string_view name) const;
  bool resolved() const;

 private:
  std::vector<ParamSpec> params_;
};

struct Combination {
  std::string transfer_id;
  std::string classifier_id;

  std::string label() const { return transfer_id + "-" + classifier_id; }
  auto operator<=>(const Combination&) const = default;
};

struct TransferSpec {
  std::string id;
  ConfigSpace space;
  bool needs_target_data = false;
};

struct ClassifierSpec {
  std::string id;
  ConfigSpace space;
};

class Portfolio {
 public:
  Portfolio() = default;
  Portfolio(std::vector<TransferSpec> transfers, std::vector<ClassifierSpec> classifiers);

  const std::vector<TransferSpec>& transfers() const { return transfers_; }
  const std::vector<ClassifierSpec>& classifiers() const { return classifiers_; }
  std::size_t size() const { return transfers_.size() * classifiers_.size(); }
  bool empty() const { return size() == 0; }

  const TransferSpec& transfer(std::string_view id) const;
  const ClassifierSpec& classifier(std::string_view id) const;
  bool contains(const Combination& x) const;

  // Row-major index: transfer-major, classifier-minor.
  std::size_t index_of(const Combination& x) const;
  Combination combination_at(std::size_t index) const;
  std::vector<Combination> all_combinations() const;

  // The lower-level space of a combination. Parameter names are prefixed
  // with the owning learner id ("KNN.n_neigh").
  ConfigSpace joint_space(const Combination& x) const;
  bool resolved() const;

 private:
  std::vector<TransferSpec> transfers_;
  std::vector<ClassifierSpec> classifiers_;
};

std::string joint_name(std::string_view learner_id, std::string_view param);

// Extracts the parameters owned by `learner_id` from a joint configuration,
// stripping the prefix.
Configuration learner_part(const Configuration& joint, std::string_view learner_id);

// True iff every parameter of the space is present, of the right type, in
// range, and no unknown names are present. Unresolved bounds never validate.
bool validate_config(const ConfigSpace& space, const Configuration& config);

// Uniform draw. Throws BindingError on unresolved bounds.
Configuration sample_uniform(const ConfigSpace& space, Rng& rng);

// Latin-hypercube design of n points: each numeric dimension is cut into n
// equal-probability bins in its internal coordinate with exactly one point
// per bin; categoricals are cycled round-robin in a shuffled order.
std::vector<Configuration> space_filling_sample(const ConfigSpace& space, std::size_t n, Rng& rng);

// Hamming-1 neighbors in canonical order: transfer swaps in portfolio order,
// then classifier swaps in portfolio order.
std::vector<Combination> neighborhood(const Portfolio& portfolio, const Combination& x);

struct DataSizes {
  std::size_t n_source = 0;
  std::size_t n_target = 0;
};

double resolve_symbol(BoundSymbol symbol, const DataSizes& sizes);

// Replaces every data-dependent bound with its value. A resolved upper bound
// below the lower bound is raised to the lower bound and reported in `notes`.
ConfigSpace resolve_bounds(const ConfigSpace& space, const DataSizes& sizes,
                           std::vector<std::string>* notes = nullptr,
                           std::string_view owner = {});
Portfolio resolve_bounds(const Portfolio& portfolio, const DataSizes& sizes,
                         std::vector<std::string>* notes = nullptr);

}  // namespace bilo
