#include "bilo/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "bilo/error.hpp"

namespace bilo {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::integer:
      return "int";
    case ParamKind::real:
      return "real";
    case ParamKind::categorical:
      return "cat";
  }
  return "?";
}

std::string_view to_string(BoundSymbol symbol) {
  switch (symbol) {
    case BoundSymbol::n_source:
      return "N_s";
    case BoundSymbol::n_target:
      return "N_t";
    case BoundSymbol::max_source_target:
      return "max(N_s,N_t)";
    case BoundSymbol::source_tenth:
      return "N_s/10";
  }
  return "?";
}

std::optional<BoundSymbol> parse_bound_symbol(std::string_view text) {
  if (text == "N_s") return BoundSymbol::n_source;
  if (text == "N_t") return BoundSymbol::n_target;
  if (text == "max(N_s,N_t)") return BoundSymbol::max_source_target;
  if (text == "N_s/10") return BoundSymbol::source_tenth;
  return std::nullopt;
}

ParamSpec ParamSpec::integer(std::string name, std::int64_t lower, std::int64_t upper) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::integer;
  p.lower = static_cast<double>(lower);
  p.upper = static_cast<double>(upper);
  return p;
}

ParamSpec ParamSpec::real(std::string name, double lower, double upper) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::real;
  p.lower = lower;
  p.upper = upper;
  return p;
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::categorical;
  p.choices = std::move(choices);
  return p;
}

bool ParamSpec::log_scale() const {
  return kind == ParamKind::real && lower > 0.0 && upper / lower >= 1000.0;
}

std::pair<double, double> ParamSpec::internal_range() const {
  switch (kind) {
    case ParamKind::integer:
      return {lower - 0.5, upper + 0.5};
    case ParamKind::real:
      if (log_scale()) return {std::log(lower), std::log(upper)};
      return {lower, upper};
    case ParamKind::categorical:
      return {0.0, static_cast<double>(choices.size())};
  }
  return {0.0, 0.0};
}

double ParamSpec::to_internal(double value) const {
  if (log_scale()) return std::log(value);
  return value;
}

double ParamSpec::from_internal(double u) const {
  switch (kind) {
    case ParamKind::integer:
      return std::clamp(std::floor(u + 0.5), lower, upper);
    case ParamKind::real:
      if (log_scale()) return std::clamp(std::exp(u), lower, upper);
      return std::clamp(u, lower, upper);
    case ParamKind::categorical:
      return std::clamp(std::floor(u), 0.0, static_cast<double>(choices.size()) - 1.0);
  }
  return u;
}

std::string format_value(const ParamValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os.precision(17);
          os << v;
          return os.str();
        } else {
          return std::to_string(v);
        }
      },
      value);
}

const ParamValue& Configuration::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw InputError("configuration has no parameter '" + name + "'");
  return it->second;
}

std::int64_t Configuration::get_int(const std::string& name) const {
  const auto& v = at(name);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw InputError("parameter '" + name + "' is not an integer");
}

double Configuration::get_real(const std::string& name) const {
  const auto& v = at(name);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw InputError("parameter '" + name + "' is not numeric");
}

const std::string& Configuration::get_choice(const std::string& name) const {
  const auto& v = at(name);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw InputError("parameter '" + name + "' is not categorical");
}

ConfigSpace::ConfigSpace(std::vector<ParamSpec> params) {
  for (auto& p : params) add(std::move(p));
}

void ConfigSpace::add(ParamSpec spec) {
  if (spec.name.empty()) throw ConfigError("parameter with empty name");
  if (find(spec.name) != nullptr) throw ConfigError("duplicate parameter '" + spec.name + "'");
  if (spec.kind == ParamKind::categorical) {
    if (spec.choices.empty()) throw ConfigError("categorical '" + spec.name + "' has no choices");
    std::set<std::string> seen(spec.choices.begin(), spec.choices.end());
    if (seen.size() != spec.choices.size())
      throw ConfigError("categorical '" + spec.name + "' has duplicate choices");
  } else {
    if (!std::isfinite(spec.lower)) throw ConfigError("parameter '" + spec.name + "' lower bound not finite");
    if (spec.resolved() && !(spec.lower <= spec.upper))
      throw ConfigError("parameter '" + spec.name + "' has lower > upper");
    if (spec.kind == ParamKind::integer &&
        (spec.lower != std::floor(spec.lower) || (spec.resolved() && spec.upper != std::floor(spec.upper))))
      throw ConfigError("integer parameter '" + spec.name + "' has fractional bounds");
  }
  params_.push_back(std::move(spec));
}

const ParamSpec* ConfigSpace::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

bool ConfigSpace::resolved() const {
  return std::all_of(params_.begin(), params_.end(), [](const ParamSpec& p) { return p.resolved(); });
}

Portfolio::Portfolio(std::vector<TransferSpec> transfers, std::vector<ClassifierSpec> classifiers)
    : transfers_(std::move(transfers)), classifiers_(std::move(classifiers)) {
  std::set<std::string> ids;
  for (const auto& t : transfers_)
    if (!ids.insert(t.id).second) throw ConfigError("duplicate learner id '" + t.id + "'");
  for (const auto& c : classifiers_)
    if (!ids.insert(c.id).second) throw ConfigError("duplicate learner id '" + c.id + "'");
}

const TransferSpec& Portfolio::transfer(std::string_view id) const {
  for (const auto& t : transfers_)
    if (t.id == id) return t;
  throw InputError("unknown transfer learner '" + std::string(id) + "'");
}

const ClassifierSpec& Portfolio::classifier(std::string_view id) const {
  for (const auto& c : classifiers_)
    if (c.id == id) return c;
  throw InputError("unknown classifier '" + std::string(id) + "'");
}

bool Portfolio::contains(const Combination& x) const {
  auto t = std::any_of(transfers_.begin(), transfers_.end(), [&](const auto& s) { return s.id == x.transfer_id; });
  auto c = std::any_of(classifiers_.begin(), classifiers_.end(),
                       [&](const auto& s) { return s.id == x.classifier_id; });
  return t && c;
}

std::size_t Portfolio::index_of(const Combination& x) const {
  std::size_t ti = 0, ci = 0;
  while (ti < transfers_.size() && transfers_[ti].id != x.transfer_id) ++ti;
  while (ci < classifiers_.size() && classifiers_[ci].id != x.classifier_id) ++ci;
  if (ti == transfers_.size() || ci == classifiers_.size())
    throw InputError("combination " + x.label() + " not in portfolio");
  return ti * classifiers_.size() + ci;
}

Combination Portfolio::combination_at(std::size_t index) const {
  if (index >= size()) throw InputError("combination index out of range");
  return {transfers_[index / classifiers_.size()].id, classifiers_[index % classifiers_.size()].id};
}

std::vector<Combination> Portfolio::all_combinations() const {
  std::vector<Combination> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(combination_at(i));
  return out;
}

std::string joint_name(std::string_view learner_id, std::string_view param) {
  std::string s(learner_id);
  s += '.';
  s += param;
  return s;
}

ConfigSpace Portfolio::joint_space(const Combination& x) const {
  ConfigSpace joint;
  auto append = [&joint](const ConfigSpace& part, const std::string& owner) {
    for (auto p : part.params()) {
      p.name = joint_name(owner, p.name);
      joint.add(std::move(p));
    }
  };
  append(transfer(x.transfer_id).space, x.transfer_id);
  append(classifier(x.classifier_id).space, x.classifier_id);
  return joint;
}

bool Portfolio::resolved() const {
  return std::all_of(transfers_.begin(), transfers_.end(), [](const auto& t) { return t.space.resolved(); }) &&
         std::all_of(classifiers_.begin(), classifiers_.end(), [](const auto& c) { return c.space.resolved(); });
}

Configuration learner_part(const Configuration& joint, std::string_view learner_id) {
  Configuration out;
  std::string prefix = joint_name(learner_id, "");
  for (const auto& [name, value] : joint.values)
    if (name.compare(0, prefix.size(), prefix) == 0) out.values.emplace(name.substr(prefix.size()), value);
  return out;
}

namespace {

bool value_in_spec(const ParamSpec& spec, const ParamValue& value) {
  switch (spec.kind) {
    case ParamKind::integer: {
      const auto* v = std::get_if<std::int64_t>(&value);
      return v != nullptr && static_cast<double>(*v) >= spec.lower && static_cast<double>(*v) <= spec.upper;
    }
    case ParamKind::real: {
      const auto* v = std::get_if<double>(&value);
      return v != nullptr && std::isfinite(*v) && *v >= spec.lower && *v <= spec.upper;
    }
    case ParamKind::categorical: {
      const auto* v = std::get_if<std::string>(&value);
      return v != nullptr && std::find(spec.choices.begin(), spec.choices.end(), *v) != spec.choices.end();
    }
  }
  return false;
}

ParamValue value_from_internal(const ParamSpec& spec, double u) {
  switch (spec.kind) {
    case ParamKind::integer:
      return static_cast<std::int64_t>(spec.from_internal(u));
    case ParamKind::real:
      return spec.from_internal(u);
    case ParamKind::categorical:
      return spec.choices[static_cast<std::size_t>(spec.from_internal(u))];
  }
  return {};
}

void require_resolved(const ConfigSpace& space) {
  for (const auto& p : space.params())
    if (!p.resolved())
      throw BindingError("parameter '" + p.name + "' has unresolved bound " + std::string(to_string(*p.upper_symbol)));
}

}  // namespace

bool validate_config(const ConfigSpace& space, const Configuration& config) {
  if (config.values.size() != space.size()) return false;
  for (const auto& spec : space.params()) {
    if (!spec.resolved()) return false;
    auto it = config.values.find(spec.name);
    if (it == config.values.end() || !value_in_spec(spec, it->second)) return false;
  }
  return true;
}

Configuration sample_uniform(const ConfigSpace& space, Rng& rng) {
  require_resolved(space);
  Configuration out;
  for (const auto& spec : space.params()) {
    switch (spec.kind) {
      case ParamKind::integer: {
        std::uniform_int_distribution<std::int64_t> d(static_cast<std::int64_t>(spec.lower),
                                                      static_cast<std::int64_t>(spec.upper));
        out.values[spec.name] = d(rng);
        break;
      }
      case ParamKind::real: {
        auto [lo, hi] = spec.internal_range();
        std::uniform_real_distribution<double> d(lo, hi);
        out.values[spec.name] = spec.from_internal(lo == hi ? lo : d(rng));
        break;
      }
      case ParamKind::categorical: {
        std::uniform_int_distribution<std::size_t> d(0, spec.choices.size() - 1);
        out.values[spec.name] = spec.choices[d(rng)];
        break;
      }
    }
  }
  return out;
}

std::vector<Configuration> space_filling_sample(const ConfigSpace& space, std::size_t n, Rng& rng) {
  require_resolved(space);
  if (n == 0) throw InputError("space_filling_sample needs n >= 1");
  std::vector<Configuration> out(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& spec : space.params()) {
    if (spec.kind == ParamKind::categorical) {
      std::vector<std::size_t> order(spec.choices.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<std::size_t> slots(n);
      for (std::size_t i = 0; i < n; ++i) slots[i] = order[i % order.size()];
      std::shuffle(slots.begin(), slots.end(), rng);
      for (std::size_t i = 0; i < n; ++i) out[i].values[spec.name] = spec.choices[slots[i]];
      continue;
    }
    std::vector<std::size_t> bins(n);
    std::iota(bins.begin(), bins.end(), 0);
    std::shuffle(bins.begin(), bins.end(), rng);
    auto [lo, hi] = spec.internal_range();
    double width = (hi - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double u = lo + (static_cast<double>(bins[i]) + unit(rng)) * width;
      // Integers live on a half-open internal interval; keep the last bin
      // from rounding past the upper bound.
      if (spec.kind == ParamKind::integer) u = std::min(u, std::nextafter(hi, lo));
      out[i].values[spec.name] = value_from_internal(spec, u);
    }
  }
  return out;
}

std::vector<Combination> neighborhood(const Portfolio& portfolio, const Combination& x) {
  std::vector<Combination> out;
  for (const auto& t : portfolio.transfers())
    if (t.id != x.transfer_id) out.push_back({t.id, x.classifier_id});
  for (const auto& c : portfolio.classifiers())
    if (c.id != x.classifier_id) out.push_back({x.transfer_id, c.id});
  return out;
}

double resolve_symbol(BoundSymbol symbol, const DataSizes& sizes) {
  auto ns = static_cast<double>(sizes.n_source);
  auto nt = static_cast<double>(sizes.n_target);
  switch (symbol) {
    case BoundSymbol::n_source:
      return ns;
    case BoundSymbol::n_target:
      return nt;
    case BoundSymbol::max_source_target:
      return std::max(ns, nt);
    case BoundSymbol::source_tenth:
      return std::floor(ns / 10.0);
  }
  return 0.0;
}

ConfigSpace resolve_bounds(const ConfigSpace& space, const DataSizes& sizes, std::vector<std::string>* notes,
                           std::string_view owner) {
  ConfigSpace out;
  for (auto p : space.params()) {
    if (p.upper_symbol) {
      double value = resolve_symbol(*p.upper_symbol, sizes);
      if (p.kind == ParamKind::integer) value = std::floor(value);
      if (value < p.lower) {
        if (notes != nullptr) {
          std::ostringstream os;
          os << (owner.empty() ? "" : std::string(owner) + ".") << p.name << ": bound "
             << to_string(*p.upper_symbol) << " resolved to " << value << " < lower " << p.lower
             << "; raised to lower";
          notes->push_back(os.str());
        }
        value = p.lower;
      }
      p.upper = value;
      p.upper_symbol.reset();
    }
    out.add(std::move(p));
  }
  return out;
}

Portfolio resolve_bounds(const Portfolio& portfolio, const DataSizes& sizes, std::vector<std::string>* notes) {
  std::vector<TransferSpec> ts;
  std::vector<ClassifierSpec> cs;
  for (const auto& t : portfolio.transfers())
    ts.push_back({t.id, resolve_bounds(t.space, sizes, notes, t.id), t.needs_target_data});
  for (const auto& c : portfolio.classifiers()) cs.push_back({c.id, resolve_bounds(c.space, sizes, notes, c.id)});
  return Portfolio(std::move(ts), std::move(cs));
}

}  // namespace bilo
