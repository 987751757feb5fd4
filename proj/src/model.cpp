#include "fluent/model.hpp"

#include "fluent/error.hpp"

namespace fluent {

CycleError::CycleError(std::vector<std::string> path)
    : ValidationError("binding cycle " + format_path(path)), path_(std::move(path)) {}

EventCycleError::EventCycleError(std::vector<std::string> path)
    : RuntimeFault("structure event would create binding cycle " + format_path(path)),
      path_(std::move(path)) {}

std::string format_path(const std::vector<std::string>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += " -> ";
    out += path[i];
  }
  return out;
}

const ObserverSpec& LevelModel::at(const ObserverId& id) const {
  auto it = observers.find(id);
  if (it == observers.end()) throw UnknownObserver("unknown observer '" + id + "' in level '" + name + "'");
  return it->second;
}

void LevelModel::add(ObserverSpec spec) {
  auto id = spec.id;
  observers.insert_or_assign(std::move(id), std::move(spec));
}

const LevelModel* Hierarchy::find_level(const std::string& level_name) const {
  for (const auto& level : levels)
    if (level.name == level_name) return &level;
  return nullptr;
}

std::size_t Hierarchy::level_position(const std::string& level_name) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i].name == level_name) return i;
  throw UnknownObserver("unknown level '" + level_name + "'");
}

int Hierarchy::ratio(const std::string& upper) const {
  auto it = sync_ratios.find(upper);
  return it == sync_ratios.end() ? 1 : it->second;
}

const GroundingSpec* Hierarchy::grounding(const std::string& level, const ObserverId& id) const {
  auto lit = groundings.find(level);
  if (lit == groundings.end()) return nullptr;
  auto git = lit->second.find(id);
  return git == lit->second.end() ? nullptr : &git->second;
}

const char* to_string(Role r) {
  switch (r) {
    case Role::input: return "input";
    case Role::intermediate: return "intermediate";
    case Role::output: return "output";
  }
  return "?";
}

const char* to_string(ObserverKind k) { return k == ObserverKind::grounded ? "grounded" : "free"; }

const char* to_string(Modulation m) {
  switch (m) {
    case Modulation::none: return "none";
    case Modulation::min_gate: return "min_gate";
    case Modulation::product_gate: return "product_gate";
  }
  return "?";
}

const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::latest: return "latest";
    case Aggregator::mean: return "mean";
    case Aggregator::max: return "max";
  }
  return "?";
}

namespace {
struct OperatorNamer {
  const char* operator()(const op::Const&) const { return "const"; }
  const char* operator()(const op::WeightedSum&) const { return "wsum"; }
  const char* operator()(const op::Product&) const { return "product"; }
  const char* operator()(const op::MinMax&) const { return "minmax"; }
  const char* operator()(const op::Threshold&) const { return "threshold"; }
  const char* operator()(const op::Leaky&) const { return "leaky"; }
  const char* operator()(const op::Ema&) const { return "ema"; }
  const char* operator()(const op::Resonator&) const { return "resonator"; }
  const char* operator()(const op::Oscillator&) const { return "oscillator"; }
  const char* operator()(const op::Table&) const { return "table"; }
  const char* operator()(const op::Proportional&) const { return "proportional"; }
  const char* operator()(const op::Noise&) const { return "noise"; }
};
}  // namespace

const char* operator_name(const OperatorSpec& op) { return std::visit(OperatorNamer{}, op); }

std::optional<Role> parse_role(const std::string& s) {
  if (s == "input") return Role::input;
  if (s == "intermediate") return Role::intermediate;
  if (s == "output") return Role::output;
  return std::nullopt;
}

std::optional<ObserverKind> parse_kind(const std::string& s) {
  if (s == "grounded") return ObserverKind::grounded;
  if (s == "free") return ObserverKind::free;
  return std::nullopt;
}

std::optional<Modulation> parse_modulation(const std::string& s) {
  if (s == "none") return Modulation::none;
  if (s == "min_gate") return Modulation::min_gate;
  if (s == "product_gate") return Modulation::product_gate;
  return std::nullopt;
}

std::optional<Aggregator> parse_aggregator(const std::string& s) {
  if (s == "latest") return Aggregator::latest;
  if (s == "mean") return Aggregator::mean;
  if (s == "max") return Aggregator::max;
  return std::nullopt;
}

}  // namespace fluent
