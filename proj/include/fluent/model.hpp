#pragma once

// Observer / level / hierarchy data model.
//
// A LevelModel is one computational model: a set of observers bound into a
// strict order by their component lists, plus a mode of progression. A
// Hierarchy stacks levels bottom-up (index 0 here is the machine-interface
// level) and connects adjacent levels through groundings.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fluent {

using ObserverId = std::string;

enum class Role { input, intermediate, output };
enum class ObserverKind { grounded, free };
enum class Modulation { none, min_gate, product_gate };

// ---------------------------------------------------------------------------
// State update operators. Each kind has a fixed state dimension.

namespace op {

struct Const {
  double value = 0.0;
  bool operator==(const Const&) const = default;
};

/// s = sum_i w_i a_i + bias
struct WeightedSum {
  std::vector<double> weights;
  double bias = 0.0;
  bool operator==(const WeightedSum&) const = default;
};

/// s = prod_i a_i (1 for no components)
struct Product {
  bool operator==(const Product&) const = default;
};

enum class Extremum { min, max };

/// s = min_i a_i or max_i a_i (0 for no components)
struct MinMax {
  Extremum mode = Extremum::max;
  bool operator==(const MinMax&) const = default;
};

/// s = hi if sum_i a_i >= theta else lo
struct Threshold {
  double theta = 0.5;
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Threshold&) const = default;
};

/// discrete: s' = (1 - lambda) s + gain * sum a;  continuous: ds/dt = -lambda s + gain * sum a
struct Leaky {
  double lambda = 1.0;
  double gain = 1.0;
  bool operator==(const Leaky&) const = default;
};

/// discrete: s' = s + beta (sum a - s);  continuous: ds/dt = beta (sum a - s)
struct Ema {
  double beta = 0.5;
  bool operator==(const Ema&) const = default;
};

/// Damped second-order filter of u = sum a, state [x, v]:
/// dx/dt = v, dv/dt = w^2 (u - x) - 2 zeta w v with w = 2 pi freq.
struct Resonator {
  double freq = 1.0;
  double damping = 0.1;
  bool operator==(const Resonator&) const = default;
};

/// Autonomous harmonic oscillator, state [x, y]: dx/dt = omega y, dy/dt = -omega x.
struct Oscillator {
  double omega = 1.0;
  bool operator==(const Oscillator&) const = default;
};

/// Boolean lookup. Row index bit i is component i's activation (> 0.5 counts as 1).
struct Table {
  std::vector<double> rows;
  bool operator==(const Table&) const = default;
};

/// discrete: s' = s + gain (a[target] - a[measure]);  continuous: ds/dt = gain (a[target] - a[measure])
struct Proportional {
  double gain = 1.0;
  std::size_t target = 0;
  std::size_t measure = 1;
  bool operator==(const Proportional&) const = default;
};

/// s = sum a + sigma * N(0, 1), optionally clamped at zero.
struct Noise {
  double sigma = 0.0;
  bool clamp = false;
  bool operator==(const Noise&) const = default;
};

}  // namespace op

using OperatorSpec = std::variant<op::Const, op::WeightedSum, op::Product, op::MinMax, op::Threshold,
                                  op::Leaky, op::Ema, op::Resonator, op::Oscillator, op::Table,
                                  op::Proportional, op::Noise>;

// ---------------------------------------------------------------------------
// Activation operators: memoryless maps from state to a base activation.

namespace act {

struct Identity {
  std::size_t index = 0;
  bool operator==(const Identity&) const = default;
};

struct Linear {
  double gain = 1.0;
  double bias = 0.0;
  std::size_t index = 0;
  bool operator==(const Linear&) const = default;
};

struct Threshold {
  double theta = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t index = 0;
  bool operator==(const Threshold&) const = default;
};

}  // namespace act

using ActivationSpec = std::variant<act::Identity, act::Linear, act::Threshold>;

// ---------------------------------------------------------------------------
// External signals (physical-model sources and standalone inputs).

namespace signal {

struct Const {
  double value = 0.0;
  bool operator==(const Const&) const = default;
};

struct Step {
  double at = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Step&) const = default;
};

struct Sine {
  double amplitude = 1.0;
  double freq = 1.0;
  double phase = 0.0;
  double offset = 1.0;
  bool operator==(const Sine&) const = default;
};

struct Square {
  double period = 1.0;
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Square&) const = default;
};

/// Sampled per step; holds the last value past the end (0 when empty).
struct Series {
  std::vector<double> values;
  bool operator==(const Series&) const = default;
};

}  // namespace signal

using SignalSpec = std::variant<signal::Const, signal::Step, signal::Sine, signal::Square, signal::Series>;

// ---------------------------------------------------------------------------

struct ObserverSpec {
  ObserverId id;
  Role role = Role::intermediate;
  ObserverKind kind = ObserverKind::free;
  std::string quality;
  std::size_t state_dim = 0;
  std::optional<OperatorSpec> state_op;  // absent for inputs
  ActivationSpec act_op = act::Identity{};
  std::vector<ObserverId> components;
  Modulation modulation = Modulation::min_gate;
  std::vector<double> initial_state;  // empty means zeros

  bool operator==(const ObserverSpec&) const = default;
};

struct Progression {
  enum class Mode { discrete, continuous };
  Mode mode = Mode::discrete;
  double dt = 1.0;  // meaningful for continuous only

  bool continuous() const { return mode == Mode::continuous; }
  bool operator==(const Progression&) const = default;
};

// ---------------------------------------------------------------------------
// Structure events (dynamic architectures).

enum class Direction { above, below };

struct EventTrigger {
  ObserverId observer;
  double threshold = 0.0;
  Direction direction = Direction::above;
  int persistence = 1;
  bool operator==(const EventTrigger&) const = default;
};

namespace event {

struct Create {
  ObserverSpec spec;
  bool operator==(const Create&) const = default;
};
struct Terminate {
  ObserverId id;
  bool operator==(const Terminate&) const = default;
};
struct Bind {
  ObserverId child;
  ObserverId parent;
  bool operator==(const Bind&) const = default;
};
struct Unbind {
  ObserverId child;
  ObserverId parent;
  bool operator==(const Unbind&) const = default;
};
struct Split {
  ObserverId source;
  ObserverId copy;
  bool operator==(const Split&) const = default;
};
struct Join {
  std::vector<ObserverId> members;
  ObserverId compound;
  bool operator==(const Join&) const = default;
};

}  // namespace event

using EventAction = std::variant<event::Create, event::Terminate, event::Bind, event::Unbind,
                                 event::Split, event::Join>;

struct StructureEventRule {
  EventTrigger trigger;
  EventAction action;
  bool operator==(const StructureEventRule&) const = default;
};

// ---------------------------------------------------------------------------

struct LevelModel {
  std::string name;
  std::map<ObserverId, ObserverSpec> observers;
  Progression progression;
  bool clamp_negative = false;
  std::vector<StructureEventRule> events;

  /// Throws UnknownObserver.
  const ObserverSpec& at(const ObserverId& id) const;
  bool contains(const ObserverId& id) const { return observers.count(id) != 0; }
  /// Inserts or replaces by spec.id.
  void add(ObserverSpec spec);

  bool operator==(const LevelModel&) const = default;
};

enum class Aggregator { latest, mean, max };

struct GroundingSpec {
  std::vector<ObserverId> lower_ids;
  Aggregator aggregator = Aggregator::latest;
  OperatorSpec state_op = op::WeightedSum{{1.0}, 0.0};

  bool operator==(const GroundingSpec&) const = default;
};

struct Hierarchy {
  std::string name = "model";
  std::vector<LevelModel> levels;  // levels[0] is the machine-interface level
  std::map<ObserverId, SignalSpec> pm_sources;
  // level name -> grounded observer id -> grounding
  std::map<std::string, std::map<ObserverId, GroundingSpec>> groundings;
  // upper level name -> ratio r: one upper step per r steps of the level below
  std::map<std::string, int> sync_ratios;

  const LevelModel* find_level(const std::string& name) const;
  /// Position of the named level in `levels`; throws UnknownObserver if absent.
  std::size_t level_position(const std::string& name) const;
  int ratio(const std::string& upper) const;
  const GroundingSpec* grounding(const std::string& level, const ObserverId& id) const;

  bool operator==(const Hierarchy&) const = default;
};

// Enum/name conversions shared by the DSL, reports and the CLI.
const char* to_string(Role);
const char* to_string(ObserverKind);
const char* to_string(Modulation);
const char* to_string(Aggregator);
const char* operator_name(const OperatorSpec&);
std::optional<Role> parse_role(const std::string&);
std::optional<ObserverKind> parse_kind(const std::string&);
std::optional<Modulation> parse_modulation(const std::string&);
std::optional<Aggregator> parse_aggregator(const std::string&);

}  // namespace fluent
