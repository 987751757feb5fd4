#pragma once

// Execution of single levels and full hierarchies.
//
// Every step runs in two phases. Phase 1 updates all states from the
// component activations of the previous step (grounded observers of an upper
// level instead read the lower level's activations in the window ending at
// the aligned instant). Phase 2 computes activations masters-first, so
// modulation sees the masters' activations of the same step. Structure
// events are evaluated after each step and applied before the next one.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fluent/model.hpp"
#include "fluent/operators.hpp"

namespace fluent {

struct RunConfig {
  static constexpr std::int64_t default_steps = 100;

  std::optional<std::int64_t> steps;  // horizon in steps of the driving level
  std::optional<double> duration;     // alternative horizon in time units of the driving level
  std::optional<double> dt;           // overrides the step of every continuous level
  std::uint64_t seed = 0;
  bool record_states = false;
  std::optional<std::string> standalone_level;
};

struct Sample {
  std::int64_t step = 0;
  double time = 0.0;
  double activation = 0.0;
  std::vector<double> state;  // filled when states are recorded
};

using Chronicle = std::vector<Sample>;

struct LevelTrace {
  std::string level;
  Progression progression;
  std::int64_t bottom_steps_per_step = 1;
  std::map<ObserverId, Chronicle> chronicles;

  const Chronicle* find(const ObserverId& id) const;
  std::optional<double> activation_at(const ObserverId& id, std::int64_t step) const;
};

struct RunMetadata {
  std::string model_name;
  std::uint64_t model_hash = 0;
  RunConfig config;
  std::int64_t horizon_steps = 0;
  double wall_seconds = 0.0;
};

struct TraceSet {
  std::vector<LevelTrace> levels;
  RunMetadata meta;

  const LevelTrace* find(const std::string& level) const;
  /// Throws UnknownObserver when the level is absent.
  const LevelTrace& level(const std::string& name) const;
};

using InputSignals = std::map<ObserverId, SignalSpec>;

/// Progression after applying the config's dt override.
Progression effective_progression(const Progression& p, const RunConfig& cfg);

/// Number of steps of a level with the given progression (already overridden).
/// Throws InvalidParams for negative horizons or a non-positive dt.
std::int64_t horizon_steps(const RunConfig& cfg, const Progression& p);

/// Runs one level on its own. Grounded observers use their within-level
/// operators. Every input observer needs a signal in `inputs`.
TraceSet run_standalone(const LevelModel& level, const InputSignals& inputs, const RunConfig& cfg);

/// Runs all levels bottom-up. Level-1 inputs are driven by the PM sources of
/// the same id (entries of `pm_inputs` take precedence). The horizon counts
/// steps of the bottom level.
TraceSet run_hierarchy(const Hierarchy& h, const InputSignals& pm_inputs, const RunConfig& cfg);

/// Dispatches to run_standalone when cfg.standalone_level is set, otherwise
/// to run_hierarchy. Standalone inputs are looked up in `inputs`, then in the
/// PM sources.
TraceSet run(const Hierarchy& h, const InputSignals& inputs, const RunConfig& cfg);

/// Reduces one lower observer's window. Throws GroundingWindowEmpty.
double aggregate(Aggregator agg, std::span<const double> samples);

/// Cross-level update: aggregates each lower id's window, then applies the
/// grounding operator. `window[i]` holds the samples of `g.lower_ids[i]`.
std::vector<double> ground_update(const GroundingSpec& g, std::span<const double> state,
                                  const std::vector<std::vector<double>>& window, Timing timing,
                                  std::mt19937_64& rng);

/// Mutable part of a level between steps.
struct LiveLevel {
  LevelModel model;
  std::map<ObserverId, std::vector<double>> states;
};

/// Applies due actions in canonical order (terminate, unbind, create, bind,
/// split, join; by target id within a class). Throws UnknownTarget or
/// EventCycleError, leaving `live` unchanged.
void apply_structure_events(LiveLevel& live, std::vector<EventAction> due);

/// Seed of the private noise generator of one observer.
std::uint64_t observer_seed(std::uint64_t seed, const std::string& level, const ObserverId& id);

}  // namespace fluent
