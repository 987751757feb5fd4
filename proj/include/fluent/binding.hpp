#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "fluent/model.hpp"

namespace fluent {

/// Pairs (lower, upper) with lower bound transitively into upper.
using OrderRelation = std::set<std::pair<ObserverId, ObserverId>>;

/// Transitive closure of the component relation. Throws CycleError with a
/// witness path when the closure is not irreflexive, UnknownObserver when a
/// component id is not part of the level.
OrderRelation binding_closure(const LevelModel& level);

/// A cycle in the component relation (first and last element equal), if any.
/// Unknown component ids are ignored.
std::optional<std::vector<ObserverId>> find_cycle(const LevelModel& level);

struct Classification {
  bool atomic = false;      // no components
  bool autonomous = false;  // observed by no one
  bool operator==(const Classification&) const = default;
};

Classification classify(const ObserverId& id, const LevelModel& level);

/// Inverse of the component lists: id -> observers that list it (sorted, unique).
std::map<ObserverId, std::vector<ObserverId>> masters_of(const LevelModel& level);

/// Masters-before-components order used for activation evaluation. Observers
/// with no masters come first; ties break lexicographically by id.
std::vector<ObserverId> activation_order(const LevelModel& level);

/// Number of edges on the longest component chain.
std::size_t binding_depth(const LevelModel& level);

}  // namespace fluent
