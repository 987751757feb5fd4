#include "fluent/binding.hpp"

#include <algorithm>
#include <functional>

#include "fluent/error.hpp"

namespace fluent {

namespace {

// Distinct components of each observer, restricted to ids present in the level.
std::map<ObserverId, std::vector<ObserverId>> known_components(const LevelModel& level) {
  std::map<ObserverId, std::vector<ObserverId>> out;
  for (const auto& [id, spec] : level.observers) {
    std::vector<ObserverId> comps;
    for (const auto& c : spec.components)
      if (level.contains(c)) comps.push_back(c);
    std::sort(comps.begin(), comps.end());
    comps.erase(std::unique(comps.begin(), comps.end()), comps.end());
    out.emplace(id, std::move(comps));
  }
  return out;
}

void require_known_components(const LevelModel& level) {
  for (const auto& [id, spec] : level.observers)
    for (const auto& c : spec.components)
      if (!level.contains(c))
        throw UnknownObserver("observer '" + id + "' lists unknown component '" + c + "'");
}

}  // namespace

std::optional<std::vector<ObserverId>> find_cycle(const LevelModel& level) {
  const auto comps = known_components(level);
  enum class Mark { white, gray, black };
  std::map<ObserverId, Mark> mark;
  for (const auto& [id, _] : comps) mark[id] = Mark::white;

  std::vector<ObserverId> stack;
  std::optional<std::vector<ObserverId>> found;

  // Walks compound -> component edges; a back edge closes a cycle.
  std::function<bool(const ObserverId&)> visit = [&](const ObserverId& v) {
    mark[v] = Mark::gray;
    stack.push_back(v);
    for (const auto& c : comps.at(v)) {
      if (mark[c] == Mark::gray) {
        auto start = std::find(stack.begin(), stack.end(), c);
        std::vector<ObserverId> cycle(start, stack.end());
        cycle.push_back(c);
        // Report in binding direction: each element is a component of the next.
        std::reverse(cycle.begin(), cycle.end());
        cycle.pop_back();
        auto smallest = std::min_element(cycle.begin(), cycle.end());
        std::rotate(cycle.begin(), smallest, cycle.end());
        cycle.push_back(cycle.front());
        found = std::move(cycle);
        return true;
      }
      if (mark[c] == Mark::white && visit(c)) return true;
    }
    stack.pop_back();
    mark[v] = Mark::black;
    return false;
  };

  for (const auto& [id, _] : comps)
    if (mark[id] == Mark::white && visit(id)) return found;
  return std::nullopt;
}

OrderRelation binding_closure(const LevelModel& level) {
  require_known_components(level);
  if (auto cycle = find_cycle(level)) throw CycleError(*cycle);

  const auto comps = known_components(level);
  std::map<ObserverId, std::set<ObserverId>> below;
  std::function<const std::set<ObserverId>&(const ObserverId&)> descend =
      [&](const ObserverId& v) -> const std::set<ObserverId>& {
    if (auto it = below.find(v); it != below.end()) return it->second;
    std::set<ObserverId> acc;
    for (const auto& c : comps.at(v)) {
      acc.insert(c);
      const auto& sub = descend(c);
      acc.insert(sub.begin(), sub.end());
    }
    return below.emplace(v, std::move(acc)).first->second;
  };

  OrderRelation closure;
  for (const auto& [id, _] : comps)
    for (const auto& d : descend(id)) closure.emplace(d, id);
  return closure;
}

std::map<ObserverId, std::vector<ObserverId>> masters_of(const LevelModel& level) {
  std::map<ObserverId, std::vector<ObserverId>> up;
  for (const auto& [id, _] : level.observers) up[id];
  for (const auto& [id, spec] : level.observers)
    for (const auto& c : spec.components)
      if (level.contains(c) && c != id) up[c].push_back(id);
  for (auto& [_, ms] : up) {
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  }
  return up;
}

Classification classify(const ObserverId& id, const LevelModel& level) {
  const auto& spec = level.at(id);
  Classification c;
  c.atomic = spec.components.empty();
  c.autonomous = true;
  for (const auto& [other, ospec] : level.observers) {
    if (std::find(ospec.components.begin(), ospec.components.end(), id) != ospec.components.end()) {
      c.autonomous = false;
      break;
    }
  }
  return c;
}

std::vector<ObserverId> activation_order(const LevelModel& level) {
  require_known_components(level);
  if (auto cycle = find_cycle(level)) throw CycleError(*cycle);

  const auto comps = known_components(level);
  const auto masters = masters_of(level);
  std::map<ObserverId, std::size_t> pending;
  for (const auto& [id, ms] : masters) pending[id] = ms.size();

  std::vector<ObserverId> order;
  order.reserve(level.observers.size());
  std::set<ObserverId> ready;
  auto release = [&](const ObserverId& v) {
    for (const auto& c : comps.at(v))
      if (--pending[c] == 0) ready.insert(c);
  };

  for (const auto& [id, n] : pending)
    if (n == 0) order.push_back(id);
  const std::size_t autonomous = order.size();
  for (std::size_t i = 0; i < autonomous; ++i) release(order[i]);

  while (!ready.empty()) {
    auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    release(v);
  }
  return order;
}

std::size_t binding_depth(const LevelModel& level) {
  require_known_components(level);
  if (auto cycle = find_cycle(level)) throw CycleError(*cycle);
  const auto comps = known_components(level);
  std::map<ObserverId, std::size_t> memo;
  std::function<std::size_t(const ObserverId&)> depth = [&](const ObserverId& v) -> std::size_t {
    if (auto it = memo.find(v); it != memo.end()) return it->second;
    std::size_t d = 0;
    for (const auto& c : comps.at(v)) d = std::max(d, depth(c) + 1);
    memo[v] = d;
    return d;
  };
  std::size_t best = 0;
  for (const auto& [id, _] : comps) best = std::max(best, depth(id));
  return best;
}

}  // namespace fluent
