#include "fluent/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "fluent/binding.hpp"
#include "fluent/dsl.hpp"
#include "fluent/error.hpp"
#include "fluent/trace_io.hpp"

namespace fluent {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double level_time(const Progression& p, std::int64_t step) {
  return p.continuous() ? static_cast<double>(step) * p.dt : static_cast<double>(step);
}

bool uses_noise(const ObserverSpec& spec) {
  return spec.state_op && std::holds_alternative<op::Noise>(*spec.state_op);
}

// Removes component position `i` and keeps the operator's arity consistent.
void drop_component(ObserverSpec& parent, std::size_t i) {
  parent.components.erase(parent.components.begin() + static_cast<std::ptrdiff_t>(i));
  if (!parent.state_op) return;
  std::visit(Overloaded{
                 [&](op::WeightedSum& w) {
                   if (i < w.weights.size()) w.weights.erase(w.weights.begin() + static_cast<std::ptrdiff_t>(i));
                 },
                 [&](op::Table& t) {
                   // Keep the rows where the removed input reads 0.
                   std::vector<double> kept;
                   for (std::size_t r = 0; r < t.rows.size(); ++r)
                     if (!((r >> i) & 1U)) kept.push_back(t.rows[r]);
                   t.rows = std::move(kept);
                 },
                 [&](op::Proportional& p) {
                   if (p.target > i) --p.target;
                   if (p.measure > i) --p.measure;
                 },
                 [](auto&) {},
             },
             *parent.state_op);
}

void add_component(ObserverSpec& parent, const ObserverId& child) {
  parent.components.push_back(child);
  if (!parent.state_op) return;
  std::visit(Overloaded{
                 [](op::WeightedSum& w) { w.weights.push_back(1.0); },
                 [](op::Table& t) {
                   // The new input is a don't-care: both halves repeat the old table.
                   const auto old = t.rows;
                   t.rows.insert(t.rows.end(), old.begin(), old.end());
                 },
                 [](auto&) {},
             },
             *parent.state_op);
}

std::vector<double> initial_state(const ObserverSpec& spec) {
  if (spec.role == Role::input) return {};
  std::vector<double> s(spec.state_dim, 0.0);
  for (std::size_t i = 0; i < s.size() && i < spec.initial_state.size(); ++i) s[i] = spec.initial_state[i];
  return s;
}

void check_acyclic_after_event(const LevelModel& level) {
  if (auto cycle = find_cycle(level)) throw EventCycleError(*cycle);
}

// ---------------------------------------------------------------------------

// Where a grounded observer's lower-level samples come from.
struct GroundSource {
  const LevelTrace* lower = nullptr;                 // null at the bottom level (PM sources)
  const std::map<ObserverId, SignalSpec>* pm = nullptr;
  std::int64_t ratio = 1;
  Progression lower_progression;
};

struct Node {
  ObserverSpec spec;
  std::vector<double> state;
  std::vector<std::size_t> comps;
  std::vector<std::size_t> masters;
  const GroundingSpec* grounding = nullptr;
  const SignalSpec* signal = nullptr;
  std::unique_ptr<std::mt19937_64> rng;
  double act = 0.0;
};

class LevelRunner {
 public:
  LevelRunner(LevelModel model, Progression progression, const RunConfig& cfg,
              const std::map<ObserverId, GroundingSpec>* groundings, const InputSignals* signals,
              GroundSource source)
      : model_(std::move(model)),
        progression_(progression),
        timing_(Timing::of(progression)),
        cfg_(cfg),
        groundings_(groundings),
        signals_(signals),
        source_(source),
        counters_(model_.events.size(), 0) {
    model_.progression = progression;
    binding_closure(model_);  // throws CycleError / UnknownObserver
    for (const auto& [id, spec] : model_.observers) carried_[id].state = initial_state(spec);
    rebuild();
    trace_.level = model_.name;
    trace_.progression = progression;
    trace_.bottom_steps_per_step = source.ratio;
  }

  void set_bottom_steps_per_step(std::int64_t r) { trace_.bottom_steps_per_step = r; }

  void run(std::int64_t steps) {
    for (std::int64_t n = 0; n < steps; ++n) {
      step(n);
      if (!model_.events.empty()) fire_events();
    }
  }

  LevelTrace take_trace() { return std::move(trace_); }

 private:
  struct Carried {
    std::vector<double> state;
    double act = 0.0;
    std::unique_ptr<std::mt19937_64> rng;
  };

  void rebuild() {
    // Move the live data of the current nodes back into the carry map.
    for (auto& node : nodes_) {
      auto& c = carried_[node.spec.id];
      c.state = std::move(node.state);
      c.act = node.act;
      c.rng = std::move(node.rng);
    }
    nodes_.clear();
    index_.clear();
    for (const auto& [id, spec] : model_.observers) {
      index_[id] = nodes_.size();
      Node node;
      node.spec = spec;
      auto it = carried_.find(id);
      if (it != carried_.end()) {
        node.state = std::move(it->second.state);
        node.act = it->second.act;
        node.rng = std::move(it->second.rng);
      } else {
        node.state = initial_state(spec);
      }
      if (groundings_) {
        auto g = groundings_->find(id);
        if (g != groundings_->end()) node.grounding = &g->second;
      }
      if (signals_ && spec.role == Role::input) {
        auto s = signals_->find(id);
        if (s != signals_->end()) node.signal = &s->second;
      }
      if (uses_noise(spec) && !node.rng)
        node.rng = std::make_unique<std::mt19937_64>(observer_seed(cfg_.seed, model_.name, id));
      nodes_.push_back(std::move(node));
    }
    carried_.clear();
    for (auto& node : nodes_)
      for (const auto& c : node.spec.components) {
        const std::size_t ci = index_.at(c);
        node.comps.push_back(ci);
        nodes_[ci].masters.push_back(index_.at(node.spec.id));
      }
    for (auto& node : nodes_) {
      std::sort(node.masters.begin(), node.masters.end());
      node.masters.erase(std::unique(node.masters.begin(), node.masters.end()), node.masters.end());
    }
    order_.clear();
    for (const auto& id : activation_order(model_)) order_.push_back(index_.at(id));
  }

  // Per lower id: the activation samples of the window ending at this level's step n.
  std::vector<std::vector<double>> window(const GroundingSpec& g, std::int64_t n) const {
    std::vector<std::vector<double>> out(g.lower_ids.size());
    const std::int64_t hi = n * source_.ratio;
    const std::int64_t lo = n == 0 ? 0 : (n - 1) * source_.ratio + 1;
    for (std::size_t i = 0; i < g.lower_ids.size(); ++i) {
      const auto& lid = g.lower_ids[i];
      if (!source_.lower) {
        const SignalSpec* sig = nullptr;
        if (source_.pm) {
          auto it = source_.pm->find(lid);
          if (it != source_.pm->end()) sig = &it->second;
        }
        if (!sig) throw GroundingWindowEmpty("no PM source '" + lid + "' for grounding at step " + std::to_string(n));
        for (std::int64_t k = lo; k <= hi; ++k)
          out[i].push_back(eval_signal(*sig, k, level_time(source_.lower_progression, k)));
        continue;
      }
      const Chronicle* ch = source_.lower->find(lid);
      if (ch) {
        auto first = std::lower_bound(ch->begin(), ch->end(), lo,
                                      [](const Sample& s, std::int64_t step) { return s.step < step; });
        for (auto it = first; it != ch->end() && it->step <= hi; ++it) out[i].push_back(it->activation);
      }
      if (out[i].empty())
        throw GroundingWindowEmpty("grounding window of '" + lid + "' is empty at " + model_.name + " step " +
                                   std::to_string(n));
    }
    return out;
  }

  std::mt19937_64& rng_of(Node& node) { return node.rng ? *node.rng : scratch_rng_; }

  void step(std::int64_t n) {
    const double time = level_time(progression_, n);
    prev_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) prev_[i] = nodes_[i].act;

    // Phase 1: states.
    for (auto& node : nodes_) {
      if (node.spec.role == Role::input) continue;
      if (node.grounding) {
        node.state = ground_update(*node.grounding, node.state, window(*node.grounding, n), timing_, rng_of(node));
        continue;
      }
      if (n == 0 || !node.spec.state_op) continue;
      buf_.clear();
      for (auto c : node.comps) buf_.push_back(prev_[c]);
      update_state(*node.spec.state_op, node.state, buf_, timing_, rng_of(node));
    }

    // Phase 2: activations, masters first.
    for (auto i : order_) {
      Node& node = nodes_[i];
      if (node.spec.role == Role::input) {
        node.act = input_activation(node, n, time);
        continue;
      }
      buf_.clear();
      if (node.spec.modulation != Modulation::none)
        for (auto m : node.masters) buf_.push_back(nodes_[m].act);
      try {
        node.act = eval_activation(node.spec.act_op, node.state, buf_, node.spec.modulation, model_.clamp_negative);
      } catch (const RuntimeFault& e) {
        rethrow_with_context(e, node.spec.id, n);
      }
    }

    for (auto& node : nodes_) {
      Sample s{n, time, node.act, {}};
      if (cfg_.record_states) s.state = node.state;
      trace_.chronicles[node.spec.id].push_back(std::move(s));
    }
  }

  double input_activation(Node& node, std::int64_t n, double time) {
    double v = 0.0;
    if (node.grounding) {
      std::vector<double> s(natural_state_dim(node.grounding->state_op), 0.0);
      s = ground_update(*node.grounding, s, window(*node.grounding, n), timing_, rng_of(node));
      return eval_activation(node.spec.act_op, s, {}, Modulation::none, model_.clamp_negative);
    }
    if (node.signal) v = eval_signal(*node.signal, n, time);
    if (!std::isfinite(v)) throw NonFiniteState("input '" + node.spec.id + "' is not finite");
    if (v < 0.0) {
      if (!model_.clamp_negative)
        throw NegativeActivation("input '" + node.spec.id + "' is negative (" + std::to_string(v) + ") at step " +
                                 std::to_string(n));
      v = 0.0;
    }
    return v + 0.0;
  }

  [[noreturn]] void rethrow_with_context(const RuntimeFault& e, const ObserverId& id, std::int64_t n) const {
    const std::string where = " [" + model_.name + "/" + id + " at step " + std::to_string(n) + "]";
    if (dynamic_cast<const NegativeActivation*>(&e)) throw NegativeActivation(e.what() + where);
    if (dynamic_cast<const NonFiniteState*>(&e)) throw NonFiniteState(e.what() + where);
    if (dynamic_cast<const DimensionMismatch*>(&e)) throw DimensionMismatch(e.what() + where);
    throw;
  }

  void fire_events() {
    std::vector<EventAction> due;
    for (std::size_t r = 0; r < model_.events.size(); ++r) {
      const auto& t = model_.events[r].trigger;
      bool holds = false;
      if (auto it = index_.find(t.observer); it != index_.end()) {
        const double a = nodes_[it->second].act;
        holds = t.direction == Direction::above ? a > t.threshold : a < t.threshold;
      }
      counters_[r] = holds ? counters_[r] + 1 : 0;
      if (holds && counters_[r] == t.persistence) due.push_back(model_.events[r].action);
    }
    if (due.empty()) return;

    LiveLevel live{model_, {}};
    for (auto& node : nodes_) live.states[node.spec.id] = node.state;
    apply_structure_events(live, std::move(due));

    // Carry activations and generators by id; states come from the event result.
    for (auto& node : nodes_) {
      auto& c = carried_[node.spec.id];
      c.act = node.act;
      c.rng = std::move(node.rng);
    }
    nodes_.clear();
    for (auto& [id, s] : live.states) carried_[id].state = std::move(s);
    for (auto it = carried_.begin(); it != carried_.end();)
      it = live.model.contains(it->first) ? std::next(it) : carried_.erase(it);
    model_ = std::move(live.model);
    rebuild();
  }

  LevelModel model_;
  Progression progression_;
  Timing timing_;
  const RunConfig& cfg_;
  const std::map<ObserverId, GroundingSpec>* groundings_;
  const InputSignals* signals_;
  GroundSource source_;
  std::vector<int> counters_;

  std::vector<Node> nodes_;
  std::map<ObserverId, std::size_t> index_;
  std::vector<std::size_t> order_;
  std::map<ObserverId, Carried> carried_;
  std::vector<double> prev_, buf_;
  std::mt19937_64 scratch_rng_{0};
  LevelTrace trace_;
};

RunMetadata make_meta(const std::string& name, const std::string& canonical, const RunConfig& cfg,
                      std::int64_t steps) {
  RunMetadata m;
  m.model_name = name;
  m.model_hash = fnv1a64(canonical);
  m.config = cfg;
  m.horizon_steps = steps;
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------

const Chronicle* LevelTrace::find(const ObserverId& id) const {
  auto it = chronicles.find(id);
  return it == chronicles.end() ? nullptr : &it->second;
}

std::optional<double> LevelTrace::activation_at(const ObserverId& id, std::int64_t step) const {
  const Chronicle* ch = find(id);
  if (!ch) return std::nullopt;
  auto it = std::lower_bound(ch->begin(), ch->end(), step,
                             [](const Sample& s, std::int64_t k) { return s.step < k; });
  if (it == ch->end() || it->step != step) return std::nullopt;
  return it->activation;
}

const LevelTrace* TraceSet::find(const std::string& name) const {
  for (const auto& l : levels)
    if (l.level == name) return &l;
  return nullptr;
}

const LevelTrace& TraceSet::level(const std::string& name) const {
  if (const auto* l = find(name)) return *l;
  throw UnknownObserver("no trace for level '" + name + "'");
}

std::uint64_t observer_seed(std::uint64_t seed, const std::string& level, const ObserverId& id) {
  return splitmix64(seed ^ splitmix64(fnv1a64(level + "/" + id)));
}

Progression effective_progression(const Progression& p, const RunConfig& cfg) {
  Progression out = p;
  if (out.continuous() && cfg.dt) out.dt = *cfg.dt;
  return out;
}

std::int64_t horizon_steps(const RunConfig& cfg, const Progression& p) {
  if (p.continuous() && !(p.dt > 0.0)) throw InvalidParams("dt must be positive");
  if (cfg.steps && cfg.duration) throw InvalidParams("steps and duration are mutually exclusive");
  if (cfg.steps) {
    if (*cfg.steps < 0) throw InvalidParams("steps must be non-negative");
    return *cfg.steps;
  }
  if (cfg.duration) {
    if (!(*cfg.duration >= 0.0) || !std::isfinite(*cfg.duration))
      throw InvalidParams("duration must be non-negative");
    const double unit = p.continuous() ? p.dt : 1.0;
    return static_cast<std::int64_t>(std::llround(*cfg.duration / unit));
  }
  return RunConfig::default_steps;
}

double aggregate(Aggregator agg, std::span<const double> samples) {
  if (samples.empty()) throw GroundingWindowEmpty("grounding window is empty");
  switch (agg) {
    case Aggregator::latest:
      return samples.back();
    case Aggregator::mean:
      return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    case Aggregator::max:
      return *std::max_element(samples.begin(), samples.end());
  }
  return samples.back();
}

std::vector<double> ground_update(const GroundingSpec& g, std::span<const double> state,
                                  const std::vector<std::vector<double>>& window, Timing timing,
                                  std::mt19937_64& rng) {
  if (window.size() != g.lower_ids.size())
    throw DimensionMismatch("grounding window has " + std::to_string(window.size()) + " entries for " +
                            std::to_string(g.lower_ids.size()) + " lower observers");
  std::vector<double> reduced;
  reduced.reserve(window.size());
  for (const auto& w : window) reduced.push_back(aggregate(g.aggregator, w));
  return eval_state_update(g.state_op, state, reduced, timing, rng);
}

void apply_structure_events(LiveLevel& target, std::vector<EventAction> due) {
  // Work on a copy so that a failing batch leaves the level untouched.
  LiveLevel live = target;
  auto rank = [](const EventAction& a) {
    return std::visit(Overloaded{
                          [](const event::Terminate& t) { return std::pair<int, std::string>{0, t.id}; },
                          [](const event::Unbind& u) { return std::pair<int, std::string>{1, u.child}; },
                          [](const event::Create& c) { return std::pair<int, std::string>{2, c.spec.id}; },
                          [](const event::Bind& b) { return std::pair<int, std::string>{3, b.child}; },
                          [](const event::Split& s) { return std::pair<int, std::string>{4, s.source}; },
                          [](const event::Join& j) { return std::pair<int, std::string>{5, j.compound}; },
                      },
                      a);
  };
  std::stable_sort(due.begin(), due.end(),
                   [&](const EventAction& a, const EventAction& b) { return rank(a) < rank(b); });

  auto& level = live.model;
  auto require = [&](const ObserverId& id, const char* what) -> ObserverSpec& {
    auto it = level.observers.find(id);
    if (it == level.observers.end())
      throw UnknownTarget(std::string(what) + ": no observer '" + id + "' in level '" + level.name + "'");
    return it->second;
  };
  auto require_fresh = [&](const ObserverId& id, const char* what) {
    if (level.contains(id))
      throw UnknownTarget(std::string(what) + ": observer '" + id + "' already exists in level '" + level.name +
                          "'");
  };

  for (const auto& action : due) {
    std::visit(Overloaded{
                   [&](const event::Terminate& t) {
                     require(t.id, "terminate");
                     level.observers.erase(t.id);
                     live.states.erase(t.id);
                     for (auto& [_, spec] : level.observers)
                       for (std::size_t i = spec.components.size(); i-- > 0;)
                         if (spec.components[i] == t.id) drop_component(spec, i);
                   },
                   [&](const event::Unbind& u) {
                     require(u.child, "unbind");
                     auto& parent = require(u.parent, "unbind");
                     auto it = std::find(parent.components.begin(), parent.components.end(), u.child);
                     if (it == parent.components.end())
                       throw UnknownTarget("unbind: '" + u.child + "' is not a component of '" + u.parent + "'");
                     drop_component(parent, static_cast<std::size_t>(it - parent.components.begin()));
                   },
                   [&](const event::Create& c) {
                     require_fresh(c.spec.id, "create");
                     for (const auto& comp : c.spec.components) require(comp, "create");
                     level.add(c.spec);
                     live.states[c.spec.id] = initial_state(c.spec);
                     check_acyclic_after_event(level);
                   },
                   [&](const event::Bind& b) {
                     require(b.child, "bind");
                     auto& parent = require(b.parent, "bind");
                     if (b.child == b.parent) throw EventCycleError({b.child, b.child});
                     if (std::find(parent.components.begin(), parent.components.end(), b.child) !=
                         parent.components.end())
                       return;
                     add_component(parent, b.child);
                     check_acyclic_after_event(level);
                   },
                   [&](const event::Split& s) {
                     const ObserverSpec source = require(s.source, "split");
                     require_fresh(s.copy, "split");
                     ObserverSpec copy = source;
                     copy.id = s.copy;
                     level.add(copy);
                     auto st = live.states.find(s.source);
                     live.states[s.copy] = st != live.states.end() ? st->second : initial_state(copy);
                   },
                   [&](const event::Join& j) {
                     require_fresh(j.compound, "join");
                     if (j.members.empty()) throw UnknownTarget("join: no members for '" + j.compound + "'");
                     for (const auto& m : j.members) require(m, "join");
                     ObserverSpec compound;
                     compound.id = j.compound;
                     compound.state_dim = 1;
                     compound.components = j.members;
                     compound.state_op =
                         op::WeightedSum{std::vector<double>(j.members.size(), 1.0 / j.members.size()), 0.0};
                     compound.modulation = Modulation::none;
                     level.add(compound);
                     live.states[j.compound] = {0.0};
                     check_acyclic_after_event(level);
                   },
               },
               action);
  }
  target = std::move(live);
}

TraceSet run_standalone(const LevelModel& level, const InputSignals& inputs, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Progression p = effective_progression(level.progression, cfg);
  const std::int64_t steps = horizon_steps(cfg, p);
  for (const auto& [id, spec] : level.observers)
    if (spec.role == Role::input && !inputs.count(id))
      throw InvalidParams("input observer '" + id + "' of level '" + level.name + "' has no signal");

  LevelRunner runner(level, p, cfg, nullptr, &inputs, GroundSource{});
  runner.run(steps);

  TraceSet out;
  out.levels.push_back(runner.take_trace());
  Hierarchy single;
  single.name = level.name;
  single.levels.push_back(level);
  out.meta = make_meta(level.name, render_model(single), cfg, steps);
  out.meta.wall_seconds = seconds_since(t0);
  return out;
}

TraceSet run_hierarchy(const Hierarchy& h, const InputSignals& pm_inputs, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  TraceSet out;
  if (h.levels.empty()) {
    out.meta = make_meta(h.name, render_model(h), cfg, 0);
    return out;
  }

  std::map<ObserverId, SignalSpec> pm = h.pm_sources;
  for (const auto& [id, sig] : pm_inputs) pm[id] = sig;

  const Progression bottom = effective_progression(h.levels.front().progression, cfg);
  const std::int64_t n_bottom = horizon_steps(cfg, bottom);

  static const std::map<ObserverId, GroundingSpec> no_groundings;
  std::int64_t per_step = 1;  // bottom steps per step of the current level
  for (std::size_t m = 0; m < h.levels.size(); ++m) {
    const LevelModel& level = h.levels[m];
    const Progression p = effective_progression(level.progression, cfg);
    GroundSource src;
    if (m == 0) {
      src.pm = &pm;
      src.lower_progression = p;
    } else {
      src.ratio = h.ratio(level.name);
      if (src.ratio <= 0) throw InvalidParams("sync ratio of '" + level.name + "' must be positive");
      src.lower = &out.levels[m - 1];
      src.lower_progression = out.levels[m - 1].progression;
      per_step *= src.ratio;
    }
    auto g = h.groundings.find(level.name);
    const auto* groundings = g != h.groundings.end() ? &g->second : &no_groundings;
    // Only the bottom level sees PM signals; free inputs above read 0.
    static const InputSignals none;
    LevelRunner runner(level, p, cfg, groundings, m == 0 ? &pm : &none, src);
    runner.set_bottom_steps_per_step(per_step);
    const std::int64_t steps = n_bottom == 0 ? 0 : (n_bottom - 1) / per_step + 1;
    runner.run(steps);
    out.levels.push_back(runner.take_trace());
  }
  out.meta = make_meta(h.name, render_model(h), cfg, n_bottom);
  out.meta.wall_seconds = seconds_since(t0);
  return out;
}

TraceSet run(const Hierarchy& h, const InputSignals& inputs, const RunConfig& cfg) {
  if (!cfg.standalone_level) return run_hierarchy(h, inputs, cfg);
  const LevelModel* level = h.find_level(*cfg.standalone_level);
  if (!level) throw UnknownObserver("no level named '" + *cfg.standalone_level + "'");
  InputSignals merged = inputs;
  for (const auto& [id, spec] : level->observers)
    if (spec.role == Role::input && !merged.count(id)) {
      auto it = h.pm_sources.find(id);
      if (it != h.pm_sources.end()) merged[id] = it->second;
    }
  return run_standalone(*level, merged, cfg);
}

}  // namespace fluent
