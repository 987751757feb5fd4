#include "fluent/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "fluent/binding.hpp"
#include "fluent/error.hpp"
#include "fluent/operators.hpp"

namespace fluent {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double v) { return format_number(v); }

class Collector {
 public:
  Collector(std::vector<Violation>& out, std::string level) : out_(out), level_(std::move(level)) {}
  void add(ViolationCode code, std::vector<ObserverId> subjects, std::string message) {
    out_.push_back({code, level_, std::move(subjects), std::move(message), std::nullopt});
  }

 private:
  std::vector<Violation>& out_;
  std::string level_;
};

// Parameter ranges of a state operator; `where` names the owner in messages.
void check_params(const OperatorSpec& op, bool continuous, const ObserverId& id, const std::string& where,
                  Collector& c) {
  auto neg = [&](const char* name, double v) {
    if (v < 0.0 || std::isnan(v))
      c.add(ViolationCode::NegativeParam, {id}, where + ": " + name + " = " + fmt(v) + " must be >= 0");
  };
  std::visit(Overloaded{
                 [&](const op::Leaky& l) {
                   neg("lambda", l.lambda);
                   if (!continuous && l.lambda > 1.0)
                     c.add(ViolationCode::NegativeParam, {id},
                           where + ": lambda = " + fmt(l.lambda) + " must lie in [0, 1] in discrete mode");
                 },
                 [&](const op::Ema& e) { neg("beta", e.beta); },
                 [&](const op::Resonator& r) {
                   neg("f", r.freq);
                   neg("damping", r.damping);
                 },
                 [&](const op::Noise& n) { neg("sigma", n.sigma); },
                 [&](const op::Table& t) {
                   for (double r : t.rows)
                     if (!(r >= 0.0 && r <= 1.0)) {
                       c.add(ViolationCode::NegativeParam, {id},
                             where + ": table row value " + fmt(r) + " lies outside [0, 1]");
                       break;
                     }
                 },
                 [](const auto&) {},
             },
             op);
}

// Arity of a state operator against the number of inputs it receives.
void check_arity(const OperatorSpec& op, std::size_t inputs, const ObserverId& id, const std::string& where,
                 Collector& c) {
  if (const auto* t = std::get_if<op::Table>(&op)) {
    if (inputs >= 8 * sizeof(std::size_t) || t->rows.size() != (std::size_t{1} << inputs))
      c.add(ViolationCode::BadOperatorArity, {id},
            where + ": table has " + std::to_string(t->rows.size()) + " rows for " + std::to_string(inputs) +
                " inputs");
    return;
  }
  if (const auto* w = std::get_if<op::WeightedSum>(&op)) {
    if (w->weights.size() != inputs)
      c.add(ViolationCode::BadOperatorArity, {id},
            where + ": wsum has " + std::to_string(w->weights.size()) + " weights for " + std::to_string(inputs) +
                " inputs");
    return;
  }
  if (const auto* p = std::get_if<op::Proportional>(&op)) {
    if (p->target >= inputs || p->measure >= inputs)
      c.add(ViolationCode::BadOperatorArity, {id},
            where + ": proportional reads inputs " + std::to_string(p->target) + " and " +
                std::to_string(p->measure) + " of " + std::to_string(inputs));
  }
}

std::size_t activation_index(const ActivationSpec& a) {
  return std::visit([](const auto& x) { return x.index; }, a);
}

void check_level(const LevelModel& level, Collector& c) {
  const bool continuous = level.progression.continuous();

  LevelModel acyclic_view = level;  // self-loops are reported separately
  for (const auto& [id, spec] : level.observers) {
    std::set<ObserverId> seen;
    for (const auto& comp : spec.components) {
      if (comp == id) {
        c.add(ViolationCode::SelfBinding, {id}, "observer '" + id + "' lists itself as a component");
        continue;
      }
      if (!level.contains(comp))
        c.add(ViolationCode::DanglingBinding, {id, comp},
              "observer '" + id + "' binds unknown component '" + comp + "'");
      if (!seen.insert(comp).second)
        c.add(ViolationCode::BadOperatorArity, {id, comp}, "component '" + comp + "' listed twice by '" + id + "'");
    }
    auto& comps = acyclic_view.observers.at(id).components;
    comps.erase(std::remove(comps.begin(), comps.end(), id), comps.end());
  }
  if (auto cycle = find_cycle(acyclic_view))
    c.add(ViolationCode::Cycle, *cycle, "binding cycle " + format_path(*cycle));

  for (const auto& [id, spec] : level.observers) {
    const std::string where = "observer '" + id + "'";
    if (spec.role == Role::input) {
      if (spec.state_dim > 0 || spec.state_op || !spec.initial_state.empty())
        c.add(ViolationCode::InputWithState, {id},
              where + " is an input but declares a state (dim " + std::to_string(spec.state_dim) + ")");
      continue;
    }
    if (spec.state_op) {
      check_params(*spec.state_op, continuous, id, where, c);
      check_arity(*spec.state_op, spec.components.size(), id, where, c);
      const std::size_t want = natural_state_dim(*spec.state_op);
      if (spec.state_dim != want)
        c.add(ViolationCode::BadOperatorArity, {id},
              where + ": " + operator_name(*spec.state_op) + " needs state dimension " + std::to_string(want) +
                  ", declared " + std::to_string(spec.state_dim));
    }
    if (activation_index(spec.act_op) >= spec.state_dim)
      c.add(ViolationCode::BadOperatorArity, {id},
            where + ": activation reads state[" + std::to_string(activation_index(spec.act_op)) + "] of a " +
                std::to_string(spec.state_dim) + "-dimensional state");
    if (spec.initial_state.size() > spec.state_dim)
      c.add(ViolationCode::BadOperatorArity, {id},
            where + ": initial state has " + std::to_string(spec.initial_state.size()) + " entries for dimension " +
                std::to_string(spec.state_dim));
  }
}

void check_ungrounded(const LevelModel& level, Collector& c) {
  const auto masters = masters_of(level);
  for (const auto& [id, spec] : level.observers) {
    if (spec.kind != ObserverKind::free || spec.role == Role::input || !spec.components.empty()) continue;
    const auto& ms = masters.at(id);
    std::vector<ObserverId> subjects{id};
    subjects.insert(subjects.end(), ms.begin(), ms.end());
    std::string msg = "free atomic observer '" + id + "' is neither grounded nor an input";
    if (!ms.empty()) msg += "; observed by " + ms.front() + (ms.size() > 1 ? " and others" : "");
    c.add(ViolationCode::UngroundedPath, std::move(subjects), msg);
  }
}

}  // namespace

const char* to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::Cycle: return "Cycle";
    case ViolationCode::SelfBinding: return "SelfBinding";
    case ViolationCode::InputWithState: return "InputWithState";
    case ViolationCode::UngroundedPath: return "UngroundedPath";
    case ViolationCode::DanglingGrounding: return "DanglingGrounding";
    case ViolationCode::DanglingBinding: return "DanglingBinding";
    case ViolationCode::BadOperatorArity: return "BadOperatorArity";
    case ViolationCode::NegativeParam: return "NegativeParam";
  }
  return "?";
}

const char* to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::shared_master: return "shared_master";
    case CouplingKind::shared_member: return "shared_member";
    case CouplingKind::both: return "both";
  }
  return "?";
}

std::vector<Violation> validate_level(const LevelModel& level) {
  std::vector<Violation> out;
  Collector c(out, level.name);
  check_level(level, c);
  return out;
}

std::vector<Violation> validate(const Hierarchy& h) {
  std::vector<Violation> out;
  for (std::size_t m = 0; m < h.levels.size(); ++m) {
    const LevelModel& level = h.levels[m];
    Collector c(out, level.name);
    check_level(level, c);
    check_ungrounded(level, c);

    const auto git = h.groundings.find(level.name);
    const std::map<ObserverId, GroundingSpec> empty;
    const auto& gs = git == h.groundings.end() ? empty : git->second;

    for (const auto& [id, spec] : level.observers)
      if (spec.kind == ObserverKind::grounded && !gs.count(id))
        c.add(ViolationCode::DanglingGrounding, {id}, "grounded observer '" + id + "' has no grounding");

    for (const auto& [id, g] : gs) {
      const std::string where = "grounding of '" + id + "'";
      auto sit = level.observers.find(id);
      if (sit == level.observers.end()) {
        c.add(ViolationCode::DanglingGrounding, {id}, where + ": no such observer in level '" + level.name + "'");
        continue;
      }
      const ObserverSpec& spec = sit->second;
      if (spec.kind != ObserverKind::grounded)
        c.add(ViolationCode::DanglingGrounding, {id}, where + ": observer is declared free");
      if (g.lower_ids.empty()) c.add(ViolationCode::DanglingGrounding, {id}, where + ": no lower observers");
      for (const auto& lid : g.lower_ids) {
        const bool ok = m == 0 ? h.pm_sources.count(lid) != 0 : h.levels[m - 1].contains(lid);
        if (!ok)
          c.add(ViolationCode::DanglingGrounding, {id, lid},
                where + ": '" + lid + "' is not " +
                    (m == 0 ? std::string("a PM source") : "an observer of level '" + h.levels[m - 1].name + "'"));
      }
      check_params(g.state_op, level.progression.continuous(), id, where, c);
      check_arity(g.state_op, g.lower_ids.size(), id, where, c);
      const std::size_t dim = natural_state_dim(g.state_op);
      if (spec.role == Role::input) {
        if (!is_algebraic(g.state_op))
          c.add(ViolationCode::BadOperatorArity, {id},
                where + ": a grounded input needs an algebraic operator, got " + operator_name(g.state_op));
        if (activation_index(spec.act_op) >= dim)
          c.add(ViolationCode::BadOperatorArity, {id}, where + ": activation index exceeds the grounded value");
      } else if (dim != spec.state_dim) {
        c.add(ViolationCode::BadOperatorArity, {id},
              where + ": " + operator_name(g.state_op) + " needs state dimension " + std::to_string(dim) +
                  ", observer has " + std::to_string(spec.state_dim));
      }
    }
  }
  for (const auto& [lname, gs] : h.groundings)
    if (!h.find_level(lname))
      for (const auto& [id, _] : gs) {
        Collector(out, lname).add(ViolationCode::DanglingGrounding, {id}, "grounding for unknown level '" + lname + "'");
      }
  return out;
}

std::vector<Violation> validate(const SourceModel& src) {
  auto out = validate(src.hierarchy);
  for (auto& v : out) {
    for (const auto& s : v.subjects) {
      if (const SourcePos* p = src.observer_span(v.level, s)) {
        v.span = *p;
        break;
      }
    }
    if (!v.span && v.code == ViolationCode::DanglingGrounding && !v.subjects.empty()) {
      auto it = src.spans.find("grounding/" + v.level + "/" + v.subjects.front());
      if (it != src.spans.end()) v.span = it->second;
    }
  }
  return out;
}

std::string format_violation(const Violation& v) {
  std::string out;
  if (v.span) out += std::to_string(v.span->line) + ":" + std::to_string(v.span->column) + ": ";
  out += std::string(to_string(v.code)) + " [" + v.level + "] " + v.message;
  return out;
}

// ---------------------------------------------------------------------------

CouplingReport coupling(const LevelModel& level, bool transitive) {
  const OrderRelation closure = binding_closure(level);
  std::map<ObserverId, std::vector<ObserverId>> up, down;  // transitive masters / members
  for (const auto& [id, _] : level.observers) {
    up[id];
    down[id];
  }
  for (const auto& [lo, hi] : closure) {
    up[lo].push_back(hi);
    down[hi].push_back(lo);
  }
  for (auto& [_, v] : up) std::sort(v.begin(), v.end());
  for (auto& [_, v] : down) std::sort(v.begin(), v.end());

  auto first_common = [](const std::vector<ObserverId>& x, const std::vector<ObserverId>& y) {
    std::optional<ObserverId> out;
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        out = *i;
        break;
      }
    }
    return out;
  };

  CouplingReport report;
  std::vector<ObserverId> ids;
  for (const auto& [id, _] : level.observers) ids.push_back(id);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      auto master = first_common(up[ids[i]], up[ids[j]]);
      auto member = first_common(down[ids[i]], down[ids[j]]);
      if (!master && !member) continue;
      CoupledPair p;
      p.a = ids[i];
      p.b = ids[j];
      p.master_witness = master;
      p.member_witness = member;
      if (master && member) {
        p.kind = CouplingKind::both;
        p.witness = std::min(*master, *member);
      } else if (master) {
        p.kind = CouplingKind::shared_master;
        p.witness = *master;
      } else {
        p.kind = CouplingKind::shared_member;
        p.witness = *member;
      }
      report.pairs.push_back(std::move(p));
    }

  if (transitive) {
    std::map<ObserverId, ObserverId> parent;
    std::function<ObserverId(const ObserverId&)> root = [&](const ObserverId& x) -> ObserverId {
      auto it = parent.find(x);
      if (it == parent.end() || it->second == x) return x;
      return it->second = root(it->second);
    };
    for (const auto& p : report.pairs) {
      parent.try_emplace(p.a, p.a);
      parent.try_emplace(p.b, p.b);
      ObserverId ra = root(p.a), rb = root(p.b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::map<ObserverId, std::vector<ObserverId>> groups;
    for (const auto& [id, _] : parent) groups[root(id)].push_back(id);
    std::vector<std::vector<ObserverId>> out;
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    report.groups = std::move(out);
  }
  return report;
}

// ---------------------------------------------------------------------------

double default_tolerance(const Hierarchy& h) {
  for (const auto& l : h.levels)
    if (l.progression.continuous()) return 1e-6;
  return 0.0;
}

std::int64_t default_settle(const Hierarchy& h, const std::string& upper) {
  const std::size_t pos = h.level_position(upper);
  std::int64_t settle = 0;
  for (std::size_t m = 0; m <= pos; ++m) settle += static_cast<std::int64_t>(binding_depth(h.levels[m])) + 1;
  return settle;
}

std::vector<ObserverId> comparable_observers(const Hierarchy& h, const std::string& upper) {
  const LevelModel& level = h.levels.at(h.level_position(upper));
  std::vector<ObserverId> out;
  for (const auto& [id, spec] : level.observers)
    if (spec.kind == ObserverKind::grounded && spec.role != Role::input && spec.state_op &&
        h.grounding(upper, id))
      out.push_back(id);
  return out;
}

CommuteReport check_commute(const Hierarchy& h, const std::string& upper, const RunConfig& cfg,
                            std::optional<double> tolerance, std::optional<std::int64_t> settle) {
  const std::size_t pos = h.level_position(upper);
  const auto compared = comparable_observers(h, upper);
  if (compared.empty())
    throw NoComparableObservers("level '" + upper +
                                "' has no grounded observer with within-level dynamics to compare");
  const double eps = tolerance.value_or(default_tolerance(h));
  if (!(eps >= 0.0)) throw InvalidParams("tolerance must be >= 0");
  const std::int64_t skip = settle.value_or(default_settle(h, upper));
  if (skip < 0) throw InvalidParams("settle must be >= 0");

  RunConfig hier_cfg = cfg;
  hier_cfg.standalone_level.reset();
  const TraceSet hier = run_hierarchy(h, {}, hier_cfg);
  const LevelTrace& grounded_path = hier.level(upper);

  const LevelModel& level = h.levels[pos];
  std::int64_t upper_steps = 0;
  for (const auto& [_, ch] : grounded_path.chronicles)
    if (!ch.empty()) upper_steps = std::max(upper_steps, ch.back().step + 1);

  InputSignals replay;
  for (const auto& [id, spec] : level.observers) {
    if (spec.role != Role::input) continue;
    signal::Series s;
    if (const Chronicle* ch = grounded_path.find(id))
      for (const auto& sample : *ch) s.values.push_back(sample.activation);
    replay[id] = std::move(s);
  }
  RunConfig solo_cfg = cfg;
  solo_cfg.standalone_level.reset();
  solo_cfg.duration.reset();
  solo_cfg.steps = upper_steps;
  const TraceSet solo = run_standalone(level, replay, solo_cfg);
  const LevelTrace& within_path = solo.level(upper);

  CommuteReport report;
  report.upper = upper;
  report.tolerance = eps;
  report.settle = skip;
  std::size_t total = 0;
  for (const auto& id : compared) {
    ObserverDiscrepancy d;
    d.id = id;
    double sum = 0.0;
    const Chronicle* a = grounded_path.find(id);
    if (a)
      for (const auto& sample : *a) {
        if (sample.step < skip) continue;
        auto b = within_path.activation_at(id, sample.step);
        if (!b) continue;
        const double diff = std::fabs(sample.activation - *b);
        if (d.worst_step < 0 || diff > d.max_abs) {
          d.worst_step = sample.step;
          d.max_abs = diff;
        }
        sum += diff;
        ++d.samples;
      }
    d.mean_abs = d.samples ? sum / static_cast<double>(d.samples) : 0.0;
    d.pass = d.max_abs <= eps;
    total += d.samples;
    report.max_discrepancy = std::max(report.max_discrepancy, d.max_abs);
    report.pass = report.pass && d.pass;
    report.observers.push_back(std::move(d));
  }
  if (total == 0)
    throw InvalidParams("horizon too short: no aligned step of '" + upper + "' at or after settle step " +
                        std::to_string(skip));
  return report;
}

}  // namespace fluent
