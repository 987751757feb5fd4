#include <array>
#include <charconv>
#include <sstream>

#include "fluent/dsl.hpp"
#include "fluent/operators.hpp"

namespace fluent {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string number_list(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_number(xs[i]);
  }
  return out + "]";
}

std::string id_list(const std::vector<std::string>& ids) {
  std::string out = "[";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out + "]";
}

std::string num(double v) { return format_number(v); }
std::string idx(std::size_t v) { return std::to_string(v); }

std::string render_activation(const ActivationSpec& a) {
  return std::visit(Overloaded{
                        [](const act::Identity& i) { return "identity(index=" + idx(i.index) + ")"; },
                        [](const act::Linear& l) {
                          return "linear(gain=" + num(l.gain) + ", bias=" + num(l.bias) + ", index=" + idx(l.index) +
                                 ")";
                        },
                        [](const act::Threshold& t) {
                          return "threshold(theta=" + num(t.theta) + ", lo=" + num(t.lo) + ", hi=" + num(t.hi) +
                                 ", index=" + idx(t.index) + ")";
                        },
                    },
                    a);
}

std::string render_signal(const SignalSpec& s) {
  return std::visit(Overloaded{
                        [](const signal::Const& c) { return "const(value=" + num(c.value) + ")"; },
                        [](const signal::Step& st) {
                          return "step(at=" + num(st.at) + ", lo=" + num(st.lo) + ", hi=" + num(st.hi) + ")";
                        },
                        [](const signal::Sine& si) {
                          return "sine(amplitude=" + num(si.amplitude) + ", freq=" + num(si.freq) +
                                 ", phase=" + num(si.phase) + ", offset=" + num(si.offset) + ")";
                        },
                        [](const signal::Square& sq) {
                          return "square(period=" + num(sq.period) + ", lo=" + num(sq.lo) + ", hi=" + num(sq.hi) +
                                 ")";
                        },
                        [](const signal::Series& se) { return "series(values=" + number_list(se.values) + ")"; },
                    },
                    s);
}

std::string render_event(const StructureEventRule& rule) {
  const auto& t = rule.trigger;
  std::string out = "when a(" + t.observer + ") " + (t.direction == Direction::above ? ">" : "<") + " " +
                    num(t.threshold) + " for " + std::to_string(t.persistence) + " steps: ";
  out += std::visit(Overloaded{
                        [](const event::Create& c) { return "create " + render_observer(c.spec); },
                        [](const event::Terminate& x) { return "terminate " + x.id; },
                        [](const event::Bind& b) { return "bind " + b.child + " -> " + b.parent; },
                        [](const event::Unbind& u) { return "unbind " + u.child + " -> " + u.parent; },
                        [](const event::Split& s) { return "split " + s.source + " -> " + s.copy; },
                        [](const event::Join& j) { return "join " + id_list(j.members) + " -> " + j.compound; },
                    },
                    rule.action);
  return out;
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "0";
  return std::string(buf.data(), ptr);
}

std::string render_operator(const OperatorSpec& op) {
  return std::visit(Overloaded{
                        [](const op::Const& c) { return "const(value=" + num(c.value) + ")"; },
                        [](const op::WeightedSum& w) {
                          return "wsum(w=" + number_list(w.weights) + ", bias=" + num(w.bias) + ")";
                        },
                        [](const op::Product&) { return std::string("product()"); },
                        [](const op::MinMax& m) {
                          return std::string("minmax(mode=") + (m.mode == op::Extremum::max ? "max" : "min") + ")";
                        },
                        [](const op::Threshold& t) {
                          return "threshold(theta=" + num(t.theta) + ", lo=" + num(t.lo) + ", hi=" + num(t.hi) + ")";
                        },
                        [](const op::Leaky& l) {
                          return "leaky(lambda=" + num(l.lambda) + ", gain=" + num(l.gain) + ")";
                        },
                        [](const op::Ema& e) { return "ema(beta=" + num(e.beta) + ")"; },
                        [](const op::Resonator& r) {
                          return "resonator(f=" + num(r.freq) + ", damping=" + num(r.damping) + ")";
                        },
                        [](const op::Oscillator& o) { return "oscillator(omega=" + num(o.omega) + ")"; },
                        [](const op::Table& t) { return "table(rows=" + number_list(t.rows) + ")"; },
                        [](const op::Proportional& p) {
                          return "proportional(k=" + num(p.gain) + ", target=" + idx(p.target) +
                                 ", measure=" + idx(p.measure) + ")";
                        },
                        [](const op::Noise& n) {
                          return "noise(sigma=" + num(n.sigma) + ", clamp=" + (n.clamp ? "true" : "false") + ")";
                        },
                    },
                    op);
}

std::string render_observer(const ObserverSpec& spec) {
  std::string out = "observer " + spec.id + " role=" + to_string(spec.role) + " kind=" + to_string(spec.kind);
  if (!spec.quality.empty()) out += " quality=" + quote(spec.quality);
  const std::size_t inferred =
      (spec.role == Role::input || !spec.state_op) ? 0 : natural_state_dim(*spec.state_op);
  if (spec.state_dim != inferred) out += " dim=" + std::to_string(spec.state_dim);
  if (spec.state_op) out += " state=" + render_operator(*spec.state_op);
  if (!(spec.act_op == ActivationSpec{act::Identity{}})) out += " act=" + render_activation(spec.act_op);
  if (spec.modulation != Modulation::min_gate) out += std::string(" mod=") + to_string(spec.modulation);
  if (!spec.components.empty()) out += " components=" + id_list(spec.components);
  if (!spec.initial_state.empty()) out += " init=" + number_list(spec.initial_state);
  return out;
}

std::string render_model(const Hierarchy& h) {
  std::ostringstream out;
  out << "hierarchy " << h.name << "\n";
  if (!h.pm_sources.empty()) out << "\n";
  for (const auto& [id, sig] : h.pm_sources) out << "pm " << id << " = " << render_signal(sig) << "\n";

  for (const auto& level : h.levels) {
    out << "\nlevel " << level.name << " mode ";
    if (level.progression.continuous())
      out << "continuous dt=" << num(level.progression.dt);
    else
      out << "discrete";
    if (level.clamp_negative) out << " clamp";
    out << " {\n";
    for (const auto& [id, spec] : level.observers) out << "  " << render_observer(spec) << "\n";
    if (auto it = h.groundings.find(level.name); it != h.groundings.end()) {
      for (const auto& [id, g] : it->second)
        out << "  grounding " << id << " <- " << id_list(g.lower_ids) << " agg=" << to_string(g.aggregator)
            << " state=" << render_operator(g.state_op) << "\n";
    }
    for (const auto& rule : level.events) out << "  " << render_event(rule) << "\n";
    out << "}\n";
  }

  if (!h.sync_ratios.empty()) out << "\n";
  // Emit syncs bottom-up so the file reads in level order.
  for (std::size_t i = 1; i < h.levels.size(); ++i) {
    auto it = h.sync_ratios.find(h.levels[i].name);
    if (it != h.sync_ratios.end())
      out << "sync " << h.levels[i].name << ":" << h.levels[i - 1].name << " = " << it->second << "\n";
  }
  return out.str();
}

std::string render_grammar(const TermGrammar& g) {
  std::ostringstream out;
  out << "grammar " << g.name << " {\n";
  for (const auto& nt : g.nonterminals) {
    out << "  " << nt.name;
    if (nt.is_slot()) {
      out << " = {";
      for (std::size_t i = 0; i < nt.alphabet.size(); ++i) {
        if (i) out << ", ";
        out << nt.alphabet[i].name << " " << quote(nt.alphabet[i].symbol);
      }
      out << "}\n";
    } else {
      out << " -> " << id_list(nt.children) << "\n";
    }
  }
  if (!g.form.empty()) out << "  form " << id_list(g.form) << "\n";
  out << "}\n";
  return out.str();
}

std::string render_source(const Hierarchy& h, const std::vector<TermGrammar>& grammars) {
  std::string out = render_model(h);
  for (const auto& g : grammars) out += "\n" + render_grammar(g);
  return out;
}

}  // namespace fluent
