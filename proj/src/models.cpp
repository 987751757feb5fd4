#include "fluent/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fluent/binding.hpp"
#include "fluent/dsl.hpp"
#include "fluent/error.hpp"

namespace fluent {

namespace {

using Bit = std::optional<ObserverId>;

const std::vector<double> kAnd2 = {0, 0, 0, 1};
const std::vector<double> kOr2 = {0, 1, 1, 1};
const std::vector<double> kXor2 = {0, 1, 1, 0};
const std::vector<double> kXor3 = {0, 1, 1, 0, 1, 0, 0, 1};
const std::vector<double> kMaj3 = {0, 0, 0, 1, 0, 1, 1, 1};

std::string bit(const std::string& stem, int i) { return stem + "." + std::to_string(i); }

ObserverSpec input(const ObserverId& id, ObserverKind kind = ObserverKind::free) {
  ObserverSpec s;
  s.id = id;
  s.role = Role::input;
  s.kind = kind;
  s.modulation = Modulation::none;
  return s;
}

ObserverSpec node(const ObserverId& id, OperatorSpec op, std::vector<ObserverId> comps,
                  Role role = Role::intermediate) {
  ObserverSpec s;
  s.id = id;
  s.role = role;
  s.state_op = std::move(op);
  s.state_dim = 1;
  s.components = std::move(comps);
  s.modulation = Modulation::none;
  return s;
}

GroundingSpec lift(std::vector<ObserverId> lower, OperatorSpec op = op::WeightedSum{{1.0}, 0.0}) {
  GroundingSpec g;
  g.lower_ids = std::move(lower);
  g.aggregator = Aggregator::latest;
  g.state_op = std::move(op);
  return g;
}

// Truth table over n inputs (bit i of the row index is input i).
template <class F>
std::vector<double> truth_table(int n, F f) {
  std::vector<double> rows(std::size_t{1} << n);
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = f(static_cast<unsigned>(r)) ? 1.0 : 0.0;
  return rows;
}

std::vector<double> powers_of_two(int n) {
  std::vector<double> w;
  for (int i = 0; i < n; ++i) w.push_back(std::ldexp(1.0, i));
  return w;
}

// Adder circuits at two granularities: two-input logic gates (register
// level) or three-input full-adder cells (binary level).
class Circuit {
 public:
  enum class Style { gates, cells };

  Circuit(LevelModel& level, Style style) : level_(level), style_(style) {}

  ObserverId table(const ObserverId& id, std::vector<ObserverId> comps, std::vector<double> rows,
                   Role role = Role::intermediate) {
    level_.add(node(id, op::Table{std::move(rows)}, std::move(comps), role));
    return id;
  }

  // One bit position: returns (sum, carry); absent inputs are constant 0.
  std::pair<Bit, Bit> add_bit(const std::string& stem, Bit a, Bit b, Bit cin) {
    std::vector<ObserverId> in;
    for (const Bit& x : {a, b, cin})
      if (x) in.push_back(*x);
    if (in.empty()) return {std::nullopt, std::nullopt};
    if (in.size() == 1) return {in[0], std::nullopt};
    if (in.size() == 2) {
      auto s = table(stem + ".s", in, kXor2);
      auto c = table(stem + ".c", in, kAnd2);
      return {s, c};
    }
    if (style_ == Style::cells) {
      auto s = table(stem + ".s", in, kXor3);
      auto c = table(stem + ".c", in, kMaj3);
      return {s, c};
    }
    auto x = table(stem + ".x", {in[0], in[1]}, kXor2);
    auto g = table(stem + ".g", {in[0], in[1]}, kAnd2);
    auto s = table(stem + ".s", {x, in[2]}, kXor2);
    auto p = table(stem + ".p", {x, in[2]}, kAnd2);
    auto c = table(stem + ".c", {g, p}, kOr2);
    return {s, c};
  }

  // Ripple-carry sum of two equally long bit vectors; one bit longer result.
  std::vector<Bit> ripple(const std::string& stem, const std::vector<Bit>& a, const std::vector<Bit>& b) {
    std::vector<Bit> out;
    Bit carry;
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto [s, c] = add_bit(bit(stem, static_cast<int>(i)), a[i], b[i], carry);
      out.push_back(s);
      carry = c;
    }
    out.push_back(carry);
    return out;
  }

  // Shift-add product of two 4-bit operands: eight result bits.
  std::vector<Bit> multiply(const std::vector<ObserverId>& x, const std::vector<ObserverId>& y) {
    const int n = static_cast<int>(x.size());
    auto pp = [&](int j, int i) {
      return table("pp." + std::to_string(j) + "." + std::to_string(i), {x[i], y[j]}, kAnd2);
    };
    std::vector<Bit> acc(2 * n);
    for (int i = 0; i < n; ++i) acc[i] = pp(0, i);
    for (int j = 1; j < n; ++j) {
      std::vector<Bit> a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = acc[j + i];
        b[i] = pp(j, i);
      }
      auto s = ripple("acc." + std::to_string(j), a, b);
      for (int i = 0; i <= n; ++i) acc[j + i] = s[i];
    }
    return acc;
  }

 private:
  LevelModel& level_;
  Style style_;
};

void add_word(LevelModel& level, const ObserverId& id, std::vector<ObserverId> bits) {
  auto weights = powers_of_two(static_cast<int>(bits.size()));
  level.add(node(id, op::WeightedSum{std::move(weights), 0.0}, std::move(bits), Role::output));
}

std::vector<ObserverId> bit_ids(const std::string& stem, int n) {
  std::vector<ObserverId> ids;
  for (int i = 0; i < n; ++i) ids.push_back(bit(stem, i));
  return ids;
}

constexpr int kOperandBits = 4;
constexpr int kProductBits = 8;
constexpr int kResultBits = 7;  // enough for 9 * 9

LevelModel register_level(bool registers) {
  LevelModel level;
  level.name = "register";
  Circuit c(level, Circuit::Style::gates);
  auto x = bit_ids("x", kOperandBits), y = bit_ids("y", kOperandBits);
  for (const auto& id : x) level.add(input(id));
  for (const auto& id : y) level.add(input(id));
  level.add(input("op.add"));
  level.add(input("op.mul"));

  const auto prod = c.multiply(x, y);
  std::vector<Bit> xa(x.begin(), x.end()), ya(y.begin(), y.end());
  const auto sum = c.ripple("sum", xa, ya);
  // Multiplication takes precedence when both operation lines are set.
  c.table("addsel", {"op.add", "op.mul"}, {0, 1, 0, 0});
  c.table("valid", {"op.add", "op.mul"}, kOr2, Role::output);
  std::vector<ObserverId> p;
  for (int i = 0; i < kProductBits; ++i) {
    const auto id = bit("P", i);
    if (i < static_cast<int>(sum.size())) {
      auto m = c.table(bit("mux.m", i), {*prod[i], "op.mul"}, kAnd2);
      auto a = c.table(bit("mux.a", i), {*sum[i], "addsel"}, kAnd2);
      c.table(id, {m, a}, kOr2, Role::output);
    } else {
      c.table(id, {*prod[i], "op.mul"}, kAnd2, Role::output);
    }
    p.push_back(id);
  }
  if (registers) {
    add_word(level, "reg.x", x);
    add_word(level, "reg.y", y);
    add_word(level, "reg.P", p);
  }
  return level;
}

LevelModel binary_level(bool registers, std::map<ObserverId, GroundingSpec>& groundings) {
  LevelModel level;
  level.name = "binary";
  Circuit c(level, Circuit::Style::cells);
  auto x = bit_ids("X", kOperandBits), y = bit_ids("Y", kOperandBits);
  for (int i = 0; i < kOperandBits; ++i) {
    level.add(input(x[i], ObserverKind::grounded));
    level.add(input(y[i], ObserverKind::grounded));
    groundings[x[i]] = lift({bit("x", i)});
    groundings[y[i]] = lift({bit("y", i)});
  }
  level.add(input("ADD", ObserverKind::grounded));
  level.add(input("MUL", ObserverKind::grounded));
  groundings["ADD"] = lift({"op.add"});
  groundings["MUL"] = lift({"op.mul"});

  const auto prod = c.multiply(x, y);
  std::vector<Bit> xa(x.begin(), x.end()), ya(y.begin(), y.end());
  const auto sum = c.ripple("sum", xa, ya);

  // Result selection in one cell: MUL ? product : (ADD ? sum : 0).
  const auto select = truth_table(4, [](unsigned r) {
    const bool prod_bit = r & 1, sum_bit = r & 2, add = r & 4, mul = r & 8;
    return mul ? prod_bit : (add && sum_bit);
  });
  std::vector<ObserverId> p;
  for (int i = 0; i < kProductBits; ++i) {
    const auto id = bit("P", i);
    ObserverSpec spec = i < static_cast<int>(sum.size())
                            ? node(id, op::Table{select}, {*prod[i], *sum[i], "ADD", "MUL"}, Role::output)
                            : node(id, op::Table{kAnd2}, {*prod[i], "MUL"}, Role::output);
    spec.kind = ObserverKind::grounded;
    level.add(spec);
    groundings[id] = lift({bit("P", i)});
    p.push_back(id);
  }
  ObserverSpec valid = node("VALID", op::Table{kOr2}, {"ADD", "MUL"}, Role::output);
  valid.kind = ObserverKind::grounded;
  level.add(valid);
  groundings["VALID"] = lift({"valid"});

  if (registers) {
    add_word(level, "X", x);
    add_word(level, "Y", y);
    add_word(level, "P", p);
  }
  return level;
}

int tens_of(int v) { return v / 10; }
int units_of(int v) { return v % 10; }

LevelModel decimal_level(std::map<ObserverId, GroundingSpec>& groundings) {
  const TermGrammar arith = arithmetic_grammar();
  const TermGrammar dec = decimal_grammar();
  LevelModel level = grammar_to_observers(arith);
  level.name = "decimal";
  level.observers.at(arith.root().name).role = Role::intermediate;

  // Operand digits and operator are read off the binary operands.
  std::vector<ObserverId> x_lines = bit_ids("X", kOperandBits), y_lines = bit_ids("Y", kOperandBits);
  for (auto* lines : {&x_lines, &y_lines}) {
    lines->push_back("ADD");
    lines->push_back("MUL");
  }
  for (int k = 0; k < 10; ++k) {
    const auto digit_rows = truth_table(kOperandBits + 2, [k](unsigned r) {
      const bool active = (r >> kOperandBits) != 0;
      return active && static_cast<int>(r & 0xF) == k;
    });
    for (const auto& [slot, lines] : {std::pair{"ARG1", &x_lines}, std::pair{"ARG2", &y_lines}}) {
      const auto id = atom_id(slot, "d" + std::to_string(k));
      level.observers.at(id).kind = ObserverKind::grounded;
      groundings[id] = lift(*lines, op::Table{digit_rows});
    }
  }
  level.observers.at(atom_id("OP", "plus")).kind = ObserverKind::grounded;
  level.observers.at(atom_id("OP", "times")).kind = ObserverKind::grounded;
  groundings[atom_id("OP", "plus")] = lift({"ADD", "MUL"}, op::Table{{0, 1, 0, 0}});
  groundings[atom_id("OP", "times")] = lift({"ADD", "MUL"}, op::Table{{0, 0, 1, 1}});

  // Within-level path: one product observer per (digit, digit, operator).
  std::map<ObserverId, std::vector<ObserverId>> tens, units;
  for (const auto& [name, opname] : {std::pair{"add", "plus"}, std::pair{"mul", "times"}}) {
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const ObserverId id = std::string(name) + "." + std::to_string(i) + "." + std::to_string(j);
        level.add(node(id, op::Product{},
                       {atom_id("ARG1", "d" + std::to_string(i)), atom_id("ARG2", "d" + std::to_string(j)),
                        atom_id("OP", opname)}));
        const int v = std::string(name) == "add" ? i + j : i * j;
        tens[atom_id("TENS", "d" + std::to_string(tens_of(v)))].push_back(id);
        units[atom_id("UNITS", "d" + std::to_string(units_of(v)))].push_back(id);
      }
  }

  // Result digits: grounded on the binary result bits and, within the level,
  // the maximum over the matching pair observers.
  LevelModel result = grammar_to_observers(dec);
  std::vector<ObserverId> p_lines = bit_ids("P", kResultBits);
  p_lines.push_back("VALID");
  for (auto& [id, spec] : result.observers) {
    if (spec.role != Role::input) {
      level.add(spec);
      continue;
    }
    const bool is_tens = id.rfind("TENS.", 0) == 0;
    const int k = id.back() - '0';
    auto& members = is_tens ? tens : units;
    spec.role = Role::output;
    spec.kind = ObserverKind::grounded;
    spec.state_dim = 1;
    spec.state_op = op::MinMax{op::Extremum::max};
    spec.components = members.count(id) ? members.at(id) : std::vector<ObserverId>{};
    level.add(spec);
    groundings[id] = lift(p_lines, op::Table{truth_table(kResultBits + 1, [&](unsigned r) {
                            const int v = static_cast<int>(r & 0x7F);
                            const bool valid = (r >> kResultBits) != 0;
                            return valid && v < 100 && (is_tens ? tens_of(v) : units_of(v)) == k;
                          })});
  }
  level.observers.at(dec.root().name).role = Role::output;
  return level;
}

OneHotAssignment last_activations(const LevelTrace& level) {
  OneHotAssignment a;
  for (const auto& [id, ch] : level.chronicles)
    if (!ch.empty()) a[id] = ch.back().activation;
  return a;
}

SignalSpec constant(double v) { return signal::Const{v}; }

}  // namespace

// ---------------------------------------------------------------------------

void check_governor_params(const GovernorParams& p) {
  auto bad = [](const std::string& what) { throw InvalidParams("governor: " + what); };
  if (!(p.K >= 0.0)) bad("K must be >= 0");
  if (!(p.d >= 0.0)) bad("d must be >= 0");
  if (!(p.c > 0.0)) bad("c must be > 0");
  if (!(p.load > 0.0)) bad("load must be > 0");
  if (!(p.dt > 0.0)) bad("dt must be > 0");
  if (!(p.horizon > 0.0)) bad("horizon must be > 0");
}

double governor_settling_time(const GovernorParams& p) { return 10.0 / p.load; }

Hierarchy build_governor(const GovernorParams& p) {
  check_governor_params(p);
  Hierarchy h;
  h.name = "governor";
  h.pm_sources["d"] = constant(p.d);

  LevelModel machine;
  machine.name = "machine";
  machine.progression = {Progression::Mode::continuous, p.dt};
  ObserverSpec d = input("d");
  d.quality = "desired speed";
  machine.add(d);

  // Closed-loop speed dynamics: s'' = cK (d - s) - load s'.
  const double omega = std::sqrt(p.c * p.K);
  ObserverSpec model = node("speed_model",
                            op::Resonator{omega / (2.0 * std::numbers::pi), omega > 0 ? p.load / (2.0 * omega) : 0.0},
                            {"d"});
  model.state_dim = 2;
  model.quality = "expected speed";
  machine.add(model);

  ObserverSpec valve = node("valve", op::Proportional{p.K, 0, 1}, {"d", "speed_model"});
  valve.quality = "valve opening";
  machine.add(valve);

  ObserverSpec engine = node("engine", op::Leaky{p.load, p.c}, {"valve"}, Role::output);
  engine.quality = "engine speed";
  machine.add(engine);

  LevelModel governor;
  governor.name = "governor";
  governor.progression = machine.progression;
  ObserverSpec speed = input("speed", ObserverKind::grounded);
  speed.quality = "measured speed";
  governor.add(speed);
  ObserverSpec setpoint = input("setpoint", ObserverKind::grounded);
  setpoint.quality = "desired speed";
  governor.add(setpoint);
  ObserverSpec command = node("valve", op::Proportional{p.K, 0, 1}, {"setpoint", "speed"}, Role::output);
  command.quality = "valve command";
  governor.add(command);

  h.levels = {machine, governor};
  h.groundings["governor"]["speed"] = lift({"engine"});
  h.groundings["governor"]["setpoint"] = lift({"d"});
  h.sync_ratios["governor"] = 1;
  return h;
}

// ---------------------------------------------------------------------------

TermGrammar arithmetic_grammar() {
  TermGrammar g;
  g.name = "arith";
  std::vector<Terminal> digits;
  for (int k = 0; k < 10; ++k) digits.push_back({"d" + std::to_string(k), std::to_string(k)});
  g.nonterminals = {
      {"BAT", {"OP", "ARGS"}, {}},
      {"OP", {}, {{"plus", "+"}, {"times", "*"}}},
      {"ARGS", {"ARG1", "ARG2"}, {}},
      {"ARG1", {}, digits},
      {"ARG2", {}, digits},
  };
  g.form = {"ARG1", "OP", "ARG2"};
  return g;
}

TermGrammar decimal_grammar() {
  TermGrammar g;
  g.name = "decimal";
  std::vector<Terminal> digits;
  for (int k = 0; k < 10; ++k) digits.push_back({"d" + std::to_string(k), std::to_string(k)});
  g.nonterminals = {
      {"RESULT", {"TENS", "UNITS"}, {}},
      {"TENS", {}, digits},
      {"UNITS", {}, digits},
  };
  g.form = {"TENS", "UNITS"};
  return g;
}

InputSignals multiplier_inputs(const std::string& term) {
  const TermGrammar g = arithmetic_grammar();
  const OneHotAssignment a = encode_term(g, term);
  int x = 0, y = 0;
  for (int k = 0; k < 10; ++k) {
    if (a.at(atom_id("ARG1", "d" + std::to_string(k))) > 0.5) x = k;
    if (a.at(atom_id("ARG2", "d" + std::to_string(k))) > 0.5) y = k;
  }
  InputSignals s;
  for (int i = 0; i < kOperandBits; ++i) {
    s[bit("x", i)] = constant((x >> i) & 1);
    s[bit("y", i)] = constant((y >> i) & 1);
  }
  s["op.add"] = constant(a.at(atom_id("OP", "plus")));
  s["op.mul"] = constant(a.at(atom_id("OP", "times")));
  return s;
}

Hierarchy build_multiplier(const MultiplierParams& p) {
  if (p.binary_ratio <= 0 || p.decimal_ratio <= 0) throw InvalidParams("multiplier: sync ratios must be positive");
  Hierarchy h;
  h.name = "multiplier";
  h.pm_sources = multiplier_inputs(p.term);
  h.levels.push_back(register_level(p.registers));
  h.levels.push_back(binary_level(p.registers, h.groundings["binary"]));
  h.levels.push_back(decimal_level(h.groundings["decimal"]));
  h.sync_ratios["binary"] = p.binary_ratio;
  h.sync_ratios["decimal"] = p.decimal_ratio;
  return h;
}

std::optional<std::string> multiplier_result(const TraceSet& t) {
  const auto digits = decode_term(decimal_grammar(), last_activations(t.level("decimal")));
  if (!digits) return std::nullopt;
  std::string v = *digits;
  while (v.size() > 1 && v.front() == '0') v.erase(v.begin());
  return v;
}

std::int64_t settling_steps(const Hierarchy& h) {
  std::int64_t total = 0, scale = 1;
  for (std::size_t m = 0; m < h.levels.size(); ++m) {
    if (m > 0) scale *= h.ratio(h.levels[m].name);
    total += (static_cast<std::int64_t>(binding_depth(h.levels[m])) + 1) * scale;
  }
  return total + scale;
}

// ---------------------------------------------------------------------------

LevelModel build_binary_adder(int bits) {
  if (bits <= 0 || bits > 16) throw InvalidParams("binary adder: bits must lie in 1..16");
  LevelModel level;
  level.name = "binaryadd";
  Circuit c(level, Circuit::Style::cells);
  std::vector<Bit> a, b;
  for (int i = 0; i < bits; ++i) {
    level.add(input(bit("a", i)));
    level.add(input(bit("b", i)));
    a.push_back(bit("a", i));
    b.push_back(bit("b", i));
  }
  const auto sum = c.ripple("add", a, b);
  for (int i = 0; i <= bits; ++i) level.add(node(bit("S", i), op::WeightedSum{{1.0}, 0.0}, {*sum[i]}, Role::output));
  return level;
}

InputSignals adder_inputs(int bits, unsigned a, unsigned b) {
  InputSignals s;
  for (int i = 0; i < bits; ++i) {
    s[bit("a", i)] = constant((a >> i) & 1U);
    s[bit("b", i)] = constant((b >> i) & 1U);
  }
  return s;
}

Hierarchy build_adder_model(int bits, unsigned a, unsigned b) {
  Hierarchy h;
  h.name = "binaryadd";
  h.levels.push_back(build_binary_adder(bits));
  h.pm_sources = adder_inputs(bits, a, b);
  return h;
}

std::vector<int> adder_sum_bits(const TraceSet& t, int bits) {
  const auto a = last_activations(t.level("binaryadd"));
  std::vector<int> out;
  for (int i = bits; i >= 0; --i) out.push_back(a.at(bit("S", i)) > 0.5 ? 1 : 0);
  return out;
}

// ---------------------------------------------------------------------------

ObserverSpec build_clock(double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw InvalidParams("clock period must be positive");
  ObserverSpec s;
  s.id = "clock";
  s.role = Role::intermediate;
  s.kind = ObserverKind::free;
  s.quality = "clock";
  s.state_dim = 2;
  s.state_op = op::Oscillator{2.0 * std::numbers::pi / period};
  s.act_op = act::Threshold{0.0, 0.0, 1.0, 0};
  s.initial_state = {1.0, 0.0};
  return s;
}

Hierarchy build_clocked_term(const std::string& term, double period, double dt) {
  const TermGrammar g = arithmetic_grammar();
  const OneHotAssignment a = encode_term(g, term);
  Hierarchy h;
  h.name = "clock";
  h.levels.push_back(bind_clock(grammar_to_observers(g), build_clock(period), dt));
  for (const auto& [id, spec] : h.levels.front().observers)
    if (spec.role == Role::input) h.pm_sources[id] = constant(a.at(id));
  return h;
}

// ---------------------------------------------------------------------------

std::vector<std::string> example_names() { return {"adder", "arith", "clock", "governor", "multiplier"}; }

std::string example_source(const std::string& name) {
  if (name == "governor") return render_model(build_governor());
  if (name == "multiplier") return render_model(build_multiplier());
  if (name == "adder") return render_model(build_adder_model(3, 6, 4));
  if (name == "clock") return render_model(build_clocked_term());
  if (name == "arith") {
    Hierarchy h;
    h.name = "grammars";
    return render_source(h, {arithmetic_grammar(), decimal_grammar()});
  }
  throw InvalidParams("unknown example '" + name + "'");
}

}  // namespace fluent
