#include "fluent/symbolic.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include "fluent/binding.hpp"
#include "fluent/error.hpp"

namespace fluent {

namespace {

bool valid_id(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

const Nonterminal& slot_of(const TermGrammar& g, const std::string& name) {
  const Nonterminal* nt = g.find(name);
  if (!nt || !nt->is_slot()) throw InvalidGrammar("'" + name + "' is not a selector slot");
  return *nt;
}

}  // namespace

const Nonterminal* TermGrammar::find(const std::string& n) const {
  for (const auto& nt : nonterminals)
    if (nt.name == n) return &nt;
  return nullptr;
}

std::vector<std::string> TermGrammar::surface_slots() const {
  if (!form.empty()) return form;
  std::vector<std::string> out;
  if (nonterminals.empty()) return out;
  std::function<void(const Nonterminal&)> walk = [&](const Nonterminal& nt) {
    if (nt.is_slot()) {
      out.push_back(nt.name);
      return;
    }
    for (const auto& c : nt.children)
      if (const Nonterminal* child = find(c)) walk(*child);
  };
  walk(root());
  return out;
}

std::string atom_id(const std::string& slot, const std::string& terminal) { return slot + "." + terminal; }

void check_grammar(const TermGrammar& g) {
  if (g.nonterminals.empty()) throw InvalidGrammar("grammar '" + g.name + "' has no nonterminals");
  std::set<std::string> names;
  for (const auto& nt : g.nonterminals) {
    if (!valid_id(nt.name)) throw InvalidGrammar("invalid nonterminal name '" + nt.name + "'");
    if (!names.insert(nt.name).second) throw InvalidGrammar("nonterminal '" + nt.name + "' declared twice");
    if (nt.is_slot() == !nt.children.empty())
      throw InvalidGrammar("nonterminal '" + nt.name + "' must have either children or a nonempty alphabet");
    std::set<std::string> terms;
    for (const auto& t : nt.alphabet) {
      if (!valid_id(t.name)) throw InvalidGrammar("invalid terminal name '" + t.name + "' in '" + nt.name + "'");
      if (t.symbol.empty()) throw InvalidGrammar("terminal '" + t.name + "' has an empty symbol");
      if (!terms.insert(t.name).second)
        throw InvalidGrammar("terminal '" + t.name + "' repeated in '" + nt.name + "'");
    }
  }

  // Tree shape: every nonterminal except the root is used exactly once, and
  // everything is reachable from the root (which also rules out recursion).
  std::map<std::string, int> uses;
  for (const auto& nt : g.nonterminals)
    for (const auto& c : nt.children) {
      if (!names.count(c)) throw InvalidGrammar("'" + nt.name + "' refers to unknown nonterminal '" + c + "'");
      ++uses[c];
    }
  if (uses.count(g.root().name)) throw InvalidGrammar("root '" + g.root().name + "' is used recursively");
  for (const auto& nt : g.nonterminals) {
    if (&nt == &g.root()) continue;
    int n = uses.count(nt.name) ? uses.at(nt.name) : 0;
    if (n != 1)
      throw InvalidGrammar("nonterminal '" + nt.name + "' is used " + std::to_string(n) +
                           " times; a tree grammar needs exactly one use");
  }
  std::set<std::string> reached;
  std::function<void(const std::string&)> walk = [&](const std::string& n) {
    if (!reached.insert(n).second) throw InvalidGrammar("recursive nonterminal '" + n + "'");
    for (const auto& c : g.find(n)->children) walk(c);
  };
  walk(g.root().name);
  if (reached.size() != names.size()) throw InvalidGrammar("some nonterminals are unreachable from the root");

  if (!g.form.empty()) {
    std::vector<std::string> want;
    for (const auto& nt : g.nonterminals)
      if (nt.is_slot()) want.push_back(nt.name);
    std::vector<std::string> got = g.form;
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want != got) throw InvalidGrammar("form must list every slot exactly once");
  }
}

LevelModel grammar_to_observers(const TermGrammar& g) {
  check_grammar(g);
  LevelModel level;
  level.name = g.name;
  for (const auto& nt : g.nonterminals) {
    ObserverSpec compound;
    compound.id = nt.name;
    compound.role = &nt == &g.root() ? Role::output : Role::intermediate;
    compound.kind = ObserverKind::free;
    compound.quality = nt.name;
    compound.state_dim = 1;
    compound.state_op = op::MinMax{op::Extremum::max};
    // Gating a child by its own parent would latch the tree at zero.
    compound.modulation = Modulation::none;
    if (nt.is_slot()) {
      for (const auto& t : nt.alphabet) {
        ObserverSpec atom;
        atom.id = atom_id(nt.name, t.name);
        atom.role = Role::input;
        atom.kind = ObserverKind::free;
        atom.quality = t.symbol;
        atom.modulation = Modulation::none;
        compound.components.push_back(atom.id);
        if (level.contains(atom.id)) throw InvalidGrammar("observer id '" + atom.id + "' is not unique");
        level.add(std::move(atom));
      }
    } else {
      compound.components = nt.children;
    }
    if (level.contains(compound.id)) throw InvalidGrammar("observer id '" + compound.id + "' is not unique");
    level.add(std::move(compound));
  }
  return level;
}

OneHotAssignment undefined_assignment(const TermGrammar& g) {
  OneHotAssignment a;
  for (const auto& nt : g.nonterminals) {
    a[nt.name] = 0.0;
    for (const auto& t : nt.alphabet) a[atom_id(nt.name, t.name)] = 0.0;
  }
  return a;
}

OneHotAssignment encode_term(const TermGrammar& g, const std::string& term) {
  check_grammar(g);
  OneHotAssignment a = undefined_assignment(g);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < term.size() && std::isspace(static_cast<unsigned char>(term[pos]))) ++pos;
  };
  for (const auto& slot_name : g.surface_slots()) {
    const Nonterminal& slot = slot_of(g, slot_name);
    skip_space();
    const Terminal* best = nullptr;
    for (const auto& t : slot.alphabet)
      if (term.compare(pos, t.symbol.size(), t.symbol) == 0 && (!best || t.symbol.size() > best->symbol.size()))
        best = &t;
    if (!best) {
      std::string expected;
      for (const auto& t : slot.alphabet) expected += (expected.empty() ? "" : " ") + t.symbol;
      throw TermParseError("expected one of {" + expected + "} for " + slot_name, pos);
    }
    a[atom_id(slot_name, best->name)] = 1.0;
    pos += best->symbol.size();
  }
  skip_space();
  if (pos != term.size()) throw TermParseError("unexpected trailing input", pos);
  // A complete term fills every slot, so every compound carries a defined subtree.
  for (const auto& nt : g.nonterminals) a[nt.name] = 1.0;
  return a;
}

std::optional<std::string> decode_term(const TermGrammar& g, const OneHotAssignment& a) {
  check_grammar(g);
  auto on = [&](const std::string& id) {
    auto it = a.find(id);
    return it != a.end() && it->second > 0.5;
  };
  std::map<std::string, const Terminal*> chosen;
  std::size_t defined = 0;
  for (const auto& nt : g.nonterminals) {
    if (!nt.is_slot()) continue;
    const Terminal* pick = nullptr;
    for (const auto& t : nt.alphabet) {
      if (!on(atom_id(nt.name, t.name))) continue;
      if (pick)
        throw OneHotViolation("slot " + nt.name + " has several active atoms (" + pick->name + ", " + t.name + ")");
      pick = &t;
    }
    chosen[nt.name] = pick;
    if (pick) ++defined;
  }
  const std::size_t slots = chosen.size();
  if (defined == 0) {
    for (const auto& nt : g.nonterminals)
      if (on(nt.name)) throw OneHotViolation("compound " + nt.name + " is active but no atom is");
    return std::nullopt;
  }
  if (defined != slots) throw OneHotViolation("term is only partially defined");
  for (const auto& nt : g.nonterminals)
    if (!on(nt.name)) throw OneHotViolation("compound " + nt.name + " is inactive over a defined subtree");

  std::string out;
  for (const auto& s : g.surface_slots()) out += chosen.at(s)->symbol;
  return out;
}

std::string random_term(const TermGrammar& g, std::mt19937_64& rng) {
  check_grammar(g);
  std::string out;
  for (const auto& s : g.surface_slots()) {
    const Nonterminal& slot = slot_of(g, s);
    std::uniform_int_distribution<std::size_t> pick(0, slot.alphabet.size() - 1);
    out += slot.alphabet[pick(rng)].symbol;
  }
  return out;
}

LevelModel bind_clock(LevelModel level, const ObserverSpec& clock, double dt) {
  if (!(dt > 0.0)) throw InvalidParams("clock dt must be positive");
  if (level.contains(clock.id)) throw InvalidParams("clock id '" + clock.id + "' already exists in the level");
  const auto masters = masters_of(level);
  ObserverSpec c = clock;
  c.components.clear();
  for (auto& [id, spec] : level.observers) {
    c.components.push_back(id);
    auto it = masters.find(id);
    if (it == masters.end() || it->second.empty()) spec.modulation = Modulation::min_gate;
  }
  level.add(std::move(c));
  level.progression = {Progression::Mode::continuous, dt};
  return level;
}

}  // namespace fluent
