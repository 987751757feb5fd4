#pragma once

// One-hot recasting of symbolic terms as observer binding trees.
//
// A TermGrammar is a non-recursive tree grammar. Each nonterminal is either
// a production (ordered child nonterminals) or a selector slot (a terminal
// alphabet). The observer template mirrors the grammar tree: one compound
// per nonterminal, one atomic observer "<slot>.<terminal>" per terminal in
// each slot. A term's value is encoded by activating exactly one atom per
// slot; every ancestor of an active atom is active too.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluent/model.hpp"

namespace fluent {

struct Terminal {
  std::string name;    // observer-id suffix, e.g. "times"
  std::string symbol;  // surface text, e.g. "*"
  bool operator==(const Terminal&) const = default;
};

struct Nonterminal {
  std::string name;
  std::vector<std::string> children;  // production
  std::vector<Terminal> alphabet;     // selector slot
  bool is_slot() const { return !alphabet.empty(); }
  bool operator==(const Nonterminal&) const = default;
};

struct TermGrammar {
  std::string name;
  std::vector<Nonterminal> nonterminals;  // the first one is the root
  std::vector<std::string> form;          // surface order of slots; empty means tree leaf order

  const Nonterminal& root() const { return nonterminals.front(); }
  const Nonterminal* find(const std::string& name) const;
  /// Slots in surface order (form if given, else depth-first leaf order).
  std::vector<std::string> surface_slots() const;
  bool operator==(const TermGrammar&) const = default;
};

using OneHotAssignment = std::map<ObserverId, double>;

/// Throws InvalidGrammar (empty alphabet, recursion, unknown or repeated
/// nonterminal, a slot missing from the form, ...).
void check_grammar(const TermGrammar& g);

std::string atom_id(const std::string& slot, const std::string& terminal);

/// Discrete level whose binding tree mirrors the grammar tree. Atoms are
/// free inputs; compounds are selectors with max-of-children state.
LevelModel grammar_to_observers(const TermGrammar& g);

/// Throws TermParseError (with position) when the term does not match.
OneHotAssignment encode_term(const TermGrammar& g, const std::string& term);

/// All-zero assignment over every template observer ("no defined value").
OneHotAssignment undefined_assignment(const TermGrammar& g);

/// nullopt means Undefined (all zero). Throws OneHotViolation when a slot has
/// several active atoms, or when some slots are defined and others are not.
std::optional<std::string> decode_term(const TermGrammar& g, const OneHotAssignment& a);

/// A uniformly random term of the grammar.
std::string random_term(const TermGrammar& g, std::mt19937_64& rng);

/// Continuous recast: binds `clock` as a master of every other observer of
/// `level` and switches the level to continuous time. The tree roots get
/// min_gate modulation, so their activations follow the clock's square wave.
/// Observers below the roots keep their modulation: min-gating a component by
/// a master whose state reads that component latches both at zero.
LevelModel bind_clock(LevelModel level, const ObserverSpec& clock, double dt);

}  // namespace fluent
