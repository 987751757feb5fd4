#pragma once

// Static checks over hierarchies, coupling between observers of one level,
// and the cross-level commutativity check.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluent/dsl.hpp"
#include "fluent/engine.hpp"
#include "fluent/model.hpp"

namespace fluent {

enum class ViolationCode {
  Cycle,
  SelfBinding,
  InputWithState,
  UngroundedPath,
  DanglingGrounding,
  DanglingBinding,
  BadOperatorArity,
  NegativeParam,
};

const char* to_string(ViolationCode);

struct Violation {
  ViolationCode code;
  std::string level;
  std::vector<ObserverId> subjects;  // never empty; cycles list the witness path
  std::string message;
  std::optional<SourcePos> span;
};

/// All violations of the hierarchy, in level order. Never throws.
std::vector<Violation> validate(const Hierarchy& h);
/// Same, with source positions attached where the parser recorded them.
std::vector<Violation> validate(const SourceModel& src);
/// Structural checks of one level on its own (bindings, operators, inputs).
std::vector<Violation> validate_level(const LevelModel& level);

/// "code level: message" with an optional "line:col: " prefix.
std::string format_violation(const Violation& v);

enum class CouplingKind { shared_master, shared_member, both };
const char* to_string(CouplingKind);

struct CoupledPair {
  ObserverId a;  // a < b
  ObserverId b;
  CouplingKind kind;
  ObserverId witness;  // smallest witness of any kind
  std::optional<ObserverId> master_witness;
  std::optional<ObserverId> member_witness;
};

struct CouplingReport {
  std::vector<CoupledPair> pairs;  // sorted by (a, b)
  // Connected components of the transitive spread, when requested. Only
  // observers with at least one coupling appear; each group is sorted.
  std::optional<std::vector<std::vector<ObserverId>>> groups;
};

/// Throws CycleError / UnknownObserver for levels that are not strict orders.
CouplingReport coupling(const LevelModel& level, bool transitive);

struct ObserverDiscrepancy {
  ObserverId id;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  std::size_t samples = 0;
  std::int64_t worst_step = -1;  // first step with the maximum discrepancy
  bool pass = true;
};

struct CommuteReport {
  std::string upper;
  double tolerance = 0.0;
  std::int64_t settle = 0;
  std::vector<ObserverDiscrepancy> observers;  // sorted by id
  double max_discrepancy = 0.0;
  bool pass = true;
};

/// 0 when every level is discrete, 1e-6 otherwise.
double default_tolerance(const Hierarchy& h);

/// Number of leading upper steps excluded from the comparison: the summed
/// pipeline depth (longest binding chain plus one) of the levels up to and
/// including `upper`.
std::int64_t default_settle(const Hierarchy& h, const std::string& upper);

/// Grounded non-input observers of `upper` that also have a within-level operator.
std::vector<ObserverId> comparable_observers(const Hierarchy& h, const std::string& upper);

/// Compares the hierarchy run (grounding path) against a standalone run of
/// `upper` (within-level path) fed with the hierarchy's upper-level input
/// activations. Throws NoComparableObservers, UnknownObserver, InvalidParams.
CommuteReport check_commute(const Hierarchy& h, const std::string& upper, const RunConfig& cfg,
                            std::optional<double> tolerance = std::nullopt,
                            std::optional<std::int64_t> settle = std::nullopt);

}  // namespace fluent
