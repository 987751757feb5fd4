#pragma once

// Builders for the reference systems: the speed governor, the three-level
// decimal/binary/register multiplier, a binary ripple adder and the clock
// oscillator. Every builder also ships as a .fc file under models/.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluent/engine.hpp"
#include "fluent/model.hpp"
#include "fluent/symbolic.hpp"

namespace fluent {

// ---------------------------------------------------------------------------
// Governor

struct GovernorParams {
  double K = 1.0;        // control gain (1/s)
  double d = 1.0;        // desired speed (rev/s)
  double c = 1.0;        // engine gain (rev/s per valve unit)
  double load = 1.0;     // load coefficient (1/s)
  double dt = 1e-3;      // integration step (s)
  double horizon = 15.0; // default run length (s)
};

/// Throws InvalidParams unless K >= 0, d >= 0, c > 0, load > 0, dt > 0, horizon > 0.
void check_governor_params(const GovernorParams& p);

/// Two continuous levels. "machine" holds the PM-driven setpoint d, the
/// proportional valve p' = K (d - s), the engine s' = c p - load s and an
/// internal speed model (a resonator with the closed-loop dynamics) that
/// feeds the valve. "governor" re-derives the valve command from grounded
/// speed and setpoint.
Hierarchy build_governor(const GovernorParams& p = {});

/// Time after which the speed stays within 1% of the setpoint (10 / load).
double governor_settling_time(const GovernorParams& p);

// ---------------------------------------------------------------------------
// Multiplier

struct MultiplierParams {
  int binary_ratio = 1;   // register steps per binary step
  int decimal_ratio = 1;  // binary steps per decimal step
  std::string term = "6*5";
  bool registers = true;  // add the word-valued register observers
};

/// Levels "register" (Boolean gates), "binary" (full-adder cells) and
/// "decimal" (one-hot term interface). Operands are single digits; the
/// operator is + or *.
Hierarchy build_multiplier(const MultiplierParams& p = {});

/// PM signals encoding a term such as "6*5". Throws TermParseError.
InputSignals multiplier_inputs(const std::string& term);

/// Decimal result at the last recorded step ("30"), or nullopt when the
/// output is undefined. Throws OneHotViolation for malformed outputs.
std::optional<std::string> multiplier_result(const TraceSet& t);

/// Bottom-level steps after which every level of a combinational hierarchy
/// has settled.
std::int64_t settling_steps(const Hierarchy& h);

TermGrammar arithmetic_grammar();
TermGrammar decimal_grammar();

// ---------------------------------------------------------------------------
// Binary adder

/// Discrete level "binaryadd" adding inputs a.0.. and b.0.. (bit 0 = least
/// significant) into outputs S.0 .. S.<bits>, built from full-adder cells.
LevelModel build_binary_adder(int bits);
/// The adder as a one-level hierarchy whose PM sources encode a + b.
Hierarchy build_adder_model(int bits, unsigned a, unsigned b);
InputSignals adder_inputs(int bits, unsigned a, unsigned b);
/// Sum bits at the last recorded step, most significant first.
std::vector<int> adder_sum_bits(const TraceSet& t, int bits);

// ---------------------------------------------------------------------------
// Clock

/// Blind oscillator observer "clock" whose activation is a 0/1 square wave
/// of the given period. Throws InvalidParams for period <= 0.
ObserverSpec build_clock(double period);

/// The arithmetic term tree recast in continuous time with a bound clock;
/// PM sources encode `term`.
Hierarchy build_clocked_term(const std::string& term = "6*2", double period = 1.0, double dt = 1e-3);

// ---------------------------------------------------------------------------

/// Names accepted by example_source: governor, multiplier, adder, clock, arith.
std::vector<std::string> example_names();
/// Canonical .fc text of a shipped example. Throws InvalidParams.
std::string example_source(const std::string& name);

}  // namespace fluent
