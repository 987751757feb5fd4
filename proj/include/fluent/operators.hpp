#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fluent/model.hpp"

namespace fluent {

/// Time base of one update: discrete steps (dynamic kinds step with h = 1)
/// or fixed-step continuous time integrated with explicit Euler.
struct Timing {
  bool continuous = false;
  double dt = 1.0;

  static Timing of(const Progression& p) { return {p.continuous(), p.dt}; }
  double step() const { return continuous ? dt : 1.0; }
};

/// Dimension of the state vector an operator kind maintains.
std::size_t natural_state_dim(const OperatorSpec& op);

/// True for kinds whose new state does not depend on the previous state.
bool is_algebraic(const OperatorSpec& op);

/// Number of component activations the operator expects, or nullopt when any
/// number is accepted.
std::optional<std::size_t> required_arity(const OperatorSpec& op);

/// One application of a state update operator. Throws DimensionMismatch or
/// NonFiniteState.
std::vector<double> eval_state_update(const OperatorSpec& op, std::span<const double> state,
                                      std::span<const double> component_acts, Timing timing,
                                      std::mt19937_64& rng);

/// In-place variant used by the engine.
void update_state(const OperatorSpec& op, std::span<double> state, std::span<const double> component_acts,
                  Timing timing, std::mt19937_64& rng);

/// Base activation from the state, then modulated by the masters'
/// activations. Negative results throw NegativeActivation unless
/// `clamp_negative` is set.
double eval_activation(const ActivationSpec& act, std::span<const double> state,
                       std::span<const double> master_acts, Modulation modulation,
                       bool clamp_negative = false);

double eval_signal(const SignalSpec& signal, std::int64_t step, double time);

}  // namespace fluent
