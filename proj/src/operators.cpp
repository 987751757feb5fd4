#include "fluent/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fluent/error.hpp"

namespace fluent {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sum(std::span<const double> xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

void expect_dim(std::span<double> state, std::size_t want, const char* kind) {
  if (state.size() != want)
    throw DimensionMismatch(std::string(kind) + " expects state dimension " + std::to_string(want) + ", got " +
                            std::to_string(state.size()));
}

}  // namespace

std::size_t natural_state_dim(const OperatorSpec& op) {
  return std::visit(Overloaded{
                        [](const op::Resonator&) -> std::size_t { return 2; },
                        [](const op::Oscillator&) -> std::size_t { return 2; },
                        [](const auto&) -> std::size_t { return 1; },
                    },
                    op);
}

bool is_algebraic(const OperatorSpec& op) {
  return std::visit(Overloaded{
                        [](const op::Leaky&) { return false; },
                        [](const op::Ema&) { return false; },
                        [](const op::Resonator&) { return false; },
                        [](const op::Oscillator&) { return false; },
                        [](const op::Proportional&) { return false; },
                        [](const auto&) { return true; },
                    },
                    op);
}

std::optional<std::size_t> required_arity(const OperatorSpec& op) {
  return std::visit(Overloaded{
                        [](const op::WeightedSum& w) -> std::optional<std::size_t> { return w.weights.size(); },
                        [](const op::Table& t) -> std::optional<std::size_t> {
                          // rows == 2^n
                          std::size_t n = 0;
                          while ((std::size_t{1} << n) < t.rows.size()) ++n;
                          if ((std::size_t{1} << n) != t.rows.size()) return std::nullopt;
                          return n;
                        },
                        [](const auto&) -> std::optional<std::size_t> { return std::nullopt; },
                    },
                    op);
}

void update_state(const OperatorSpec& spec, std::span<double> s, std::span<const double> a, Timing timing,
                  std::mt19937_64& rng) {
  const double h = timing.step();
  std::visit(Overloaded{
                 [&](const op::Const& c) {
                   expect_dim(s, 1, "const");
                   s[0] = c.value;
                 },
                 [&](const op::WeightedSum& w) {
                   expect_dim(s, 1, "wsum");
                   if (w.weights.size() != a.size())
                     throw DimensionMismatch("wsum has " + std::to_string(w.weights.size()) + " weights for " +
                                             std::to_string(a.size()) + " components");
                   s[0] = std::inner_product(w.weights.begin(), w.weights.end(), a.begin(), w.bias);
                 },
                 [&](const op::Product&) {
                   expect_dim(s, 1, "product");
                   s[0] = std::accumulate(a.begin(), a.end(), 1.0, std::multiplies<>());
                 },
                 [&](const op::MinMax& m) {
                   expect_dim(s, 1, "minmax");
                   if (a.empty()) {
                     s[0] = 0.0;
                   } else {
                     s[0] = m.mode == op::Extremum::max ? *std::max_element(a.begin(), a.end())
                                                        : *std::min_element(a.begin(), a.end());
                   }
                 },
                 [&](const op::Threshold& t) {
                   expect_dim(s, 1, "threshold");
                   s[0] = sum(a) >= t.theta ? t.hi : t.lo;
                 },
                 [&](const op::Leaky& l) {
                   expect_dim(s, 1, "leaky");
                   if (timing.continuous)
                     s[0] += h * (-l.lambda * s[0] + l.gain * sum(a));
                   else
                     s[0] = (1.0 - l.lambda) * s[0] + l.gain * sum(a);
                 },
                 [&](const op::Ema& e) {
                   expect_dim(s, 1, "ema");
                   s[0] += h * e.beta * (sum(a) - s[0]);
                 },
                 [&](const op::Resonator& r) {
                   expect_dim(s, 2, "resonator");
                   const double w = 2.0 * std::numbers::pi * r.freq;
                   const double x = s[0], v = s[1];
                   s[0] = x + h * v;
                   s[1] = v + h * (w * w * (sum(a) - x) - 2.0 * r.damping * w * v);
                 },
                 [&](const op::Oscillator& o) {
                   expect_dim(s, 2, "oscillator");
                   const double x = s[0], y = s[1];
                   s[0] = x + h * o.omega * y;
                   s[1] = y - h * o.omega * x;
                 },
                 [&](const op::Table& t) {
                   expect_dim(s, 1, "table");
                   if (a.size() >= 8 * sizeof(std::size_t) || t.rows.size() != (std::size_t{1} << a.size()))
                     throw DimensionMismatch("table has " + std::to_string(t.rows.size()) + " rows for " +
                                             std::to_string(a.size()) + " components");
                   std::size_t row = 0;
                   for (std::size_t i = 0; i < a.size(); ++i)
                     if (a[i] > 0.5) row |= std::size_t{1} << i;
                   s[0] = t.rows[row];
                 },
                 [&](const op::Proportional& p) {
                   expect_dim(s, 1, "proportional");
                   if (p.target >= a.size() || p.measure >= a.size())
                     throw DimensionMismatch("proportional index out of range for " + std::to_string(a.size()) +
                                             " components");
                   s[0] += h * p.gain * (a[p.target] - a[p.measure]);
                 },
                 [&](const op::Noise& n) {
                   expect_dim(s, 1, "noise");
                   std::normal_distribution<double> gauss(0.0, 1.0);
                   double v = sum(a) + n.sigma * gauss(rng);
                   s[0] = n.clamp ? std::max(0.0, v) : v;
                 },
             },
             spec);

  for (double x : s)
    if (!std::isfinite(x)) throw NonFiniteState(std::string(operator_name(spec)) + " produced a non-finite state");
}

std::vector<double> eval_state_update(const OperatorSpec& op, std::span<const double> state,
                                      std::span<const double> component_acts, Timing timing,
                                      std::mt19937_64& rng) {
  std::vector<double> next(state.begin(), state.end());
  update_state(op, next, component_acts, timing, rng);
  return next;
}

double eval_activation(const ActivationSpec& act, std::span<const double> state,
                       std::span<const double> master_acts, Modulation modulation, bool clamp_negative) {
  auto component = [&](std::size_t index) {
    if (index >= state.size())
      throw DimensionMismatch("activation reads state[" + std::to_string(index) + "] of a " +
                              std::to_string(state.size()) + "-dimensional state");
    return state[index];
  };
  double base = std::visit(Overloaded{
                               [&](const act::Identity& i) { return component(i.index); },
                               [&](const act::Linear& l) { return l.gain * component(l.index) + l.bias; },
                               [&](const act::Threshold& t) { return component(t.index) >= t.theta ? t.hi : t.lo; },
                           },
                           act);

  switch (modulation) {
    case Modulation::none:
      break;
    case Modulation::min_gate:
      for (double m : master_acts) base = std::min(base, m);
      break;
    case Modulation::product_gate:
      for (double m : master_acts) base *= m;
      break;
  }

  if (!std::isfinite(base)) throw NonFiniteState("activation is not finite");
  if (base < 0.0) {
    if (!clamp_negative) throw NegativeActivation("activation " + std::to_string(base) + " is negative");
    base = 0.0;
  }
  return base + 0.0;  // normalizes -0.0
}

double eval_signal(const SignalSpec& sig, std::int64_t step, double time) {
  return std::visit(Overloaded{
                        [](const signal::Const& c) { return c.value; },
                        [&](const signal::Step& s) { return time >= s.at ? s.hi : s.lo; },
                        [&](const signal::Sine& s) {
                          return s.offset + s.amplitude * std::sin(2.0 * std::numbers::pi * s.freq * time + s.phase);
                        },
                        [&](const signal::Square& s) {
                          double phase = std::fmod(time, s.period);
                          if (phase < 0) phase += s.period;
                          return phase < 0.5 * s.period ? s.hi : s.lo;
                        },
                        [&](const signal::Series& s) {
                          if (s.values.empty()) return 0.0;
                          if (step < 0) return s.values.front();
                          auto i = static_cast<std::size_t>(step);
                          return i < s.values.size() ? s.values[i] : s.values.back();
                        },
                    },
                    sig);
}

}  // namespace fluent
