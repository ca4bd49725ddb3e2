#ifndef CAPWATT_OPTIMIZE_HPP
#define CAPWATT_OPTIMIZE_HPP

// Launch-power allocation: projected gradient ascent of the twin's predicted
// capacity under a fixed total launch power, and the reference allocations
// (flat TX, flat RX signal, flat SNR) it is compared against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "capwatt/core.hpp"
#include "capwatt/twin.hpp"

namespace capwatt {

enum class StepNormalization {
  max_abs,  // every channel moves step_db * d_k / max|d|
  adam,     // per-channel adaptive moments on the max-abs-scaled direction
};

struct GdSettings {
  std::size_t max_iterations = 300;
  double step_db = 0.1;
  StepNormalization normalization = StepNormalization::adam;
  double stop_tolerance = 1e-4;  // relative capacity change ...
  std::size_t plateau_window = 10;  // ... over this many iterations
  double clamp_margin_db = 0.0;     // widening of the twin's training envelope
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (max_iterations < 1) throw DomainError("GdSettings: max_iterations must be >= 1");
    if (!(step_db > 0.0)) throw DomainError("GdSettings: step must be positive");
    if (plateau_window < 1) throw DomainError("GdSettings: plateau window must be >= 1");
  }
};

struct OptimizationResult {
  PowerProfile start_profile;
  PowerProfile final_profile;
  std::vector<double> capacity_trace;  // predicted capacity at iterations 0..iterations_used
  bool converged = false;
  std::size_t iterations_used = 0;
};

inline void check_total_power(const PowerProfile& p, double total_mw, const char* who) {
  if (!(total_mw > 0.0)) throw DomainError(std::string(who) + ": total power must be positive");
  if (std::abs(p.total_mw() - total_mw) > 1e-6 * total_mw)
    throw DomainError(std::string(who) + ": profile does not satisfy the total-power constraint");
}

/// Component of the dB-domain gradient tangent to the constraint sum_k 10^(P_k/10) = const.
inline std::vector<double> project_to_tangent(const std::vector<double>& gradient, const std::vector<double>& linear_mw) {
  double gp = 0.0;
  double pp = 0.0;
  for (std::size_t k = 0; k < gradient.size(); ++k) {
    gp += gradient[k] * linear_mw[k];
    pp += linear_mw[k] * linear_mw[k];
  }
  const double mu = gp / pp;
  std::vector<double> d(gradient.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = gradient[k] - mu * linear_mw[k];
  return d;
}

/// Gradient ascent of the twin's capacity in dB coordinates. Each iteration
/// projects the gradient onto the constraint's tangent plane, takes a
/// normalized step, clamps every channel to the twin's training envelope and
/// restores the total power exactly with a uniform dB shift.
inline OptimizationResult maximize_capacity(const TwinModel& model, const PowerProfile& start, double total_power_mw,
                                            const GdSettings& settings, const CapacityObjective& objective) {
  settings.validate();
  check_total_power(start, total_power_mw, "maximize_capacity");
  const std::size_t k = model.channel_count();
  if (start.size() != k) throw ShapeError("maximize_capacity: start profile does not match the model");

  OptimizationResult result;
  result.start_profile = start;
  std::vector<double> p = start.values();
  std::vector<double> m(k, 0.0), v(k, 0.0);
  std::vector<double> lower(k), upper(k);
  for (std::size_t c = 0; c < k; ++c) {
    lower[c] = model.envelope_min_dbm[c] - settings.clamp_margin_db;
    upper[c] = model.envelope_max_dbm[c] + settings.clamp_margin_db;
  }

  CapacityGradient cg = capacity_and_gradient(model, p, objective);
  result.capacity_trace.push_back(cg.capacity);
  for (std::size_t it = 1; it <= settings.max_iterations; ++it) {
    std::vector<double> linear(k);
    for (std::size_t c = 0; c < k; ++c) linear[c] = dbm_to_mw(p[c]);
    std::vector<double> d = project_to_tangent(cg.gradient, linear);
    double scale = 0.0;
    double raw = 0.0;
    for (double x : d) scale = std::max(scale, std::abs(x));
    for (double x : cg.gradient) raw = std::max(raw, std::abs(x));
    // A gradient parallel to the constraint normal is stationary; what is left
    // after projection is rounding noise and must not be amplified to a full step.
    if (!(scale > 1e-10 * raw)) {
      result.converged = true;
      break;
    }

    for (std::size_t c = 0; c < k; ++c) {
      const double dir = d[c] / scale;
      double step = dir;
      if (settings.normalization == StepNormalization::adam) {
        m[c] = settings.beta1 * m[c] + (1.0 - settings.beta1) * dir;
        v[c] = settings.beta2 * v[c] + (1.0 - settings.beta2) * dir * dir;
        const double mh = m[c] / (1.0 - std::pow(settings.beta1, static_cast<double>(it)));
        const double vh = v[c] / (1.0 - std::pow(settings.beta2, static_cast<double>(it)));
        step = mh / (std::sqrt(vh) + settings.epsilon);
      }
      p[c] = std::clamp(p[c] + settings.step_db * step, lower[c], upper[c]);
    }
    p = rescale_to_total(PowerProfile(std::move(p)), total_power_mw).values();

    cg = capacity_and_gradient(model, p, objective);
    result.capacity_trace.push_back(cg.capacity);
    result.iterations_used = it;
    if (it >= settings.plateau_window) {
      const double past = result.capacity_trace[it - settings.plateau_window];
      if (std::abs(cg.capacity - past) <= settings.stop_tolerance * std::abs(cg.capacity)) {
        result.converged = true;
        break;
      }
    }
  }
  result.final_profile = PowerProfile(std::move(p));
  return result;
}

/// Independent runs from each start, returned in start order.
inline std::vector<OptimizationResult> maximize_from_starts(const TwinModel& model,
                                                            const std::vector<PowerProfile>& starts,
                                                            double total_power_mw, const GdSettings& settings,
                                                            const CapacityObjective& objective) {
  std::vector<OptimizationResult> out;
  out.reserve(starts.size());
  for (const auto& s : starts) out.push_back(maximize_capacity(model, s, total_power_mw, settings, objective));
  return out;
}

inline PowerProfile flat_tx_profile(double total_power_mw, const ChannelGrid& grid) {
  if (!(total_power_mw > 0.0)) throw DomainError("flat_tx_profile: total power must be positive");
  return PowerProfile(
      std::vector<double>(grid.channel_count, mw_to_dbm(total_power_mw / static_cast<double>(grid.channel_count))));
}

enum class FlattenTarget { rx_signal, snr };

/// Maps a launch profile to the per-channel quantity being flattened, in dB.
using FlattenOracle = std::function<std::vector<double>(const PowerProfile&)>;

struct FlattenSettings {
  double damping = 0.7;
  double tolerance_db = 0.01;
  std::size_t max_iterations = 100;
};

struct FlattenResult {
  PowerProfile profile;
  double deviation_db = 0.0;  // max - min of the target quantity at `profile`
  std::size_t iterations = 0;
};

/// Damped fixed-point iteration P_k <- P_k + damping (mean - value_k), each
/// step re-projected onto the total-power constraint.
inline FlattenResult flatten(FlattenTarget target, const FlattenOracle& oracle, const PowerProfile& start,
                             double total_power_mw, const FlattenSettings& settings = {}) {
  check_total_power(start, total_power_mw, "flatten");
  PowerProfile p = start;
  PowerProfile best = start;
  double best_dev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it <= settings.max_iterations; ++it) {
    const std::vector<double> values = oracle(p);
    if (values.size() != p.size()) throw ShapeError("flatten: oracle returned the wrong number of channels");
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double dev = *hi - *lo;
    if (dev < best_dev) {
      best_dev = dev;
      best = p;
    }
    if (dev <= settings.tolerance_db) return {p, dev, it};
    if (it == settings.max_iterations) break;
    double mean = 0.0;
    for (double x : values) mean += x;
    mean /= static_cast<double>(values.size());
    std::vector<double> next = p.values();
    for (std::size_t c = 0; c < next.size(); ++c) next[c] += settings.damping * (mean - values[c]);
    p = rescale_to_total(PowerProfile(std::move(next)), total_power_mw);
  }
  throw ConvergenceError(std::string("flatten (") + (target == FlattenTarget::snr ? "snr" : "rx_signal") +
                             "): deviation " + std::to_string(best_dev) + " dB after " +
                             std::to_string(settings.max_iterations) + " iterations",
                         best.values(), best_dev);
}

}  // namespace capwatt

#endif  // CAPWATT_OPTIMIZE_HPP
