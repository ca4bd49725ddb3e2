#ifndef CAPWATT_LINKSIM_HPP
#define CAPWATT_LINKSIM_HPP

// Spectrally resolved model of a chain of constant-output-power EDFAs with
// optional static gain-flattening filters. Each amplifier is described by a
// single average inversion x:
//
//   G_k(x) [dB] = x (alpha_k + g*_k) - alpha_k
//   n_sp,k      = x (alpha_k + g*_k) / (x (alpha_k + g*_k) - alpha_k), clamped to [1, nsp_max]
//
// Signal powers are carried in mW per slot, ASE as a two-polarization power
// spectral density in W/Hz at each channel center.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "capwatt/core.hpp"

namespace capwatt {

struct EdfaParams {
  std::vector<double> absorption_db;  // alpha_k
  std::vector<double> gain_star_db;   // g*_k, gain at full inversion
  double ase_bandwidth_hz = 100e9;    // per channel, counted toward the output-power target
  double nsp_max = 10.0;
  // Replaces the computed spontaneous-emission factor when set (0 disables ASE generation).
  std::optional<double> nsp_override;

  std::size_t size() const noexcept { return absorption_db.size(); }

  void validate(std::size_t channel_count) const {
    if (absorption_db.size() != channel_count || gain_star_db.size() != channel_count)
      throw ShapeError("EdfaParams: coefficient vectors must have one entry per channel");
    for (std::size_t k = 0; k < channel_count; ++k)
      if (!(absorption_db[k] > 0.0) || !(gain_star_db[k] > 0.0))
        throw DomainError("EdfaParams: absorption and gain coefficients must be positive");
    if (!(ase_bandwidth_hz > 0.0)) throw DomainError("EdfaParams: ase_bandwidth must be positive");
    if (!(nsp_max >= 1.0)) throw DomainError("EdfaParams: nsp_max must be >= 1");
  }
};

/// Spectral shape coefficients for the default amplifier.
struct EdfaShape {
  double absorption_base_db = 7.0;
  double gain_star_base_db = 21.0;
};

/// Default Giles coefficients over the grid, u in [0, 1] across the band:
///   alpha(u) = a0 + 0.8 u + 0.9 sin(2 pi (1.4 u + 0.1))
///   g*(u)    = g0 - 1.2 u + 0.7 sin(2 pi (2.3 u + 0.55))
inline EdfaParams default_edfa_params(const ChannelGrid& grid, EdfaShape shape = {}) {
  EdfaParams p;
  p.ase_bandwidth_hz = grid.channel_spacing_hz;
  p.absorption_db.resize(grid.channel_count);
  p.gain_star_db.resize(grid.channel_count);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < grid.channel_count; ++k) {
    const double u = grid.normalized_position(k);
    p.absorption_db[k] = shape.absorption_base_db + 0.8 * u + 0.9 * std::sin(two_pi * (1.4 * u + 0.1));
    p.gain_star_db[k] = shape.gain_star_base_db - 1.2 * u + 0.7 * std::sin(two_pi * (2.3 * u + 0.55));
  }
  return p;
}

inline EdfaParams flat_edfa_params(const ChannelGrid& grid, double absorption_db, double gain_star_db) {
  EdfaParams p;
  p.ase_bandwidth_hz = grid.channel_spacing_hz;
  p.absorption_db.assign(grid.channel_count, absorption_db);
  p.gain_star_db.assign(grid.channel_count, gain_star_db);
  return p;
}

struct GffState {
  std::vector<double> attenuation_db;
  double excess_loss_db = 1.0;

  double mean_transmission() const {
    double sum = 0.0;
    for (double a : attenuation_db) sum += db_to_linear(-a);
    return sum / static_cast<double>(attenuation_db.size());
  }
};

struct SpectrumState {
  std::vector<double> signal_mw;
  std::vector<double> ase_psd;  // W/Hz, both polarizations

  std::size_t size() const noexcept { return signal_mw.size(); }

  /// One-polarization noise power in bandwidth `bandwidth_hz`, in mW.
  double noise_mw(std::size_t k, double bandwidth_hz) const { return 0.5 * ase_psd[k] * bandwidth_hz * 1e3; }

  double total_mw(double ase_bandwidth_hz) const {
    double total = 0.0;
    for (std::size_t k = 0; k < signal_mw.size(); ++k) total += signal_mw[k] + ase_psd[k] * ase_bandwidth_hz * 1e3;
    return total;
  }

  SnrVector snr(double symbol_rate_hz) const {
    std::vector<double> s(signal_mw.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = signal_mw[k] / noise_mw(k, symbol_rate_hz);
    return SnrVector(std::move(s));
  }
};

struct LinkConfig {
  ChannelGrid grid;
  int span_count = 12;
  int inline_edfa_count = 11;
  double span_loss_db = 16.5;
  double supply_power_w = 2.27;
  double wall_plug_efficiency = 0.066;  // delivered after the GFF in the flattened link
  bool gff_enabled = false;
  EdfaParams edfa;
  double tx_snr_db = 45.0;
  double gff_excess_loss_db = 1.0;

  // Filled in by calibrate_link().
  bool calibrated = false;
  double conversion_efficiency = 0.0;   // pump-to-amplifier-output efficiency
  double mean_gff_transmission = 1.0;   // T-bar of the filter designed for this operating point
  std::optional<GffState> gff;          // present iff gff_enabled
  std::vector<double> calibration_gain_db;
  std::vector<std::string> warnings;

  void validate() const {
    grid.validate();
    if (span_count < 1 || inline_edfa_count < 1 || inline_edfa_count > span_count)
      throw DomainError("LinkConfig: need span_count >= inline_edfa_count >= 1");
    if (!(span_loss_db >= 0.0)) throw DomainError("LinkConfig: span loss must be nonnegative");
    if (!(supply_power_w > 0.0)) throw DomainError("LinkConfig: supply power must be positive");
    if (!(wall_plug_efficiency > 0.0 && wall_plug_efficiency < 1.0))
      throw DomainError("LinkConfig: wall-plug efficiency must lie in (0, 1)");
    if (!(gff_excess_loss_db >= 0.0)) throw DomainError("LinkConfig: GFF excess loss must be nonnegative");
    edfa.validate(grid.channel_count);
    double best = 0.0;
    for (double g : edfa.gain_star_db) best = std::max(best, g);
    if (!(best > span_loss_db))
      throw DomainError("LinkConfig: no channel has full-inversion gain above the span loss");
  }

  /// Optical output of every in-line amplifier before any filter, in mW.
  double amplifier_output_mw() const {
    return conversion_efficiency * supply_power_w * 1e3 / static_cast<double>(inline_edfa_count);
  }

  /// Total launch power; equals the power delivered into each span.
  double tx_total_mw() const {
    return gff_enabled ? amplifier_output_mw() * mean_gff_transmission : amplifier_output_mw();
  }
};

inline std::vector<double> edfa_gain_db(double inversion, const EdfaParams& params) {
  if (!(inversion > 0.0 && inversion <= 1.0))
    throw DomainError("edfa_gain_db: inversion must lie in (0, 1], got " + std::to_string(inversion));
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = inversion * (params.absorption_db[k] + params.gain_star_db[k]) - params.absorption_db[k];
  return g;
}

inline SpectrumState apply_span(const SpectrumState& in, double loss_db) {
  if (!(loss_db >= 0.0)) throw DomainError("apply_span: loss must be nonnegative");
  const double t = db_to_linear(-loss_db);
  SpectrumState out = in;
  for (double& s : out.signal_mw) s *= t;
  for (double& a : out.ase_psd) a *= t;
  return out;
}

/// Per-channel fixed attenuation (the GFF).
inline SpectrumState apply_filter(const SpectrumState& in, const std::vector<double>& attenuation_db) {
  SpectrumState out = in;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double t = db_to_linear(-attenuation_db[k]);
    out.signal_mw[k] *= t;
    out.ase_psd[k] *= t;
  }
  return out;
}

namespace detail {

inline SpectrumState amplify_at(const SpectrumState& in, double inversion, const EdfaParams& params,
                                const ChannelGrid& grid) {
  SpectrumState out = in;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double total_db = inversion * (params.absorption_db[k] + params.gain_star_db[k]);
    const double gain_db = total_db - params.absorption_db[k];
    const double gain = db_to_linear(gain_db);
    out.signal_mw[k] = in.signal_mw[k] * gain;
    out.ase_psd[k] = in.ase_psd[k] * gain;
    if (gain > 1.0) {
      const double nsp = params.nsp_override ? *params.nsp_override
                                             : std::clamp(total_db / gain_db, 1.0, params.nsp_max);
      out.ase_psd[k] += 2.0 * nsp * kPlanck * grid.center_frequency(k) * (gain - 1.0);
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double kInversionFloor = 1e-3;
inline constexpr int kBisectionIterations = 200;

struct AmplifyResult {
  SpectrumState output;
  double inversion = 0.0;
};

/// Constant-output-power control: bisects the inversion until signal plus
/// in-band ASE at the output equals `target_output_mw`.
inline AmplifyResult amplify(const SpectrumState& in, double target_output_mw, const EdfaParams& params,
                             const ChannelGrid& grid, int edfa_index = -1) {
  if (!(target_output_mw > 0.0)) throw DomainError("amplify: target output power must be positive");
  if (in.size() != params.size() || in.ase_psd.size() != in.signal_mw.size())
    throw ShapeError("amplify: spectrum and amplifier parameters disagree on channel count");
  if (std::none_of(in.signal_mw.begin(), in.signal_mw.end(), [](double s) { return s > 0.0; }))
    throw DomainError("amplify: input carries no signal power");

  auto total_at = [&](double x) { return detail::amplify_at(in, x, params, grid).total_mw(params.ase_bandwidth_hz); };
  const std::string where = edfa_index >= 0 ? "EDFA " + std::to_string(edfa_index) : "EDFA";

  double lo = kInversionFloor;
  double hi = 1.0;
  const double p_hi = total_at(hi);
  const double p_lo = total_at(lo);
  if (p_hi < target_output_mw)
    throw PumpTargetUnreachable("pump target unreachable at " + where + ": full inversion yields " +
                                    std::to_string(p_hi) + " mW < target " + std::to_string(target_output_mw) + " mW",
                                edfa_index);
  if (p_lo > target_output_mw)
    throw PumpTargetUnreachable("pump target unreachable at " + where + ": minimum inversion yields " +
                                    std::to_string(p_lo) + " mW > target " + std::to_string(target_output_mw) + " mW",
                                edfa_index);

  for (int it = 0; it < kBisectionIterations && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double p = total_at(mid);
    if (p < target_output_mw)
      lo = mid;
    else
      hi = mid;
    if (std::abs(p - target_output_mw) <= 1e-14 * target_output_mw) {
      lo = hi = mid;
      break;
    }
  }
  const double x = 0.5 * (lo + hi);
  return {detail::amplify_at(in, x, params, grid), x};
}

/// TX spectrum for a launch profile: signal as given plus the transmitter's ASE floor.
inline SpectrumState transmitter_state(const PowerProfile& tx, double tx_snr_db, double symbol_rate_hz) {
  SpectrumState s;
  s.signal_mw = tx.linear_mw();
  s.ase_psd.resize(s.signal_mw.size());
  const double snr = db_to_linear(tx_snr_db);
  for (std::size_t k = 0; k < s.size(); ++k) s.ase_psd[k] = 2.0 * s.signal_mw[k] * 1e-3 / (snr * symbol_rate_hz);
  return s;
}

namespace detail {

inline void check_finite(const SpectrumState& s, int stage) {
  for (std::size_t k = 0; k < s.size(); ++k)
    if (!std::isfinite(s.signal_mw[k]) || !std::isfinite(s.ase_psd[k]))
      throw NumericError("nonfinite power after link stage " + std::to_string(stage), stage);
}

}  // namespace detail

/// Resolves the amplifier conversion efficiency and, for the flattened link,
/// designs the static GFF at the flat-load operating point.
///
/// The quoted wall-plug efficiency is referenced after the filter, so the
/// amplifier's own conversion efficiency is wall_plug / T-bar, where T-bar is
/// the mean filter transmission. The same amplifier (same conversion
/// efficiency) is used with and without the filter.
inline LinkConfig calibrate_link(LinkConfig config, int max_rounds = 5, double tolerance = 1e-6) {
  config.validate();
  const ChannelGrid& grid = config.grid;
  const auto n = static_cast<double>(grid.channel_count);

  double transmission = 1.0;
  std::vector<double> gains;
  std::vector<double> attenuation;
  bool converged = false;
  for (int round = 0; round < max_rounds; ++round) {
    const double raw_mw = config.wall_plug_efficiency / transmission * config.supply_power_w * 1e3 /
                          config.inline_edfa_count;
    // Flat load at the delivered (post-filter) launch power of the flattened link.
    const PowerProfile flat(std::vector<double>(grid.channel_count, mw_to_dbm(raw_mw * transmission / n)));
    const SpectrumState in =
        apply_span(transmitter_state(flat, config.tx_snr_db, grid.symbol_rate_hz), config.span_loss_db);
    const AmplifyResult amp = amplify(in, raw_mw, config.edfa, grid, 0);

    gains.assign(grid.channel_count, 0.0);
    for (std::size_t k = 0; k < gains.size(); ++k) gains[k] = mw_to_dbm(amp.output.signal_mw[k]) - mw_to_dbm(in.signal_mw[k]);
    const double g_min = *std::min_element(gains.begin(), gains.end());
    attenuation.assign(grid.channel_count, 0.0);
    for (std::size_t k = 0; k < gains.size(); ++k) attenuation[k] = gains[k] - g_min + config.gff_excess_loss_db;

    double next = 0.0;
    for (double a : attenuation) next += db_to_linear(-a);
    next /= n;
    const bool done = std::abs(next - transmission) <= tolerance;
    transmission = next;
    if (done) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw CalibrationError("calibrate_link: mean GFF transmission did not converge in " +
                           std::to_string(max_rounds) + " rounds");

  config.mean_gff_transmission = transmission;
  config.conversion_efficiency = config.wall_plug_efficiency / transmission;
  config.calibration_gain_db = gains;
  config.gff.reset();
  if (config.gff_enabled) {
    config.gff = GffState{attenuation, config.gff_excess_loss_db};
    double lo = 1e300;
    double hi = -1e300;
    for (std::size_t k = 0; k < gains.size(); ++k) {
      const double net = gains[k] - attenuation[k];
      lo = std::min(lo, net);
      hi = std::max(hi, net);
    }
    if (hi - lo > 1.5)
      config.warnings.push_back("flattened gain ripple " + std::to_string(hi - lo) + " dB exceeds 1.5 dB");
  }
  config.calibrated = true;
  return config;
}

struct PropagationResult {
  SpectrumState rx;
  SnrVector snr;
  double max_inline_dbm = -1e300;   // highest per-channel signal at the TX or any amplifier output
  std::vector<double> inversions;  // one per in-line amplifier
};

inline void check_launch_power(const PowerProfile& tx, const LinkConfig& config) {
  const double expected = config.tx_total_mw();
  const double actual = tx.total_mw();
  if (std::abs(actual - expected) > 1e-6 * expected)
    throw DomainError("propagate: launch power " + std::to_string(actual) + " mW differs from the link's " +
                      std::to_string(expected) + " mW");
}

inline PropagationResult propagate(const PowerProfile& tx, const LinkConfig& config) {
  if (!config.calibrated) throw DomainError("propagate: link is not calibrated");
  if (tx.size() != config.grid.channel_count) throw ShapeError("propagate: profile length does not match the grid");
  check_launch_power(tx, config);

  const ChannelGrid& grid = config.grid;
  PropagationResult result;
  SpectrumState state = transmitter_state(tx, config.tx_snr_db, grid.symbol_rate_hz);
  const double target = config.amplifier_output_mw();
  for (double p : tx.values()) result.max_inline_dbm = std::max(result.max_inline_dbm, p);
  int stage = 0;
  for (int i = 0; i < config.inline_edfa_count; ++i) {
    state = apply_span(state, config.span_loss_db);
    AmplifyResult amp = amplify(state, target, config.edfa, grid, i);
    state = std::move(amp.output);
    result.inversions.push_back(amp.inversion);
    detail::check_finite(state, ++stage);
    for (double s : state.signal_mw) result.max_inline_dbm = std::max(result.max_inline_dbm, 10.0 * std::log10(s));
    if (config.gff) state = apply_filter(state, config.gff->attenuation_db);
  }
  for (int i = config.inline_edfa_count; i < config.span_count; ++i) {
    state = apply_span(state, config.span_loss_db);
    detail::check_finite(state, ++stage);
  }
  result.snr = state.snr(grid.symbol_rate_hz);
  result.rx = std::move(state);
  return result;
}

}  // namespace capwatt

#endif  // CAPWATT_LINKSIM_HPP
