#ifndef CAPWATT_CORE_HPP
#define CAPWATT_CORE_HPP

// Frequency plan, power units and the two scalar metrics of the link:
// polarization-multiplexed Shannon capacity and capacity per Watt of supply.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "capwatt/errors.hpp"

namespace capwatt {

inline constexpr double kPlanck = 6.62607015e-34;  // J s

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double mw_to_dbm(double mw) {
  if (!(mw > 0.0)) throw DomainError("mw_to_dbm: linear power must be positive, got " + std::to_string(mw));
  return 10.0 * std::log10(mw);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// WDM plan: `channel_count` signal slots of `slot_width`, centered every
/// `channel_spacing` (signal slots interleaved with empty ones).
struct ChannelGrid {
  std::size_t channel_count = 40;
  double slot_width_hz = 50e9;
  double channel_spacing_hz = 100e9;
  double start_frequency_hz = 192.0e12;
  double symbol_rate_hz = 50e9;

  void validate() const {
    if (channel_count < 1) throw DomainError("ChannelGrid: channel_count must be >= 1");
    if (!(slot_width_hz > 0.0)) throw DomainError("ChannelGrid: slot_width must be positive");
    if (!(channel_spacing_hz >= slot_width_hz))
      throw DomainError("ChannelGrid: channel_spacing must be >= slot_width");
    if (!(symbol_rate_hz > 0.0)) throw DomainError("ChannelGrid: symbol_rate must be positive");
  }

  /// Center of channel k, zero-based.
  double center_frequency(std::size_t k) const {
    return start_frequency_hz + static_cast<double>(k) * channel_spacing_hz;
  }

  double occupied_bandwidth() const {
    return static_cast<double>(channel_count - 1) * channel_spacing_hz + slot_width_hz;
  }

  /// Position of channel k across the band, in [0, 1]. Zero for a single channel.
  double normalized_position(std::size_t k) const {
    if (channel_count == 1) return 0.0;
    return static_cast<double>(k) / static_cast<double>(channel_count - 1);
  }
};

/// Per-channel launch powers in dBm per slot.
class PowerProfile {
 public:
  PowerProfile() = default;
  explicit PowerProfile(std::vector<double> powers_dbm) : dbm_(std::move(powers_dbm)) {
    for (double p : dbm_)
      if (!std::isfinite(p)) throw DomainError("PowerProfile: nonfinite channel power");
  }

  std::size_t size() const noexcept { return dbm_.size(); }
  double operator[](std::size_t k) const { return dbm_[k]; }
  std::span<const double> dbm() const noexcept { return dbm_; }
  const std::vector<double>& values() const noexcept { return dbm_; }

  std::vector<double> linear_mw() const {
    std::vector<double> out(dbm_.size());
    std::transform(dbm_.begin(), dbm_.end(), out.begin(), dbm_to_mw);
    return out;
  }

  double total_mw() const {
    double total = 0.0;
    for (double p : dbm_) total += dbm_to_mw(p);
    return total;
  }

  /// Peak-to-peak spread max_k P_k - min_k P_k in dB.
  double excursion_db() const {
    if (dbm_.empty()) return 0.0;
    auto [lo, hi] = std::minmax_element(dbm_.begin(), dbm_.end());
    return *hi - *lo;
  }

  bool operator==(const PowerProfile&) const = default;

 private:
  std::vector<double> dbm_;
};

/// Uniform dB shift so that the linear powers sum to `total_mw`.
inline PowerProfile rescale_to_total(const PowerProfile& profile, double total_mw) {
  if (!(total_mw > 0.0)) throw DomainError("rescale_to_total: total power must be positive");
  const double shift = mw_to_dbm(total_mw) - mw_to_dbm(profile.total_mw());
  std::vector<double> out(profile.values());
  for (double& p : out) p += shift;
  return PowerProfile(std::move(out));
}

/// Linear per-channel SNR, one polarization, referred to the symbol rate.
class SnrVector {
 public:
  SnrVector() = default;
  explicit SnrVector(std::vector<double> snr_linear) : snr_(std::move(snr_linear)) {
    for (double s : snr_)
      if (!(s >= 0.0)) throw DomainError("SnrVector: SNR must be nonnegative");
  }

  std::size_t size() const noexcept { return snr_.size(); }
  double operator[](std::size_t k) const { return snr_[k]; }
  const std::vector<double>& values() const noexcept { return snr_; }

  std::vector<double> db() const {
    std::vector<double> out(snr_.size());
    std::transform(snr_.begin(), snr_.end(), out.begin(), [](double s) { return 10.0 * std::log10(s); });
    return out;
  }

 private:
  std::vector<double> snr_;
};

/// C = 2 R_s sum_k log2(1 + eta SNR_k), in bit/s.
inline double capacity(const SnrVector& snr, const ChannelGrid& grid, double eta = 1.0) {
  if (snr.size() != grid.channel_count)
    throw ShapeError("capacity: SNR vector has " + std::to_string(snr.size()) + " entries, grid has " +
                     std::to_string(grid.channel_count));
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("capacity: eta must lie in (0, 1]");
  double bits = 0.0;
  for (double s : snr.values()) bits += std::log2(1.0 + eta * s);
  return 2.0 * grid.symbol_rate_hz * bits;
}

/// Capacity per Watt of electrical supply power.
inline double figure_of_merit(double capacity_bps, double supply_power_w) {
  if (!(supply_power_w > 0.0)) throw DomainError("figure_of_merit: supply power must be positive");
  return capacity_bps / supply_power_w;
}

}  // namespace capwatt

#endif  // CAPWATT_CORE_HPP
