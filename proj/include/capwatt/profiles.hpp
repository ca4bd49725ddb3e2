#ifndef CAPWATT_PROFILES_HPP
#define CAPWATT_PROFILES_HPP

// Randomized launch-power profiles for training campaigns. Every profile has
// an exact peak-to-peak excursion and an exact total linear power; a campaign
// ramps the excursion and greedily picks, from a pool of candidates, the one
// that is most distinct (max-min symmetric KL divergence) from those already
// accepted.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "capwatt/core.hpp"

namespace capwatt {

/// SplitMix64 generator. Streams are derived from (seed, index, sub-index)
/// so that any profile can be regenerated independently of the others.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream derive(std::uint64_t seed, std::uint64_t index, std::uint64_t sub = 0) {
    RngStream base(seed);
    std::uint64_t s = base.next_u64() ^ mix(index + 0x632be59bd9b4e019ULL);
    s = mix(s ^ mix(sub + 0x8cb92ba72f3d8dd7ULL));
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

struct CampaignSpec {
  std::size_t channel_count = 40;
  std::size_t profile_count = 1440;
  double excursion_min_db = 6.0;
  double excursion_max_db = 45.0;
  double total_power_mw = 1.0;
  std::size_t smoothing_window = 3;
  std::size_t pool_factor = 8;
  std::uint64_t seed = 1;

  void validate() const {
    if (channel_count < 1) throw DomainError("CampaignSpec: channel_count must be >= 1");
    if (profile_count < 1) throw DomainError("CampaignSpec: profile_count must be >= 1");
    if (!(excursion_min_db >= 0.0 && excursion_min_db <= excursion_max_db))
      throw DomainError("CampaignSpec: need 0 <= excursion_min <= excursion_max");
    if (smoothing_window < 1 || smoothing_window % 2 == 0)
      throw DomainError("CampaignSpec: smoothing_window must be odd and >= 1");
    if (pool_factor < 1) throw DomainError("CampaignSpec: pool_factor must be >= 1");
    if (!(total_power_mw > 0.0)) throw DomainError("CampaignSpec: total power must be positive");
  }
};

/// Centered moving average; the window is truncated at the band edges.
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(x.size() - 1, k + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += x[j];
    out[k] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

inline PowerProfile generate_profile(double excursion_db, const CampaignSpec& spec, RngStream& rng) {
  if (!(excursion_db >= 0.0)) throw DomainError("generate_profile: excursion must be nonnegative");
  std::vector<double> offsets(spec.channel_count);
  for (double& o : offsets) o = rng.uniform(0.0, excursion_db);

  std::vector<double> smooth = moving_average(offsets, spec.smoothing_window);
  auto [lo_it, hi_it] = std::minmax_element(smooth.begin(), smooth.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  for (double& s : smooth) s = range > 0.0 ? (s - lo) / range * excursion_db : 0.0;

  return rescale_to_total(PowerProfile(std::move(smooth)), spec.total_power_mw);
}

/// Linear powers normalized to sum to one.
inline std::vector<double> normalized_distribution(const PowerProfile& profile) {
  std::vector<double> p = profile.linear_mw();
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  return p;
}

namespace detail {

inline double symmetric_kl_unchecked(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += (p[k] - q[k]) * std::log(p[k] / q[k]);
  return d;
}

}  // namespace detail

/// KL(p||q) + KL(q||p) for strictly positive distributions summing to one.
inline double symmetric_relative_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("symmetric_relative_entropy: length mismatch");
  auto check = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) {
      if (!(x > 0.0)) throw DomainError("symmetric_relative_entropy: entries must be strictly positive");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("symmetric_relative_entropy: distribution must sum to 1");
  };
  check(p);
  check(q);
  double forward = 0.0;
  double backward = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    forward += p[k] * std::log(p[k] / q[k]);
    backward += q[k] * std::log(q[k] / p[k]);
  }
  return forward + backward;
}

struct CampaignEntry {
  PowerProfile profile;
  double excursion_db = 0.0;
};

inline double campaign_excursion(const CampaignSpec& spec, std::size_t index) {
  if (spec.profile_count == 1) return spec.excursion_min_db;
  return spec.excursion_min_db + (spec.excursion_max_db - spec.excursion_min_db) * static_cast<double>(index) /
                                     static_cast<double>(spec.profile_count - 1);
}

/// Candidate j of slot i, reproducible in isolation.
inline PowerProfile campaign_candidate(const CampaignSpec& spec, std::size_t index, std::size_t candidate) {
  RngStream rng = RngStream::derive(spec.seed, index, candidate);
  return generate_profile(campaign_excursion(spec, index), spec, rng);
}

inline std::vector<CampaignEntry> generate_campaign(const CampaignSpec& spec) {
  spec.validate();
  std::vector<CampaignEntry> accepted;
  std::vector<std::vector<double>> accepted_dist;
  accepted.reserve(spec.profile_count);
  accepted_dist.reserve(spec.profile_count);

  for (std::size_t i = 0; i < spec.profile_count; ++i) {
    const double excursion = campaign_excursion(spec, i);
    const std::size_t pool = i == 0 ? 1 : spec.pool_factor;
    PowerProfile best;
    std::vector<double> best_dist;
    double best_score = -1.0;
    for (std::size_t j = 0; j < pool; ++j) {
      PowerProfile candidate = campaign_candidate(spec, i, j);
      std::vector<double> dist = normalized_distribution(candidate);
      double score = std::numeric_limits<double>::infinity();
      for (const auto& other : accepted_dist) score = std::min(score, detail::symmetric_kl_unchecked(dist, other));
      if (score > best_score) {
        best_score = score;
        best = std::move(candidate);
        best_dist = std::move(dist);
      }
    }
    accepted.push_back({std::move(best), excursion});
    accepted_dist.push_back(std::move(best_dist));
  }
  return accepted;
}

/// Smallest pairwise symmetric KL divergence over a set of profiles.
inline double min_pairwise_divergence(const std::vector<CampaignEntry>& campaign) {
  std::vector<std::vector<double>> dist;
  dist.reserve(campaign.size());
  for (const auto& e : campaign) dist.push_back(normalized_distribution(e.profile));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = i + 1; j < dist.size(); ++j) best = std::min(best, detail::symmetric_kl_unchecked(dist[i], dist[j]));
  return best;
}

}  // namespace capwatt

#endif  // CAPWATT_PROFILES_HPP
