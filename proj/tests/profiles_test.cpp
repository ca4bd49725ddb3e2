#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "capwatt/profiles.hpp"

using namespace capwatt;

namespace {

CampaignSpec small_spec(std::size_t k, double total_mw, std::uint64_t seed) {
  CampaignSpec s;
  s.channel_count = k;
  s.total_power_mw = total_mw;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(RngStream, DeterministicAndInRange) {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  RngStream c = RngStream::derive(1, 2, 3), d = RngStream::derive(1, 2, 3), e = RngStream::derive(1, 3, 2);
  const auto x = c.next_u64();
  EXPECT_EQ(x, d.next_u64());
  EXPECT_NE(x, e.next_u64());
}

TEST(GenerateProfile, ZeroExcursionIsFlat) {
  CampaignSpec s = small_spec(40, 20.0, 1);
  RngStream rng(5);
  PowerProfile p = generate_profile(0.0, s, rng);
  for (double v : p.values()) EXPECT_NEAR(v, 10.0 * std::log10(0.5), 1e-12);
}

TEST(GenerateProfile, HandTraceForThreeChannels) {
  CampaignSpec s = small_spec(3, 2.0, 1);
  const double F = 10.0;

  // Step 1: the three draws, taken from an identical stream.
  RngStream draws(77);
  const double u0 = draws.uniform() * F, u1 = draws.uniform() * F, u2 = draws.uniform() * F;
  // Step 2: window 3 shrinks to 2 at each edge.
  const double m0 = (u0 + u1) / 2.0, m1 = (u0 + u1 + u2) / 3.0, m2 = (u1 + u2) / 2.0;
  // Step 3: stretch to exactly F.
  const double lo = std::min({m0, m1, m2}), hi = std::max({m0, m1, m2});
  std::vector<double> r = {(m0 - lo) / (hi - lo) * F, (m1 - lo) / (hi - lo) * F, (m2 - lo) / (hi - lo) * F};
  // Step 4: common dB offset so the linear sum is 2 mW.
  double sum = 0.0;
  for (double v : r) sum += std::pow(10.0, v / 10.0);
  const double shift = 10.0 * std::log10(2.0 / sum);

  RngStream rng(77);
  PowerProfile p = generate_profile(F, s, rng);
  ASSERT_EQ(p.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[k], r[k] + shift, 1e-12);
}

TEST(GenerateProfile, ConstraintsHoldExactly) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    CampaignSpec s = small_spec(40, 0.1 * static_cast<double>(seed), seed);
    RngStream rng(seed);
    const double F = 45.0 * static_cast<double>(seed) / 50.0;
    PowerProfile p = generate_profile(F, s, rng);
    EXPECT_LE(std::abs(p.excursion_db() - F), 1e-9);
    EXPECT_LE(std::abs(p.total_mw() - s.total_power_mw), 1e-9 * s.total_power_mw);
  }
}

TEST(GenerateProfile, NegativeExcursionRejected) {
  RngStream rng(1);
  EXPECT_THROW(generate_profile(-1.0, CampaignSpec{}, rng), DomainError);
}

TEST(MovingAverage, NeverWidensTheRange) {
  RngStream rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(40);
    for (double& v : x) v = rng.uniform(0.0, 30.0);
    auto y = moving_average(x, 3);
    auto [xl, xh] = std::minmax_element(x.begin(), x.end());
    auto [yl, yh] = std::minmax_element(y.begin(), y.end());
    EXPECT_LE(*yh - *yl, *xh - *xl);
  }
  EXPECT_EQ(moving_average({1.0, 2.0, 6.0}, 1), (std::vector<double>{1.0, 2.0, 6.0}));
}

TEST(SymmetricRelativeEntropy, Examples) {
  EXPECT_NEAR(symmetric_relative_entropy({0.5, 0.5}, {0.9, 0.1}), 0.8789, 5e-5);
  EXPECT_EQ(symmetric_relative_entropy({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}), 0.0);
  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(6), q(6);
    double sp = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      p[k] = rng.uniform(0.01, 1.0);
      q[k] = rng.uniform(0.01, 1.0);
      sp += p[k];
      sq += q[k];
    }
    for (std::size_t k = 0; k < 6; ++k) {
      p[k] /= sp;
      q[k] /= sq;
    }
    const double a = symmetric_relative_entropy(p, q);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a, symmetric_relative_entropy(q, p), 1e-12);
  }
}

TEST(SymmetricRelativeEntropy, RejectsInvalidInput) {
  EXPECT_THROW(symmetric_relative_entropy({0.5, 0.6}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(symmetric_relative_entropy({1.0, 0.0}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(symmetric_relative_entropy({1.0}, {0.5, 0.5}), ShapeError);
}

TEST(GenerateCampaign, ExcursionRampAndConstraints) {
  CampaignSpec s = small_spec(40, 3.0, 9);
  s.profile_count = 40;
  auto c = generate_campaign(s);
  ASSERT_EQ(c.size(), 40u);
  EXPECT_DOUBLE_EQ(c.front().excursion_db, 6.0);
  EXPECT_DOUBLE_EQ(c.back().excursion_db, 45.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c[i].excursion_db, 6.0 + 39.0 * static_cast<double>(i) / 39.0, 1e-12);
    EXPECT_LE(std::abs(c[i].profile.excursion_db() - c[i].excursion_db), 1e-9);
    EXPECT_LE(std::abs(c[i].profile.total_mw() - 3.0), 3e-9);
  }
}

TEST(GenerateCampaign, PoolOfOneIsPlainGeneration) {
  CampaignSpec s = small_spec(40, 3.0, 4);
  s.profile_count = 12;
  s.pool_factor = 1;
  auto c = generate_campaign(s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    RngStream rng = RngStream::derive(s.seed, i, 0);
    EXPECT_EQ(c[i].profile, generate_profile(c[i].excursion_db, s, rng));
  }
}

TEST(GenerateCampaign, SecondSlotPicksTheMoreDistinctCandidate) {
  CampaignSpec s = small_spec(40, 3.0, 21);
  s.profile_count = 2;
  s.pool_factor = 2;
  auto c = generate_campaign(s);
  const auto first = normalized_distribution(campaign_candidate(s, 0, 0));
  const PowerProfile a = campaign_candidate(s, 1, 0), b = campaign_candidate(s, 1, 1);
  const double ka = symmetric_relative_entropy(first, normalized_distribution(a));
  const double kb = symmetric_relative_entropy(first, normalized_distribution(b));
  ASSERT_NE(ka, kb);
  EXPECT_EQ(c[0].profile, campaign_candidate(s, 0, 0));
  EXPECT_EQ(c[1].profile, ka > kb ? a : b);
}

TEST(GenerateCampaign, DeterministicGivenSeed) {
  CampaignSpec s = small_spec(40, 3.0, 8);
  s.profile_count = 30;
  auto a = generate_campaign(s), b = generate_campaign(s);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].profile, b[i].profile);
  s.seed = 9;
  auto d = generate_campaign(s);
  EXPECT_NE(a[5].profile, d[5].profile);
}

TEST(GenerateCampaign, PoolSelectionImprovesCoverage) {
  double pooled = 0.0, plain = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CampaignSpec s = small_spec(40, 3.0, seed);
    s.profile_count = 60;
    pooled += min_pairwise_divergence(generate_campaign(s));
    s.pool_factor = 1;
    plain += min_pairwise_divergence(generate_campaign(s));
  }
  EXPECT_GE(pooled / 10.0, plain / 10.0);
}

TEST(CampaignSpec, Validation) {
  CampaignSpec s;
  s.smoothing_window = 2;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.excursion_min_db = 50.0;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.pool_factor = 0;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.profile_count = 0;
  EXPECT_THROW(s.validate(), DomainError);
}
