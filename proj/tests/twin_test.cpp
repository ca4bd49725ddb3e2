#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "capwatt/twin.hpp"

using namespace capwatt;

namespace {

LayerSpec small_spec(int k) {
  LayerSpec s;
  s.widths = {k, 6, 5, 2 * k};
  return s;
}

// Random network with random (but valid) normalization statistics.
TwinModel random_model(int k, std::uint64_t seed, SignalTarget target, InputFeature feature) {
  TwinModel m = initialize_twin(small_spec(k), seed);
  m.signal_target = target;
  m.input_feature = feature;
  RngStream rng(seed + 1000);
  for (auto& b : m.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < k; ++i) {
    m.input_mean(i) = feature == InputFeature::dbm ? rng.uniform(-10.0, 0.0) : rng.uniform(0.05, 0.5);
    m.input_std(i) = feature == InputFeature::dbm ? rng.uniform(2.0, 8.0) : rng.uniform(0.05, 0.5);
  }
  for (Eigen::Index i = 0; i < 2 * k; ++i) {
    m.output_mean(i) = i < k ? rng.uniform(-20.0, 0.0) : rng.uniform(-45.0, -30.0);
    m.output_std(i) = rng.uniform(0.5, 4.0);
  }
  return m;
}

std::vector<double> random_dbm(std::size_t k, RngStream& rng) {
  std::vector<double> p(k);
  for (double& v : p) v = rng.uniform(-15.0, 0.0);
  return p;
}

Dataset affine_dataset(std::size_t rows, std::uint64_t seed) {
  // Net gain and noise are exact affine functions of the linear launch powers.
  RngStream rng(seed);
  Dataset d;
  d.channel_count = 2;
  for (std::size_t i = 0; i < rows; ++i) {
    DatasetRow r;
    r.id = i;
    r.tx_dbm = {rng.uniform(-12.0, 0.0), rng.uniform(-12.0, 0.0)};
    const double a = dbm_to_mw(r.tx_dbm[0]), b = dbm_to_mw(r.tx_dbm[1]);
    r.signal_dbm = {r.tx_dbm[0] + 3.0 * a - 2.0 * b + 1.0, r.tx_dbm[1] - 1.5 * a + 4.0 * b - 2.0};
    r.noise_dbm = {-30.0 + 2.0 * a + b, -32.0 - a + 0.5 * b};
    r.split = i % 10 == 0 ? Split::validation : Split::train;
    d.rows.push_back(std::move(r));
  }
  return d;
}

}  // namespace

TEST(LayerSpec, Validation) {
  LayerSpec s;
  EXPECT_NO_THROW(s.validate(40));
  EXPECT_THROW(s.validate(20), ShapeError);
  s.activations.pop_back();
  EXPECT_THROW(s.validate(), ShapeError);
  EXPECT_EQ(parse_activation("softplus"), Activation::softplus);
  EXPECT_THROW(parse_activation("relu"), ConfigError);
}

TEST(Forward, ZeroWeightsGiveDenormalizedBiases) {
  TwinModel m = initialize_twin(small_spec(3), 1);
  m.signal_target = SignalTarget::absolute_dbm;
  m.layer_spec.activations.back() = Activation::linear;
  for (auto& w : m.weights) w.setZero();
  m.biases.back() << 1.0, 2.0, 3.0, -1.0, -2.0, -3.0;
  m.output_mean.setConstant(-10.0);
  m.output_std.setConstant(2.0);
  TwinPrediction p = forward(m, std::vector<double>{-3.0, -1.0, 4.0});
  EXPECT_EQ(p.signal_dbm, (std::vector<double>{-8.0, -6.0, -4.0}));
  EXPECT_EQ(p.noise_dbm, (std::vector<double>{-12.0, -14.0, -16.0}));
}

TEST(Forward, SingleSoftplusUnit) {
  LayerSpec s;
  s.widths = {1, 1, 1};
  s.activations = {Activation::softplus, Activation::linear};
  TwinModel m = initialize_twin(s, 0);
  m.weights[0](0, 0) = 1.0;
  m.weights[1](0, 0) = 1.0;
  for (double x : {-30.0, -2.0, 0.0, 0.5, 3.0, 40.0}) {
    Eigen::VectorXd z(1);
    z << x;
    EXPECT_NEAR(detail::trace_network(m, z).post.back()(0), std::log1p(std::exp(x)), 1e-14 * std::max(1.0, x));
  }
}

TEST(Forward, WidthMismatchAndEnvelopeWarning) {
  TwinModel m = random_model(4, 2, SignalTarget::net_gain_db, InputFeature::linear_mw);
  EXPECT_THROW(forward(m, std::vector<double>{0.0, 0.0, 0.0}), ShapeError);
  m.envelope_min_dbm.assign(4, -10.0);
  m.envelope_max_dbm.assign(4, 0.0);
  EXPECT_FALSE(forward(m, std::vector<double>{-12.9, -5.0, 2.9, 0.0}).extrapolated);
  auto p = forward(m, std::vector<double>{-13.5, -5.0, 0.0, 0.0});
  EXPECT_TRUE(p.extrapolated);
  EXPECT_FALSE(p.warning.empty());
}

TEST(Forward, Deterministic) {
  TwinModel m = random_model(5, 3, SignalTarget::net_gain_db, InputFeature::linear_mw);
  RngStream rng(1);
  auto x = random_dbm(5, rng);
  auto a = forward(m, x), b = forward(m, x);
  EXPECT_EQ(a.signal_dbm, b.signal_dbm);
  EXPECT_EQ(a.noise_dbm, b.noise_dbm);
}

TEST(InputGradient, ConstantMapHasZeroGradient) {
  TwinModel m = random_model(4, 5, SignalTarget::absolute_dbm, InputFeature::linear_mw);
  for (auto& w : m.weights) w.setZero();
  ChannelGrid g;
  g.channel_count = 4;
  auto grad = input_gradient(m, PowerProfile(std::vector<double>{-1.0, -2.0, -3.0, -4.0}), {g, 1.0});
  for (double v : grad) EXPECT_EQ(v, 0.0);
}

TEST(InputGradient, MatchesCentralDifferences) {
  const int k = 6;
  ChannelGrid g;
  g.channel_count = k;
  int probes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (auto target : {SignalTarget::absolute_dbm, SignalTarget::net_gain_db})
      for (auto feature : {InputFeature::dbm, InputFeature::linear_mw}) {
        TwinModel m = random_model(k, seed, target, feature);
        const CapacityObjective obj{g, seed % 2 ? 1.0 : 0.6};
        RngStream rng(seed * 31);
        std::vector<double> x = random_dbm(k, rng);
        auto cg = capacity_and_gradient(m, x, obj);
        EXPECT_NEAR(cg.capacity, capacity_from_snr_db(forward(m, x).snr_db(), g, obj.eta), 1e-9 * cg.capacity);
        double scale = 0.0;
        for (double v : cg.gradient) scale = std::max(scale, std::abs(v));
        for (int c = 0; c < k; ++c) {
          const double h = 1e-3;
          auto up = x, down = x;
          up[c] += h;
          down[c] -= h;
          const double fd = (capacity_from_snr_db(forward(m, up).snr_db(), g, obj.eta) -
                             capacity_from_snr_db(forward(m, down).snr_db(), g, obj.eta)) /
                            (2.0 * h);
          EXPECT_LE(std::abs(cg.gradient[c] - fd), 1e-4 * std::max(std::abs(fd), 1e-3 * scale))
              << "seed " << seed << " channel " << c;
        }
        ++probes;
      }
  EXPECT_EQ(probes, 20);
}

TEST(InputGradient, CommonOutputShiftOnlyActsThroughTheRatio) {
  const int k = 4;
  ChannelGrid g;
  g.channel_count = k;
  TwinModel m = random_model(k, 9, SignalTarget::absolute_dbm, InputFeature::linear_mw);
  TwinModel shifted = m;
  for (int c = 0; c < k; ++c) {
    shifted.output_mean(c) += 7.0;
    shifted.output_mean(c + k) += 7.0;
  }
  RngStream rng(4);
  auto x = random_dbm(k, rng);
  auto a = capacity_and_gradient(m, x, {g, 1.0});
  auto b = capacity_and_gradient(shifted, x, {g, 1.0});
  EXPECT_NEAR(a.capacity, b.capacity, 1e-9 * a.capacity);
  for (int c = 0; c < k; ++c) EXPECT_NEAR(a.gradient[c], b.gradient[c], 1e-9 * std::abs(a.gradient[c]) + 1e-6);
}

TEST(Train, AffineTargetsAreLearnedByLinearNetwork) {
  Dataset d = affine_dataset(300, 7);
  LayerSpec s;
  s.widths = {2, 4, 4};
  s.activations = {Activation::linear, Activation::linear};
  TrainSettings hyper;
  hyper.max_epochs = 2000;
  auto r = train(d, s, hyper, 11);
  EXPECT_LT(r.report.best_validation_mse, 1e-6);
}

TEST(Train, DuplicatedRowsGiveEqualLosses) {
  Dataset d = affine_dataset(1, 3);
  d.rows[0].split = Split::train;
  DatasetRow v = d.rows[0];
  v.split = Split::validation;
  for (int i = 0; i < 9; ++i) d.rows.push_back(d.rows[0]);
  for (int i = 0; i < 10; ++i) d.rows.push_back(v);
  TrainSettings hyper;
  hyper.max_epochs = 50;
  auto r = train(d, small_spec(2), hyper, 5);
  ASSERT_EQ(r.report.train_mse.size(), r.report.validation_mse.size());
  for (std::size_t e = 0; e < r.report.train_mse.size(); ++e)
    EXPECT_NEAR(r.report.train_mse[e], r.report.validation_mse[e], 1e-9);
}

TEST(Train, ReproducibleForFixedSeed) {
  Dataset d = affine_dataset(120, 2);
  TrainSettings hyper;
  hyper.max_epochs = 30;
  auto a = train(d, small_spec(2), hyper, 42);
  auto b = train(d, small_spec(2), hyper, 42);
  EXPECT_EQ(a.report.train_mse, b.report.train_mse);
  EXPECT_EQ(a.report.validation_mse, b.report.validation_mse);
  for (std::size_t l = 0; l < a.model.weights.size(); ++l) {
    EXPECT_TRUE(a.model.weights[l] == b.model.weights[l]);
    EXPECT_TRUE(a.model.biases[l] == b.model.biases[l]);
  }
  auto c = train(d, small_spec(2), hyper, 43);
  EXPECT_NE(a.report.train_mse, c.report.train_mse);
}

TEST(Train, BestEpochIsReturned) {
  Dataset d = affine_dataset(120, 8);
  TrainSettings hyper;
  hyper.max_epochs = 40;
  hyper.patience = 5;
  auto r = train(d, small_spec(2), hyper, 1);
  const auto& v = r.report.validation_mse;
  EXPECT_EQ(*std::min_element(v.begin(), v.end()), r.report.best_validation_mse);
  EXPECT_EQ(v[r.report.best_epoch], r.report.best_validation_mse);
  r.model.validate();
}

TEST(Train, EmptySplitIsDataError) {
  Dataset d = affine_dataset(20, 1);
  for (auto& r : d.rows) r.split = Split::train;
  EXPECT_THROW(train(d, small_spec(2), TrainSettings{}, 1), DataError);
}

TEST(Normalization, RoundTrip) {
  Dataset d = affine_dataset(50, 5);
  TrainSettings hyper;
  hyper.max_epochs = 1;
  for (auto target : {SignalTarget::absolute_dbm, SignalTarget::net_gain_db}) {
    hyper.signal_target = target;
    TwinModel m = train(d, small_spec(2), hyper, 1).model;
    std::vector<const DatasetRow*> rows;
    for (const auto& r : d.rows) rows.push_back(&r);
    auto n = detail::normalize_rows(m, rows);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (Eigen::Index c = 0; c < 2; ++c) {
        const auto col = static_cast<Eigen::Index>(r);
        const double p = rows[r]->tx_dbm[static_cast<std::size_t>(c)];
        EXPECT_NEAR(n.x(c, col) * m.input_std(c) + m.input_mean(c), dbm_to_mw(p), 1e-12 * dbm_to_mw(p));
        double s = n.y(c, col) * m.output_std(c) + m.output_mean(c);
        if (target == SignalTarget::net_gain_db) s += p;
        const double truth = rows[r]->signal_dbm[static_cast<std::size_t>(c)];
        EXPECT_NEAR(s, truth, 1e-12 * std::max(1.0, std::abs(truth)));
        const double nz = n.y(c + 2, col) * m.output_std(c + 2) + m.output_mean(c + 2);
        EXPECT_NEAR(nz, rows[r]->noise_dbm[static_cast<std::size_t>(c)], 1e-12 * 40.0);
      }
  }
}

TEST(Evaluate, ExactLookupHasZeroError) {
  Dataset d = affine_dataset(1, 6);
  TwinModel m = initialize_twin(small_spec(2), 1);
  m.signal_target = SignalTarget::absolute_dbm;
  for (auto& w : m.weights) w.setZero();
  m.output_mean << d.rows[0].signal_dbm[0], d.rows[0].signal_dbm[1], d.rows[0].noise_dbm[0], d.rows[0].noise_dbm[1];
  ChannelGrid g;
  g.channel_count = 2;
  auto rep = evaluate(m, d, g);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rms_error_db, 0.0);
  EXPECT_EQ(rep.max_abs_error_db, 0.0);
  EXPECT_EQ(rep.mean_capacity_relative_error, 0.0);
}

TEST(Evaluate, UntrainedModelReportsErrorsByExcursion) {
  Dataset d = affine_dataset(40, 6);
  for (std::size_t i = 0; i < d.rows.size(); ++i) d.rows[i].excursion_db = 6.0 + static_cast<double>(i);
  TwinModel m = random_model(2, 1, SignalTarget::net_gain_db, InputFeature::linear_mw);
  ChannelGrid g;
  g.channel_count = 2;
  auto rep = evaluate(m, d, g);
  EXPECT_GT(rep.rms_error_db, 0.0);
  EXPECT_GT(rep.mean_capacity_relative_error, 0.0);
  std::size_t total = 0;
  for (const auto& b : rep.bins) {
    total += b.rows;
    EXPECT_LT(b.lower_db, b.upper_db);
  }
  EXPECT_EQ(total, 40u);
  EXPECT_EQ(evaluate(m, d, g, Split::validation).rows.size(), d.count(Split::validation));
}
