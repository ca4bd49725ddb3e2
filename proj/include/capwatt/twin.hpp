#ifndef CAPWATT_TWIN_HPP
#define CAPWATT_TWIN_HPP

// Digital twin of the link: a fully connected network mapping the K launch
// powers to the K received signal powers and K noise powers (all dBm).
//
// Inputs are z-scored either as dBm or as linear mW. The signal half of the
// output is either the absolute received power or the net link gain
// S_k - P_k; in the second case the launch power is added back during
// denormalization. Noise outputs are always absolute dBm.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capwatt/core.hpp"
#include "capwatt/dataset.hpp"
#include "capwatt/profiles.hpp"

namespace capwatt {

enum class Activation { linear, sigmoid, softplus };
enum class InputFeature { dbm, linear_mw };
enum class SignalTarget { absolute_dbm, net_gain_db };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
  }
  return "linear";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "linear") return Activation::linear;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(InputFeature f) { return f == InputFeature::dbm ? "dbm" : "linear_mw"; }
inline std::string_view to_string(SignalTarget t) {
  return t == SignalTarget::absolute_dbm ? "absolute_dbm" : "net_gain_db";
}

inline InputFeature parse_input_feature(std::string_view s) {
  if (s == "dbm") return InputFeature::dbm;
  if (s == "linear_mw") return InputFeature::linear_mw;
  throw ConfigError("unknown input feature '" + std::string(s) + "'");
}

inline SignalTarget parse_signal_target(std::string_view s) {
  if (s == "absolute_dbm") return SignalTarget::absolute_dbm;
  if (s == "net_gain_db") return SignalTarget::net_gain_db;
  throw ConfigError("unknown signal target '" + std::string(s) + "'");
}

struct LayerSpec {
  std::vector<int> widths{40, 80, 120, 80};
  std::vector<Activation> activations{Activation::sigmoid, Activation::softplus, Activation::linear};

  std::size_t layer_count() const noexcept { return activations.size(); }

  /// Generic consistency; `channel_count` additionally pins the twin's in/out widths.
  void validate(std::optional<std::size_t> channel_count = std::nullopt) const {
    if (widths.size() < 2) throw ShapeError("LayerSpec: need at least input and output widths");
    if (activations.size() != widths.size() - 1)
      throw ShapeError("LayerSpec: need one activation per weight layer");
    for (int w : widths)
      if (w < 1) throw ShapeError("LayerSpec: widths must be positive");
    if (channel_count) {
      if (static_cast<std::size_t>(widths.front()) != *channel_count)
        throw ShapeError("LayerSpec: input width must equal the channel count");
      if (static_cast<std::size_t>(widths.back()) != 2 * *channel_count)
        throw ShapeError("LayerSpec: output width must be twice the channel count");
    }
  }

  bool operator==(const LayerSpec&) const = default;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

template <typename Derived>
void activate_in_place(Eigen::MatrixBase<Derived>& m, Activation a) {
  switch (a) {
    case Activation::linear: break;
    case Activation::sigmoid: m = m.unaryExpr([](double x) { return sigmoid(x); }); break;
    case Activation::softplus: m = m.unaryExpr([](double x) { return softplus(x); }); break;
  }
}

/// d act / d pre, evaluated from the pre-activation.
template <typename Derived>
auto activation_slope(const Eigen::MatrixBase<Derived>& pre, Activation a) {
  using Plain = typename Derived::PlainObject;
  switch (a) {
    case Activation::linear: return Plain(Plain::Ones(pre.rows(), pre.cols()));
    case Activation::sigmoid:
      return Plain(pre.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 - s);
      }));
    case Activation::softplus: return Plain(pre.unaryExpr([](double x) { return sigmoid(x); }));
  }
  return Plain(Plain::Ones(pre.rows(), pre.cols()));
}

}  // namespace detail

struct TwinModel {
  LayerSpec layer_spec;
  InputFeature input_feature = InputFeature::linear_mw;
  SignalTarget signal_target = SignalTarget::net_gain_db;
  std::vector<Eigen::MatrixXd> weights;  // layer l: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input_mean, input_std;
  Eigen::VectorXd output_mean, output_std;
  std::vector<double> envelope_min_dbm, envelope_max_dbm;
  std::string fingerprint;

  std::size_t channel_count() const { return static_cast<std::size_t>(layer_spec.widths.front()); }

  void validate() const {
    layer_spec.validate();
    const std::size_t k = channel_count();
    if (static_cast<std::size_t>(layer_spec.widths.back()) != 2 * k)
      throw ShapeError("TwinModel: output width must be twice the input width");
    if (weights.size() != layer_spec.layer_count() || biases.size() != layer_spec.layer_count())
      throw ShapeError("TwinModel: parameter count does not match the layer spec");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != layer_spec.widths[l + 1] || weights[l].cols() != layer_spec.widths[l] ||
          biases[l].size() != layer_spec.widths[l + 1])
        throw ShapeError("TwinModel: layer " + std::to_string(l) + " has the wrong shape");
      if (!weights[l].allFinite() || !biases[l].allFinite())
        throw DomainError("TwinModel: nonfinite parameters in layer " + std::to_string(l));
    }
    if (static_cast<std::size_t>(input_mean.size()) != k || static_cast<std::size_t>(input_std.size()) != k ||
        static_cast<std::size_t>(output_mean.size()) != 2 * k || static_cast<std::size_t>(output_std.size()) != 2 * k)
      throw ShapeError("TwinModel: normalization statistics have the wrong length");
    if (!((input_std.array() > 0.0).all() && (output_std.array() > 0.0).all()))
      throw DomainError("TwinModel: normalization spreads must be positive");
    if (envelope_min_dbm.size() != k || envelope_max_dbm.size() != k)
      throw ShapeError("TwinModel: training envelope has the wrong length");
    for (std::size_t c = 0; c < k; ++c)
      if (!(envelope_min_dbm[c] <= envelope_max_dbm[c])) throw DomainError("TwinModel: envelope min exceeds max");
  }
};

/// Network with fan-scaled uniform weights, zero biases and identity normalization.
inline TwinModel initialize_twin(const LayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  TwinModel m;
  m.layer_spec = spec;
  RngStream rng = RngStream::derive(seed, 0x1417);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  const auto k = static_cast<Eigen::Index>(spec.widths.front());
  m.input_mean = Eigen::VectorXd::Zero(k);
  m.input_std = Eigen::VectorXd::Ones(k);
  m.output_mean = Eigen::VectorXd::Zero(2 * k);
  m.output_std = Eigen::VectorXd::Ones(2 * k);
  m.envelope_min_dbm.assign(static_cast<std::size_t>(k), -std::numeric_limits<double>::infinity());
  m.envelope_max_dbm.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  return m;
}

namespace detail {

inline constexpr double kDbSlope = std::numbers::ln10 / 10.0;  // d/dx 10^(x/10) = kDbSlope 10^(x/10)

inline double input_feature_value(InputFeature f, double dbm) { return f == InputFeature::dbm ? dbm : dbm_to_mw(dbm); }

/// d feature / d dBm.
inline double input_feature_slope(InputFeature f, double dbm) {
  return f == InputFeature::dbm ? 1.0 : kDbSlope * dbm_to_mw(dbm);
}

inline Eigen::VectorXd normalized_input(const TwinModel& m, std::span<const double> dbm) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(dbm.size()));
  for (std::size_t k = 0; k < dbm.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    z(i) = (input_feature_value(m.input_feature, dbm[k]) - m.input_mean(i)) / m.input_std(i);
  }
  return z;
}

struct ForwardTrace {
  std::vector<Eigen::VectorXd> pre;   // per layer
  std::vector<Eigen::VectorXd> post;  // post[0] = input, post[l+1] = layer l output
};

inline ForwardTrace trace_network(const TwinModel& m, const Eigen::VectorXd& z) {
  ForwardTrace t;
  t.post.push_back(z);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::VectorXd pre = m.weights[l] * t.post.back() + m.biases[l];
    Eigen::VectorXd post = pre;
    activate_in_place(post, m.layer_spec.activations[l]);
    t.pre.push_back(std::move(pre));
    t.post.push_back(std::move(post));
  }
  return t;
}

/// Back-propagates d objective / d (network output) to d objective / d (network input).
inline Eigen::VectorXd backprop_to_input(const TwinModel& m, const ForwardTrace& t, Eigen::VectorXd delta) {
  for (std::size_t l = m.weights.size(); l-- > 0;) {
    delta = delta.cwiseProduct(activation_slope(t.pre[l], m.layer_spec.activations[l]));
    delta = m.weights[l].transpose() * delta;
  }
  return delta;
}

}  // namespace detail

struct TwinPrediction {
  std::vector<double> signal_dbm;
  std::vector<double> noise_dbm;
  bool extrapolated = false;  // some channel lies more than 3 dB outside the training envelope
  std::string warning;

  std::vector<double> snr_db() const {
    std::vector<double> s(signal_dbm.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = signal_dbm[k] - noise_dbm[k];
    return s;
  }
};

inline constexpr double kEnvelopeMarginDb = 3.0;

inline TwinPrediction forward(const TwinModel& model, std::span<const double> tx_dbm) {
  const std::size_t k = model.channel_count();
  if (tx_dbm.size() != k)
    throw ShapeError("forward: profile has " + std::to_string(tx_dbm.size()) + " channels, model expects " +
                     std::to_string(k));
  const auto trace = detail::trace_network(model, detail::normalized_input(model, tx_dbm));
  const Eigen::VectorXd& y = trace.post.back();

  TwinPrediction out;
  out.signal_dbm.resize(k);
  out.noise_dbm.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto s = static_cast<Eigen::Index>(c);
    const auto n = static_cast<Eigen::Index>(c + k);
    out.signal_dbm[c] = y(s) * model.output_std(s) + model.output_mean(s);
    if (model.signal_target == SignalTarget::net_gain_db) out.signal_dbm[c] += tx_dbm[c];
    out.noise_dbm[c] = y(n) * model.output_std(n) + model.output_mean(n);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (tx_dbm[c] < model.envelope_min_dbm[c] - kEnvelopeMarginDb ||
        tx_dbm[c] > model.envelope_max_dbm[c] + kEnvelopeMarginDb) {
      out.extrapolated = true;
      out.warning = "channel " + std::to_string(c + 1) + " launch power " + std::to_string(tx_dbm[c]) +
                    " dBm is outside the training envelope by more than 3 dB";
      break;
    }
  }
  return out;
}

inline TwinPrediction forward(const TwinModel& model, const PowerProfile& tx) { return forward(model, tx.dbm()); }

/// Capacity C = 2 R_s sum log2(1 + eta SNR_k) from per-channel SNR in dB.
inline double capacity_from_snr_db(std::span<const double> snr_db, const ChannelGrid& grid, double eta = 1.0) {
  std::vector<double> lin(snr_db.size());
  for (std::size_t k = 0; k < lin.size(); ++k) lin[k] = db_to_linear(snr_db[k]);
  return capacity(SnrVector(std::move(lin)), grid, eta);
}

struct CapacityObjective {
  ChannelGrid grid;
  double eta = 1.0;
};

inline double predicted_capacity(const TwinModel& model, const PowerProfile& tx, const CapacityObjective& obj) {
  return capacity_from_snr_db(forward(model, tx).snr_db(), obj.grid, obj.eta);
}

struct CapacityGradient {
  double capacity = 0.0;
  std::vector<double> gradient;  // dC/dP_k in bit/s per dB
};

/// Predicted capacity and its exact derivative with respect to the launch powers.
inline CapacityGradient capacity_and_gradient(const TwinModel& model, std::span<const double> tx_dbm,
                                              const CapacityObjective& obj) {
  const std::size_t k = model.channel_count();
  if (tx_dbm.size() != k) throw ShapeError("input_gradient: profile length does not match the model");
  if (obj.grid.channel_count != k) throw ShapeError("input_gradient: grid does not match the model");
  const auto trace = detail::trace_network(model, detail::normalized_input(model, tx_dbm));
  const Eigen::VectorXd& y = trace.post.back();

  // dC/dSNR_dB,k = 2 R_s / ln2 * eta SNR / (1 + eta SNR) * ln10/10; the signal
  // output enters with +1, the noise output with -1.
  CapacityGradient out;
  std::vector<double> snr_weight(k);
  Eigen::VectorXd d_out(static_cast<Eigen::Index>(2 * k));
  double bits = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto s = static_cast<Eigen::Index>(c);
    const auto n = static_cast<Eigen::Index>(c + k);
    double signal = y(s) * model.output_std(s) + model.output_mean(s);
    if (model.signal_target == SignalTarget::net_gain_db) signal += tx_dbm[c];
    const double noise = y(n) * model.output_std(n) + model.output_mean(n);
    const double snr = obj.eta * db_to_linear(signal - noise);
    bits += std::log2(1.0 + snr);
    snr_weight[c] = 2.0 * obj.grid.symbol_rate_hz / std::numbers::ln2 * snr / (1.0 + snr) * detail::kDbSlope;
    d_out(s) = snr_weight[c] * model.output_std(s);
    d_out(n) = -snr_weight[c] * model.output_std(n);
  }
  out.capacity = 2.0 * obj.grid.symbol_rate_hz * bits;

  const Eigen::VectorXd d_z = detail::backprop_to_input(model, trace, std::move(d_out));
  out.gradient.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    out.gradient[c] = d_z(i) / model.input_std(i) * detail::input_feature_slope(model.input_feature, tx_dbm[c]);
    if (model.signal_target == SignalTarget::net_gain_db) out.gradient[c] += snr_weight[c];
  }
  return out;
}

inline std::vector<double> input_gradient(const TwinModel& model, const PowerProfile& tx, const CapacityObjective& obj) {
  return capacity_and_gradient(model, tx.dbm(), obj).gradient;
}

// ---------------------------------------------------------------------------
// Training

struct TrainSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t patience = 100;
  std::size_t max_epochs = 2000;
  InputFeature input_feature = InputFeature::linear_mw;
  SignalTarget signal_target = SignalTarget::net_gain_db;

  bool operator==(const TrainSettings&) const = default;
};

struct TrainingReport {
  std::vector<double> train_mse;  // per epoch, normalized output space
  std::vector<double> validation_mse;
  std::size_t best_epoch = 0;     // zero-based
  double best_validation_mse = std::numeric_limits<double>::infinity();
  std::size_t epochs_run = 0;
};

struct TrainResult {
  TwinModel model;
  TrainingReport report;
};

namespace detail {

struct Normalized {
  Eigen::MatrixXd x;  // features x rows
  Eigen::MatrixXd y;  // outputs x rows
};

inline Normalized normalize_rows(const TwinModel& m, const std::vector<const DatasetRow*>& rows) {
  const std::size_t k = m.channel_count();
  Normalized out{Eigen::MatrixXd(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(rows.size())),
                 Eigen::MatrixXd(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    out.x.col(col) = normalized_input(m, rows[r]->tx_dbm);
    for (std::size_t c = 0; c < k; ++c) {
      const auto s = static_cast<Eigen::Index>(c);
      const auto n = static_cast<Eigen::Index>(c + k);
      double signal = rows[r]->signal_dbm[c];
      if (m.signal_target == SignalTarget::net_gain_db) signal -= rows[r]->tx_dbm[c];
      out.y(s, col) = (signal - m.output_mean(s)) / m.output_std(s);
      out.y(n, col) = (rows[r]->noise_dbm[c] - m.output_mean(n)) / m.output_std(n);
    }
  }
  return out;
}

inline Eigen::MatrixXd batch_forward(const TwinModel& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::MatrixXd pre = m.weights[l] * a;
    pre.colwise() += m.biases[l];
    activate_in_place(pre, m.layer_spec.activations[l]);
    a = std::move(pre);
  }
  return a;
}

inline double mse(const TwinModel& m, const Normalized& d) {
  if (d.x.cols() == 0) return 0.0;
  return (batch_forward(m, d.x) - d.y).squaredNorm() / static_cast<double>(d.y.size());
}

/// Population mean and spread of each row of `values`; zero spreads become one.
inline void row_statistics(const Eigen::MatrixXd& values, Eigen::VectorXd& mean, Eigen::VectorXd& spread) {
  mean = values.rowwise().mean();
  spread.resize(values.rows());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const double var = (values.row(i).array() - mean(i)).square().mean();
    const double sd = std::sqrt(var);
    spread(i) = sd > 1e-12 * std::max(1.0, std::abs(mean(i))) ? sd : 1.0;
  }
}

}  // namespace detail

/// Mini-batch Adam on the normalized-output MSE with early stopping on the
/// validation split. Returns the parameters of the best validation epoch.
inline TrainResult train(const Dataset& data, const LayerSpec& spec, const TrainSettings& hyper, std::uint64_t seed) {
  const std::size_t k = data.channel_count;
  spec.validate(k);
  std::vector<const DatasetRow*> train_rows;
  std::vector<const DatasetRow*> val_rows;
  for (const auto& r : data.rows) (r.split == Split::train ? train_rows : val_rows).push_back(&r);
  if (train_rows.empty() || val_rows.empty()) throw DataError("train: both splits must be non-empty");
  if (hyper.batch_size < 1) throw DomainError("train: batch size must be positive");

  TwinModel model = initialize_twin(spec, seed);
  model.input_feature = hyper.input_feature;
  model.signal_target = hyper.signal_target;

  {
    const auto n = static_cast<Eigen::Index>(train_rows.size());
    Eigen::MatrixXd features(static_cast<Eigen::Index>(k), n);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(2 * k), n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const DatasetRow& row = *train_rows[static_cast<std::size_t>(r)];
      for (std::size_t c = 0; c < k; ++c) {
        const auto i = static_cast<Eigen::Index>(c);
        features(i, r) = detail::input_feature_value(model.input_feature, row.tx_dbm[c]);
        targets(i, r) = row.signal_dbm[c] - (model.signal_target == SignalTarget::net_gain_db ? row.tx_dbm[c] : 0.0);
        targets(i + static_cast<Eigen::Index>(k), r) = row.noise_dbm[c];
      }
    }
    detail::row_statistics(features, model.input_mean, model.input_std);
    detail::row_statistics(targets, model.output_mean, model.output_std);
    model.envelope_min_dbm.assign(k, std::numeric_limits<double>::infinity());
    model.envelope_max_dbm.assign(k, -std::numeric_limits<double>::infinity());
    for (const DatasetRow* row : train_rows)
      for (std::size_t c = 0; c < k; ++c) {
        model.envelope_min_dbm[c] = std::min(model.envelope_min_dbm[c], row->tx_dbm[c]);
        model.envelope_max_dbm[c] = std::max(model.envelope_max_dbm[c], row->tx_dbm[c]);
      }
  }

  const detail::Normalized train_set = detail::normalize_rows(model, train_rows);
  const detail::Normalized val_set = detail::normalize_rows(model, val_rows);

  const std::size_t layers = model.weights.size();
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < layers; ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    vb.push_back(mb.back());
  }

  TrainResult result{model, {}};
  std::vector<Eigen::Index> order(train_rows.size());
  std::uint64_t step = 0;
  const auto out_width = static_cast<double>(2 * k);

  std::vector<Eigen::MatrixXd> pre(layers), post(layers + 1);
  for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    RngStream shuffle = RngStream::derive(seed, 0x5eed, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      post[0].resize(train_set.x.rows(), b);
      Eigen::MatrixXd target(train_set.y.rows(), b);
      for (Eigen::Index c = 0; c < b; ++c) {
        post[0].col(c) = train_set.x.col(order[start + static_cast<std::size_t>(c)]);
        target.col(c) = train_set.y.col(order[start + static_cast<std::size_t>(c)]);
      }
      for (std::size_t l = 0; l < layers; ++l) {
        pre[l] = model.weights[l] * post[l];
        pre[l].colwise() += model.biases[l];
        post[l + 1] = pre[l];
        detail::activate_in_place(post[l + 1], model.layer_spec.activations[l]);
      }

      Eigen::MatrixXd delta = (post[layers] - target) * (2.0 / (static_cast<double>(b) * out_width));
      ++step;
      const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
      for (std::size_t l = layers; l-- > 0;) {
        delta = delta.cwiseProduct(detail::activation_slope(pre[l], model.layer_spec.activations[l]));
        const Eigen::MatrixXd grad_w = delta * post[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) delta = model.weights[l].transpose() * delta;

        mw[l] = hyper.beta1 * mw[l] + (1.0 - hyper.beta1) * grad_w;
        vw[l] = hyper.beta2 * vw[l] + (1.0 - hyper.beta2) * grad_w.cwiseAbs2();
        mb[l] = hyper.beta1 * mb[l] + (1.0 - hyper.beta1) * grad_b;
        vb[l] = hyper.beta2 * vb[l] + (1.0 - hyper.beta2) * grad_b.cwiseAbs2();
        model.weights[l].array() -=
            hyper.learning_rate * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + hyper.epsilon);
        model.biases[l].array() -=
            hyper.learning_rate * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + hyper.epsilon);
      }
    }

    const double train_loss = detail::mse(model, train_set);
    const double val_loss = detail::mse(model, val_set);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw TrainingDiverged("train: loss became nonfinite at epoch " + std::to_string(epoch));
    result.report.train_mse.push_back(train_loss);
    result.report.validation_mse.push_back(val_loss);
    result.report.epochs_run = epoch + 1;
    if (val_loss < result.report.best_validation_mse) {
      result.report.best_validation_mse = val_loss;
      result.report.best_epoch = epoch;
      result.model = model;
    } else if (epoch - result.report.best_epoch >= hyper.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation against ground truth

struct RowEvaluation {
  std::uint64_t id = 0;
  double excursion_db = 0.0;
  std::vector<double> snr_error_db;  // predicted - true
  double rms_error_db = 0.0;
  double max_abs_error_db = 0.0;
  double capacity_predicted = 0.0;
  double capacity_true = 0.0;
  double capacity_relative_error = 0.0;
};

struct ExcursionBin {
  double lower_db = 0.0;
  double upper_db = 0.0;
  std::size_t rows = 0;
  double rms_error_db = 0.0;
  double max_abs_error_db = 0.0;
  double mean_capacity_relative_error = 0.0;
};

struct EvaluationReport {
  std::vector<RowEvaluation> rows;
  std::vector<ExcursionBin> bins;
  double rms_error_db = 0.0;  // over all rows and channels
  double max_abs_error_db = 0.0;
  double mean_capacity_relative_error = 0.0;
  double max_capacity_relative_error = 0.0;
};

/// Per-channel SNR and capacity errors of the twin against the rows' stored truths.
/// `only` restricts the rows to one split.
inline EvaluationReport evaluate(const TwinModel& model, const Dataset& data, const ChannelGrid& grid,
                                 std::optional<Split> only = std::nullopt, double eta = 1.0,
                                 double bin_width_db = 5.0) {
  EvaluationReport report;
  double sq_sum = 0.0;
  std::size_t count = 0;
  for (const auto& row : data.rows) {
    if (only && row.split != *only) continue;
    const TwinPrediction pred = forward(model, row.tx_dbm);
    RowEvaluation e;
    e.id = row.id;
    e.excursion_db = row.excursion_db;
    std::vector<double> truth(row.signal_dbm.size());
    std::vector<double> predicted = pred.snr_db();
    double row_sq = 0.0;
    for (std::size_t c = 0; c < truth.size(); ++c) {
      truth[c] = row.signal_dbm[c] - row.noise_dbm[c];
      const double err = predicted[c] - truth[c];
      e.snr_error_db.push_back(err);
      row_sq += err * err;
      e.max_abs_error_db = std::max(e.max_abs_error_db, std::abs(err));
    }
    e.rms_error_db = std::sqrt(row_sq / static_cast<double>(truth.size()));
    e.capacity_predicted = capacity_from_snr_db(predicted, grid, eta);
    e.capacity_true = capacity_from_snr_db(truth, grid, eta);
    e.capacity_relative_error = std::abs(e.capacity_predicted - e.capacity_true) / e.capacity_true;
    sq_sum += row_sq;
    count += truth.size();
    report.max_abs_error_db = std::max(report.max_abs_error_db, e.max_abs_error_db);
    report.max_capacity_relative_error = std::max(report.max_capacity_relative_error, e.capacity_relative_error);
    report.mean_capacity_relative_error += e.capacity_relative_error;
    report.rows.push_back(std::move(e));
  }
  if (!report.rows.empty()) {
    report.rms_error_db = std::sqrt(sq_sum / static_cast<double>(count));
    report.mean_capacity_relative_error /= static_cast<double>(report.rows.size());
  }

  for (const auto& e : report.rows) {
    const auto bin_index = static_cast<std::size_t>(std::floor(e.excursion_db / bin_width_db));
    auto it = std::find_if(report.bins.begin(), report.bins.end(),
                           [&](const ExcursionBin& b) { return b.lower_db == bin_index * bin_width_db; });
    if (it == report.bins.end()) {
      report.bins.push_back({bin_index * bin_width_db, (bin_index + 1) * bin_width_db});
      it = report.bins.end() - 1;
    }
    it->rows += 1;
    it->rms_error_db += e.rms_error_db * e.rms_error_db;
    it->max_abs_error_db = std::max(it->max_abs_error_db, e.max_abs_error_db);
    it->mean_capacity_relative_error += e.capacity_relative_error;
  }
  for (auto& b : report.bins) {
    b.rms_error_db = std::sqrt(b.rms_error_db / static_cast<double>(b.rows));
    b.mean_capacity_relative_error /= static_cast<double>(b.rows);
  }
  std::sort(report.bins.begin(), report.bins.end(),
            [](const ExcursionBin& a, const ExcursionBin& b) { return a.lower_db < b.lower_db; });
  return report;
}

}  // namespace capwatt

#endif  // CAPWATT_TWIN_HPP
