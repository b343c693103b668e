#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "foilskin/errors.hpp"
#include "foilskin/geometry.hpp"
#include "foilskin/ingestion.hpp"
#include "foilskin/sensing.hpp"
#include "json.hpp"

namespace foilskin {

enum class Activation { relu, linear };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw UsageError("unknown activation '" + s + "'");
}

inline const std::vector<std::size_t> kShapeEstimatorSizes{kChannelCount, 32, 128, 32, kTargetCount};

/// Fully connected regressor. Inputs are standardised with the stored
/// per-channel mean/scale before the first layer; outputs are in target
/// units and multiplied by `output_scale` to get millimetres.
struct MlpModel {
  std::vector<std::size_t> sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  double output_scale = 1.0;
  std::uint64_t seed = 0;

  std::size_t layers() const { return weights.size(); }
  std::size_t input_size() const { return sizes.front(); }
  std::size_t output_size() const { return sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
  }
};

inline void validate_sizes(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw UsageError("an MLP needs at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw UsageError("MLP layer sizes must be positive");
  }
}

/// Glorot-uniform weights, zero biases, ReLU hidden layers, linear output.
inline MlpModel mlp_init(std::span<const std::size_t> sizes, std::uint64_t seed) {
  validate_sizes(sizes);
  MlpModel m;
  m.sizes.assign(sizes.begin(), sizes.end());
  m.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t n_layers = sizes.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = limit * unit(rng);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    m.activations.push_back(l + 1 == n_layers ? Activation::linear : Activation::relu);
  }
  m.input_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes.front()));
  m.input_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sizes.front()));
  return m;
}

namespace detail {

inline void activate(Eigen::Ref<Eigen::MatrixXd> z, Activation a) {
  if (a == Activation::relu) z = z.cwiseMax(0.0);
}

inline Eigen::MatrixXd standardize(const MlpModel& m, const Eigen::MatrixXd& x) {
  return (x.colwise() - m.input_mean).array().colwise() / m.input_scale.array();
}

}  // namespace detail

/// Batched forward pass; columns are samples.
inline Eigen::MatrixXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != m.input_size()) {
    throw UsageError("forward: input has " + std::to_string(inputs.rows()) + " rows, model expects " +
                     std::to_string(m.input_size()));
  }
  Eigen::MatrixXd a = detail::standardize(m, inputs);
  for (std::size_t l = 0; l < m.layers(); ++l) {
    Eigen::MatrixXd z = m.weights[l] * a;
    z.colwise() += m.biases[l];
    detail::activate(z, m.activations[l]);
    a = std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const MlpModel& m, std::span<const double> input) {
  for (double v : input) {
    if (!std::isfinite(v)) throw UsageError("forward: non-finite input");
  }
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(m, Eigen::MatrixXd(x)).col(0);
}

/// Mean of squared componentwise errors.
inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw UsageError("loss_mse: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

inline double loss_mse_batch(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};

/// MSE loss over the batch (mean over samples and outputs) and its gradient
/// with respect to every weight and bias.
inline MlpGradients backward(const MlpModel& m, const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& targets) {
  const std::size_t n_layers = m.layers();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(detail::standardize(m, inputs));
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = m.weights[l] * acts.back();
    z.colwise() += m.biases[l];
    detail::activate(z, m.activations[l]);
    acts.push_back(std::move(z));
  }
  const Eigen::MatrixXd& pred = acts.back();
  if (pred.rows() != targets.rows() || pred.cols() != targets.cols()) {
    throw UsageError("backward: target shape does not match the model output");
  }
  MlpGradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  g.loss = loss_mse_batch(pred, targets);

  Eigen::MatrixXd delta = (2.0 / static_cast<double>(pred.size())) * (pred - targets);
  for (std::size_t l = n_layers; l-- > 0;) {
    if (m.activations[l] == Activation::relu) {
      delta = (acts[l + 1].array() > 0.0).select(delta, 0.0);
    }
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) delta = m.weights[l].transpose() * delta;
  }
  return g;
}

class AdamOptimizer {
 public:
  AdamOptimizer(const MlpModel& m, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    for (std::size_t l = 0; l < m.layers(); ++l) {
      mw_.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
      vw_.push_back(mw_.back());
      mb_.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
      vb_.push_back(mb_.back());
    }
  }

  void step(MlpModel& m, const MlpGradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t l = 0; l < m.layers(); ++l) {
      update(m.weights[l], mw_[l], vw_[l], g.weights[l], c1, c2);
      update(m.biases[l], mb_[l], vb_[l], g.biases[l], c1, c2);
    }
  }

 private:
  template <typename P, typename G>
  void update(P& param, P& mom, P& vel, const G& grad, double c1, double c2) {
    mom = beta1_ * mom + (1.0 - beta1_) * grad;
    vel = beta2_ * vel + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (mom.array() / c1) / ((vel.array() / c2).sqrt() + eps_);
  }

  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 5000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  std::size_t patience = 500;  // 0 disables early stopping

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  }
};

struct TrainReport {
  std::vector<double> train_loss;       // per epoch, mean over training samples
  std::vector<double> validation_loss;  // per epoch, after the epoch's updates
  double initial_validation_loss = 0.0;
  double best_validation_loss = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial model
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

namespace detail {

inline void gather(const Dataset& ds, std::span<const std::size_t> idx, Eigen::MatrixXd& x,
                   Eigen::MatrixXd& y) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  x.resize(static_cast<Eigen::Index>(kChannelCount), n);
  y.resize(static_cast<Eigen::Index>(kTargetCount), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& p = ds.pairs[idx[static_cast<std::size_t>(c)]];
    for (std::size_t r = 0; r < kChannelCount; ++r) x(static_cast<Eigen::Index>(r), c) = p.input[r];
    for (std::size_t r = 0; r < kTargetCount; ++r) y(static_cast<Eigen::Index>(r), c) = p.target[r];
  }
}

}  // namespace detail

/// Sets input standardisation from the training split and the output scale
/// from the dataset.
inline void fit_scaling(MlpModel& m, const Dataset& ds) {
  if (ds.train.empty()) throw DatasetError("training split is empty");
  if (m.input_size() != kChannelCount) throw UsageError("model input size must be 9");
  Eigen::MatrixXd x, y;
  detail::gather(ds, ds.train, x, y);
  m.input_mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - m.input_mean;
  Eigen::VectorXd var = centered.rowwise().squaredNorm() / static_cast<double>(x.cols());
  m.input_scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  m.output_scale = ds.target_scale;
}

inline double evaluate_loss(const MlpModel& m, const Dataset& ds, std::span<const std::size_t> idx) {
  Eigen::MatrixXd x, y;
  detail::gather(ds, idx, x, y);
  return loss_mse_batch(forward_batch(m, x), y);
}

/// Mini-batch Adam on the training split; returns the model at the epoch
/// with the lowest validation loss.
inline TrainResult train(const MlpModel& initial, const Dataset& ds, const TrainConfig& config) {
  config.validate();
  if (ds.train.empty() || ds.validation.empty()) throw DatasetError("train and validation splits must be non-empty");
  if (initial.input_size() != kChannelCount || initial.output_size() != kTargetCount) {
    throw UsageError("model must map 9 inputs to 10 outputs");
  }
  TrainResult result{initial, {}};
  MlpModel model = initial;
  AdamOptimizer adam(model, config.learning_rate);
  std::mt19937_64 rng(config.seed);

  Eigen::MatrixXd xval, yval;
  detail::gather(ds, ds.validation, xval, yval);
  auto validation_loss = [&](const MlpModel& m) { return loss_mse_batch(forward_batch(m, xval), yval); };

  result.report.initial_validation_loss = validation_loss(model);
  result.report.best_validation_loss = result.report.initial_validation_loss;
  if (!std::isfinite(result.report.initial_validation_loss)) {
    throw TrainingError(0, "initial validation loss is not finite");
  }

  std::vector<std::size_t> order = ds.train;
  Eigen::MatrixXd xb, yb;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      detail::gather(ds, std::span(order).subspan(start, count), xb, yb);
      const MlpGradients g = backward(model, xb, yb);
      if (!std::isfinite(g.loss)) throw TrainingError(epoch, "training loss is not finite");
      weighted += g.loss * static_cast<double>(count);
      adam.step(model, g);
    }
    const double train_loss = weighted / static_cast<double>(order.size());
    const double val_loss = validation_loss(model);
    if (!std::isfinite(val_loss)) throw TrainingError(epoch, "validation loss is not finite");
    result.report.train_loss.push_back(train_loss);
    result.report.validation_loss.push_back(val_loss);
    if (val_loss < result.report.best_validation_loss) {
      result.report.best_validation_loss = val_loss;
      result.report.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

/// Marker positions in millimetres from one normalised frame.
inline MarkerSet estimate_markers(const MlpModel& m, const CapacitanceFrame& frame) {
  if (frame.kind != FrameKind::normalized) {
    throw UsageError("estimate_markers expects a normalized frame");
  }
  if (m.input_size() != kChannelCount || m.output_size() != kTargetCount) {
    throw UsageError("model must map 9 channels to 10 marker coordinates");
  }
  const Eigen::VectorXd out = forward(m, frame.values);
  MarkerSet markers;
  markers.t = frame.t;
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    markers.points[i] = {m.output_scale * out(static_cast<Eigen::Index>(2 * i)),
                         m.output_scale * out(static_cast<Eigen::Index>(2 * i + 1))};
  }
  return markers;
}

// JSON layout: weights are row-major arrays of length rows*cols.
inline nlohmann::ordered_json model_to_json(const MlpModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "foilskin-mlp";
  j["version"] = 1;
  j["sizes"] = m.sizes;
  std::vector<std::string> acts;
  for (auto a : m.activations) acts.push_back(to_string(a));
  j["activations"] = acts;
  auto layers = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < m.layers(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(m.weights[l].size()));
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) w.push_back(m.weights[l](r, c));
    }
    std::vector<double> b(m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
    layers.push_back({{"weights", w}, {"biases", b}});
  }
  j["layers"] = layers;
  j["scaling"] = {
      {"input_mean", std::vector<double>(m.input_mean.data(), m.input_mean.data() + m.input_mean.size())},
      {"input_scale", std::vector<double>(m.input_scale.data(), m.input_scale.data() + m.input_scale.size())},
      {"output_scale_mm", m.output_scale}};
  j["seed"] = m.seed;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    MlpModel m;
    m.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    validate_sizes(m.sizes);
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    const auto& layers = j.at("layers");
    if (acts.size() != m.sizes.size() - 1 || layers.size() != acts.size()) {
      throw UsageError("model layer count does not match sizes");
    }
    for (std::size_t l = 0; l < acts.size(); ++l) {
      m.activations.push_back(activation_from_string(acts[l]));
      const auto rows = static_cast<Eigen::Index>(m.sizes[l + 1]);
      const auto cols = static_cast<Eigen::Index>(m.sizes[l]);
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("biases").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows)) {
        throw UsageError("model layer " + std::to_string(l) + " has the wrong parameter count");
      }
      Eigen::MatrixXd wm(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      m.weights.push_back(std::move(wm));
      m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    }
    const auto& s = j.at("scaling");
    const auto mean = s.at("input_mean").get<std::vector<double>>();
    const auto scale = s.at("input_scale").get<std::vector<double>>();
    if (mean.size() != m.sizes.front() || scale.size() != m.sizes.front()) {
      throw UsageError("model input scaling has the wrong length");
    }
    m.input_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    m.output_scale = s.at("output_scale_mm").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::data, std::string("malformed model document: ") + e.what());
  } catch (const UsageError& e) {
    throw Error(ErrorCategory::data, std::string("inconsistent model document: ") + e.what());
  }
}

inline void save_model(const std::string& path, const MlpModel& m) {
  csv::write_file(path, model_to_json(m).dump(1) + "\n");
}

inline MlpModel load_model(const std::string& path) {
  auto in = csv::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::data, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace foilskin
