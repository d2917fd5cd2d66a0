#include "capmax/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "capmax/hash.hpp"

namespace capmax {

TrainingSet TrainingSet::from_observations(const std::vector<PowerProfile>& tx,
                                           const std::vector<RxObservation>& rx,
                                           double floor_dbm) {
  if (tx.empty() || tx.size() != rx.size()) {
    throw std::invalid_argument("need one RX observation per TX profile");
  }
  const auto channels = static_cast<Eigen::Index>(tx.front().size());
  TrainingSet set;
  set.inputs.resize(channels, static_cast<Eigen::Index>(tx.size()));
  set.targets.resize(2 * channels, static_cast<Eigen::Index>(tx.size()));
  for (std::size_t i = 0; i < tx.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (static_cast<Eigen::Index>(tx[i].size()) != channels ||
        static_cast<Eigen::Index>(rx[i].signal_dbm.size()) != channels ||
        static_cast<Eigen::Index>(rx[i].noise_dbm.size()) != channels) {
      throw std::invalid_argument("inconsistent channel counts in dataset");
    }
    for (Eigen::Index k = 0; k < channels; ++k) {
      set.inputs(k, col) = tx[i].powers_dbm[k];
      set.targets(k, col) = std::max(rx[i].signal_dbm[k], floor_dbm);
      set.targets(channels + k, col) = std::max(rx[i].noise_dbm[k], floor_dbm);
    }
  }
  return set;
}

void TrainingSet::split(std::size_t n_train, std::size_t n_validation, std::uint64_t seed) {
  if (n_train < 1 || n_validation < 1 || n_train + n_validation > size()) {
    throw std::invalid_argument("split sizes exceed the dataset");
  }
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  validation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                            order.begin() + static_cast<std::ptrdiff_t>(n_train + n_validation));
}

TrainingSet TrainingSet::with_training_size(std::size_t n_train) const {
  if (n_train < 1 || n_train > train_indices.size()) {
    throw std::invalid_argument("requested training size exceeds the training split");
  }
  TrainingSet out = *this;
  out.train_indices.resize(n_train);
  return out;
}

void TrainingSet::validate() const {
  if (inputs.cols() != targets.cols() || targets.rows() != 2 * inputs.rows()) {
    throw std::invalid_argument("training set shape mismatch");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("training set has non-finite values");
  }
  if (train_indices.empty() || validation_indices.empty()) {
    throw std::invalid_argument("training set needs non-empty training and validation splits");
  }
  std::vector<char> seen(size(), 0);
  for (auto i : train_indices) {
    if (i >= size()) throw std::invalid_argument("training index out of range");
    seen[i] = 1;
  }
  for (auto i : validation_indices) {
    if (i >= size()) throw std::invalid_argument("validation index out of range");
    if (seen[i]) throw std::invalid_argument("index appears in both splits");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 &&
        adam_epsilon > 0.0 && l2_lambda >= 0.0)) {
    throw std::invalid_argument("invalid Adam / L2 hyperparameters");
  }
  if (epochs < 1 || batch_size_initial < 1 || batch_size_late < 1 || batch_switch_epoch < 0) {
    throw std::invalid_argument("invalid epoch / batch settings");
  }
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("final_lr_fraction must be in (0, 1]");
  }
  if (layer_dims.size() < 2 || activations.size() + 1 != layer_dims.size()) {
    throw std::invalid_argument("need one activation per layer");
  }
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << learning_rate << ' ' << beta1 << ' ' << beta2 << ' ' << adam_epsilon << ' ' << l2_lambda
    << ' ' << epochs << ' ' << batch_size_initial << ' ' << batch_size_late << ' '
    << batch_switch_epoch << ' ' << final_lr_fraction << ' ' << seed;
  for (int d : layer_dims) s << " d" << d;
  for (auto a : activations) s << ' ' << to_string(a);
  return capmax::fingerprint(s.str());
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(cols[i]));
  }
  return out;
}

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const MlpSurrogate& model) {
    for (const auto& layer : model.layers()) {
      mw.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      vw.push_back(mw.back());
      mb.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
      vb.push_back(mb.back());
    }
  }

  void apply(MlpSurrogate& model, const MlpSurrogate::Gradients& g, const TrainConfig& cfg,
             double lr_scale) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const double lr = lr_scale * cfg.learning_rate * std::sqrt(c2) / c1;
    auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * g.weights[l];
      vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * g.weights[l].cwiseAbs2();
      layers[l].weights.array() -=
          lr * mw[l].array() / (vw[l].array().sqrt() + cfg.adam_epsilon);
      mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * g.bias[l];
      vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * g.bias[l].cwiseAbs2();
      layers[l].bias.array() -= lr * mb[l].array() / (vb[l].array().sqrt() + cfg.adam_epsilon);
    }
  }
};

double normalized_mae(const MlpSurrogate& model, const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& y) {
  return (model.forward_normalized(x) - y).cwiseAbs().mean();
}

}  // namespace

TrainResult train(const TrainingSet& data, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  if (data.inputs.rows() != cfg.layer_dims.front() ||
      data.targets.rows() != cfg.layer_dims.back()) {
    throw std::invalid_argument("dataset does not match the configured layer dims");
  }
  std::mt19937_64 rng(cfg.seed);

  const Eigen::MatrixXd x_train_raw = gather(data.inputs, data.train_indices);
  const Eigen::MatrixXd y_train_raw = gather(data.targets, data.train_indices);
  MinMaxScaler in_scaler = MinMaxScaler::fit(x_train_raw);
  MinMaxScaler out_scaler = MinMaxScaler::fit(y_train_raw);
  const Eigen::MatrixXd x_train = in_scaler.normalize(x_train_raw);
  const Eigen::MatrixXd y_train = out_scaler.normalize(y_train_raw);
  const Eigen::MatrixXd x_val = in_scaler.normalize(gather(data.inputs, data.validation_indices));
  const Eigen::MatrixXd y_val_raw = gather(data.targets, data.validation_indices);
  const Eigen::MatrixXd y_val = out_scaler.normalize(y_val_raw);

  MlpSurrogate model =
      MlpSurrogate::initialize(cfg.layer_dims, cfg.activations, in_scaler, out_scaler, rng);
  model.train_fingerprint = cfg.fingerprint();
  AdamState adam(model);
  std::bernoulli_distribution coin(0.5);

  TrainResult result;
  MlpSurrogate best = model;
  double best_val = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(x_train.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MlpSurrogate::Cache cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batch = static_cast<std::size_t>(
        epoch < cfg.batch_switch_epoch ? cfg.batch_size_initial : cfg.batch_size_late);
    double lr_scale = 1.0;
    if (epoch > cfg.batch_switch_epoch && cfg.epochs - 1 > cfg.batch_switch_epoch) {
      const double t = static_cast<double>(epoch - cfg.batch_switch_epoch) /
                       static_cast<double>(cfg.epochs - 1 - cfg.batch_switch_epoch);
      lr_scale = std::pow(cfg.final_lr_fraction, t);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const auto cols = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(x_train.rows(), cols);
      Eigen::MatrixXd yb(y_train.rows(), cols);
      for (Eigen::Index c = 0; c < cols; ++c) {
        xb.col(c) = x_train.col(static_cast<Eigen::Index>(order[start + c]));
        yb.col(c) = y_train.col(static_cast<Eigen::Index>(order[start + c]));
      }
      const Eigen::MatrixXd err = model.forward_normalized(xb, &cache) - yb;
      const double loss = err.cwiseAbs().mean();
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch offset " +
                                 std::to_string(start));
      }
      // Subgradient of |e|; an exact zero gets a random sign.
      Eigen::MatrixXd d_out(err.rows(), err.cols());
      const double scale = 1.0 / static_cast<double>(err.size());
      for (Eigen::Index c = 0; c < err.cols(); ++c) {
        for (Eigen::Index r = 0; r < err.rows(); ++r) {
          const double e = err(r, c);
          const double s = e > 0.0 ? 1.0 : e < 0.0 ? -1.0 : (coin(rng) ? 1.0 : -1.0);
          d_out(r, c) = s * scale;
        }
      }
      MlpSurrogate::Gradients grads = model.backward(cache, d_out);
      for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        grads.weights[l] += 2.0 * cfg.l2_lambda * model.layers()[l].weights;
      }
      adam.apply(model, grads, cfg, lr_scale);
    }

    const double train_mae = normalized_mae(model, x_train, y_train);
    const Eigen::MatrixXd val_pred = model.forward_normalized(x_val);
    const double val_mae = (val_pred - y_val).cwiseAbs().mean();
    const double val_mae_db = (out_scaler.denormalize(val_pred) - y_val_raw).cwiseAbs().mean();
    if (!std::isfinite(train_mae) || !std::isfinite(val_mae)) {
      throw std::runtime_error("training diverged: non-finite MAE after epoch " +
                               std::to_string(epoch));
    }
    result.curves.train_mae.push_back(train_mae);
    result.curves.validation_mae.push_back(val_mae);
    result.curves.validation_mae_db.push_back(val_mae_db);
    if (val_mae < best_val) {
      best_val = val_mae;
      best = model;
      result.curves.best_epoch = static_cast<std::size_t>(epoch);
    }
    result.curves.best_validation_mae.push_back(best_val);
  }
  result.model = std::move(best);
  return result;
}

MaeStats evaluate_mae(const MlpSurrogate& model, const TrainingSet& data,
                      const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("no samples to evaluate");
  const Eigen::MatrixXd pred = model.predict_batch(gather(data.inputs, indices));
  const Eigen::MatrixXd truth = gather(data.targets, indices);
  MaeStats stats;
  stats.per_sample_db.resize(indices.size());
  for (Eigen::Index c = 0; c < pred.cols(); ++c) {
    stats.per_sample_db[c] = (pred.col(c) - truth.col(c)).cwiseAbs().mean();
  }
  const double n = static_cast<double>(indices.size());
  stats.mean_db = std::accumulate(stats.per_sample_db.begin(), stats.per_sample_db.end(), 0.0) / n;
  double var = 0.0;
  for (double v : stats.per_sample_db) var += (v - stats.mean_db) * (v - stats.mean_db);
  stats.std_db = std::sqrt(var / n);
  stats.max_db = *std::max_element(stats.per_sample_db.begin(), stats.per_sample_db.end());
  return stats;
}

GradientCheckResult gradient_check(const MlpSurrogate& model, std::size_t coordinates,
                                   double step, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto dims = model.dims();
  constexpr Eigen::Index kBatch = 8;
  Eigen::MatrixXd x(dims.front(), kBatch);
  Eigen::MatrixXd y(dims.back(), kBatch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);

  const auto loss = [&](const MlpSurrogate& m) {
    return 0.5 * (m.forward_normalized(x) - y).squaredNorm() / static_cast<double>(y.size());
  };
  MlpSurrogate::Cache cache;
  const Eigen::MatrixXd out = model.forward_normalized(x, &cache);
  const auto grads = model.backward(cache, (out - y) / static_cast<double>(y.size()));

  // Flat parameter index -> (layer, is_bias, offset).
  std::vector<std::size_t> layer_offsets;
  std::size_t total = 0;
  for (const auto& layer : model.layers()) {
    layer_offsets.push_back(total);
    total += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);

  GradientCheckResult result;
  MlpSurrogate probe = model;
  for (std::size_t i = 0; i < coordinates; ++i) {
    const std::size_t flat = pick(rng);
    std::size_t l = layer_offsets.size() - 1;
    while (layer_offsets[l] > flat) --l;
    std::size_t offset = flat - layer_offsets[l];
    auto& layer = probe.layers()[l];
    double* param = nullptr;
    double analytic = 0.0;
    if (offset < static_cast<std::size_t>(layer.weights.size())) {
      param = layer.weights.data() + offset;
      analytic = grads.weights[l].data()[offset];
    } else {
      offset -= static_cast<std::size_t>(layer.weights.size());
      param = layer.bias.data() + offset;
      analytic = grads.bias[l].data()[offset];
    }
    const double saved = *param;
    *param = saved + step;
    const double up = loss(probe);
    *param = saved - step;
    const double down = loss(probe);
    *param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.coordinates;
  }
  return result;
}

CrossValidation cross_validate(const TrainingSet& data, const TrainConfig& cfg,
                               const CrossValidationConfig& cv) {
  if (cv.folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  CrossValidation out;
  for (int f = 0; f < cv.folds; ++f) {
    TrainingSet fold = data;
    const auto offset = cv.resample ? static_cast<std::uint64_t>(f) : 0U;
    fold.split(cv.n_train, cv.n_validation, cv.split_seed + offset);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + offset;
    const TrainResult r = train(fold, fold_cfg);
    out.validation_mae_db.push_back(evaluate_mae(r.model, fold, fold.validation_indices).mean_db);
    out.train_mae_db.push_back(evaluate_mae(r.model, fold, fold.train_indices).mean_db);
  }
  const double n = static_cast<double>(cv.folds);
  out.mean_validation_db =
      std::accumulate(out.validation_mae_db.begin(), out.validation_mae_db.end(), 0.0) / n;
  double var = 0.0;
  double gap = 0.0;
  for (int f = 0; f < cv.folds; ++f) {
    var += std::pow(out.validation_mae_db[f] - out.mean_validation_db, 2);
    gap += out.validation_mae_db[f] - out.train_mae_db[f];
  }
  out.std_validation_db = std::sqrt(var / n);
  out.overfitting = gap / n > 0.05;
  return out;
}

}  // namespace capmax
