#include "capmax/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace capmax {

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softplus") return Activation::softplus;
  throw std::invalid_argument("unknown activation: " + name);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::softplus: return z.unaryExpr([](double v) { return softplus(v); });
  }
  throw std::logic_error("unknown activation");
}

// Elementwise derivative, given pre-activation z and post-activation y.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                                 Activation a) {
  switch (a) {
    case Activation::linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::sigmoid: return y.array() * (1.0 - y.array());
    case Activation::softplus: return z.unaryExpr([](double v) { return sigmoid(v); });
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& data) {
  if (data.cols() == 0) throw std::invalid_argument("cannot fit a scaler to zero samples");
  MinMaxScaler s;
  s.min = data.rowwise().minCoeff();
  s.max = data.rowwise().maxCoeff();
  for (Eigen::Index i = 0; i < s.min.size(); ++i) {
    if (!(s.max(i) - s.min(i) > 1e-9)) {
      const double center = 0.5 * (s.max(i) + s.min(i));
      s.min(i) = center - 0.5;
      s.max(i) = center + 0.5;
    }
  }
  return s;
}

Eigen::MatrixXd MinMaxScaler::normalize(const Eigen::MatrixXd& data) const {
  return (data.colwise() - min).array().colwise() / range().array();
}

Eigen::MatrixXd MinMaxScaler::denormalize(const Eigen::MatrixXd& scaled) const {
  return (scaled.array().colwise() * range().array()).matrix().colwise() + min;
}

MlpSurrogate::MlpSurrogate(std::vector<DenseLayer> layers, MinMaxScaler input_scaler,
                           MinMaxScaler output_scaler)
    : layers_(std::move(layers)),
      input_scaler_(std::move(input_scaler)),
      output_scaler_(std::move(output_scaler)) {
  validate();
}

MlpSurrogate MlpSurrogate::initialize(std::span<const int> dims,
                                      std::span<const Activation> activations,
                                      MinMaxScaler input_scaler, MinMaxScaler output_scaler,
                                      std::mt19937_64& rng) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw std::invalid_argument("need one activation per layer");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(dims[l + 1], dims[l]);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
  }
  return MlpSurrogate(std::move(layers), std::move(input_scaler), std::move(output_scaler));
}

std::vector<int> MlpSurrogate::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(static_cast<int>(layers_.front().weights.cols()));
  for (const auto& layer : layers_) d.push_back(static_cast<int>(layer.weights.rows()));
  return d;
}

std::size_t MlpSurrogate::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

bool MlpSurrogate::has_standard_architecture() const {
  const auto d = dims();
  if (d.size() != kLayerDims.size()) return false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] != kLayerDims[i]) return false;
  }
  return true;
}

void MlpSurrogate::validate() const {
  if (layers_.empty()) throw std::invalid_argument("model has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weights.rows()) {
      throw std::invalid_argument("bias length does not match layer width");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw std::invalid_argument("layer dimensions do not chain");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw std::invalid_argument("non-finite model parameters");
    }
  }
  const auto check_scaler = [](const MinMaxScaler& s, Eigen::Index n, const char* which) {
    if (s.min.size() != n || s.max.size() != n) {
      throw std::invalid_argument(std::string(which) + " scaler size mismatch");
    }
    if (!((s.max - s.min).array() > 0.0).all()) {
      throw std::invalid_argument(std::string(which) + " scaler needs min < max");
    }
  };
  check_scaler(input_scaler_, layers_.front().weights.cols(), "input");
  check_scaler(output_scaler_, layers_.back().weights.rows(), "output");
}

Eigen::MatrixXd MlpSurrogate::forward_normalized(const Eigen::MatrixXd& input,
                                                 Cache* cache) const {
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    a = activate(z, layer.activation);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }
  return a;
}

MlpSurrogate::Gradients MlpSurrogate::backward(const Cache& cache,
                                               const Eigen::MatrixXd& d_output) const {
  Gradients g;
  g.weights.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    delta.array() *=
        activation_slope(cache.pre[l], cache.post[l + 1], layer.activation).array();
    g.weights[l].noalias() = delta * cache.post[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    Eigen::MatrixXd upstream = layer.weights.transpose() * delta;
    delta = std::move(upstream);
  }
  g.input = std::move(delta);
  return g;
}

Eigen::MatrixXd MlpSurrogate::predict_batch(const Eigen::MatrixXd& tx_dbm) const {
  return output_scaler_.denormalize(forward_normalized(input_scaler_.normalize(tx_dbm)));
}

bool MlpSurrogate::extrapolates(const Eigen::Ref<const Eigen::VectorXd>& tx_dbm) const {
  return ((tx_dbm - input_scaler_.max).array() > extrapolation_margin_db).any() ||
         ((input_scaler_.min - tx_dbm).array() > extrapolation_margin_db).any();
}

SurrogatePrediction MlpSurrogate::predict(std::span<const double> tx_dbm) const {
  const Eigen::Index n_in = layers_.front().weights.cols();
  if (static_cast<Eigen::Index>(tx_dbm.size()) != n_in) {
    throw std::invalid_argument("input length does not match the model");
  }
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(tx_dbm.data(), n_in);
  const Eigen::VectorXd y = predict_batch(x);
  const Eigen::Index half = y.size() / 2;
  SurrogatePrediction p;
  p.signal_dbm.assign(y.data(), y.data() + half);
  p.noise_dbm.assign(y.data() + half, y.data() + y.size());
  p.extrapolated = extrapolates(x);
  return p;
}

double mae_db(std::span<const double> signal_dbm, std::span<const double> noise_dbm,
              std::span<const double> predicted_signal_dbm,
              std::span<const double> predicted_noise_dbm) {
  const std::size_t n = signal_dbm.size();
  if (noise_dbm.size() != n || predicted_signal_dbm.size() != n ||
      predicted_noise_dbm.size() != n || n == 0) {
    throw std::invalid_argument("MAE inputs must share one non-zero length");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += std::abs(signal_dbm[k] - predicted_signal_dbm[k]) +
           std::abs(noise_dbm[k] - predicted_noise_dbm[k]);
  }
  return acc / static_cast<double>(2 * n);
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::runtime_error("ragged weight matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void save_model(const std::filesystem::path& path, const MlpSurrogate& model) {
  nlohmann::json j;
  j["format"] = "capmax-mlp";
  j["version"] = kModelFormatVersion;
  j["layer_dims"] = model.dims();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    layers.push_back({{"activation", to_string(layer.activation)},
                      {"weights", matrix_to_json(layer.weights)},
                      {"bias", to_std(layer.bias)}});
  }
  j["layers"] = layers;
  j["input_scaler"] = {{"min", to_std(model.input_scaler().min)},
                       {"max", to_std(model.input_scaler().max)}};
  j["output_scaler"] = {{"min", to_std(model.output_scaler().min)},
                        {"max", to_std(model.output_scaler().max)}};
  j["extrapolation_margin_db"] = model.extrapolation_margin_db;
  j["scenario_fingerprint"] = model.scenario_fingerprint;
  j["train_fingerprint"] = model.train_fingerprint;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

MlpSurrogate load_model(const std::filesystem::path& path, bool require_standard) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "capmax-mlp") throw std::runtime_error("not a capmax model file");
  if (j.at("version").get<int>() != kModelFormatVersion) {
    throw std::runtime_error("unsupported model version");
  }
  const auto declared = j.at("layer_dims").get<std::vector<int>>();
  std::vector<DenseLayer> layers;
  for (const auto& jl : j.at("layers")) {
    DenseLayer layer;
    layer.activation = activation_from_string(jl.at("activation").get<std::string>());
    layer.weights = matrix_from_json(jl.at("weights"));
    layer.bias = vector_from_json(jl.at("bias"));
    layers.push_back(std::move(layer));
  }
  if (declared.size() != layers.size() + 1) {
    throw std::runtime_error("model dimension mismatch: layer count");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weights.cols() != declared[l] || layers[l].weights.rows() != declared[l + 1]) {
      throw std::runtime_error("model dimension mismatch in layer " + std::to_string(l));
    }
  }
  MinMaxScaler in_s{vector_from_json(j.at("input_scaler").at("min")),
                    vector_from_json(j.at("input_scaler").at("max"))};
  MinMaxScaler out_s{vector_from_json(j.at("output_scaler").at("min")),
                     vector_from_json(j.at("output_scaler").at("max"))};
  MlpSurrogate model(std::move(layers), std::move(in_s), std::move(out_s));
  if (require_standard && !model.has_standard_architecture()) {
    throw std::runtime_error("model dimension mismatch: expected 40-80-120-80");
  }
  model.extrapolation_margin_db = j.value("extrapolation_margin_db", 3.0);
  model.scenario_fingerprint = j.value("scenario_fingerprint", "");
  model.train_fingerprint = j.value("train_fingerprint", "");
  return model;
}

}  // namespace capmax
