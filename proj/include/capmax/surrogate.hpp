#pragma once

// Feed-forward digital twin of the link: log-scale TX powers in, log-scale RX
// signal and noise powers out, with min-max normalization on both sides.

#include <array>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace capmax {

enum class Activation { linear, sigmoid, softplus };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// Numerically stable forms; softplus never overflows for large |x|.
double sigmoid(double x);
double softplus(double x);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::linear;
};

/// Per-feature affine map onto [0, 1]. Features with a degenerate range are
/// given a unit-width range centered on their value.
struct MinMaxScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static MinMaxScaler fit(const Eigen::MatrixXd& data);  // features x samples
  Eigen::VectorXd range() const { return max - min; }
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& scaled) const;
};

struct SurrogatePrediction {
  std::vector<double> signal_dbm;
  std::vector<double> noise_dbm;
  /// Some input lies outside the training range by more than the margin.
  bool extrapolated = false;
};

class MlpSurrogate {
 public:
  static constexpr std::array<int, 4> kLayerDims{40, 80, 120, 80};
  static constexpr std::array<Activation, 3> kActivations{
      Activation::linear, Activation::sigmoid, Activation::linear};

  struct Cache {
    std::vector<Eigen::MatrixXd> pre;   // z per layer
    std::vector<Eigen::MatrixXd> post;  // post[0] is the network input
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    Eigen::MatrixXd input;  // d/d(normalized input)
  };

  MlpSurrogate() = default;
  MlpSurrogate(std::vector<DenseLayer> layers, MinMaxScaler input_scaler,
               MinMaxScaler output_scaler);

  /// Glorot-uniform weights, zero biases.
  static MlpSurrogate initialize(std::span<const int> dims,
                                 std::span<const Activation> activations,
                                 MinMaxScaler input_scaler, MinMaxScaler output_scaler,
                                 std::mt19937_64& rng);

  std::vector<int> dims() const;
  std::size_t parameter_count() const;
  bool has_standard_architecture() const;
  void validate() const;

  /// Normalized-domain pass over a batch (features x samples).
  Eigen::MatrixXd forward_normalized(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& d_output) const;

  /// dBm in, dBm out (first half signal, second half noise), batch-wise.
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& tx_dbm) const;
  SurrogatePrediction predict(std::span<const double> tx_dbm) const;
  bool extrapolates(const Eigen::Ref<const Eigen::VectorXd>& tx_dbm) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const MinMaxScaler& input_scaler() const { return input_scaler_; }
  const MinMaxScaler& output_scaler() const { return output_scaler_; }

  double extrapolation_margin_db = 3.0;
  std::string scenario_fingerprint;
  std::string train_fingerprint;

 private:
  std::vector<DenseLayer> layers_;
  MinMaxScaler input_scaler_;
  MinMaxScaler output_scaler_;
};

/// Mean absolute error in dB over signal and noise channels.
double mae_db(std::span<const double> signal_dbm, std::span<const double> noise_dbm,
              std::span<const double> predicted_signal_dbm,
              std::span<const double> predicted_noise_dbm);

inline constexpr int kModelFormatVersion = 1;

void save_model(const std::filesystem::path& path, const MlpSurrogate& model);

/// Rejects files whose weight shapes disagree with their declared dims, and
/// (when `require_standard`) anything but the 40-80-120-80 architecture.
MlpSurrogate load_model(const std::filesystem::path& path, bool require_standard = true);

}  // namespace capmax
