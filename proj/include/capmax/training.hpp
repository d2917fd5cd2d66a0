#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capmax/link_sim.hpp"
#include "capmax/surrogate.hpp"

namespace capmax {

/// RX powers below this are clamped before they become training targets.
inline constexpr double kRxFloorDbm = -40.0;

struct TrainingSet {
  Eigen::MatrixXd inputs;   // channels x samples, TX dBm
  Eigen::MatrixXd targets;  // 2*channels x samples, RX signal then noise, dBm
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }

  static TrainingSet from_observations(const std::vector<PowerProfile>& tx,
                                       const std::vector<RxObservation>& rx,
                                       double floor_dbm = kRxFloorDbm);

  /// Random disjoint split drawn from `seed`.
  void split(std::size_t n_train, std::size_t n_validation, std::uint64_t seed);

  /// Same validation set, first `n_train` training samples only.
  TrainingSet with_training_size(std::size_t n_train) const;

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2_lambda = 1e-5;
  int epochs = 2000;
  int batch_size_initial = 64;
  int batch_size_late = 16;
  int batch_switch_epoch = 100;
  // Step size decays geometrically from the batch switch to this fraction at the last epoch.
  double final_lr_fraction = 0.01;
  std::uint64_t seed = 7;
  std::vector<int> layer_dims{MlpSurrogate::kLayerDims.begin(), MlpSurrogate::kLayerDims.end()};
  std::vector<Activation> activations{MlpSurrogate::kActivations.begin(),
                                      MlpSurrogate::kActivations.end()};

  void validate() const;
  std::string fingerprint() const;
};

struct LearningCurves {
  std::vector<double> train_mae;            // normalized scale, per epoch
  std::vector<double> validation_mae;       // normalized scale, per epoch
  std::vector<double> validation_mae_db;    // unnormalized, per epoch
  std::vector<double> best_validation_mae;  // running minimum
  std::size_t best_epoch = 0;
};

struct TrainResult {
  MlpSurrogate model;  // parameters from the best validation epoch
  LearningCurves curves;
};

TrainResult train(const TrainingSet& data, const TrainConfig& cfg);

struct MaeStats {
  std::vector<double> per_sample_db;
  double mean_db = 0.0;
  double std_db = 0.0;
  double max_db = 0.0;
};

MaeStats evaluate_mae(const MlpSurrogate& model, const TrainingSet& data,
                      const std::vector<std::size_t>& indices);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Backprop parameter gradients of a smooth squared-error loss against
/// central differences at randomly chosen coordinates. The relative error
/// is |a - n| / max(|a|, |n|, 1e-7).
GradientCheckResult gradient_check(const MlpSurrogate& model, std::size_t coordinates = 100,
                                   double step = 1e-6, std::uint64_t seed = 11);

struct CrossValidationConfig {
  int folds = 5;
  std::size_t n_train = 1300;
  std::size_t n_validation = 140;
  std::uint64_t split_seed = 101;
  /// false: every fold reuses the same split and training seed.
  bool resample = true;
};

struct CrossValidation {
  std::vector<double> validation_mae_db;
  std::vector<double> train_mae_db;
  double mean_validation_db = 0.0;
  double std_validation_db = 0.0;
  bool overfitting = false;
};

CrossValidation cross_validate(const TrainingSet& data, const TrainConfig& cfg,
                               const CrossValidationConfig& cv);

}  // namespace capmax
