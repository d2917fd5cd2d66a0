#pragma once

// Experiment orchestration shared by the CLI and the tests: scenario
// lookup, dataset simulation, twin training, GD campaigns, validation
// against the simulator, GFF ablation and the waterfilling gain surface.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "capmax/calibration.hpp"
#include "capmax/optimizer.hpp"
#include "capmax/profile_gen.hpp"
#include "capmax/training.hpp"
#include "capmax/waterfill.hpp"

namespace capmax {

inline constexpr const char* kSoftwareVersion = "0.1.0";

struct DatasetSpec {
  std::size_t count = 1440;
  double f_min_db = 6.0;
  double f_max_db = 45.0;
  std::size_t candidates_per_draw = 100;
  std::uint64_t seed = 1;
};

struct ExperimentSpec {
  std::string scenario_id = "150mA-nogff";
  DatasetSpec dataset;
  std::size_t n_train = 1300;
  std::size_t n_validation = 140;
  std::uint64_t split_seed = 5;
  TrainConfig train;
  GdConfig gd;
  WaterfillConfig waterfill;
  std::vector<double> etas{1.0, 0.5, 0.25};
  double symbol_rate_hz = 50e9;
  std::size_t campaign_initials = 100;
  std::uint64_t campaign_seed = 2;
  std::vector<std::size_t> sweep_sizes{100, 200, 400, 700, 1000, 1300};
  unsigned threads = 0;

  /// 10 profiles, 20 initials, a few epochs.
  static ExperimentSpec smoke();
  /// Overlays the keys present in `j` onto `base`; unknown keys are errors.
  static ExperimentSpec from_json(const nlohmann::json& j, ExperimentSpec base);
  static ExperimentSpec load(const std::filesystem::path& path, ExperimentSpec base);
  nlohmann::json to_json() const;
  std::string fingerprint() const;
  /// Applies one seed to the dataset, split, training and campaign streams.
  void reseed(std::uint64_t seed);
  void validate() const;

  CapacitySettings capacity(double eta = 1.0) const { return {symbol_rate_hz, eta}; }
};

/// The six calibrated pump-setting x GFF scenarios (computed once).
const std::vector<Scenario>& standard_scenarios();
const Scenario& scenario_by_id(const std::string& id);
std::string scenario_fingerprint(const Scenario& scenario);

struct Dataset {
  std::vector<PowerProfile> tx;
  std::vector<RxObservation> rx;
};

ProfileBatch generate_profiles(const DatasetSpec& spec, double total_power_dbm);

/// Runs the simulator for every profile; failures name the row.
Dataset simulate_dataset(const std::vector<PowerProfile>& profiles, const Scenario& scenario,
                         unsigned threads = 0);

/// Columns tx_dbm_k, s_dbm_k, n_dbm_k for k = 1..K.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& scenario_fp);
Dataset read_dataset_csv(const std::filesystem::path& path, std::string* scenario_fp = nullptr);

struct Twin {
  MlpSurrogate model;
  TrainingSet data;
  LearningCurves curves;
  MaeStats validation;
  std::vector<double> validation_excursions_db;
};

Twin train_twin(const Dataset& dataset, const Scenario& scenario, const ExperimentSpec& spec);
/// generate_profiles + simulate_dataset + train_twin.
Twin build_twin(const Scenario& scenario, const ExperimentSpec& spec);

struct SizeSweepPoint {
  std::size_t training_size = 0;
  double mean_mae_db = 0.0;
  double std_mae_db = 0.0;
};

/// Retrains on growing prefixes of the training split; scored on the
/// unchanged validation split.
std::vector<SizeSweepPoint> training_size_sweep(const TrainingSet& data,
                                                const std::vector<std::size_t>& sizes,
                                                const TrainConfig& cfg);

double simulator_capacity(const Scenario& scenario, const PowerProfile& profile,
                          const CapacitySettings& settings = {});

struct ValidationReport {
  double twin_capacity_bps = 0.0;
  double simulator_capacity_bps = 0.0;
  /// (twin - simulator) / simulator.
  double relative_error = 0.0;
  std::vector<double> twin_snr_db;
  std::vector<double> simulator_snr_db;
  bool extrapolated = false;

  nlohmann::json to_json() const;
};

/// Refuses a model trained for another scenario ("scenario fingerprint mismatch").
ValidationReport validate_profile(const MlpSurrogate& model, const Scenario& scenario,
                                  const PowerProfile& profile,
                                  const CapacitySettings& settings = {});

/// Flat, 10 dB ramp, and one random-walk profile at 20 dB excursion.
std::vector<std::pair<std::string, PowerProfile>> canonical_initials(double total_power_dbm,
                                                                     std::uint64_t seed);

/// Random-walk initials with excursions spread over the dataset range.
std::vector<PowerProfile> campaign_initials(const ExperimentSpec& spec, double total_power_dbm);

struct ScenarioOutcome {
  std::string scenario_id;
  double eta = 1.0;
  double line_pump_w = 0.0;
  OptimizationTrace gd;
  ValidationReport validation;
  WaterfillTrace waterfill;
  double waterfill_capacity_bps = 0.0;  // simulator, at the waterfilled profile
  double flat_capacity_bps = 0.0;       // simulator, flat launch
  /// Simulator capacity of the GD profile per electrical watt.
  double figure_of_merit() const { return validation.simulator_capacity_bps / line_pump_w; }
};

/// GD on the twin from a flat launch, validated on the simulator, against
/// iterative waterfilling run directly on the simulator.
ScenarioOutcome optimize_scenario(const MlpSurrogate& model, const Scenario& scenario,
                                  const ExperimentSpec& spec, double eta = 1.0);

struct GainSurfacePoint {
  double fn_db = 0.0;
  double mean_snr_db = 0.0;
  double ratio = 1.0;
  /// F_N at or below 12.2 dB and SNR at or above 12.4 dB.
  bool experimental_region = false;
};

std::vector<GainSurfacePoint> appendix_a_surface(const std::vector<double>& fn_db,
                                                 const std::vector<double>& snr_db,
                                                 int channels = 40);

struct RunManifest {
  std::string command;
  std::string version = kSoftwareVersion;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::pair<std::string, std::string>> files;  // path, FNV-1a hash

  void add_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path);
};

std::string utc_timestamp();

}  // namespace capmax
