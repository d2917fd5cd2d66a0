#pragma once

// Capacity maximization on the digital twin: forward-difference gradients
// under the sum-power projection, smoothed gradient ascent, and batched
// campaigns from many initial profiles.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capmax/link_sim.hpp"
#include "capmax/surrogate.hpp"

namespace capmax {

struct CapacitySettings {
  double symbol_rate_hz = 50e9;
  double eta = 1.0;
};

/// Capacity of the twin's predicted RX spectrum, one value per TX column (dBm).
Eigen::VectorXd twin_capacity_batch(const MlpSurrogate& model, const Eigen::MatrixXd& tx_dbm,
                                    const CapacitySettings& settings = {});
double twin_capacity(const MlpSurrogate& model, const PowerProfile& profile,
                     const CapacitySettings& settings = {});

/// The projection delta: uniform scaling so the powers sum to total_mw.
std::vector<double> project_to_total(std::span<const double> powers_mw, double total_mw);

enum class SmoothingDomain { linear, db };

/// P_k <- w P_{k-1} + P_k + w P_{k+1}; out-of-band terms are dropped and the
/// weights are not renormalized. In the dB domain the same window is applied
/// to dBm values as a normalized weighted average.
std::vector<double> smooth_profile(std::span<const double> powers_mw, double side_weight,
                                   SmoothingDomain domain = SmoothingDomain::linear);

struct FdGradient {
  std::vector<double> gradient;  // bit/s per mW
  double capacity_bps = 0.0;     // at the unperturbed profile
  bool extrapolated = false;     // any of the evaluations left the training range
  std::size_t evaluations = 0;
};

/// Perturbation for fd_gradient: fraction times the weakest channel power.
double fd_epsilon(const PowerProfile& profile, double fraction = 1e-4);

/// Component k is [C(delta(P + eps e_k)) - C(P)] / eps on the twin.
FdGradient fd_gradient(const MlpSurrogate& model, const PowerProfile& profile, double eps_mw,
                       const CapacitySettings& settings = {});

/// Exact derivative of the same projected objective by backpropagation:
/// g_k - (g . P) / P_O with g the linear-domain gradient of C(h(P)).
std::vector<double> analytic_gradient(const MlpSurrogate& model, const PowerProfile& profile,
                                      const CapacitySettings& settings = {});

struct GdConfig {
  /// Fixed perturbation in mW; by default fd_epsilon(iterate, epsilon_fraction).
  std::optional<double> epsilon_mw;
  double epsilon_fraction = 1e-4;
  /// Step size; defaults to mu_scale (P_O / K) / max|g| with g taken at the
  /// flat profile of the same total power.
  std::optional<double> mu;
  double mu_scale = 0.02;
  double smoothing_weight = 0.03;
  SmoothingDomain smoothing_domain = SmoothingDomain::linear;
  int max_iterations = 300;
  double stop_tolerance = 1e-5;
  int stop_window = 10;
  /// Defaults to the initial profile's total.
  std::optional<double> total_power_dbm;
  /// Negative powers after a step are clamped to this fraction of P_O / K.
  double power_floor_fraction = 1e-6;
  double constraint_tolerance = 1e-9;
  CapacitySettings capacity;

  void validate() const;
};

struct IterationRecord {
  std::vector<double> powers_dbm;
  double capacity_bps = 0.0;
  double gradient_norm = 0.0;
  double epsilon_mw = 0.0;
  bool extrapolated = false;
};

struct OptimizationTrace {
  std::vector<IterationRecord> iterations;  // iterations[0] is the initial profile
  PowerProfile final_profile;
  double final_capacity_bps = 0.0;
  bool converged = false;
  bool aborted = false;
  std::string abort_reason;
  double mu = 0.0;
  double max_constraint_violation = 0.0;  // relative, over every iterate

  int iterations_used() const { return static_cast<int>(iterations.size()) - 1; }
  bool any_extrapolation() const;
};

/// Thrown when an iterate drifts off the total-power constraint.
class ConstraintViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

OptimizationTrace gd_maximize(const MlpSurrogate& model, const PowerProfile& initial,
                              const GdConfig& cfg);

struct CampaignRun {
  OptimizationTrace trace;
  double initial_excursion_db = 0.0;
  bool outlier = false;
};

struct CampaignSummary {
  std::vector<CampaignRun> runs;
  double best_capacity_bps = 0.0;
  std::size_t best_run = 0;
  /// (max - min) / max over converged runs.
  double converged_spread = 0.0;
  std::size_t converged_count = 0;
  std::size_t outlier_count = 0;
  double max_constraint_violation = 0.0;

  /// Runs whose final capacity is within `fraction` of the batch best.
  std::size_t within_of_best(double fraction) const;
  std::string to_json() const;
};

/// Independent GD runs against one shared model. `threads == 0` uses the
/// hardware concurrency.
CampaignSummary run_campaign(const MlpSurrogate& model, const std::vector<PowerProfile>& initials,
                             const GdConfig& cfg, unsigned threads = 0,
                             double outlier_fraction = 0.01);

void write_trace_csv(const std::filesystem::path& path, const OptimizationTrace& trace);

}  // namespace capmax
