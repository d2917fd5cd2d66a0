#pragma once

// Waterfilling baselines: the closed-form allocation for signal-independent
// noise, an iterative RX-flattening loop against any transfer function, and
// the capacity-gain estimate for log-uniform noise.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "capmax/link_sim.hpp"

namespace capmax {

struct WaterfillSolution {
  std::vector<double> powers;
  double water_level = 0.0;
  std::vector<bool> active;
};

/// P_k = max(0, w - N_k) with sum P_k = total_power. Same units in and out.
WaterfillSolution analytic_waterfill(std::span<const double> noise, double total_power);

/// Largest violation of the optimality conditions, relative to total_power:
/// equal w - N_k - P_k = 0 on active channels, N_k >= w on inactive ones,
/// and the power budget.
double kkt_residual(std::span<const double> noise, const WaterfillSolution& solution,
                    double total_power);

/// sum_k log2(1 + P_k / N_k).
double shannon_sum(std::span<const double> powers, std::span<const double> noise);

/// Noise spread log-uniformly over fn_db; ratio of the waterfilled capacity
/// to the flat-SNR allocation with the same total power at mean_snr_db.
double waterfill_gain_analysis(double fn_db, double mean_snr_db, int channels = 40);

using TransferFunction = std::function<RxObservation(const PowerProfile&)>;

struct WaterfillConfig {
  double step_gain = 0.2;
  double flatness_tolerance_db = 0.05;
  int max_iterations = 2000;
  /// Give up when the best flatness has not improved for this many iterations.
  int stall_window = 50;
  /// Defaults to the initial profile's total.
  std::optional<double> total_power_dbm;
  double constraint_tolerance = 1e-9;

  void validate() const;
};

struct WaterfillTrace {
  std::vector<PowerProfile> profiles;  // profiles[0] is the projected initial
  std::vector<double> flatness_db;     // RX (S+N) peak-to-peak per iterate
  PowerProfile final_profile;          // best-so-far
  RxObservation final_rx;
  double final_flatness_db = 0.0;
  bool converged = false;
  double max_constraint_violation = 0.0;

  int iterations() const { return static_cast<int>(profiles.size()) - 1; }
};

/// Peak-to-peak of 10 log10(S_k + N_k).
double rx_flatness_db(const RxObservation& rx);

/// Raises TX power where RX signal+noise sits below the mean level and lowers
/// it elsewhere, by step_gain times the dB distance, renormalizing the total.
WaterfillTrace iterative_waterfill(const TransferFunction& link, const PowerProfile& initial,
                                   const WaterfillConfig& cfg);

}  // namespace capmax
