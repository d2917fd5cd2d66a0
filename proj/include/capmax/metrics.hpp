#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capmax {

/// WDM capacity 2 R_s sum_k log2(1 + eta SNR_k), in bit/s.
double capacity(std::span<const double> snr_linear, double symbol_rate_hz,
                double eta = 1.0);

/// Per-channel terms of capacity(), in bit/s.
std::vector<double> channel_capacities(std::span<const double> snr_linear,
                                       double symbol_rate_hz, double eta = 1.0);

/// Capacity of M uncoupled spatial paths of bandwidth B at a common SNR.
double cable_capacity(double snr_linear, int spatial_paths, double bandwidth_hz);

/// Effective SNR of a transponder in series with the line:
/// (1 / (eta SNR_trx) + 1 / SNR_line)^-1. An infinite snr_trx disables the
/// transponder term.
double combine_snr(double snr_trx, double snr_line, double eta = 1.0);

/// Figure of merit m = C / P_E, in bit/s/W.
double power_efficiency(double capacity_bps, double electrical_power_w);

/// One signal slot of an OSA trace together with the two empty slots that
/// bracket it. All powers in dBm over the same resolution bandwidth.
struct OsaSlot {
  double left_empty_dbm = 0.0;
  double slot_dbm = 0.0;
  double right_empty_dbm = 0.0;
};

/// Splits an interleaved trace [sig_0, empty_0, sig_1, ..., sig_{K-1}] of
/// 2K-1 slot powers into K bracketed slots. Edge channels take their missing
/// neighbor by linear extrapolation (in dB) from the two nearest empty slots.
std::vector<OsaSlot> bracket_interleaved(std::span<const double> trace_dbm);

struct OsaEstimate {
  std::vector<double> signal_mw;
  std::vector<double> noise_mw;
  std::vector<double> snr_linear;
};

/// Noise under each signal slot is the dB-domain midpoint of the bracketing
/// empty slots; signal is the slot power minus that noise (linear).
OsaEstimate estimate_snr_osa(std::span<const OsaSlot> slots);

struct CapacityReport {
  std::vector<double> per_channel_snr;
  std::vector<double> per_channel_capacity_bps;
  double total_capacity_bps = 0.0;
  std::optional<double> power_efficiency_bps_per_w;
  double eta = 1.0;
  double symbol_rate_hz = 0.0;

  static CapacityReport from_snr(std::vector<double> snr_linear,
                                 double symbol_rate_hz, double eta = 1.0,
                                 std::optional<double> electrical_power_w = std::nullopt);

  std::string to_json() const;
  static std::vector<std::string> csv_header();
  std::vector<std::string> csv_row() const;
};

}  // namespace capmax
