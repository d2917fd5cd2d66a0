#pragma once

// Parametric ground-truth model of an amplified WDM line: spans of flat loss,
// each followed by a homogeneously saturated EDFA with an optional gain
// flattening filter. All powers are expectations (no noise realizations).

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capmax {

struct ChannelGrid {
  std::size_t channel_count = 40;
  double slot_width_hz = 50e9;
  double reference_bandwidth_hz = 50e9;
  std::vector<double> center_frequencies_hz;

  /// 40 signal slots on a 100 GHz pitch (interleaved with empty slots),
  /// 191.55 THz to 195.45 THz, i.e. a 4 THz band centered on 193.5 THz.
  static ChannelGrid standard();

  /// Channel position normalized to [0, 1] across the band.
  double band_position(std::size_t k) const;

  void validate() const;
};

struct EdfaParams {
  std::vector<double> small_signal_gain_db;
  double saturated_output_dbm = 0.0;
  std::vector<double> noise_figure_db;
  /// Present only when a GFF is attached after the amplifier.
  std::optional<std::vector<double>> gff_loss_db;
  double pump_electrical_mw = 0.0;
  /// Test switch; real amplifiers always add ASE.
  bool ase_enabled = true;

  bool has_gff() const { return gff_loss_db.has_value(); }
  void validate(std::size_t channel_count) const;
};

struct LinkConfig {
  std::size_t span_count = 12;
  double span_loss_db = 16.5;
  EdfaParams edfa;
  ChannelGrid grid = ChannelGrid::standard();
  std::string operating_point;

  void validate() const;
};

/// Per-channel launch powers. The total is carried alongside so that the
/// sum constraint can be checked after every normalization.
struct PowerProfile {
  std::vector<double> powers_dbm;
  double total_power_dbm = 0.0;

  static PowerProfile from_dbm(std::vector<double> powers_dbm);
  static PowerProfile from_mw(std::span<const double> powers_mw);
  static PowerProfile flat(std::size_t channel_count, double total_power_dbm);

  std::vector<double> powers_mw() const;
  double total_power_mw() const;
  double excursion_db() const;
  std::size_t size() const { return powers_dbm.size(); }

  /// Throws if any entry is non-finite or the linear sum drifts from the
  /// declared total by more than `rel_tol`.
  void validate(double rel_tol = 1e-9) const;
};

struct RxObservation {
  std::vector<double> signal_dbm;
  std::vector<double> noise_dbm;

  std::vector<double> snr_linear() const;
};

struct AmplifierOutput {
  std::vector<double> signal_mw;
  /// Incoming noise after amplification plus the ASE added here.
  std::vector<double> noise_mw;
  std::vector<double> added_ase_mw;
  /// Realized amplifier gain per channel, before the GFF.
  std::vector<double> gain_db;
  double compression_db = 0.0;
};

/// ASE power of one amplifier in the reference bandwidth, in mW:
/// F * h * nu * (G - 1) * B_ref.
double ase_power_mw(double noise_figure_db, double gain_db, double frequency_hz,
                    double reference_bandwidth_hz);

/// Homogeneously saturated amplifier. The small-signal gain shape is
/// compressed by one scalar (in dB) so that the total output of the carried
/// power (signal plus incoming noise) does not exceed the saturated output.
AmplifierOutput amplify(std::span<const double> signal_mw,
                        std::span<const double> noise_mw,
                        const EdfaParams& params, const ChannelGrid& grid);

AmplifierOutput amplify(std::span<const double> signal_mw,
                        const EdfaParams& params, const ChannelGrid& grid);

RxObservation transmit(const PowerProfile& profile, const LinkConfig& config);

/// Power conversion efficiency (P_out - P_in) / P_electrical.
double pce(double optical_in_mw, double optical_out_mw,
           double electrical_pump_mw);

}  // namespace capmax
