#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "capmax/link_sim.hpp"

namespace capmax {

struct OperatingPointTarget {
  double pump_current_ma = 0.0;
  double pump_power_mw = 0.0;
  /// Total optical output per amplifier, measured after the GFF.
  double output_dbm = 0.0;
  double pce_with_gff = 0.0;
  double pce_without_gff = 0.0;
  /// Electrical pump power summed over all line amplifiers.
  double line_pump_w = 0.0;
};

std::vector<OperatingPointTarget> load_operating_points(
    const std::filesystem::path& path);

/// The operating-point table shipped in data/.
std::vector<OperatingPointTarget> default_operating_points();

struct RippleTerm {
  double amplitude_db = 0.0;
  double cycles = 0.0;  // periods across the band
  double phase_rad = 0.0;
};

/// Spectral design of the (unflattened) amplifier. Shapes are deviations in
/// dB around the mean small-signal gain, as a function of band position.
struct AmplifierDesign {
  double small_signal_gain_db = 30.0;
  double native_tilt_db = 0.5;
  std::vector<RippleTerm> ripple = {
      {0.45, 1.25, 0.40}, {0.22, 2.60, 1.90}, {0.10, 4.10, 3.30}};
  /// Gain tilt left after the GFF, peak-to-peak across the band.
  double residual_tilt_db = 1.3;
  double noise_figure_low_pump_db = 4.9;
  double noise_figure_high_pump_db = 4.6;
  double noise_figure_spectral_db = 0.1;

  std::vector<double> native_shape_db(const ChannelGrid& grid) const;
  std::vector<double> flattened_shape_db(const ChannelGrid& grid) const;
};

struct CalibratedPoint {
  OperatingPointTarget target;
  /// Total amplifier input at which the table's PCE values hold.
  double nominal_input_mw = 0.0;
  EdfaParams with_gff;
  EdfaParams without_gff;
};

struct Calibration {
  ChannelGrid grid;
  AmplifierDesign design;
  std::vector<CalibratedPoint> points;  // sorted by pump power

  const CalibratedPoint& at_current(double pump_current_ma) const;

  /// Amplifier parameters at an arbitrary pump power, piecewise-linear
  /// between calibrated points. Out-of-range pump powers are rejected.
  EdfaParams params_at_pump(double pump_power_mw, bool gff) const;
};

/// Fits saturated output power and GFF insertion loss per operating point so
/// that pce() at the nominal flat input reproduces the targets.
Calibration calibrate(std::span<const OperatingPointTarget> targets,
                      const AmplifierDesign& design = {},
                      const ChannelGrid& grid = ChannelGrid::standard());

/// Measured total output (signal + ASE) and PCE of a single amplifier driven
/// by a flat input with the given total power.
struct SingleAmpCheck {
  double output_mw = 0.0;
  double pce = 0.0;
};
SingleAmpCheck simulate_pce(const EdfaParams& params, const ChannelGrid& grid,
                            double total_input_mw);

/// One of the six pump-setting x GFF link scenarios.
struct Scenario {
  std::string id;
  OperatingPointTarget op;
  bool gff = false;
  LinkConfig link;
  /// Total TX launch power; equals the per-amplifier output power.
  double tx_total_dbm = 0.0;

  double line_pump_w() const { return op.line_pump_w; }
};

std::string scenario_id(double pump_current_ma, bool gff);

std::vector<Scenario> build_scenarios(const Calibration& calibration,
                                      std::size_t span_count = 12,
                                      double span_loss_db = 16.5);

const Scenario& find_scenario(const std::vector<Scenario>& scenarios,
                              const std::string& id);

}  // namespace capmax
