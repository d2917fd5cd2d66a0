#include "capmax/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "capmax/csv.hpp"
#include "capmax/units.hpp"

namespace capmax {

std::vector<OperatingPointTarget> load_operating_points(
    const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  std::vector<OperatingPointTarget> targets;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    OperatingPointTarget t;
    t.pump_current_ma = table.number(r, "pump_current_ma");
    t.pump_power_mw = table.number(r, "pump_power_mw");
    t.output_dbm = table.number(r, "output_dbm");
    t.pce_with_gff = table.number(r, "pce_with_gff");
    t.pce_without_gff = table.number(r, "pce_without_gff");
    t.line_pump_w = table.number(r, "line_pump_w");
    targets.push_back(t);
  }
  return targets;
}

std::vector<OperatingPointTarget> default_operating_points() {
  return load_operating_points(std::filesystem::path(CAPMAX_DATA_DIR) /
                               "operating_points.csv");
}

std::vector<double> AmplifierDesign::native_shape_db(const ChannelGrid& grid) const {
  std::vector<double> shape(grid.channel_count);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const double x = grid.band_position(k);
    double value = native_tilt_db * (x - 0.5);
    for (const auto& term : ripple) {
      value += term.amplitude_db *
               std::sin(2.0 * std::numbers::pi * term.cycles * x + term.phase_rad);
    }
    shape[k] = value;
  }
  return shape;
}

std::vector<double> AmplifierDesign::flattened_shape_db(const ChannelGrid& grid) const {
  std::vector<double> shape(grid.channel_count);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    shape[k] = residual_tilt_db * (grid.band_position(k) - 0.5);
  }
  return shape;
}

SingleAmpCheck simulate_pce(const EdfaParams& params, const ChannelGrid& grid,
                            double total_input_mw) {
  const std::vector<double> input(
      grid.channel_count, total_input_mw / static_cast<double>(grid.channel_count));
  const AmplifierOutput out = amplify(input, params, grid);
  const double total_out = sum(out.signal_mw) + sum(out.noise_mw);
  return {total_out, pce(total_input_mw, total_out, params.pump_electrical_mw)};
}

namespace {

void check_pce_target(double value, const char* which) {
  if (!(value > 0.0)) {
    throw std::invalid_argument(std::string("degenerate operating point: PCE ") +
                                which + " must be > 0");
  }
  if (value > 1.0) {
    throw std::invalid_argument(std::string("infeasible operating point: PCE ") +
                                which + " exceeds 1");
  }
}

std::vector<double> noise_figure(const AmplifierDesign& design,
                                 const ChannelGrid& grid, double pump_position) {
  const double base =
      design.noise_figure_low_pump_db +
      (design.noise_figure_high_pump_db - design.noise_figure_low_pump_db) *
          pump_position;
  std::vector<double> nf(grid.channel_count);
  for (std::size_t k = 0; k < nf.size(); ++k) {
    nf[k] = base + design.noise_figure_spectral_db * (0.5 - grid.band_position(k));
  }
  return nf;
}

std::vector<double> lerp(const std::vector<double>& a, const std::vector<double>& b,
                         double t) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + (b[i] - a[i]) * t;
  return out;
}

}  // namespace

Calibration calibrate(std::span<const OperatingPointTarget> targets,
                      const AmplifierDesign& design, const ChannelGrid& grid) {
  grid.validate();
  if (targets.empty()) throw std::invalid_argument("no operating points to calibrate");

  Calibration calibration;
  calibration.grid = grid;
  calibration.design = design;

  std::vector<OperatingPointTarget> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.pump_power_mw < b.pump_power_mw;
  });
  const double pump_lo = sorted.front().pump_power_mw;
  const double pump_hi = sorted.back().pump_power_mw;

  const std::vector<double> native = design.native_shape_db(grid);
  const std::vector<double> flattened = design.flattened_shape_db(grid);
  const auto count = static_cast<double>(grid.channel_count);

  for (const auto& target : sorted) {
    if (!(target.pump_power_mw > 0.0)) {
      throw std::invalid_argument("pump power must be positive");
    }
    check_pce_target(target.pce_with_gff, "with GFF");
    check_pce_target(target.pce_without_gff, "without GFF");
    if (target.pce_without_gff < target.pce_with_gff) {
      throw std::invalid_argument(
          "infeasible operating point: a passive GFF cannot raise the PCE");
    }

    const double delivered_mw = dbm_to_mw(target.output_dbm);
    const double input_mw = delivered_mw - target.pce_with_gff * target.pump_power_mw;
    if (!(input_mw > 0.0)) {
      throw std::invalid_argument(
          "infeasible operating point: PCE implies non-positive amplifier input");
    }
    const double saturated_mw = input_mw + target.pce_without_gff * target.pump_power_mw;

    const double pump_position =
        pump_hi > pump_lo ? (target.pump_power_mw - pump_lo) / (pump_hi - pump_lo) : 0.0;

    EdfaParams bare;
    bare.small_signal_gain_db.resize(grid.channel_count);
    for (std::size_t k = 0; k < native.size(); ++k) {
      bare.small_signal_gain_db[k] = design.small_signal_gain_db + native[k];
    }
    bare.saturated_output_dbm = mw_to_dbm(saturated_mw);
    bare.noise_figure_db = noise_figure(design, grid, pump_position);
    bare.pump_electrical_mw = target.pump_power_mw;
    bare.validate(grid.channel_count);

    double unsaturated = 0.0;
    for (double g : bare.small_signal_gain_db) unsaturated += input_mw / count * db_to_linear(g);
    if (unsaturated <= saturated_mw) {
      throw std::invalid_argument(
          "operating point is not in saturation at its nominal input");
    }

    // Filter = native shape minus the residual tilt, plus a flat insertion
    // loss chosen so the post-filter output hits the delivered power.
    const std::vector<double> flat_in(grid.channel_count, input_mw / count);
    const AmplifierOutput stage = amplify(flat_in, bare, grid);
    double filtered = 0.0;
    for (std::size_t k = 0; k < native.size(); ++k) {
      filtered += stage.noise_mw[k] * db_to_linear(-(native[k] - flattened[k])) +
                  stage.signal_mw[k] * db_to_linear(-(native[k] - flattened[k]));
    }
    const double offset_db = linear_to_db(filtered / delivered_mw);
    std::vector<double> gff(grid.channel_count);
    for (std::size_t k = 0; k < gff.size(); ++k) {
      gff[k] = native[k] - flattened[k] + offset_db;
      if (gff[k] < 0.0) {
        throw std::invalid_argument(
            "infeasible operating point: GFF shape would require gain");
      }
    }

    EdfaParams filtered_params = bare;
    filtered_params.gff_loss_db = std::move(gff);

    calibration.points.push_back({target, input_mw, filtered_params, bare});
  }
  return calibration;
}

const CalibratedPoint& Calibration::at_current(double pump_current_ma) const {
  for (const auto& point : points) {
    if (std::abs(point.target.pump_current_ma - pump_current_ma) < 1e-9) return point;
  }
  throw std::invalid_argument("no calibrated operating point at " +
                              std::to_string(pump_current_ma) + " mA");
}

EdfaParams Calibration::params_at_pump(double pump_power_mw, bool gff) const {
  if (points.empty()) throw std::logic_error("empty calibration");
  const double lo = points.front().target.pump_power_mw;
  const double hi = points.back().target.pump_power_mw;
  if (!(pump_power_mw >= lo && pump_power_mw <= hi)) {
    throw std::out_of_range("pump power outside the calibrated range");
  }
  std::size_t upper = 0;
  while (upper + 1 < points.size() && points[upper].target.pump_power_mw < pump_power_mw) {
    ++upper;
  }
  if (upper == 0) return gff ? points[0].with_gff : points[0].without_gff;
  const auto& a = gff ? points[upper - 1].with_gff : points[upper - 1].without_gff;
  const auto& b = gff ? points[upper].with_gff : points[upper].without_gff;
  const double t = (pump_power_mw - a.pump_electrical_mw) /
                   (b.pump_electrical_mw - a.pump_electrical_mw);

  EdfaParams out = a;
  out.small_signal_gain_db = lerp(a.small_signal_gain_db, b.small_signal_gain_db, t);
  out.noise_figure_db = lerp(a.noise_figure_db, b.noise_figure_db, t);
  out.saturated_output_dbm =
      mw_to_dbm(dbm_to_mw(a.saturated_output_dbm) +
                (dbm_to_mw(b.saturated_output_dbm) - dbm_to_mw(a.saturated_output_dbm)) * t);
  if (gff) out.gff_loss_db = lerp(*a.gff_loss_db, *b.gff_loss_db, t);
  out.pump_electrical_mw = pump_power_mw;
  return out;
}

std::string scenario_id(double pump_current_ma, bool gff) {
  return std::to_string(static_cast<int>(std::lround(pump_current_ma))) + "mA-" +
         (gff ? "gff" : "nogff");
}

std::vector<Scenario> build_scenarios(const Calibration& calibration,
                                      std::size_t span_count, double span_loss_db) {
  std::vector<Scenario> scenarios;
  for (const auto& point : calibration.points) {
    for (bool gff : {true, false}) {
      Scenario s;
      s.id = scenario_id(point.target.pump_current_ma, gff);
      s.op = point.target;
      s.gff = gff;
      s.link.span_count = span_count;
      s.link.span_loss_db = span_loss_db;
      s.link.edfa = gff ? point.with_gff : point.without_gff;
      s.link.grid = calibration.grid;
      s.link.operating_point = s.id;
      s.link.validate();
      s.tx_total_dbm = gff ? point.target.output_dbm
                           : point.without_gff.saturated_output_dbm;
      scenarios.push_back(std::move(s));
    }
  }
  return scenarios;
}

const Scenario& find_scenario(const std::vector<Scenario>& scenarios,
                              const std::string& id) {
  for (const auto& s : scenarios) {
    if (s.id == id) return s;
  }
  throw std::invalid_argument("unknown scenario: " + id);
}

}  // namespace capmax
