#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "capmax/calibration.hpp"
#include "capmax/metrics.hpp"
#include "capmax/profile_gen.hpp"
#include "capmax/units.hpp"

using namespace capmax;

namespace {

const Calibration& shipped() {
  static const Calibration c = [] {
    const auto targets = default_operating_points();
    return calibrate(targets);
  }();
  return c;
}

double peak_to_peak(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace

TEST(OperatingPoints, ShippedTableMatchesPublishedValues) {
  const auto t = default_operating_points();
  ASSERT_EQ(t.size(), 3u);
  EXPECT_DOUBLE_EQ(t[0].pce_with_gff, 0.031);
  EXPECT_DOUBLE_EQ(t[0].pce_without_gff, 0.052);
  EXPECT_DOUBLE_EQ(t[1].pce_with_gff, 0.082);
  EXPECT_DOUBLE_EQ(t[1].pce_without_gff, 0.125);
  EXPECT_DOUBLE_EQ(t[2].pce_with_gff, 0.099);
  EXPECT_DOUBLE_EQ(t[2].pce_without_gff, 0.149);
  EXPECT_DOUBLE_EQ(t[0].line_pump_w, 1.09);
  EXPECT_DOUBLE_EQ(t[1].line_pump_w, 2.27);
  EXPECT_DOUBLE_EQ(t[2].line_pump_w, 7.53);
  EXPECT_DOUBLE_EQ(t[1].pump_power_mw, 207.0);
  EXPECT_DOUBLE_EQ(t[1].output_dbm, 13.0);
}

TEST(Calibrate, NoGffPceAt207mW) {
  const CalibratedPoint& p = shipped().at_current(150);
  const SingleAmpCheck check = simulate_pce(p.without_gff, shipped().grid, p.nominal_input_mw);
  EXPECT_GE(check.pce, 0.119);
  EXPECT_LE(check.pce, 0.131);
}

TEST(Calibrate, EveryPointWithinFivePercentRelative) {
  for (const auto& p : shipped().points) {
    const double with = simulate_pce(p.with_gff, shipped().grid, p.nominal_input_mw).pce;
    const double without = simulate_pce(p.without_gff, shipped().grid, p.nominal_input_mw).pce;
    EXPECT_NEAR(with / p.target.pce_with_gff, 1.0, 0.05) << p.target.pump_current_ma;
    EXPECT_NEAR(without / p.target.pce_without_gff, 1.0, 0.05) << p.target.pump_current_ma;
  }
  const CalibratedPoint& mid = shipped().at_current(150);
  EXPECT_NEAR(simulate_pce(mid.with_gff, shipped().grid, mid.nominal_input_mw).pce / 0.082, 1.0,
              0.05);
}

TEST(Calibrate, SaturatedOutputsAtTheThreePumpSettings) {
  // After the GFF the delivered output is 6.2 / 13.0 / 19.0 dBm.
  const double expected[] = {6.2, 13.0, 19.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = shipped().points[i];
    const SingleAmpCheck with = simulate_pce(p.with_gff, shipped().grid, p.nominal_input_mw);
    EXPECT_NEAR(mw_to_dbm(with.output_mw), expected[i], 1e-6);
  }
}

TEST(Calibrate, DegenerateAndInfeasibleTargetsRejected) {
  auto targets = default_operating_points();
  targets[1].pce_without_gff = 0.0;
  EXPECT_THROW(calibrate(targets), std::invalid_argument);
  targets = default_operating_points();
  targets[1].pce_with_gff = 1.2;
  targets[1].pce_without_gff = 1.3;
  EXPECT_THROW(calibrate(targets), std::invalid_argument);
}

TEST(Calibrate, PumpInterpolationRejectsOutOfRange) {
  EXPECT_THROW(shipped().params_at_pump(50.0, false), std::out_of_range);
  EXPECT_THROW(shipped().params_at_pump(700.0, true), std::out_of_range);
  const EdfaParams mid = shipped().params_at_pump(400.0, false);
  const double lo = shipped().at_current(150).without_gff.saturated_output_dbm;
  const double hi = shipped().at_current(450).without_gff.saturated_output_dbm;
  EXPECT_GT(mid.saturated_output_dbm, lo);
  EXPECT_LT(mid.saturated_output_dbm, hi);
}

TEST(Calibrate, NoiseFigureInPublishedRange) {
  for (const auto& p : shipped().points) {
    for (double nf : p.without_gff.noise_figure_db) {
      EXPECT_GE(nf, 4.5);
      EXPECT_LE(nf, 5.0);
    }
  }
}

TEST(Scenarios, SixScenariosWithStableIds) {
  const auto s = build_scenarios(shipped());
  ASSERT_EQ(s.size(), 6u);
  for (const char* id :
       {"75mA-gff", "75mA-nogff", "150mA-gff", "150mA-nogff", "450mA-gff", "450mA-nogff"}) {
    EXPECT_NO_THROW(find_scenario(s, id));
  }
  EXPECT_THROW(find_scenario(s, "300mA-gff"), std::invalid_argument);
}

TEST(Scenarios, FlatLaunchNoGffExcursionAnchor) {
  const auto s = build_scenarios(shipped());
  const Scenario& sc = find_scenario(s, "150mA-nogff");
  const RxObservation rx = transmit(PowerProfile::flat(40, sc.tx_total_dbm), sc.link);
  const double f = peak_to_peak(rx.signal_dbm);
  EXPECT_GE(f, 5.0);
  EXPECT_LE(f, 25.0);
}

TEST(Scenarios, GffWastesDeliveredPower) {
  const auto s = build_scenarios(shipped());
  for (const double ma : {75.0, 150.0, 450.0}) {
    const auto& p = shipped().at_current(ma);
    const std::vector<double> in(40, p.nominal_input_mw / 40.0);
    const AmplifierOutput with = amplify(in, p.with_gff, shipped().grid);
    const AmplifierOutput without = amplify(in, p.without_gff, shipped().grid);
    EXPECT_GE(sum(without.signal_mw), sum(with.signal_mw));
  }
}

TEST(Scenarios, NoiseDependsOnTheSignalProfile) {
  // Equal total power, power piled on the gain peak versus the gain trough:
  // RX noise differs by > 3 dB on some channel.
  const auto s = build_scenarios(shipped());
  const Scenario& sc = find_scenario(s, "150mA-nogff");
  const auto& g = sc.link.edfa.small_signal_gain_db;
  const auto peak = static_cast<double>(std::max_element(g.begin(), g.end()) - g.begin());
  const auto trough = static_cast<double>(std::min_element(g.begin(), g.end()) - g.begin());
  auto spike = [&](double centre) {
    std::vector<double> shape(40);
    for (std::size_t k = 0; k < 40; ++k) shape[k] = -std::abs(static_cast<double>(k) - centre);
    return rescale_to_excursion(shape, 20.0, sc.tx_total_dbm);
  };
  const RxObservation a = transmit(spike(peak), sc.link);
  const RxObservation b = transmit(spike(trough), sc.link);
  double largest = 0.0;
  for (std::size_t k = 0; k < 40; ++k) {
    largest = std::max(largest, std::abs(a.noise_dbm[k] - b.noise_dbm[k]));
  }
  EXPECT_GT(largest, 3.0);
}

TEST(Scenarios, GffResidualTiltWithinPublishedBound) {
  // Single amplifier, flat input at the nominal point: output tilt at most 2.5 dB.
  for (const auto& p : shipped().points) {
    const std::vector<double> in(40, p.nominal_input_mw / 40.0);
    const AmplifierOutput out = amplify(in, p.with_gff, shipped().grid);
    EXPECT_LE(peak_to_peak(mw_to_dbm(out.signal_mw)), 2.5);
  }
}

TEST(Scenarios, RxSnrFromOsaStyleEstimateTracksSimulator) {
  // Empty-slot noise taken as the simulator's noise interpolated half a
  // channel over (cubic in dB); the dB-midpoint estimator stays within 0.05 dB.
  const auto s = build_scenarios(shipped());
  const Scenario& sc = find_scenario(s, "150mA-gff");
  const RxObservation rx = transmit(PowerProfile::flat(40, sc.tx_total_dbm), sc.link);
  const auto& n = rx.noise_dbm;
  for (std::size_t k = 1; k < 40; ++k) ASSERT_LE(std::abs(n[k] - n[k - 1]), 1.0);
  std::vector<double> trace;
  for (std::size_t k = 0; k < 40; ++k) {
    trace.push_back(mw_to_dbm(dbm_to_mw(rx.signal_dbm[k]) + dbm_to_mw(n[k])));
    if (k + 1 < 40) {
      const double a = k > 0 ? n[k - 1] : 2 * n[k] - n[k + 1];
      const double d = k + 2 < 40 ? n[k + 2] : 2 * n[k + 1] - n[k];
      trace.push_back((-a + 9.0 * n[k] + 9.0 * n[k + 1] - d) / 16.0);
    }
  }
  const OsaEstimate est = estimate_snr_osa(bracket_interleaved(trace));
  const auto truth = rx.snr_linear();
  for (std::size_t k = 1; k + 1 < 40; ++k) {
    EXPECT_NEAR(linear_to_db(est.snr_linear[k]), linear_to_db(truth[k]), 0.05) << k;
  }
}
