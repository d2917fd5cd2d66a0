#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "capmax/metrics.hpp"
#include "capmax/units.hpp"

using namespace capmax;

TEST(Capacity, ZeroSnrGivesZero) {
  const std::vector<double> snr(40, 0.0);
  EXPECT_EQ(capacity(snr, 50e9), 0.0);
}

TEST(Capacity, SingleChannelUnitRate) {
  const std::vector<double> snr{1.0};
  EXPECT_DOUBLE_EQ(capacity(snr, 1.0, 1.0), 2.0);
}

TEST(Capacity, FortyFlatChannelsGolden) {
  // 4e12 * log2(101), evaluated at 30 digits.
  const std::vector<double> snr(40, 100.0);
  EXPECT_NEAR(capacity(snr, 50e9, 1.0) / 26632845931007.178948686636454, 1.0, 1e-14);
  EXPECT_NEAR(capacity(snr, 50e9) / 1e13, 2.6632, 1e-4);
}

TEST(Capacity, RejectsBadInputs) {
  const std::vector<double> neg{1.0, -0.5};
  EXPECT_THROW(capacity(neg, 50e9), std::invalid_argument);
  const std::vector<double> ok{1.0};
  EXPECT_THROW(capacity(ok, 50e9, 0.0), std::invalid_argument);
  EXPECT_THROW(capacity(ok, 50e9, 1.5), std::invalid_argument);
}

TEST(Capacity, MonotoneInSnrAndEta) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 300.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> snr(40);
    for (double& s : snr) s = u(rng);
    const double base = capacity(snr, 50e9, 0.5);
    EXPECT_GE(capacity(snr, 50e9, 0.75), base);
    snr[trial % 40] += 1.0;
    EXPECT_GE(capacity(snr, 50e9, 0.5), base);
  }
}

TEST(Capacity, PerChannelTermsSumToTotal) {
  const std::vector<double> snr{3.0, 30.0, 300.0};
  const auto terms = channel_capacities(snr, 50e9, 0.5);
  EXPECT_NEAR(terms[0] + terms[1] + terms[2], capacity(snr, 50e9, 0.5), 1e-3);
}

TEST(CableCapacity, Examples) {
  EXPECT_DOUBLE_EQ(cable_capacity(1.0, 7, 3e12), 2.0 * 7 * 3e12);
  EXPECT_EQ(cable_capacity(0.0, 7, 3e12), 0.0);
  // 4e14 * log2(11).
  EXPECT_NEAR(cable_capacity(10.0, 50, 4e12), 1383772647454918.90247974521869, 1.0);
  EXPECT_THROW(cable_capacity(1.0, 0, 1e9), std::invalid_argument);
}

TEST(CableCapacity, SinglePathEqualsOneChannelCapacity) {
  for (double snr : {0.1, 1.0, 42.0}) {
    const std::vector<double> one{snr};
    EXPECT_NEAR(cable_capacity(snr, 1, 4e12), capacity(one, 4e12, 1.0), 1e-3);
  }
}

TEST(CombineSnr, TransponderDisabledReturnsLine) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_DOUBLE_EQ(combine_snr(inf, 123.0, 1.0), 123.0);
}

TEST(CombineSnr, FortyFiveDbTransponderOnTwentyDbLine) {
  const double c = linear_to_db(combine_snr(db_to_linear(45.0), db_to_linear(20.0), 1.0));
  EXPECT_NEAR(c, 19.9862880716731663602451764633, 1e-9);
  EXPECT_NEAR(20.0 - c, 0.014, 0.001);
}

TEST(CombineSnr, EqualTermsHalve) {
  EXPECT_NEAR(linear_to_db(combine_snr(50.0, 50.0, 1.0)) - linear_to_db(50.0),
              -10.0 * std::log10(2.0), 1e-12);
}

TEST(CombineSnr, NeverExceedsEitherTerm) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1e4);
  std::uniform_real_distribution<double> e(0.05, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), eta = e(rng);
    const double c = combine_snr(a, b, eta);
    EXPECT_LE(c, std::min(eta * a, b) * (1.0 + 1e-12));
  }
  EXPECT_THROW(combine_snr(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(combine_snr(1.0, -1.0), std::invalid_argument);
}

TEST(PowerEfficiency, CapacityPerWatt) {
  EXPECT_DOUBLE_EQ(power_efficiency(2.27e13, 2.27), 1e13);
  EXPECT_THROW(power_efficiency(1.0, 0.0), std::invalid_argument);
}

TEST(Osa, FlatNoiseHundredfoldSlot) {
  const double n = -30.0;
  const std::vector<OsaSlot> slots{{n, n + linear_to_db(101.0), n}};
  const OsaEstimate est = estimate_snr_osa(slots);
  EXPECT_NEAR(est.snr_linear[0], 100.0, 1e-9);
}

TEST(Osa, DbMidpointInterpolation) {
  const std::vector<OsaSlot> slots{{-40.0, -10.0, -30.0}};
  const OsaEstimate est = estimate_snr_osa(slots);
  EXPECT_NEAR(mw_to_dbm(est.noise_mw[0]), -35.0, 1e-12);
}

TEST(Osa, NonPositiveSignalRejected) {
  const std::vector<OsaSlot> slots{{-30.0, -30.0, -30.0}};
  EXPECT_THROW(estimate_snr_osa(slots), std::domain_error);
}

TEST(Osa, ExactForNoiseLinearInDb) {
  // Tilted noise floor: the estimate must recover S/N to machine precision.
  std::vector<double> trace;
  std::vector<double> truth;
  const int k = 40;
  for (int i = 0; i < 2 * k - 1; ++i) {
    const double noise_dbm = -35.0 + 0.1 * i;
    if (i % 2 == 0) {
      const double s_dbm = -10.0 + 0.3 * std::sin(i);
      truth.push_back(db_to_linear(s_dbm - noise_dbm));
      trace.push_back(mw_to_dbm(dbm_to_mw(s_dbm) + dbm_to_mw(noise_dbm)));
    } else {
      trace.push_back(noise_dbm);
    }
  }
  const OsaEstimate est = estimate_snr_osa(bracket_interleaved(trace));
  ASSERT_EQ(est.snr_linear.size(), truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    EXPECT_NEAR(est.snr_linear[i] / truth[i], 1.0, 1e-9);
  }
}

TEST(Osa, RandomSmoothSpectraWithinFiveHundredthsDb) {
  // Noise floors built from two slow sinusoids (at most 1 dB between
  // neighboring slots), as an amplified line produces.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> amp(0.0, 1.0);
  std::uniform_real_distribution<double> cycles(0.2, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  std::uniform_real_distribution<double> sig(-15.0, -5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a1 = amp(rng), a2 = amp(rng), c1 = cycles(rng), c2 = cycles(rng);
    const double p1 = phase(rng), p2 = phase(rng);
    std::vector<double> noise(79);
    for (std::size_t i = 0; i < noise.size(); ++i) {
      const double x = 6.283185307179586 * static_cast<double>(i) / 79.0;
      noise[i] = -35.0 + a1 * std::sin(c1 * x + p1) + a2 * std::sin(c2 * x + p2);
      if (i > 0) ASSERT_LE(std::abs(noise[i] - noise[i - 1]), 1.0);
    }
    std::vector<double> trace(79);
    std::vector<double> truth_db;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (i % 2 == 0) {
        const double s = sig(rng);
        truth_db.push_back(s - noise[i]);
        trace[i] = mw_to_dbm(dbm_to_mw(s) + dbm_to_mw(noise[i]));
      } else {
        trace[i] = noise[i];
      }
    }
    const OsaEstimate est = estimate_snr_osa(bracket_interleaved(trace));
    for (std::size_t k = 0; k < truth_db.size(); ++k) {
      EXPECT_NEAR(linear_to_db(est.snr_linear[k]), truth_db[k], 0.05);
    }
  }
}

TEST(CapacityReport, TotalsAndEfficiency) {
  const CapacityReport r = CapacityReport::from_snr(std::vector<double>(40, 100.0), 50e9, 1.0, 2.27);
  EXPECT_NEAR(r.total_capacity_bps, 26632845931007.18, 1e-2);
  ASSERT_TRUE(r.power_efficiency_bps_per_w.has_value());
  EXPECT_NEAR(*r.power_efficiency_bps_per_w, r.total_capacity_bps / 2.27, 1e-3);
  EXPECT_EQ(CapacityReport::csv_header().size(), r.csv_row().size());
  EXPECT_NE(r.to_json().find("total_capacity_bps"), std::string::npos);
}
