#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "capmax/hash.hpp"
#include "capmax/profile_gen.hpp"
#include "capmax/units.hpp"

using namespace capmax;

namespace {

double min_pairwise_kl(const std::vector<std::vector<double>>& dists) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dists.size(); ++i) {
    for (std::size_t j = 0; j < dists.size(); ++j) {
      if (i != j) best = std::min(best, relative_entropy(dists[i], dists[j]));
    }
  }
  return best;
}

std::vector<double> shape_of(const PowerProfile& p) {
  std::vector<double> s = p.powers_dbm;
  return s;
}

}  // namespace

TEST(RandomWalk, ZeroStepsGiveFlatProfile) {
  const std::vector<double> steps(40, 0.0);
  for (double v : smooth3(cumulative_walk(steps))) EXPECT_EQ(v, 0.0);
}

TEST(RandomWalk, ConstantStepsGiveRampAndSmoothingKeepsInteriorLinear) {
  const std::vector<double> steps(40, 0.4);
  const std::vector<double> walk = cumulative_walk(steps);
  for (std::size_t k = 1; k < walk.size(); ++k) EXPECT_GT(walk[k], walk[k - 1]);
  const std::vector<double> smooth = smooth3(walk);
  for (std::size_t k = 1; k + 1 < smooth.size(); ++k) EXPECT_NEAR(smooth[k], walk[k], 1e-12);
  for (std::size_t k = 1; k < smooth.size(); ++k) EXPECT_GT(smooth[k], smooth[k - 1]);
}

TEST(RandomWalk, EndpointMomentsMatchUniformSum) {
  // P_40 before smoothing is a sum of 40 Uniform(-0.5, 0.5): mean 0, variance 40/12.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const int draws = 100000;
  double mean = 0.0, m2 = 0.0;
  for (int n = 1; n <= draws; ++n) {
    std::vector<double> steps(40);
    for (double& s : steps) s = u(rng);
    const double x = cumulative_walk(steps).back();
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  const double var = m2 / (draws - 1);
  // Standard errors: sqrt(40/12/1e5) ~ 0.0058 on the mean, ~0.015 on the variance.
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var, 40.0 / 12.0, 0.08);
}

TEST(Rescale, RampAlreadyAtTarget) {
  std::vector<double> ramp(40);
  for (std::size_t k = 0; k < 40; ++k) ramp[k] = static_cast<double>(k);
  const PowerProfile p = rescale_to_excursion(ramp, 39.0, 13.0);
  EXPECT_NEAR(p.excursion_db(), 39.0, 1e-12);
  for (std::size_t k = 1; k < 40; ++k) EXPECT_NEAR(p.powers_dbm[k] - p.powers_dbm[k - 1], 1.0, 1e-12);
  EXPECT_NO_THROW(p.validate(1e-9));
}

TEST(Rescale, ArbitraryShapeToTwentyDb) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const PowerProfile p = rescale_to_excursion(random_walk_profile(rng, 40), 20.0, 13.0);
    EXPECT_NEAR(p.excursion_db(), 20.0, 1e-9);
    EXPECT_NO_THROW(p.validate(1e-9));
  }
}

TEST(Rescale, FlatShapeAtZeroExcursion) {
  const std::vector<double> flat(40, 3.0);
  const PowerProfile p = rescale_to_excursion(flat, 0.0, 13.0);
  for (double v : p.powers_dbm) EXPECT_NEAR(v, 13.0 - 16.0205999132796239, 1e-12);
  EXPECT_THROW(rescale_to_excursion(flat, 5.0, 13.0), std::invalid_argument);
}

TEST(Diversity, TransformedMassesAreValidDistributions) {
  std::mt19937_64 rng(4);
  const std::vector<double> p = to_distribution(random_walk_profile(rng, 40));
  double total = 0.0;
  for (double v : p) {
    EXPECT_GT(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(*std::max_element(p.begin(), p.end()) / *std::min_element(p.begin(), p.end()), 10.0,
              1e-9);
  EXPECT_THROW(relative_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}),
               std::domain_error);
}

TEST(Diversity, EmptyAcceptedPicksFirst) {
  std::mt19937_64 rng(5);
  std::vector<std::vector<double>> c;
  for (int i = 0; i < 5; ++i) c.push_back(random_walk_profile(rng, 40));
  EXPECT_EQ(select_diverse(c, {}).index, 0u);
  EXPECT_THROW(select_diverse({}, {}), std::invalid_argument);
}

TEST(Diversity, SpikeBeatsUniformAgainstUniform) {
  std::vector<double> uniform(40, 0.0);
  std::vector<double> spike(40, 0.0);
  spike[17] = 10.0;
  const std::vector<std::vector<double>> accepted{to_distribution(uniform)};
  // Brute force: D(uniform || uniform) = 0, D(uniform || spike) > 0.
  const double d_spike = relative_entropy(accepted[0], to_distribution(spike));
  ASSERT_GT(d_spike, 0.0);
  const DiversitySelection sel = select_diverse({uniform, spike}, accepted);
  EXPECT_EQ(sel.index, 1u);
  EXPECT_NEAR(sel.scores[0], 0.0, 1e-15);
  EXPECT_NEAR(sel.scores[1], d_spike, 1e-15);
}

TEST(Diversity, OrderInvarianceWithLowestIndexTies) {
  std::mt19937_64 rng(6);
  std::vector<std::vector<double>> c;
  for (int i = 0; i < 20; ++i) c.push_back(random_walk_profile(rng, 40));
  const std::vector<std::vector<double>> accepted{to_distribution(c[3]), to_distribution(c[11])};
  const DiversitySelection a = select_diverse(c, accepted);
  std::vector<std::vector<double>> reversed(c.rbegin(), c.rend());
  const DiversitySelection b = select_diverse(reversed, accepted);
  EXPECT_EQ(c[a.index], reversed[b.index]);
  std::vector<std::vector<double>> dup{c[a.index], c[a.index]};
  EXPECT_EQ(select_diverse(dup, accepted).index, 0u);
}

TEST(Batch, SingleProfile) {
  ProfileBatchSpec spec = ProfileBatchSpec::linear(1, 13.0, 1, 6.0, 6.0);
  const ProfileBatch b = generate_batch(spec);
  ASSERT_EQ(b.profiles.size(), 1u);
  EXPECT_NEAR(b.profiles[0].excursion_db(), 6.0, 1e-9);
  EXPECT_NO_THROW(b.profiles[0].validate(1e-9));
}

TEST(Batch, InvariantsAndDeterminism) {
  const ProfileBatchSpec spec = ProfileBatchSpec::linear(60, 13.0, 42);
  const ProfileBatch a = generate_batch(spec);
  const ProfileBatch b = generate_batch(spec);
  ASSERT_EQ(a.profiles.size(), 60u);
  for (std::size_t i = 0; i < a.profiles.size(); ++i) {
    EXPECT_EQ(a.profiles[i].powers_dbm, b.profiles[i].powers_dbm);
    const double total = dbm_to_mw(13.0);
    EXPECT_LE(std::abs(a.profiles[i].total_power_mw() - total) / total, 1e-9);
    EXPECT_LE(std::abs(a.profiles[i].excursion_db() - spec.excursion_schedule_db[i]), 1e-6);
  }
  EXPECT_DOUBLE_EQ(spec.excursion_schedule_db.front(), 6.0);
  EXPECT_DOUBLE_EQ(spec.excursion_schedule_db.back(), 45.0);
}

TEST(Batch, SelectionFollowsTheArgmaxRule) {
  // Replays the generator's stream: each accepted profile must carry the
  // largest min-KL score among its 100 candidates.
  ProfileBatchSpec spec = ProfileBatchSpec::linear(12, 13.0, 77);
  const ProfileBatch batch = generate_batch(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<double>> accepted;
  for (std::size_t n = 0; n < spec.count; ++n) {
    std::vector<std::vector<double>> cands;
    for (std::size_t c = 0; c < spec.candidates_per_draw; ++c) {
      cands.push_back(random_walk_profile(rng, spec.channel_count));
    }
    const DiversitySelection sel = select_diverse(cands, accepted);
    const PowerProfile expected =
        rescale_to_excursion(cands[sel.index], spec.excursion_schedule_db[n], spec.total_power_dbm);
    EXPECT_EQ(expected.powers_dbm, batch.profiles[n].powers_dbm);
    if (n > 0) {
      std::size_t beaten = 0;
      for (double s : sel.scores) beaten += sel.scores[sel.index] >= s ? 1 : 0;
      EXPECT_GE(beaten, 100u);
    }
    accepted.push_back(to_distribution(cands[sel.index]));
  }
}

TEST(Batch, DiversityBeatsUnselectedDraws) {
  ProfileBatchSpec spec = ProfileBatchSpec::linear(100, 13.0, 8);
  const ProfileBatch batch = generate_batch(spec);
  std::vector<std::vector<double>> selected;
  for (const auto& p : batch.profiles) selected.push_back(to_distribution(shape_of(p)));
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> plain;
  for (int i = 0; i < 100; ++i) plain.push_back(to_distribution(random_walk_profile(rng, 40)));
  EXPECT_GT(min_pairwise_kl(selected), min_pairwise_kl(plain));
}

TEST(Batch, CsvRoundTripIsExact) {
  const ProfileBatch a = generate_batch(ProfileBatchSpec::linear(10, 13.0, 3));
  const auto path = std::filesystem::temp_directory_path() / "capmax_profiles_roundtrip.csv";
  write_profiles_csv(path, a);
  const ProfileBatch b = read_profiles_csv(path);
  ASSERT_EQ(b.profiles.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.profiles[i].powers_dbm, b.profiles[i].powers_dbm);
    EXPECT_EQ(a.excursions_db[i], b.excursions_db[i]);
  }
  const std::string h1 = file_fingerprint(path);
  write_profiles_csv(path, generate_batch(ProfileBatchSpec::linear(10, 13.0, 3)));
  EXPECT_EQ(file_fingerprint(path), h1);
  std::filesystem::remove(path);
}

TEST(Batch, SpecValidation) {
  ProfileBatchSpec spec = ProfileBatchSpec::linear(3, 13.0, 1);
  spec.excursion_schedule_db = {10.0, 8.0, 12.0};
  EXPECT_THROW(generate_batch(spec), std::invalid_argument);
  spec.excursion_schedule_db = {0.0, 8.0, 12.0};
  EXPECT_THROW(generate_batch(spec), std::invalid_argument);
  spec = ProfileBatchSpec::linear(3, 13.0, 1);
  spec.candidates_per_draw = 0;
  EXPECT_THROW(generate_batch(spec), std::invalid_argument);
}
