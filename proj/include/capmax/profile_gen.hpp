#pragma once

// Random TX power profiles: smoothed cumulative random walks, picked for
// mutual diversity by relative entropy, then rescaled to a target
// peak-to-peak excursion and total launch power.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "capmax/link_sim.hpp"

namespace capmax {

struct ProfileBatchSpec {
  std::size_t count = 1440;
  std::vector<double> excursion_schedule_db;
  std::size_t candidates_per_draw = 100;
  double total_power_dbm = 0.0;
  std::uint64_t seed = 1;
  std::size_t channel_count = 40;

  /// Excursions linearly spaced from f_min_db to f_max_db across the batch.
  static ProfileBatchSpec linear(std::size_t count, double total_power_dbm,
                                 std::uint64_t seed, double f_min_db = 6.0,
                                 double f_max_db = 45.0);
  void validate() const;
};

/// Symmetric 3-bin weighted moving average; at the band edges the window is
/// truncated and the remaining weights renormalized.
std::vector<double> smooth3(std::span<const double> values,
                            double side_weight = 0.25, double center_weight = 0.5);

/// P_k = P_{k-1} + U_k with P_0 = 0, for the given steps (no smoothing).
std::vector<double> cumulative_walk(std::span<const double> steps);

/// Smoothed random walk with U_k ~ Uniform(-0.5, 0.5), dB-relative.
std::vector<double> random_walk_profile(std::mt19937_64& rng, std::size_t channels);

/// Affine rescale so max - min = excursion_db, then a flat shift so the
/// linear-domain sum equals the total power.
PowerProfile rescale_to_excursion(std::span<const double> shape_db, double excursion_db,
                                  double total_power_dbm);

/// Maps a dB-relative shape affinely onto [0.1, 1] and normalizes it to sum
/// one. A constant shape maps to the uniform distribution.
std::vector<double> to_distribution(std::span<const double> shape_db);

/// D(p || q) in nats.
double relative_entropy(std::span<const double> p, std::span<const double> q);

struct DiversitySelection {
  std::size_t index = 0;
  /// min over accepted of D(accepted || candidate), one per candidate.
  std::vector<double> scores;
};

/// Picks the candidate whose minimum relative entropy to every accepted
/// distribution is largest; ties go to the lowest index. With nothing
/// accepted the first candidate wins.
DiversitySelection select_diverse(const std::vector<std::vector<double>>& candidates_db,
                                  const std::vector<std::vector<double>>& accepted);

struct ProfileBatch {
  std::vector<PowerProfile> profiles;
  std::vector<double> excursions_db;
  std::uint64_t seed = 0;
};

ProfileBatch generate_batch(const ProfileBatchSpec& spec);

void write_profiles_csv(const std::filesystem::path& path, const ProfileBatch& batch);
ProfileBatch read_profiles_csv(const std::filesystem::path& path);

}  // namespace capmax
