#include "capmax/profile_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "capmax/csv.hpp"
#include "capmax/units.hpp"

namespace capmax {

ProfileBatchSpec ProfileBatchSpec::linear(std::size_t count, double total_power_dbm,
                                          std::uint64_t seed, double f_min_db,
                                          double f_max_db) {
  ProfileBatchSpec spec;
  spec.count = count;
  spec.total_power_dbm = total_power_dbm;
  spec.seed = seed;
  spec.excursion_schedule_db.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    spec.excursion_schedule_db[i] = f_min_db + (f_max_db - f_min_db) * t;
  }
  return spec;
}

void ProfileBatchSpec::validate() const {
  if (count < 1) throw std::invalid_argument("profile count must be >= 1");
  if (candidates_per_draw < 1) throw std::invalid_argument("need at least one candidate per draw");
  if (channel_count < 2) throw std::invalid_argument("need at least two channels");
  if (excursion_schedule_db.size() != count) {
    throw std::invalid_argument("excursion schedule length must equal count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!(excursion_schedule_db[i] > 0.0)) throw std::invalid_argument("excursions must be > 0 dB");
    if (i > 0 && excursion_schedule_db[i] < excursion_schedule_db[i - 1]) {
      throw std::invalid_argument("excursion schedule must be non-decreasing");
    }
  }
  if (!std::isfinite(total_power_dbm)) throw std::invalid_argument("total power must be finite");
}

std::vector<double> smooth3(std::span<const double> values, double side_weight,
                            double center_weight) {
  const std::size_t n = values.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = center_weight * values[k];
    double norm = center_weight;
    if (k > 0) {
      acc += side_weight * values[k - 1];
      norm += side_weight;
    }
    if (k + 1 < n) {
      acc += side_weight * values[k + 1];
      norm += side_weight;
    }
    out[k] = acc / norm;
  }
  return out;
}

std::vector<double> cumulative_walk(std::span<const double> steps) {
  std::vector<double> walk(steps.size());
  double level = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    level += steps[k];
    walk[k] = level;
  }
  return walk;
}

std::vector<double> random_walk_profile(std::mt19937_64& rng, std::size_t channels) {
  std::uniform_real_distribution<double> step(-0.5, 0.5);
  std::vector<double> steps(channels);
  for (double& u : steps) u = step(rng);
  return smooth3(cumulative_walk(steps));
}

PowerProfile rescale_to_excursion(std::span<const double> shape_db, double excursion_db,
                                  double total_power_dbm) {
  if (shape_db.empty()) throw std::invalid_argument("empty shape");
  if (!(excursion_db >= 0.0)) throw std::invalid_argument("excursion must be >= 0 dB");
  const auto [lo_it, hi_it] = std::minmax_element(shape_db.begin(), shape_db.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  std::vector<double> scaled(shape_db.size(), 0.0);
  if (span > 0.0) {
    for (std::size_t k = 0; k < scaled.size(); ++k) {
      scaled[k] = (shape_db[k] - lo) * (excursion_db / span);
    }
  } else if (excursion_db > 0.0) {
    throw std::invalid_argument("zero excursion");
  }
  const double shift = total_power_dbm - mw_to_dbm(sum(dbm_to_mw(scaled)));
  for (double& v : scaled) v += shift;
  PowerProfile profile;
  profile.powers_dbm = std::move(scaled);
  profile.total_power_dbm = total_power_dbm;
  return profile;
}

std::vector<double> to_distribution(std::span<const double> shape_db) {
  const auto [lo_it, hi_it] = std::minmax_element(shape_db.begin(), shape_db.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  std::vector<double> p(shape_db.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = span > 0.0 ? 0.1 + 0.9 * (shape_db[k] - lo) / span : 1.0;
  }
  const double total = sum(p);
  for (double& v : p) v /= total;
  return p;
}

double relative_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distribution length mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0) || !(q[k] > 0.0)) {
      throw std::domain_error("relative entropy needs strictly positive masses");
    }
    d += p[k] * std::log(p[k] / q[k]);
  }
  return d;
}

DiversitySelection select_diverse(const std::vector<std::vector<double>>& candidates_db,
                                  const std::vector<std::vector<double>>& accepted) {
  if (candidates_db.empty()) throw std::invalid_argument("no candidates to select from");
  DiversitySelection sel;
  sel.scores.assign(candidates_db.size(), std::numeric_limits<double>::infinity());
  if (accepted.empty()) return sel;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates_db.size(); ++c) {
    const std::vector<double> q = to_distribution(candidates_db[c]);
    double score = std::numeric_limits<double>::infinity();
    for (const auto& p : accepted) score = std::min(score, relative_entropy(p, q));
    sel.scores[c] = score;
    if (score > best) {
      best = score;
      sel.index = c;
    }
  }
  return sel;
}

namespace {

// Same selection rule as select_diverse, with D(p||q) split into
// sum p log p - sum p log q and candidates abandoned as soon as their running
// minimum cannot beat the current best.
class DiversityPool {
 public:
  void accept(std::vector<double> p) {
    double neg_entropy = 0.0;
    for (double v : p) neg_entropy += v * std::log(v);
    neg_entropies_.push_back(neg_entropy);
    accepted_.push_back(std::move(p));
  }

  std::size_t select(const std::vector<std::vector<double>>& candidates_db) const {
    if (accepted_.empty()) return 0;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    std::vector<double> log_q;
    for (std::size_t c = 0; c < candidates_db.size(); ++c) {
      const std::vector<double> q = to_distribution(candidates_db[c]);
      log_q.resize(q.size());
      for (std::size_t k = 0; k < q.size(); ++k) log_q[k] = std::log(q[k]);
      double score = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < accepted_.size() && score > best; ++i) {
        double cross = 0.0;
        const auto& p = accepted_[i];
        for (std::size_t k = 0; k < p.size(); ++k) cross += p[k] * log_q[k];
        score = std::min(score, neg_entropies_[i] - cross);
      }
      if (score > best) {
        best = score;
        best_index = c;
      }
    }
    return best_index;
  }

 private:
  std::vector<std::vector<double>> accepted_;
  std::vector<double> neg_entropies_;
};

}  // namespace

ProfileBatch generate_batch(const ProfileBatchSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  DiversityPool pool;
  ProfileBatch batch;
  batch.seed = spec.seed;
  batch.profiles.reserve(spec.count);
  std::vector<std::vector<double>> candidates(spec.candidates_per_draw);
  for (std::size_t n = 0; n < spec.count; ++n) {
    for (auto& c : candidates) c = random_walk_profile(rng, spec.channel_count);
    const std::size_t chosen = pool.select(candidates);
    const double excursion = spec.excursion_schedule_db[n];
    batch.profiles.push_back(
        rescale_to_excursion(candidates[chosen], excursion, spec.total_power_dbm));
    batch.excursions_db.push_back(excursion);
    pool.accept(to_distribution(candidates[chosen]));
  }
  return batch;
}

void write_profiles_csv(const std::filesystem::path& path, const ProfileBatch& batch) {
  csv::Table table;
  table.comments.push_back(" seed=" + std::to_string(batch.seed) +
                           " count=" + std::to_string(batch.profiles.size()));
  const std::size_t channels = batch.profiles.empty() ? 0 : batch.profiles.front().size();
  for (std::size_t k = 0; k < channels; ++k) table.header.push_back("tx_dbm_" + std::to_string(k + 1));
  table.header.push_back("excursion_db");
  table.header.push_back("total_power_dbm");
  for (std::size_t i = 0; i < batch.profiles.size(); ++i) {
    std::vector<double> row = batch.profiles[i].powers_dbm;
    row.push_back(batch.excursions_db[i]);
    row.push_back(batch.profiles[i].total_power_dbm);
    table.rows.push_back(csv::format_row(row));
  }
  csv::write(path, table);
}

ProfileBatch read_profiles_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  ProfileBatch batch;
  for (const auto& comment : table.comments) {
    const auto pos = comment.find("seed=");
    if (pos != std::string::npos) batch.seed = std::stoull(comment.substr(pos + 5));
  }
  std::size_t channels = 0;
  while (channels < table.header.size() &&
         table.header[channels].rfind("tx_dbm_", 0) == 0) {
    ++channels;
  }
  if (channels == 0) throw std::runtime_error(path.string() + ": no tx_dbm_ columns");
  const std::size_t f_col = table.column("excursion_db");
  const std::size_t total_col = table.column("total_power_dbm");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    PowerProfile p;
    p.powers_dbm.resize(channels);
    for (std::size_t k = 0; k < channels; ++k) p.powers_dbm[k] = table.number(r, k);
    p.total_power_dbm = table.number(r, total_col);
    batch.excursions_db.push_back(table.number(r, f_col));
    batch.profiles.push_back(std::move(p));
  }
  return batch;
}

}  // namespace capmax
