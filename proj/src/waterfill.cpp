#include "capmax/waterfill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "capmax/optimizer.hpp"
#include "capmax/units.hpp"

namespace capmax {

WaterfillSolution analytic_waterfill(std::span<const double> noise, double total_power) {
  if (noise.empty()) throw std::invalid_argument("no channels to fill");
  if (!(total_power > 0.0) || !std::isfinite(total_power)) {
    throw std::invalid_argument("total power must be positive");
  }
  for (double n : noise) {
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("noise must be positive");
  }
  std::vector<double> sorted(noise.begin(), noise.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  std::partial_sum(sorted.begin(), sorted.end(), prefix.begin() + 1);

  // Filling the m quietest channels to the level of the m-th needs
  // m * N_(m) - prefix(m); this is non-decreasing in m, so bisect on it.
  auto needed = [&](std::size_t m) {
    return static_cast<double>(m) * sorted[m - 1] - prefix[m];
  };
  std::size_t lo = 1;
  std::size_t hi = sorted.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (needed(mid) < total_power) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const std::size_t m = lo;

  WaterfillSolution s;
  s.water_level = (total_power + prefix[m]) / static_cast<double>(m);
  s.powers.resize(noise.size());
  s.active.resize(noise.size());
  for (std::size_t k = 0; k < noise.size(); ++k) {
    s.powers[k] = std::max(0.0, s.water_level - noise[k]);
    s.active[k] = s.powers[k] > 0.0;
  }
  return s;
}

double kkt_residual(std::span<const double> noise, const WaterfillSolution& solution,
                    double total_power) {
  if (noise.size() != solution.powers.size() || solution.active.size() != noise.size()) {
    throw std::invalid_argument("solution does not match the noise vector");
  }
  double r = std::abs(sum(solution.powers) - total_power);
  for (std::size_t k = 0; k < noise.size(); ++k) {
    if (solution.powers[k] < 0.0) r = std::max(r, -solution.powers[k]);
    if (solution.active[k]) {
      r = std::max(r, std::abs(solution.water_level - noise[k] - solution.powers[k]));
    } else {
      r = std::max(r, std::max(0.0, solution.water_level - noise[k]));
      r = std::max(r, std::abs(solution.powers[k]));
    }
  }
  return r / total_power;
}

double shannon_sum(std::span<const double> powers, std::span<const double> noise) {
  if (powers.size() != noise.size()) throw std::invalid_argument("length mismatch");
  double c = 0.0;
  for (std::size_t k = 0; k < powers.size(); ++k) c += std::log2(1.0 + powers[k] / noise[k]);
  return c;
}

double waterfill_gain_analysis(double fn_db, double mean_snr_db, int channels) {
  if (!(fn_db >= 0.0) || channels < 2 || !std::isfinite(mean_snr_db)) {
    throw std::invalid_argument("need F_N >= 0, finite SNR and at least two channels");
  }
  const auto k = static_cast<std::size_t>(channels);
  std::vector<double> noise(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double pos = static_cast<double>(i) / static_cast<double>(k - 1) - 0.5;
    noise[i] = db_to_linear(fn_db * pos);
  }
  const double snr = db_to_linear(mean_snr_db);
  const double total = snr * sum(noise);
  const WaterfillSolution wf = analytic_waterfill(noise, total);
  const double baseline = static_cast<double>(k) * std::log2(1.0 + snr);
  return shannon_sum(wf.powers, noise) / baseline;
}

void WaterfillConfig::validate() const {
  if (!(step_gain > 0.0) || !(flatness_tolerance_db > 0.0) || max_iterations < 1 ||
      stall_window < 1 || !(constraint_tolerance > 0.0)) {
    throw std::invalid_argument("waterfill settings must be positive");
  }
}

double rx_flatness_db(const RxObservation& rx) {
  if (rx.signal_dbm.empty() || rx.signal_dbm.size() != rx.noise_dbm.size()) {
    throw std::invalid_argument("malformed RX observation");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < rx.signal_dbm.size(); ++k) {
    const double level = mw_to_dbm(dbm_to_mw(rx.signal_dbm[k]) + dbm_to_mw(rx.noise_dbm[k]));
    lo = std::min(lo, level);
    hi = std::max(hi, level);
  }
  return hi - lo;
}

WaterfillTrace iterative_waterfill(const TransferFunction& link, const PowerProfile& initial,
                                   const WaterfillConfig& cfg) {
  cfg.validate();
  initial.validate(1e-6);
  const double total_dbm = cfg.total_power_dbm.value_or(initial.total_power_dbm);
  const double total = dbm_to_mw(total_dbm);

  WaterfillTrace trace;
  std::vector<double> p = project_to_total(initial.powers_mw(), total);
  double best = std::numeric_limits<double>::infinity();
  int best_iter = 0;

  for (int it = 0; it <= cfg.max_iterations; ++it) {
    PowerProfile profile;
    profile.powers_dbm = mw_to_dbm(p);
    profile.total_power_dbm = total_dbm;
    const double violation = std::abs(profile.total_power_mw() - total) / total;
    trace.max_constraint_violation = std::max(trace.max_constraint_violation, violation);
    if (!(violation <= cfg.constraint_tolerance)) {
      throw ConstraintViolation("waterfill iterate violates the total-power constraint");
    }
    RxObservation rx = link(profile);
    const double flat = rx_flatness_db(rx);
    trace.profiles.push_back(profile);
    trace.flatness_db.push_back(flat);
    if (flat < best) {
      best = flat;
      best_iter = it;
      trace.final_profile = profile;
      trace.final_rx = rx;
      trace.final_flatness_db = flat;
    }
    if (flat <= cfg.flatness_tolerance_db) {
      trace.converged = true;
      break;
    }
    if (it - best_iter >= cfg.stall_window || it == cfg.max_iterations) break;

    const std::size_t n = p.size();
    std::vector<double> level(n);
    for (std::size_t k = 0; k < n; ++k) {
      level[k] = mw_to_dbm(dbm_to_mw(rx.signal_dbm[k]) + dbm_to_mw(rx.noise_dbm[k]));
    }
    const double mean = sum(level) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = dbm_to_mw(profile.powers_dbm[k] + cfg.step_gain * (mean - level[k]));
    }
    p = project_to_total(p, total);
  }
  return trace;
}

}  // namespace capmax
