#include "capmax/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "capmax/csv.hpp"
#include "capmax/units.hpp"

namespace capmax {

namespace {

void check_settings(const CapacitySettings& s) {
  if (!(s.symbol_rate_hz > 0.0) || !(s.eta > 0.0 && s.eta <= 1.0)) {
    throw std::invalid_argument("invalid symbol rate or eta");
  }
}

Eigen::VectorXd to_dbm_column(std::span<const double> powers_mw) {
  Eigen::VectorXd col(static_cast<Eigen::Index>(powers_mw.size()));
  for (std::size_t k = 0; k < powers_mw.size(); ++k) {
    col(static_cast<Eigen::Index>(k)) = mw_to_dbm(powers_mw[k]);
  }
  return col;
}

PowerProfile make_profile(std::span<const double> powers_mw, double total_dbm) {
  PowerProfile p;
  p.powers_dbm = mw_to_dbm(powers_mw);
  p.total_power_dbm = total_dbm;
  return p;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double relative_violation(const PowerProfile& p) {
  const double declared = dbm_to_mw(p.total_power_dbm);
  return std::abs(p.total_power_mw() - declared) / declared;
}

}  // namespace

Eigen::VectorXd twin_capacity_batch(const MlpSurrogate& model, const Eigen::MatrixXd& tx_dbm,
                                    const CapacitySettings& settings) {
  check_settings(settings);
  const Eigen::MatrixXd y = model.predict_batch(tx_dbm);
  const Eigen::Index k = y.rows() / 2;
  const Eigen::ArrayXXd snr =
      Eigen::pow(10.0, (y.topRows(k) - y.bottomRows(k)).array() / 10.0);
  const Eigen::ArrayXXd bits = (1.0 + settings.eta * snr).log() / std::log(2.0);
  return 2.0 * settings.symbol_rate_hz * bits.colwise().sum().transpose().matrix();
}

double twin_capacity(const MlpSurrogate& model, const PowerProfile& profile,
                     const CapacitySettings& settings) {
  const Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(profile.powers_dbm.data(),
                                        static_cast<Eigen::Index>(profile.size()));
  return twin_capacity_batch(model, x, settings)(0);
}

std::vector<double> project_to_total(std::span<const double> powers_mw, double total_mw) {
  if (!(total_mw > 0.0)) throw std::invalid_argument("total power must be positive");
  const double s = sum(powers_mw);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::invalid_argument("cannot project a profile with non-positive total power");
  }
  std::vector<double> out(powers_mw.begin(), powers_mw.end());
  const double scale = total_mw / s;
  for (double& p : out) p *= scale;
  return out;
}

std::vector<double> smooth_profile(std::span<const double> powers_mw, double side_weight,
                                   SmoothingDomain domain) {
  if (side_weight < 0.0) throw std::invalid_argument("smoothing weight must be non-negative");
  const std::size_t n = powers_mw.size();
  std::vector<double> out(n);
  if (domain == SmoothingDomain::linear) {
    for (std::size_t k = 0; k < n; ++k) {
      double v = powers_mw[k];
      if (k > 0) v += side_weight * powers_mw[k - 1];
      if (k + 1 < n) v += side_weight * powers_mw[k + 1];
      out[k] = v;
    }
    return out;
  }
  const std::vector<double> db = mw_to_dbm(powers_mw);
  for (std::size_t k = 0; k < n; ++k) {
    double v = db[k];
    double w = 1.0;
    if (k > 0) {
      v += side_weight * db[k - 1];
      w += side_weight;
    }
    if (k + 1 < n) {
      v += side_weight * db[k + 1];
      w += side_weight;
    }
    out[k] = dbm_to_mw(v / w);
  }
  return out;
}

double fd_epsilon(const PowerProfile& profile, double fraction) {
  if (!(fraction > 0.0)) throw std::invalid_argument("epsilon fraction must be positive");
  const std::vector<double> p = profile.powers_mw();
  if (p.empty()) throw std::invalid_argument("empty power profile");
  return fraction * *std::min_element(p.begin(), p.end());
}

FdGradient fd_gradient(const MlpSurrogate& model, const PowerProfile& profile, double eps_mw,
                       const CapacitySettings& settings) {
  if (!(eps_mw > 0.0)) throw std::invalid_argument("eps must be positive");
  profile.validate();
  const std::vector<double> base = profile.powers_mw();
  const double total = dbm_to_mw(profile.total_power_dbm);
  const std::size_t n = base.size();

  Eigen::MatrixXd batch(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n + 1));
  batch.col(0) = to_dbm_column(base);
  std::vector<double> perturbed(base);
  for (std::size_t k = 0; k < n; ++k) {
    perturbed[k] = base[k] + eps_mw;
    batch.col(static_cast<Eigen::Index>(k + 1)) = to_dbm_column(project_to_total(perturbed, total));
    perturbed[k] = base[k];
  }

  const Eigen::VectorXd c = twin_capacity_batch(model, batch, settings);
  FdGradient out;
  out.capacity_bps = c(0);
  out.evaluations = static_cast<std::size_t>(batch.cols());
  out.gradient.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.gradient[k] = (c(static_cast<Eigen::Index>(k + 1)) - c(0)) / eps_mw;
  }
  for (Eigen::Index j = 0; j < batch.cols() && !out.extrapolated; ++j) {
    out.extrapolated = model.extrapolates(batch.col(j));
  }
  return out;
}

std::vector<double> analytic_gradient(const MlpSurrogate& model, const PowerProfile& profile,
                                      const CapacitySettings& settings) {
  check_settings(settings);
  profile.validate();
  const std::vector<double> p = profile.powers_mw();
  const double total = dbm_to_mw(profile.total_power_dbm);
  const auto n = static_cast<Eigen::Index>(p.size());

  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(profile.powers_dbm.data(), n);
  MlpSurrogate::Cache cache;
  const Eigen::VectorXd y_hat =
      model.forward_normalized(model.input_scaler().normalize(x), &cache);
  const Eigen::VectorXd y = model.output_scaler().denormalize(y_hat);
  if (y.size() != 2 * n) throw std::invalid_argument("model output must hold signal and noise");

  const double ln10 = std::log(10.0);
  Eigen::VectorXd d_y(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double snr = std::pow(10.0, (y(k) - y(n + k)) / 10.0);
    const double d = 2.0 * settings.symbol_rate_hz * settings.eta * snr /
                     (1.0 + settings.eta * snr) * (ln10 / 10.0) / std::log(2.0);
    d_y(k) = d;
    d_y(n + k) = -d;
  }
  const Eigen::VectorXd d_y_hat = d_y.cwiseProduct(model.output_scaler().range());
  const MlpSurrogate::Gradients g = model.backward(cache, d_y_hat);
  const Eigen::VectorXd d_x = g.input.col(0).cwiseQuotient(model.input_scaler().range());

  std::vector<double> grad(p.size());
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    grad[k] = d_x(static_cast<Eigen::Index>(k)) * 10.0 / (ln10 * p[k]);
    dot += grad[k] * p[k];
  }
  for (double& v : grad) v -= dot / total;
  return grad;
}

void GdConfig::validate() const {
  if (epsilon_mw && !(*epsilon_mw > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(epsilon_fraction > 0.0)) throw std::invalid_argument("epsilon fraction must be positive");
  if (mu && !(*mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(mu_scale > 0.0)) throw std::invalid_argument("mu_scale must be positive");
  if (smoothing_weight < 0.0) throw std::invalid_argument("smoothing weight must be non-negative");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (!(stop_tolerance >= 0.0) || stop_window < 1) {
    throw std::invalid_argument("invalid stopping rule");
  }
  if (!(power_floor_fraction > 0.0 && power_floor_fraction < 1.0)) {
    throw std::invalid_argument("power floor fraction must be in (0, 1)");
  }
  if (!(constraint_tolerance > 0.0)) {
    throw std::invalid_argument("constraint tolerance must be positive");
  }
  check_settings(capacity);
}

bool OptimizationTrace::any_extrapolation() const {
  return std::any_of(iterations.begin(), iterations.end(),
                     [](const IterationRecord& r) { return r.extrapolated; });
}

OptimizationTrace gd_maximize(const MlpSurrogate& model, const PowerProfile& initial,
                              const GdConfig& cfg) {
  cfg.validate();
  initial.validate(1e-6);
  const double total_dbm = cfg.total_power_dbm.value_or(initial.total_power_dbm);
  const double total = dbm_to_mw(total_dbm);
  const double per_channel = total / static_cast<double>(initial.size());
  const double floor = cfg.power_floor_fraction * per_channel;

  OptimizationTrace trace;

  std::vector<double> p = project_to_total(initial.powers_mw(), total);
  FdGradient g;

  auto admit = [&](const std::vector<double>& powers) -> bool {
    PowerProfile profile = make_profile(powers, total_dbm);
    const double violation = relative_violation(profile);
    trace.max_constraint_violation = std::max(trace.max_constraint_violation, violation);
    if (!(violation <= cfg.constraint_tolerance)) {
      throw ConstraintViolation("iterate violates the total-power constraint (relative error " +
                                std::to_string(violation) + ")");
    }
    const double eps = cfg.epsilon_mw.value_or(fd_epsilon(profile, cfg.epsilon_fraction));
    g = fd_gradient(model, profile, eps, cfg.capacity);
    if (!std::isfinite(g.capacity_bps)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite capacity at iteration " +
                           std::to_string(trace.iterations.size());
      return false;
    }
    IterationRecord rec;
    rec.powers_dbm = std::move(profile.powers_dbm);
    rec.capacity_bps = g.capacity_bps;
    double sq = 0.0;
    for (double v : g.gradient) sq += v * v;
    rec.gradient_norm = std::sqrt(sq);
    rec.epsilon_mw = eps;
    rec.extrapolated = g.extrapolated;
    trace.iterations.push_back(std::move(rec));
    return true;
  };

  if (admit(p)) {
    const double g_max = max_abs(g.gradient);
    if (cfg.mu) {
      trace.mu = *cfg.mu;
    } else {
      const PowerProfile flat = PowerProfile::flat(p.size(), total_dbm);
      const FdGradient g_flat =
          fd_gradient(model, flat, cfg.epsilon_mw.value_or(fd_epsilon(flat, cfg.epsilon_fraction)),
                      cfg.capacity);
      double scale = max_abs(g_flat.gradient);
      if (!(scale > 0.0) || !std::isfinite(scale)) scale = g_max;
      if (scale > 0.0 && std::isfinite(scale)) trace.mu = cfg.mu_scale * per_channel / scale;
    }
    if (trace.mu == 0.0) trace.converged = true;

    for (int it = 1; it <= cfg.max_iterations && !trace.converged; ++it) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        p[k] = std::max(p[k] + trace.mu * g.gradient[k], floor);
      }
      p = project_to_total(smooth_profile(p, cfg.smoothing_weight, cfg.smoothing_domain), total);
      if (!admit(p)) break;
      const std::size_t n = trace.iterations.size();
      if (n > static_cast<std::size_t>(cfg.stop_window)) {
        const double now = trace.iterations[n - 1].capacity_bps;
        const double before = trace.iterations[n - 1 - cfg.stop_window].capacity_bps;
        if (now - before < cfg.stop_tolerance * std::abs(before)) trace.converged = true;
      }
    }
  }

  if (trace.iterations.empty()) {
    trace.final_profile = make_profile(p, total_dbm);
    trace.final_capacity_bps = std::numeric_limits<double>::quiet_NaN();
    return trace;
  }
  trace.final_profile.powers_dbm = trace.iterations.back().powers_dbm;
  trace.final_profile.total_power_dbm = total_dbm;
  trace.final_capacity_bps = trace.iterations.back().capacity_bps;
  return trace;
}

std::size_t CampaignSummary::within_of_best(double fraction) const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [&](const CampaignRun& r) {
        return r.trace.final_capacity_bps >= (1.0 - fraction) * best_capacity_bps;
      }));
}

std::string CampaignSummary::to_json() const {
  nlohmann::json j;
  j["runs"] = runs.size();
  j["best_capacity_bps"] = best_capacity_bps;
  j["best_run"] = best_run;
  j["converged_count"] = converged_count;
  j["converged_spread"] = converged_spread;
  j["outlier_count"] = outlier_count;
  j["max_constraint_violation"] = max_constraint_violation;
  nlohmann::json finals = nlohmann::json::array();
  for (const auto& r : runs) {
    finals.push_back({{"initial_excursion_db", r.initial_excursion_db},
                      {"final_capacity_bps", r.trace.final_capacity_bps},
                      {"iterations", r.trace.iterations_used()},
                      {"converged", r.trace.converged},
                      {"outlier", r.outlier}});
  }
  j["final"] = std::move(finals);
  return j.dump(2);
}

CampaignSummary run_campaign(const MlpSurrogate& model, const std::vector<PowerProfile>& initials,
                             const GdConfig& cfg, unsigned threads, double outlier_fraction) {
  if (initials.empty()) throw std::invalid_argument("campaign needs at least one initial profile");
  if (!(outlier_fraction > 0.0 && outlier_fraction < 1.0)) {
    throw std::invalid_argument("outlier fraction must be in (0, 1)");
  }
  cfg.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(initials.size()));

  CampaignSummary summary;
  summary.runs.resize(initials.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < initials.size(); i = next++) {
      summary.runs[i].initial_excursion_db = initials[i].excursion_db();
      summary.runs[i].trace = gd_maximize(model, initials[i], cfg);
    }
  };
  std::vector<std::future<void>> jobs;
  for (unsigned t = 1; t < threads; ++t) jobs.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& j : jobs) j.get();

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  summary.best_capacity_bps = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < summary.runs.size(); ++i) {
    const auto& t = summary.runs[i].trace;
    summary.max_constraint_violation =
        std::max(summary.max_constraint_violation, t.max_constraint_violation);
    if (t.final_capacity_bps > summary.best_capacity_bps) {
      summary.best_capacity_bps = t.final_capacity_bps;
      summary.best_run = i;
    }
    if (t.converged) {
      ++summary.converged_count;
      lo = std::min(lo, t.final_capacity_bps);
      hi = std::max(hi, t.final_capacity_bps);
    }
  }
  summary.converged_spread = summary.converged_count > 0 ? (hi - lo) / hi : 0.0;
  for (auto& r : summary.runs) {
    r.outlier = !(r.trace.final_capacity_bps >= (1.0 - outlier_fraction) * summary.best_capacity_bps);
    if (r.outlier) ++summary.outlier_count;
  }
  return summary;
}

void write_trace_csv(const std::filesystem::path& path, const OptimizationTrace& trace) {
  csv::Table t;
  t.header = {"iteration", "capacity_bps", "gradient_norm", "epsilon_mw", "extrapolated"};
  const std::size_t k = trace.final_profile.size();
  for (std::size_t i = 0; i < k; ++i) t.header.push_back("tx_dbm_" + std::to_string(i + 1));
  t.comments.push_back(" mu=" + csv::format_double(trace.mu) +
                       " converged=" + (trace.converged ? "1" : "0"));
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& r = trace.iterations[i];
    std::vector<double> row{static_cast<double>(i), r.capacity_bps, r.gradient_norm,
                            r.epsilon_mw, r.extrapolated ? 1.0 : 0.0};
    row.insert(row.end(), r.powers_dbm.begin(), r.powers_dbm.end());
    t.rows.push_back(csv::format_row(row));
  }
  csv::write(path, t);
}

}  // namespace capmax
