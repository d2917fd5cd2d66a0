#include "capmax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <initializer_list>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "capmax/csv.hpp"
#include "capmax/hash.hpp"
#include "capmax/metrics.hpp"
#include "capmax/units.hpp"

namespace capmax {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument("config section '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) {
      throw std::invalid_argument("unknown config key '" + where + "." + item.key() + "'");
    }
  }
}

template <class T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

std::string scenario_config_string(const Scenario& s) {
  std::ostringstream o;
  auto put = [&o](double v) { o << csv::format_double(v) << ' '; };
  o << s.id << ' ' << s.gff << ' ' << s.link.span_count << ' ';
  put(s.link.span_loss_db);
  put(s.tx_total_dbm);
  put(s.op.pump_current_ma);
  put(s.op.line_pump_w);
  put(s.link.edfa.saturated_output_dbm);
  put(s.link.edfa.pump_electrical_mw);
  for (double v : s.link.edfa.small_signal_gain_db) put(v);
  for (double v : s.link.edfa.noise_figure_db) put(v);
  if (s.link.edfa.gff_loss_db) {
    for (double v : *s.link.edfa.gff_loss_db) put(v);
  }
  for (double f : s.link.grid.center_frequencies_hz) put(f);
  put(s.link.grid.reference_bandwidth_hz);
  return o.str();
}

std::vector<double> snr_db(std::span<const double> signal_dbm, std::span<const double> noise_dbm) {
  std::vector<double> out(signal_dbm.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = signal_dbm[k] - noise_dbm[k];
  return out;
}

}  // namespace

ExperimentSpec ExperimentSpec::smoke() {
  ExperimentSpec s;
  s.dataset.count = 10;
  s.dataset.candidates_per_draw = 20;
  s.n_train = 8;
  s.n_validation = 2;
  s.train.epochs = 5;
  s.train.batch_switch_epoch = 2;
  s.campaign_initials = 20;
  s.sweep_sizes = {4, 8};
  s.gd.max_iterations = 30;
  s.waterfill.max_iterations = 200;
  return s;
}

ExperimentSpec ExperimentSpec::from_json(const json& j, ExperimentSpec base) {
  check_keys(j,
             {"scenario", "dataset", "split", "train", "gd", "waterfill", "etas",
              "symbol_rate_hz", "campaign", "sweep_sizes", "threads", "seed"},
             "config");
  ExperimentSpec s = std::move(base);
  take(j, "scenario", s.scenario_id);
  if (j.contains("seed")) s.reseed(j.at("seed").get<std::uint64_t>());
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"count", "f_min_db", "f_max_db", "candidates_per_draw", "seed"}, "dataset");
    take(d, "count", s.dataset.count);
    take(d, "f_min_db", s.dataset.f_min_db);
    take(d, "f_max_db", s.dataset.f_max_db);
    take(d, "candidates_per_draw", s.dataset.candidates_per_draw);
    take(d, "seed", s.dataset.seed);
  }
  if (j.contains("split")) {
    const json& d = j.at("split");
    check_keys(d, {"n_train", "n_validation", "seed"}, "split");
    take(d, "n_train", s.n_train);
    take(d, "n_validation", s.n_validation);
    take(d, "seed", s.split_seed);
  }
  if (j.contains("train")) {
    const json& d = j.at("train");
    check_keys(d,
               {"learning_rate", "beta1", "beta2", "adam_epsilon", "l2_lambda", "epochs",
                "batch_size_initial", "batch_size_late", "batch_switch_epoch",
                "final_lr_fraction", "seed", "layer_dims", "activations"},
               "train");
    TrainConfig& t = s.train;
    take(d, "learning_rate", t.learning_rate);
    take(d, "beta1", t.beta1);
    take(d, "beta2", t.beta2);
    take(d, "adam_epsilon", t.adam_epsilon);
    take(d, "l2_lambda", t.l2_lambda);
    take(d, "epochs", t.epochs);
    take(d, "batch_size_initial", t.batch_size_initial);
    take(d, "batch_size_late", t.batch_size_late);
    take(d, "batch_switch_epoch", t.batch_switch_epoch);
    take(d, "final_lr_fraction", t.final_lr_fraction);
    take(d, "seed", t.seed);
    take(d, "layer_dims", t.layer_dims);
    if (d.contains("activations")) {
      t.activations.clear();
      for (const auto& a : d.at("activations")) {
        t.activations.push_back(activation_from_string(a.get<std::string>()));
      }
    }
  }
  if (j.contains("gd")) {
    const json& d = j.at("gd");
    check_keys(d,
               {"epsilon_mw", "epsilon_fraction", "mu", "mu_scale", "smoothing_weight",
                "smoothing_domain", "max_iterations", "stop_tolerance", "stop_window",
                "power_floor_fraction"},
               "gd");
    GdConfig& g = s.gd;
    if (d.contains("epsilon_mw")) g.epsilon_mw = d.at("epsilon_mw").get<double>();
    if (d.contains("mu")) g.mu = d.at("mu").get<double>();
    take(d, "epsilon_fraction", g.epsilon_fraction);
    take(d, "mu_scale", g.mu_scale);
    take(d, "smoothing_weight", g.smoothing_weight);
    if (d.contains("smoothing_domain")) {
      const auto dom = d.at("smoothing_domain").get<std::string>();
      if (dom == "linear") {
        g.smoothing_domain = SmoothingDomain::linear;
      } else if (dom == "db") {
        g.smoothing_domain = SmoothingDomain::db;
      } else {
        throw std::invalid_argument("smoothing_domain must be 'linear' or 'db'");
      }
    }
    take(d, "max_iterations", g.max_iterations);
    take(d, "stop_tolerance", g.stop_tolerance);
    take(d, "stop_window", g.stop_window);
    take(d, "power_floor_fraction", g.power_floor_fraction);
  }
  if (j.contains("waterfill")) {
    const json& d = j.at("waterfill");
    check_keys(d, {"step_gain", "flatness_tolerance_db", "max_iterations", "stall_window"},
               "waterfill");
    take(d, "step_gain", s.waterfill.step_gain);
    take(d, "flatness_tolerance_db", s.waterfill.flatness_tolerance_db);
    take(d, "max_iterations", s.waterfill.max_iterations);
    take(d, "stall_window", s.waterfill.stall_window);
  }
  take(j, "etas", s.etas);
  take(j, "symbol_rate_hz", s.symbol_rate_hz);
  if (j.contains("campaign")) {
    const json& d = j.at("campaign");
    check_keys(d, {"initials", "seed"}, "campaign");
    take(d, "initials", s.campaign_initials);
    take(d, "seed", s.campaign_seed);
  }
  take(j, "sweep_sizes", s.sweep_sizes);
  take(j, "threads", s.threads);
  s.validate();
  return s;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path, ExperimentSpec base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, std::move(base));
}

json ExperimentSpec::to_json() const {
  json acts = json::array();
  for (Activation a : train.activations) acts.push_back(to_string(a));
  json gdj = {{"epsilon_fraction", gd.epsilon_fraction},
              {"mu_scale", gd.mu_scale},
              {"smoothing_weight", gd.smoothing_weight},
              {"smoothing_domain", gd.smoothing_domain == SmoothingDomain::linear ? "linear" : "db"},
              {"max_iterations", gd.max_iterations},
              {"stop_tolerance", gd.stop_tolerance},
              {"stop_window", gd.stop_window},
              {"power_floor_fraction", gd.power_floor_fraction}};
  if (gd.epsilon_mw) gdj["epsilon_mw"] = *gd.epsilon_mw;
  if (gd.mu) gdj["mu"] = *gd.mu;
  return {
      {"scenario", scenario_id},
      {"dataset",
       {{"count", dataset.count},
        {"f_min_db", dataset.f_min_db},
        {"f_max_db", dataset.f_max_db},
        {"candidates_per_draw", dataset.candidates_per_draw},
        {"seed", dataset.seed}}},
      {"split", {{"n_train", n_train}, {"n_validation", n_validation}, {"seed", split_seed}}},
      {"train",
       {{"learning_rate", train.learning_rate},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"adam_epsilon", train.adam_epsilon},
        {"l2_lambda", train.l2_lambda},
        {"epochs", train.epochs},
        {"batch_size_initial", train.batch_size_initial},
        {"batch_size_late", train.batch_size_late},
        {"batch_switch_epoch", train.batch_switch_epoch},
        {"final_lr_fraction", train.final_lr_fraction},
        {"seed", train.seed},
        {"layer_dims", train.layer_dims},
        {"activations", acts}}},
      {"gd", gdj},
      {"waterfill",
       {{"step_gain", waterfill.step_gain},
        {"flatness_tolerance_db", waterfill.flatness_tolerance_db},
        {"max_iterations", waterfill.max_iterations},
        {"stall_window", waterfill.stall_window}}},
      {"etas", etas},
      {"symbol_rate_hz", symbol_rate_hz},
      {"campaign", {{"initials", campaign_initials}, {"seed", campaign_seed}}},
      {"sweep_sizes", sweep_sizes},
      {"threads", threads},
  };
}

std::string ExperimentSpec::fingerprint() const {
  json j = to_json();
  j.erase("threads");
  return capmax::fingerprint(j.dump());
}

void ExperimentSpec::reseed(std::uint64_t seed) {
  dataset.seed = seed;
  campaign_seed = seed + 1;
  split_seed = seed + 4;
  train.seed = seed + 6;
}

void ExperimentSpec::validate() const {
  scenario_by_id(scenario_id);
  if (dataset.count < 2 || !(dataset.f_min_db > 0.0) || dataset.f_max_db < dataset.f_min_db ||
      dataset.candidates_per_draw < 1) {
    throw std::invalid_argument("invalid dataset spec");
  }
  if (n_train < 1 || n_validation < 1 || n_train + n_validation > dataset.count) {
    throw std::invalid_argument("split sizes exceed the dataset");
  }
  train.validate();
  gd.validate();
  waterfill.validate();
  if (etas.empty()) throw std::invalid_argument("need at least one eta");
  for (double e : etas) {
    if (!(e > 0.0 && e <= 1.0)) throw std::invalid_argument("eta must be in (0, 1]");
  }
  if (!(symbol_rate_hz > 0.0)) throw std::invalid_argument("symbol rate must be positive");
  if (campaign_initials < 1) throw std::invalid_argument("campaign needs at least one initial");
  for (std::size_t n : sweep_sizes) {
    if (n < 1 || n > n_train) throw std::invalid_argument("sweep size outside the training split");
  }
}

const std::vector<Scenario>& standard_scenarios() {
  static const std::vector<Scenario> scenarios = build_scenarios(calibrate(default_operating_points()));
  return scenarios;
}

const Scenario& scenario_by_id(const std::string& id) { return find_scenario(standard_scenarios(), id); }

std::string scenario_fingerprint(const Scenario& scenario) {
  return fingerprint(scenario_config_string(scenario));
}

ProfileBatch generate_profiles(const DatasetSpec& spec, double total_power_dbm) {
  ProfileBatchSpec b =
      ProfileBatchSpec::linear(spec.count, total_power_dbm, spec.seed, spec.f_min_db, spec.f_max_db);
  b.candidates_per_draw = spec.candidates_per_draw;
  return generate_batch(b);
}

Dataset simulate_dataset(const std::vector<PowerProfile>& profiles, const Scenario& scenario,
                         unsigned threads) {
  Dataset out;
  out.tx = profiles;
  out.rx.resize(profiles.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  std::size_t error_row = profiles.size();
  auto worker = [&] {
    for (std::size_t i = next++; i < profiles.size(); i = next++) {
      try {
        out.rx[i] = transmit(profiles[i], scenario.link);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_row) {
          error_row = i;
          first_error = e.what();
        }
      }
    }
  };
  const unsigned n = worker_count(threads, profiles.size());
  std::vector<std::future<void>> jobs;
  for (unsigned t = 1; t < n; ++t) jobs.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& j : jobs) j.get();
  if (error_row < profiles.size()) {
    throw std::runtime_error("simulation failed at row " + std::to_string(error_row) + ": " +
                             first_error);
  }
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& scenario_fp) {
  if (data.tx.empty() || data.tx.size() != data.rx.size()) {
    throw std::invalid_argument("dataset needs one RX observation per TX profile");
  }
  const std::size_t k = data.tx.front().size();
  csv::Table t;
  t.comments.push_back(" scenario_fp=" + scenario_fp);
  for (const char* prefix : {"tx_dbm_", "s_dbm_", "n_dbm_"}) {
    for (std::size_t i = 0; i < k; ++i) t.header.push_back(prefix + std::to_string(i + 1));
  }
  for (std::size_t r = 0; r < data.tx.size(); ++r) {
    std::vector<double> row = data.tx[r].powers_dbm;
    row.insert(row.end(), data.rx[r].signal_dbm.begin(), data.rx[r].signal_dbm.end());
    row.insert(row.end(), data.rx[r].noise_dbm.begin(), data.rx[r].noise_dbm.end());
    if (row.size() != 3 * k) throw std::invalid_argument("inconsistent channel counts");
    t.rows.push_back(csv::format_row(row));
  }
  csv::write(path, t);
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::string* scenario_fp) {
  const csv::Table t = csv::read(path);
  if (t.header.empty() || t.header.size() % 3 != 0) {
    throw std::invalid_argument("dataset CSV must hold TX, S and N columns");
  }
  const std::size_t k = t.header.size() / 3;
  if (t.header.front() != "tx_dbm_1" || t.header[k] != "s_dbm_1" || t.header[2 * k] != "n_dbm_1") {
    throw std::invalid_argument("dataset CSV has an unexpected header");
  }
  if (scenario_fp) {
    scenario_fp->clear();
    for (const auto& c : t.comments) {
      const auto pos = c.find("scenario_fp=");
      if (pos != std::string::npos) *scenario_fp = c.substr(pos + 12);
    }
  }
  Dataset d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> tx(k);
    RxObservation rx;
    rx.signal_dbm.resize(k);
    rx.noise_dbm.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      tx[i] = t.number(r, i);
      rx.signal_dbm[i] = t.number(r, k + i);
      rx.noise_dbm[i] = t.number(r, 2 * k + i);
    }
    d.tx.push_back(PowerProfile::from_dbm(std::move(tx)));
    d.rx.push_back(std::move(rx));
  }
  if (d.tx.empty()) throw std::invalid_argument("dataset CSV has no rows");
  return d;
}

Twin train_twin(const Dataset& dataset, const Scenario& scenario, const ExperimentSpec& spec) {
  Twin twin;
  twin.data = TrainingSet::from_observations(dataset.tx, dataset.rx);
  twin.data.split(spec.n_train, spec.n_validation, spec.split_seed);
  TrainResult r = train(twin.data, spec.train);
  twin.model = std::move(r.model);
  twin.model.scenario_fingerprint = scenario_fingerprint(scenario);
  twin.curves = std::move(r.curves);
  twin.validation = evaluate_mae(twin.model, twin.data, twin.data.validation_indices);
  for (std::size_t i : twin.data.validation_indices) {
    twin.validation_excursions_db.push_back(dataset.tx[i].excursion_db());
  }
  return twin;
}

Twin build_twin(const Scenario& scenario, const ExperimentSpec& spec) {
  const ProfileBatch batch = generate_profiles(spec.dataset, scenario.tx_total_dbm);
  return train_twin(simulate_dataset(batch.profiles, scenario, spec.threads), scenario, spec);
}

std::vector<SizeSweepPoint> training_size_sweep(const TrainingSet& data,
                                                const std::vector<std::size_t>& sizes,
                                                const TrainConfig& cfg) {
  std::vector<SizeSweepPoint> out;
  for (std::size_t n : sizes) {
    const TrainingSet subset = data.with_training_size(n);
    const TrainResult r = train(subset, cfg);
    const MaeStats s = evaluate_mae(r.model, subset, subset.validation_indices);
    out.push_back({n, s.mean_db, s.std_db});
  }
  return out;
}

double simulator_capacity(const Scenario& scenario, const PowerProfile& profile,
                          const CapacitySettings& settings) {
  const RxObservation rx = transmit(profile, scenario.link);
  return capacity(rx.snr_linear(), settings.symbol_rate_hz, settings.eta);
}

json ValidationReport::to_json() const {
  return {{"twin_capacity_bps", twin_capacity_bps},
          {"simulator_capacity_bps", simulator_capacity_bps},
          {"relative_error", relative_error},
          {"extrapolated", extrapolated},
          {"twin_snr_db", twin_snr_db},
          {"simulator_snr_db", simulator_snr_db}};
}

ValidationReport validate_profile(const MlpSurrogate& model, const Scenario& scenario,
                                  const PowerProfile& profile, const CapacitySettings& settings) {
  if (model.scenario_fingerprint != scenario_fingerprint(scenario)) {
    throw std::invalid_argument("scenario fingerprint mismatch: model was not trained for " +
                                scenario.id);
  }
  profile.validate(1e-6);
  ValidationReport r;
  const SurrogatePrediction pred = model.predict(profile.powers_dbm);
  r.extrapolated = pred.extrapolated;
  r.twin_snr_db = snr_db(pred.signal_dbm, pred.noise_dbm);
  std::vector<double> twin_snr(r.twin_snr_db.size());
  for (std::size_t k = 0; k < twin_snr.size(); ++k) twin_snr[k] = db_to_linear(r.twin_snr_db[k]);
  r.twin_capacity_bps = capacity(twin_snr, settings.symbol_rate_hz, settings.eta);
  const RxObservation rx = transmit(profile, scenario.link);
  r.simulator_snr_db = snr_db(rx.signal_dbm, rx.noise_dbm);
  r.simulator_capacity_bps = capacity(rx.snr_linear(), settings.symbol_rate_hz, settings.eta);
  r.relative_error = (r.twin_capacity_bps - r.simulator_capacity_bps) / r.simulator_capacity_bps;
  return r;
}

std::vector<std::pair<std::string, PowerProfile>> canonical_initials(double total_power_dbm,
                                                                     std::uint64_t seed) {
  const std::size_t k = ChannelGrid::standard().channel_count;
  std::vector<double> ramp(k);
  for (std::size_t i = 0; i < k; ++i) {
    ramp[i] = 10.0 * static_cast<double>(i) / static_cast<double>(k - 1);
  }
  std::mt19937_64 rng(seed);
  const std::vector<double> walk = random_walk_profile(rng, k);
  return {{"flat", PowerProfile::flat(k, total_power_dbm)},
          {"ramp", rescale_to_excursion(ramp, 10.0, total_power_dbm)},
          {"random", rescale_to_excursion(walk, 20.0, total_power_dbm)}};
}

std::vector<PowerProfile> campaign_initials(const ExperimentSpec& spec, double total_power_dbm) {
  DatasetSpec d = spec.dataset;
  d.count = std::max<std::size_t>(spec.campaign_initials, 2);
  d.seed = spec.campaign_seed;
  std::vector<PowerProfile> out = generate_profiles(d, total_power_dbm).profiles;
  out.resize(spec.campaign_initials);
  return out;
}

ScenarioOutcome optimize_scenario(const MlpSurrogate& model, const Scenario& scenario,
                                  const ExperimentSpec& spec, double eta) {
  ScenarioOutcome o;
  o.scenario_id = scenario.id;
  o.eta = eta;
  o.line_pump_w = scenario.line_pump_w();
  const CapacitySettings settings = spec.capacity(eta);
  const PowerProfile flat =
      PowerProfile::flat(scenario.link.grid.channel_count, scenario.tx_total_dbm);
  GdConfig gd = spec.gd;
  gd.capacity = settings;
  o.gd = gd_maximize(model, flat, gd);
  o.validation = validate_profile(model, scenario, o.gd.final_profile, settings);
  o.waterfill = iterative_waterfill(
      [&](const PowerProfile& p) { return transmit(p, scenario.link); }, flat, spec.waterfill);
  o.waterfill_capacity_bps = simulator_capacity(scenario, o.waterfill.final_profile, settings);
  o.flat_capacity_bps = simulator_capacity(scenario, flat, settings);
  return o;
}

std::vector<GainSurfacePoint> appendix_a_surface(const std::vector<double>& fn_db,
                                                 const std::vector<double>& snr_db,
                                                 int channels) {
  if (fn_db.empty() || snr_db.empty()) throw std::invalid_argument("empty grid");
  std::vector<GainSurfacePoint> out;
  for (double f : fn_db) {
    for (double s : snr_db) {
      out.push_back({f, s, waterfill_gain_analysis(f, s, channels), f <= 12.2 && s >= 12.4});
    }
  }
  return out;
}

void RunManifest::add_file(const std::filesystem::path& path) {
  files.emplace_back(path.string(), file_fingerprint(path));
}

json RunManifest::to_json() const {
  json f = json::array();
  for (const auto& [p, h] : files) f.push_back({{"path", p}, {"fnv1a64", h}});
  return {{"command", command},     {"version", version},       {"seed", seed},
          {"config_hash", config_hash}, {"started_utc", started_utc},
          {"finished_utc", finished_utc}, {"files", f}};
}

void RunManifest::write(const std::filesystem::path& path) {
  finished_utc = utc_timestamp();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace capmax
