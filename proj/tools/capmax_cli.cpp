// capmax: dataset generation, twin training, GD campaigns, validation,
// GFF ablation and the waterfilling gain surface.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "capmax/csv.hpp"
#include "capmax/harness.hpp"
#include "capmax/metrics.hpp"
#include "capmax/units.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace capmax;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string scenario;
  bool smoke = false;
  unsigned threads = 0;
};

struct Context {
  ExperimentSpec spec;
  fs::path out;
  RunManifest manifest;

  fs::path file(const std::string& name) const { return out / name; }

  void write_csv(const fs::path& path, const csv::Table& table) {
    csv::write(path, table);
    manifest.add_file(path);
  }

  void write_json(const fs::path& path, const json& value) {
    std::ofstream o(path);
    if (!o) throw std::runtime_error("cannot write " + path.string());
    o << value.dump(2) << '\n';
    o.close();
    manifest.add_file(path);
  }

  void finish() { manifest.write(out / ("manifest_" + manifest.command + ".json")); }
};

Context make_context(const CommonOptions& opt, const std::string& command) {
  Context ctx;
  ExperimentSpec base = opt.smoke ? ExperimentSpec::smoke() : ExperimentSpec{};
  ctx.spec = opt.config.empty() ? base : ExperimentSpec::load(opt.config, base);
  if (opt.seed) ctx.spec.reseed(*opt.seed);
  if (!opt.scenario.empty()) ctx.spec.scenario_id = opt.scenario;
  if (opt.threads) ctx.spec.threads = opt.threads;
  ctx.spec.validate();
  ctx.out = opt.out;
  fs::create_directories(ctx.out);
  {
    const fs::path probe = ctx.out / ".capmax_write_probe";
    std::ofstream p(probe);
    if (!p) throw std::runtime_error("output directory is not writable: " + ctx.out.string());
    p.close();
    fs::remove(probe);
  }
  ctx.manifest.command = command;
  ctx.manifest.seed = ctx.spec.dataset.seed;
  ctx.manifest.config_hash = ctx.spec.fingerprint();
  ctx.manifest.started_utc = utc_timestamp();
  return ctx;
}

std::string scenario_tag(const ExperimentSpec& spec) { return spec.scenario_id; }

csv::Table learning_curve_table(const LearningCurves& c) {
  csv::Table t;
  t.comments.push_back(" best_epoch=" + std::to_string(c.best_epoch));
  t.header = {"epoch", "train_mae", "validation_mae", "validation_mae_db", "best_validation_mae"};
  for (std::size_t e = 0; e < c.train_mae.size(); ++e) {
    t.rows.push_back(csv::format_row({static_cast<double>(e), c.train_mae[e],
                                      c.validation_mae[e], c.validation_mae_db[e],
                                      c.best_validation_mae[e]}));
  }
  return t;
}

csv::Table trace_table(const std::string& label, const OptimizationTrace& trace) {
  csv::Table t;
  t.header = {"initial", "iteration", "capacity_bps", "excursion_db"};
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& r = trace.iterations[i];
    const auto [lo, hi] = std::minmax_element(r.powers_dbm.begin(), r.powers_dbm.end());
    t.rows.push_back({label, std::to_string(i), csv::format_double(r.capacity_bps),
                      csv::format_double(*hi - *lo)});
  }
  return t;
}

// generate ------------------------------------------------------------------

void cmd_generate(Context& ctx) {
  const Scenario& sc = scenario_by_id(ctx.spec.scenario_id);
  const ProfileBatch batch = generate_profiles(ctx.spec.dataset, sc.tx_total_dbm);
  const fs::path path = ctx.file("profiles.csv");
  write_profiles_csv(path, batch);
  ctx.manifest.add_file(path);
}

// dataset -------------------------------------------------------------------

void cmd_dataset(Context& ctx, const std::string& profiles_path) {
  const Scenario& sc = scenario_by_id(ctx.spec.scenario_id);
  const fs::path in = profiles_path.empty() ? ctx.file("profiles.csv") : fs::path(profiles_path);
  const ProfileBatch batch = read_profiles_csv(in);
  const Dataset data = simulate_dataset(batch.profiles, sc, ctx.spec.threads);
  const fs::path path = ctx.file("dataset_" + scenario_tag(ctx.spec) + ".csv");
  write_dataset_csv(path, data, scenario_fingerprint(sc));
  ctx.manifest.add_file(path);
}

// train ---------------------------------------------------------------------

Twin cmd_train(Context& ctx, const std::string& dataset_path, bool sweep) {
  const Scenario& sc = scenario_by_id(ctx.spec.scenario_id);
  const std::string tag = scenario_tag(ctx.spec);
  const fs::path in =
      dataset_path.empty() ? ctx.file("dataset_" + tag + ".csv") : fs::path(dataset_path);
  std::string fp;
  const Dataset data = read_dataset_csv(in, &fp);
  if (fp != scenario_fingerprint(sc)) {
    throw std::invalid_argument("scenario fingerprint mismatch: dataset was not simulated for " +
                                sc.id);
  }
  Twin twin = train_twin(data, sc, ctx.spec);

  const fs::path model_path = ctx.file("model_" + tag + ".json");
  save_model(model_path, twin.model);
  ctx.manifest.add_file(model_path);
  ctx.write_csv(ctx.file("curves_" + tag + ".csv"), learning_curve_table(twin.curves));

  csv::Table per_sample;
  per_sample.header = {"validation_row", "excursion_db", "mae_db"};
  for (std::size_t i = 0; i < twin.validation.per_sample_db.size(); ++i) {
    per_sample.rows.push_back({std::to_string(twin.data.validation_indices[i]),
                               csv::format_double(twin.validation_excursions_db[i]),
                               csv::format_double(twin.validation.per_sample_db[i])});
  }
  ctx.write_csv(ctx.file("fig9b_" + tag + ".csv"), per_sample);

  if (sweep) {
    std::vector<std::size_t> sizes;
    for (std::size_t n : ctx.spec.sweep_sizes) {
      if (n <= twin.data.train_indices.size()) sizes.push_back(n);
    }
    const auto points = training_size_sweep(twin.data, sizes, ctx.spec.train);
    csv::Table t;
    t.header = {"training_size", "mean_mae_db", "std_mae_db"};
    for (const auto& p : points) {
      t.rows.push_back(csv::format_row(
          {static_cast<double>(p.training_size), p.mean_mae_db, p.std_mae_db}));
    }
    ctx.write_csv(ctx.file("fig9a_" + tag + ".csv"), t);
  }

  ctx.write_json(ctx.file("train_summary_" + tag + ".json"),
                 {{"scenario", sc.id},
                  {"validation_mae_mean_db", twin.validation.mean_db},
                  {"validation_mae_std_db", twin.validation.std_db},
                  {"validation_mae_max_db", twin.validation.max_db},
                  {"best_epoch", twin.curves.best_epoch}});
  return twin;
}

// optimize ------------------------------------------------------------------

MlpSurrogate load_scenario_model(const Context& ctx, const std::string& model_path,
                                 const Scenario& sc) {
  const fs::path in = model_path.empty() ? ctx.file("model_" + scenario_tag(ctx.spec) + ".json")
                                         : fs::path(model_path);
  MlpSurrogate model = load_model(in);
  if (model.scenario_fingerprint != scenario_fingerprint(sc)) {
    throw std::invalid_argument("scenario fingerprint mismatch: model was not trained for " +
                                sc.id);
  }
  return model;
}

void cmd_optimize(Context& ctx, const std::string& model_path, const std::string& initials_path) {
  const Scenario& sc = scenario_by_id(ctx.spec.scenario_id);
  const std::string tag = scenario_tag(ctx.spec);
  const MlpSurrogate model = load_scenario_model(ctx, model_path, sc);
  GdConfig gd = ctx.spec.gd;
  gd.capacity = ctx.spec.capacity();

  std::vector<PowerProfile> initials = initials_path.empty()
                                           ? campaign_initials(ctx.spec, sc.tx_total_dbm)
                                           : read_profiles_csv(initials_path).profiles;
  if (initials.empty()) throw std::invalid_argument("no initial profiles");

  // Three canonical starting points.
  csv::Table fig13a;
  json canonical = json::array();
  for (const auto& [label, init] : canonical_initials(sc.tx_total_dbm, ctx.spec.campaign_seed)) {
    const OptimizationTrace tr = gd_maximize(model, init, gd);
    const csv::Table t = trace_table(label, tr);
    if (fig13a.header.empty()) fig13a.header = t.header;
    fig13a.rows.insert(fig13a.rows.end(), t.rows.begin(), t.rows.end());
    canonical.push_back({{"initial", label},
                         {"final_capacity_bps", tr.final_capacity_bps},
                         {"iterations", tr.iterations_used()},
                         {"converged", tr.converged}});
  }
  ctx.write_csv(ctx.file("fig13a_" + tag + ".csv"), fig13a);

  const CampaignSummary summary = run_campaign(model, initials, gd, ctx.spec.threads);
  const fs::path trace_dir = ctx.file("traces_" + tag);
  fs::create_directories(trace_dir);
  csv::Table fig13b;
  fig13b.header = {"run", "initial_excursion_db", "initial_capacity_bps", "final_capacity_bps",
                   "iterations", "converged", "outlier"};
  ProfileBatch converged;
  converged.seed = ctx.spec.campaign_seed;
  for (std::size_t i = 0; i < summary.runs.size(); ++i) {
    const CampaignRun& run = summary.runs[i];
    const fs::path p = trace_dir / ("run_" + std::to_string(i) + ".csv");
    write_trace_csv(p, run.trace);
    ctx.manifest.add_file(p);
    fig13b.rows.push_back({std::to_string(i), csv::format_double(run.initial_excursion_db),
                           csv::format_double(run.trace.iterations.front().capacity_bps),
                           csv::format_double(run.trace.final_capacity_bps),
                           std::to_string(run.trace.iterations_used()),
                           run.trace.converged ? "1" : "0", run.outlier ? "1" : "0"});
    converged.profiles.push_back(run.trace.final_profile);
    converged.excursions_db.push_back(run.trace.final_profile.excursion_db());
  }
  ctx.write_csv(ctx.file("fig13b_" + tag + ".csv"), fig13b);
  const fs::path conv_path = ctx.file("converged_" + tag + ".csv");
  write_profiles_csv(conv_path, converged);
  ctx.manifest.add_file(conv_path);

  ProfileBatch best;
  best.seed = ctx.spec.campaign_seed;
  best.profiles.push_back(summary.runs[summary.best_run].trace.final_profile);
  best.excursions_db.push_back(best.profiles.front().excursion_db());
  const fs::path best_path = ctx.file("best_profile_" + tag + ".csv");
  write_profiles_csv(best_path, best);
  ctx.manifest.add_file(best_path);

  json s = json::parse(summary.to_json());
  s["scenario"] = sc.id;
  s["canonical"] = canonical;
  ctx.write_json(ctx.file("optimize_summary_" + tag + ".json"), s);
}

// validate ------------------------------------------------------------------

ValidationReport cmd_validate(Context& ctx, const std::string& model_path,
                              const std::string& profile_path) {
  const Scenario& sc = scenario_by_id(ctx.spec.scenario_id);
  const std::string tag = scenario_tag(ctx.spec);
  const fs::path in =
      profile_path.empty() ? ctx.file("best_profile_" + tag + ".csv") : fs::path(profile_path);
  const fs::path model_in =
      model_path.empty() ? ctx.file("model_" + tag + ".json") : fs::path(model_path);
  const MlpSurrogate model = load_model(model_in);
  const ProfileBatch batch = read_profiles_csv(in);
  if (batch.profiles.empty()) throw std::invalid_argument("profile CSV has no rows");
  const PowerProfile& profile = batch.profiles.front();
  const ValidationReport r = validate_profile(model, sc, profile, ctx.spec.capacity());

  csv::Table t;
  t.header = {"channel", "tx_dbm", "twin_snr_db", "simulator_snr_db"};
  for (std::size_t k = 0; k < profile.size(); ++k) {
    t.rows.push_back(csv::format_row({static_cast<double>(k + 1), profile.powers_dbm[k],
                                      r.twin_snr_db[k], r.simulator_snr_db[k]}));
  }
  ctx.write_csv(ctx.file("fig13c_" + tag + ".csv"), t);
  json j = r.to_json();
  j["scenario"] = sc.id;
  ctx.write_json(ctx.file("validation_" + tag + ".json"), j);
  return r;
}

// ablate-gff ----------------------------------------------------------------

json cmd_ablate(Context& ctx) {
  csv::Table t;
  t.header = {"scenario",        "pump_current_ma",       "gff",
              "line_pump_w",     "eta",                   "gd_capacity_bps",
              "m_bps_per_w",     "twin_capacity_bps",     "twin_relative_error",
              "flat_capacity_bps", "waterfill_capacity_bps", "gd_iterations"};
  json rows = json::array();
  for (const Scenario& sc : standard_scenarios()) {
    const Twin twin = build_twin(sc, ctx.spec);
    for (double eta : ctx.spec.etas) {
      const ScenarioOutcome o = optimize_scenario(twin.model, sc, ctx.spec, eta);
      t.rows.push_back({sc.id, csv::format_double(sc.op.pump_current_ma), sc.gff ? "1" : "0",
                        csv::format_double(o.line_pump_w), csv::format_double(eta),
                        csv::format_double(o.validation.simulator_capacity_bps),
                        csv::format_double(o.figure_of_merit()),
                        csv::format_double(o.validation.twin_capacity_bps),
                        csv::format_double(o.validation.relative_error),
                        csv::format_double(o.flat_capacity_bps),
                        csv::format_double(o.waterfill_capacity_bps),
                        std::to_string(o.gd.iterations_used())});
      rows.push_back({{"scenario", sc.id},
                      {"gff", sc.gff},
                      {"pump_current_ma", sc.op.pump_current_ma},
                      {"eta", eta},
                      {"capacity_bps", o.validation.simulator_capacity_bps},
                      {"m_bps_per_w", o.figure_of_merit()},
                      {"validation_mae_db", twin.validation.mean_db}});
    }
  }
  ctx.write_csv(ctx.file("fig16.csv"), t);

  // Relative no-GFF gain per pump setting and eta.
  json gains = json::array();
  for (const json& a : rows) {
    if (a["gff"].get<bool>()) continue;
    for (const json& b : rows) {
      if (!b["gff"].get<bool>() || b["pump_current_ma"] != a["pump_current_ma"] ||
          b["eta"] != a["eta"]) {
        continue;
      }
      gains.push_back({{"pump_current_ma", a["pump_current_ma"]},
                       {"eta", a["eta"]},
                       {"no_gff_gain", a["capacity_bps"].get<double>() /
                                               b["capacity_bps"].get<double>() -
                                           1.0}});
    }
  }
  json out = {{"rows", rows}, {"no_gff_gain", gains}};
  ctx.write_json(ctx.file("ablation.json"), out);
  return out;
}

// appendix-a ----------------------------------------------------------------

void cmd_appendix_a(Context& ctx, double fn_max, double fn_step, double snr_min, double snr_max,
                    double snr_step) {
  if (!(fn_step > 0.0) || !(snr_step > 0.0) || fn_max < 0.0 || snr_max < snr_min) {
    throw std::invalid_argument("empty F_N x SNR grid");
  }
  std::vector<double> fn;
  for (double f = 0.0; f <= fn_max + 1e-9; f += fn_step) fn.push_back(f);
  std::vector<double> snr;
  for (double s = snr_min; s <= snr_max + 1e-9; s += snr_step) snr.push_back(s);
  fn.push_back(12.2);
  snr.push_back(12.4);
  std::sort(fn.begin(), fn.end());
  std::sort(snr.begin(), snr.end());
  fn.erase(std::unique(fn.begin(), fn.end()), fn.end());
  snr.erase(std::unique(snr.begin(), snr.end()), snr.end());

  csv::Table t;
  t.header = {"fn_db", "mean_snr_db", "ratio", "experimental_region"};
  for (const auto& p : appendix_a_surface(fn, snr)) {
    t.rows.push_back({csv::format_double(p.fn_db), csv::format_double(p.mean_snr_db),
                      csv::format_double(p.ratio), p.experimental_region ? "1" : "0"});
  }
  ctx.write_csv(ctx.file("fig17.csv"), t);
}

void print_error(const std::string& command, const std::string& message, const char* kind) {
  std::cerr << json{{"error", message}, {"kind", kind}, {"command", command}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity maximization over per-channel launch powers"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions opt;
  app.add_option("--config", opt.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Seed applied to every random stream");
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--scenario", opt.scenario, "Scenario id, e.g. 150mA-nogff");
  app.add_flag("--smoke", opt.smoke, "Small CI-sized run");
  app.add_option("--threads", opt.threads, "Worker threads (0 = hardware)");

  std::string profiles_path;
  std::string dataset_path;
  std::string model_path;
  std::string initials_path;
  std::string profile_path;
  bool sweep = false;
  double fn_max = 20.0, fn_step = 0.5, snr_min = 0.0, snr_max = 30.0, snr_step = 0.5;

  auto* gen = app.add_subcommand("generate", "Random TX profiles -> profiles.csv");
  auto* ds = app.add_subcommand("dataset", "Simulate profiles -> dataset_<scenario>.csv");
  ds->add_option("--profiles", profiles_path, "Profiles CSV (default <out>/profiles.csv)");
  auto* tr = app.add_subcommand("train", "Train the twin -> model, curves, fig9a/9b");
  tr->add_option("--dataset", dataset_path, "Dataset CSV");
  tr->add_flag("--sweep", sweep, "Also run the training-set-size sweep");
  auto* op = app.add_subcommand("optimize", "GD campaign on the twin -> traces, fig13a/13b");
  op->add_option("--model", model_path, "Model JSON");
  op->add_option("--initials", initials_path, "Initial profiles CSV");
  auto* va = app.add_subcommand("validate", "Twin vs simulator at a profile -> fig13c");
  va->add_option("--model", model_path, "Model JSON");
  va->add_option("--profile", profile_path, "Profile CSV (first row is used)");
  auto* ab = app.add_subcommand("ablate-gff", "All six scenarios, every eta -> fig16");
  auto* aa = app.add_subcommand("appendix-a", "Waterfilling gain surface -> fig17");
  aa->add_option("--fn-max", fn_max);
  aa->add_option("--fn-step", fn_step);
  aa->add_option("--snr-min", snr_min);
  aa->add_option("--snr-max", snr_max);
  aa->add_option("--snr-step", snr_step);
  auto* rp = app.add_subcommand("report", "Full pipeline for one scenario plus ablation and fig17");
  rp->add_flag("--sweep", sweep, "Include the training-set-size sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("", e.what(), "usage");
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Context ctx = make_context(opt, command);
    if (gen->parsed()) {
      cmd_generate(ctx);
    } else if (ds->parsed()) {
      cmd_dataset(ctx, profiles_path);
    } else if (tr->parsed()) {
      cmd_train(ctx, dataset_path, sweep);
    } else if (op->parsed()) {
      cmd_optimize(ctx, model_path, initials_path);
    } else if (va->parsed()) {
      cmd_validate(ctx, model_path, profile_path);
    } else if (ab->parsed()) {
      cmd_ablate(ctx);
    } else if (aa->parsed()) {
      cmd_appendix_a(ctx, fn_max, fn_step, snr_min, snr_max, snr_step);
    } else if (rp->parsed()) {
      cmd_generate(ctx);
      cmd_dataset(ctx, "");
      const Twin twin = cmd_train(ctx, "", sweep);
      cmd_optimize(ctx, "", "");
      const ValidationReport v = cmd_validate(ctx, "", "");
      const json ablation = cmd_ablate(ctx);
      cmd_appendix_a(ctx, fn_max, fn_step, snr_min, snr_max, snr_step);
      ctx.write_json(ctx.file("report.json"),
                     {{"scenario", ctx.spec.scenario_id},
                      {"config", ctx.spec.to_json()},
                      {"validation_mae_mean_db", twin.validation.mean_db},
                      {"validation", {{"twin_capacity_bps", v.twin_capacity_bps},
                                      {"simulator_capacity_bps", v.simulator_capacity_bps},
                                      {"relative_error", v.relative_error}}},
                      {"ablation", ablation}});
    }
    ctx.finish();
  } catch (const ConstraintViolation& e) {
    print_error(command, e.what(), "constraint_violation");
    return 3;
  } catch (const std::invalid_argument& e) {
    print_error(command, e.what(), "invalid_argument");
    return 1;
  } catch (const std::exception& e) {
    print_error(command, e.what(), "runtime_error");
    return 1;
  }
  return 0;
}
