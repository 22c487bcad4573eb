// qcorr_cli: simulate, analyze, fit-losses, reproduce.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qcorr/qcorr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcorr;

namespace {

enum Exit { kOk = 0, kToleranceFailure = 1, kUsage = 2, kIo = 3, kFit = 4 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  unsigned jobs = 1;
  std::string tolerance_profile = "nominal";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "override the base seed");
  cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tolerance-profile", c.tolerance_profile, "nominal, strict or relaxed")->capture_default_str();
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  if (c.seed) cfg.acquisition.seed = *c.seed;
  cfg.validate();
  return cfg;
}

Provenance provenance_for(const ExperimentConfig& cfg, const std::string& command,
                          std::vector<std::string> inputs = {}) {
  Provenance p;
  p.command = command;
  p.config = config_json(cfg);
  p.config_hash = config_hash(cfg);
  p.seed = cfg.acquisition.seed;
  p.inputs = std::move(inputs);
  return p;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& format) {
  const auto cfg = load(c);
  const auto state = cfg.noise.state();
  const auto runs = cfg.runs == 1 ? std::vector<AcquisitionSpec>{cfg.acquisition} : split_runs(cfg.acquisition, cfg.runs);
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  const std::string ext = format == "bin" ? ".bin" : ".csv";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto pair = generate(state, cfg.signals, runs[r], cfg.calibration(), c.jobs);
    const fs::path file = dir / (cfg.runs == 1 ? "channels" + ext : "channels_run" + std::to_string(r) + ext);
    if (format == "bin") {
      write_channel_binary(file, pair);
    } else {
      write_channel_csv(file, pair);
    }
    auto prov = provenance_for(cfg, "simulate");
    prov.extra = {{"injection", std::string(to_string(state.config))},
                  {"run", r},
                  {"run_seed", runs[r].seed},
                  {"samples", pair.size()},
                  {"fingerprint", pair.provenance}};
    write_provenance(file, prov);
    std::cout << "wrote " << file.string() << " (" << pair.size() << " samples, " << to_string(state.config)
              << ", seed " << runs[r].seed << ")\n";
  }
  return kOk;
}

// ---- analyze ----------------------------------------------------------------

void check_schema(const ChannelPair& p, const ExperimentConfig& cfg, const std::string& name) {
  if (p.sample_rate != cfg.acquisition.sample_rate) {
    throw ParameterError(name + ": sample_rate " + format_double(p.sample_rate) + " Hz does not match the config (" +
                         format_double(cfg.acquisition.sample_rate) + " Hz)");
  }
  if (p.size() != cfg.acquisition.sample_count()) {
    throw ParameterError(name + ": " + std::to_string(p.size()) + " samples, config expects " +
                         std::to_string(cfg.acquisition.sample_count()));
  }
}

int cmd_analyze(const Common& c, const std::vector<std::string>& data, const std::vector<std::string>& reference) {
  const auto cfg = load(c);
  if (data.empty()) throw ParameterError("analyze needs at least one --data file");
  const std::set<std::string> want(cfg.analysis.estimators.begin(), cfg.analysis.estimators.end());
  if (want.count("twb_estimate") && reference.size() != data.size()) {
    throw ParameterError("twb_estimate needs one --reference (uncorrelated) file per --data file");
  }
  const auto pairs = parallel_map(data.size(), c.jobs, [&](std::size_t i) {
    auto p = read_channels(data[i]);
    check_schema(p, cfg, data[i]);
    return p;
  });
  std::vector<ChannelPair> refs;
  if (want.count("twb_estimate")) {
    refs = parallel_map(reference.size(), c.jobs, [&](std::size_t i) {
      auto p = read_channels(reference[i]);
      check_schema(p, cfg, reference[i]);
      return p;
    });
  }
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  std::vector<std::string> inputs(data.begin(), data.end());
  inputs.insert(inputs.end(), reference.begin(), reference.end());
  const auto prov = provenance_for(cfg, "analyze", inputs);
  json summary{{"config_hash", prov.config_hash}, {"inputs", inputs}, {"results", json::object()}};
  std::vector<fs::path> written;
  auto emit = [&](const fs::path& p) {
    write_provenance(p, prov);
    written.push_back(p);
  };
  const auto& an = cfg.analysis;
  const std::size_t n_max = *std::max_element(an.n_spectra.begin(), an.n_spectra.end());

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string stem = fs::path(data[i]).stem().string();
    json& res = summary["results"][stem];
    if (want.count("covariance")) {
      const auto tr = normalized_covariance(p, an.max_lag);
      const fs::path f = dir / ("rho_" + stem + ".csv");
      write_covariance_csv(f, tr);
      emit(f);
      res["rho_peak"] = tr.peak();
      res["rho_floor"] = tr.floor(an.floor_exclude);
    }
    for (const std::string kind : {"clsd", "cpsd"}) {
      if (!want.count(kind)) continue;
      std::vector<SpectralEstimate> est;
      json floors = json::array();
      for (auto n : an.n_spectra) {
        est.push_back(kind == "clsd" ? clsd(p, n) : cpsd(p, n));
        const fs::path f = dir / (kind + "_" + stem + "_n" + std::to_string(n) + ".csv");
        write_spectrum_csv(f, est.back());
        emit(f);
        const auto bf = band_floor(est.back(), an.band);
        floors.push_back({{"n_spectra", n}, {"floor", bf.level}, {"sigma_log", bf.sigma_log}});
      }
      res[kind + "_floors"] = floors;
      if (std::set<std::size_t>(an.n_spectra.begin(), an.n_spectra.end()).size() >= 4) {
        const auto fit = floor_scaling_fit(est, an.band);
        const fs::path f = dir / (kind + "_" + stem + "_floor_fit.json");
        write_json(f, fit_json(fit));
        emit(f);
        res[kind + "_floor_exponent"] = fit.exponent;
      }
    }
    if (want.count("psd")) {
      for (int ch = 1; ch <= 2; ++ch) {
        const auto s = psd(ch == 1 ? p.x1 : p.x2, p.sample_rate, n_max);
        const fs::path f = dir / ("psd_" + stem + "_x" + std::to_string(ch) + ".csv");
        write_spectrum_csv(f, s);
        emit(f);
        res["psd_x" + std::to_string(ch) + "_floor"] = band_floor(s, an.band).level;
      }
    }
    if (want.count("psd_difference")) {
      const auto s = psd(difference(p), p.sample_rate, n_max);
      const fs::path f = dir / ("psd_diff_" + stem + ".csv");
      write_spectrum_csv(f, s);
      emit(f);
      res["psd_difference_floor"] = band_floor(s, an.band).level;
    }
    if (want.count("variance_of_difference")) {
      const auto tr = variance_of_difference(p, symmetric_lags(an.difference_lags));
      const fs::path f = dir / ("var_diff_" + stem + ".csv");
      write_difference_csv(f, tr);
      emit(f);
      res["var_diff_zero_lag"] = tr.variance[static_cast<std::size_t>(an.difference_lags)];
      res["identity_residual"] = tr.identity_residual();
    }
    if (want.count("twb_estimate")) {
      const auto e = twb_covariance_estimate(p, refs[i], an.twb_subset);
      const fs::path f = dir / ("twb_estimate_" + stem + ".json");
      write_json(f, {{"estimate", e.estimate},
                     {"subset_size", an.twb_subset},
                     {"subset_mean", e.mean},
                     {"subset_stddev", e.stddev},
                     {"snr", e.snr},
                     {"subset_estimates", e.subset_estimates}});
      emit(f);
      res["twb_estimate"] = e.estimate;
    }
  }
  if (want.count("snr")) {
    if (pairs.size() < 2) throw ParameterError("snr needs at least two --data runs");
    const auto curve = covariance_peak_snr(pairs, an.subset_sizes, an.max_lag, 1.0, 1.0, an.floor_exclude);
    write_snr_csv(dir / "snr.csv", curve);
    emit(dir / "snr.csv");
    json fit{{"free", an.subset_sizes.size() >= 2 ? fit_json(curve.fit) : json(nullptr)},
             {"sqrt", fit_json(curve.sqrt_fit)}};
    write_json(dir / "snr_fit.json", fit);
    emit(dir / "snr_fit.json");
    summary["snr_fit"] = fit;
  }
  if (want.count("twb_estimate") && pairs.size() >= 1) {
    std::vector<std::size_t> sizes;
    for (auto s : an.subset_sizes) {
      if (s >= 2 && s * 2 <= pairs[0].size()) sizes.push_back(s);
    }
    if (sizes.size() >= 2) {
      const auto curve = twb_snr_curve(pairs, refs, sizes);
      write_snr_csv(dir / "twb_snr.csv", curve);
      emit(dir / "twb_snr.csv");
      summary["twb_snr_fit"] = fit_json(curve.fit);
    }
  }
  const fs::path sp = dir / "analysis.json";
  write_json(sp, summary);
  emit(sp);
  std::cout << "wrote " << written.size() << " files to " << dir.string() << "\n";
  return kOk;
}

// ---- fit-losses -----------------------------------------------------------------

int cmd_fit_losses(const Common& c, const std::string& data, double noise, std::optional<double> db_in,
                   std::optional<double> db_out, const std::vector<double>& extra) {
  const auto cfg = load(c);
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  FringeDataset d;
  std::vector<std::string> inputs;
  if (data.empty()) {
    std::vector<double> phases;
    for (int i = 0; i < 25; ++i) phases.push_back(0.05 + (2.5 - 0.05) * i / 24.0);
    d = synthesize_fringe_data(cfg.interferometers[0], phases, noise, cfg.acquisition.seed);
    const fs::path f = dir / "fringe_data.csv";
    write_fringe_csv(f, d);
    auto prov = provenance_for(cfg, "fit-losses");
    prov.extra = {{"synthetic", true}, {"relative_noise", noise}};
    write_provenance(f, prov);
  } else {
    d = read_fringe_csv(data);
    inputs.push_back(data);
  }
  const auto fit = fit_losses(d, cfg.interferometers[0]);
  json report = loss_fit_json(fit);
  const auto budget = efficiency_budget(fit.prm_reflectivity, fit.internal_loss, extra);
  report["efficiency"] = budget.efficiency;
  report["loss"] = budget.loss();
  report["extra_losses"] = extra;
  if (db_in && db_out) {
    report["squeezing_in_db"] = *db_in;
    report["squeezing_out_db"] = *db_out;
    report["squeezing_implied_loss"] = squeezing_implied_loss(*db_in, *db_out);
  }
  const fs::path f = dir / "loss_fit.json";
  write_json(f, report);
  auto prov = provenance_for(cfg, "fit-losses", inputs);
  if (data.empty()) prov.extra = {{"synthetic", true}, {"relative_noise", noise}};
  write_provenance(f, prov);
  std::printf("R_prm = %.4f +- %.4f, L_d = %.4f +- %.4f, efficiency %.3f\n", fit.prm_reflectivity,
              fit.prm_reflectivity_sigma, fit.internal_loss, fit.internal_loss_sigma, budget.efficiency);
  return kOk;
}

// ---- reproduce ------------------------------------------------------------------

int cmd_reproduce(const Common& c, const std::vector<std::string>& figures) {
  if (!c.config_path.empty()) {
    std::cerr << "note: reproduce uses built-in per-figure configs; --config is ignored\n";
  }
  repro::Context ctx;
  ctx.dir = c.out_dir;
  ctx.jobs = c.jobs;
  ctx.seed = c.seed.value_or(42);
  ctx.tol = repro::tolerance_profile(c.tolerance_profile);
  std::vector<std::string> ids;
  for (const auto& f : figures) {
    if (f == "all") {
      ids = repro::figure_ids();
      break;
    }
    ids.push_back(f);
  }
  for (const auto& id : ids) {
    const auto& known = repro::figure_ids();
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      throw ParameterError("unknown figure '" + id + "' (expected 2a, 2b, 3a, 3b, 4, 5, 6, 7 or all)");
    }
  }
  const unsigned outer = std::max(1u, std::min<unsigned>(c.jobs, static_cast<unsigned>(ids.size())));
  repro::Context inner = ctx;
  inner.jobs = std::max(1u, c.jobs / outer);
  const auto results = parallel_map(ids.size(), outer, [&](std::size_t i) { return repro::reproduce(ids[i], inner); });
  bool all = true;
  json index = json::array();
  for (const auto& r : results) {
    all = all && r.pass;
    std::cout << "figure " << r.id << ": " << (r.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& chk : r.summary["checks"]) {
      std::cout << "  [" << (chk["pass"].get<bool>() ? "ok" : "!!") << "] " << chk["name"].get<std::string>()
                << " = " << chk["achieved"].get<double>() << " (target " << chk["target"].get<double>() << ")\n";
    }
    index.push_back({{"figure", r.id}, {"all_pass", r.pass}, {"summary", "fig" + r.id + "/summary.json"}});
  }
  write_json(fs::path(c.out_dir) / "reproduce_index.json",
             {{"tool_version", kToolVersion}, {"seed", ctx.seed}, {"tolerance_profile", ctx.tol.name},
              {"figures", index}, {"all_pass", all}});
  return all ? kOk : kToleranceFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-channel quantum-correlation simulator and analysis toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  std::string format = "csv";
  std::vector<std::string> data, reference;
  std::string fringe;
  double noise = 0.01;
  std::optional<double> db_in, db_out;
  std::vector<double> extra;
  std::vector<std::string> figures;

  auto* sim = app.add_subcommand("simulate", "generate two-channel read-out data");
  add_common(sim, common);
  sim->add_option("--format", format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}))->capture_default_str();

  auto* ana = app.add_subcommand("analyze", "run the configured estimators on data files");
  add_common(ana, common);
  ana->add_option("--data", data, "channel file(s) (.csv or .bin)")->required();
  ana->add_option("--reference", reference, "uncorrelated-injection files paired with --data (twb_estimate)");

  auto* fit = app.add_subcommand("fit-losses", "fit PRM reflectivity and internal loss to fringe data");
  add_common(fit, common);
  fit->add_option("--data", fringe, "fringe CSV (phase_rad,gain,gain_sigma,p_as_w,p_as_sigma); synthetic if omitted");
  fit->add_option("--noise", noise, "relative noise of synthetic data")->capture_default_str();
  fit->add_option("--squeezing-in-db", db_in, "generated squeezing for the implied-loss check");
  fit->add_option("--squeezing-out-db", db_out, "detected squeezing for the implied-loss check");
  fit->add_option("--extra-loss", extra, "additional loss fractions in the efficiency budget");

  auto* rep = app.add_subcommand("reproduce", "reproduce figure data with built-in configs");
  add_common(rep, common);
  rep->add_option("figure", figures, "2a 2b 3a 3b 4 5 6 7 or all")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(common, format);
    if (*ana) return cmd_analyze(common, data, reference);
    if (*fit) return cmd_fit_losses(common, fringe, noise, db_in, db_out, extra);
    if (*rep) return cmd_reproduce(common, figures);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return kFit;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
