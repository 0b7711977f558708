#include "cli.hpp"

#include "tasc/errors.hpp"
#include "tasc/evaluation.hpp"
#include "tasc/log.hpp"
#include "tasc/random.hpp"
#include "tasc/serialize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#ifndef TASC_VERSION
#define TASC_VERSION "0.0.0"
#endif

namespace tasc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Provenance stamped into every artifact.
struct Meta {
  std::string command;
  std::uint64_t seed = 0;

  std::string csv_preamble() const {
    return "# tool: tasc " TASC_VERSION "\n# command: " + command + "\n# seed: " +
           std::to_string(seed) + "\n";
  }
  json to_json() const {
    return {{"tool", "tasc"}, {"version", TASC_VERSION}, {"command", command}, {"seed", seed}};
  }
};

// argv[0] is reduced to its file name so artifacts do not depend on the
// install location.
std::string join_command(const std::vector<std::string>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string a = i == 0 ? fs::path(args[0]).filename().string() : args[i];
    if (!out.empty()) out += ' ';
    if (a.find_first_of(" \t\"'") == std::string::npos && !a.empty()) {
      out += a;
    } else {
      out += '"';
      for (char c : a) out += c == '"' ? std::string("\\\"") : std::string(1, c);
      out += '"';
    }
  }
  return out;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

// Attaches provenance to a JSON document produced by the library.
std::string with_meta(const std::string& doc, const Meta& meta) {
  json j = json::parse(doc);
  j["meta"] = meta.to_json();
  return j.dump(2) + "\n";
}

enum class Format { Csv, Json };

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

struct PanelArgs {
  std::string input;
  long t0 = -1;
  long target_row = 0;
  bool no_header = false;
  std::string sidecar;

  void add_to(CLI::App* app) {
    app->add_option("--input", input, "Panel CSV (units by time)")->required();
    app->add_option("--t0", t0, "Number of pre-intervention columns");
    app->add_option("--target-row", target_row, "Data row of the treated unit");
    app->add_flag("--no-header", no_header, "CSV has no header row or unit-label column");
    app->add_option("--sidecar", sidecar, "JSON with n_units, t_total, t0, target_label");
  }

  PanelData load() const {
    if (!fs::exists(input)) throw ConfigError("input file '" + input + "' does not exist");
    std::optional<PanelSidecar> side;
    if (!sidecar.empty()) side = parse_sidecar(read_file(sidecar));
    CsvOptions opts;
    opts.has_header = !no_header;
    opts.target_row = target_row;
    opts.t0 = t0 >= 0 ? t0 : side ? side->t0 : -1;
    if (opts.t0 < 0) throw ConfigError("--t0 is required unless a sidecar provides it");
    PanelData panel = load_csv_file(input, opts);
    if (side) panel = apply_sidecar(panel, *side);
    return panel;
  }
};

MethodSpec spec_from_json(const json& j, MethodSpec base) {
  static const std::set<std::string> allowed{"method", "label", "em", "rsc", "level", "center",
                                             "ci_variance"};
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("method config: unknown key '" + key + "'");
  try {
    if (j.contains("method")) base.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("label")) base.label = j.at("label").get<std::string>();
    if (j.contains("em")) base.em = em_config_from_json(j.at("em").dump(), base.em);
    if (j.contains("rsc")) base.rsc = rsc_config_from_json(j.at("rsc").dump(), base.rsc);
    if (j.contains("level")) base.level = j.at("level").get<double>();
    if (j.contains("center")) base.center = j.at("center").get<bool>();
    if (j.contains("ci_variance")) {
      const auto v = j.at("ci_variance").get<std::string>();
      if (v == "predictive")
        base.ci_variance = CiVariance::Predictive;
      else if (v == "signal")
        base.ci_variance = CiVariance::SignalOnly;
      else
        throw ConfigError("ci_variance must be 'predictive' or 'signal'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("method config: ") + e.what());
  }
  return base;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// Estimator flags shared by infer, placebo, permute and bench. Flags
// override values from --config.
struct MethodArgs {
  std::string method = "tasc";
  std::string config;
  std::optional<long> d;
  std::optional<int> n1;
  std::optional<int> restarts;
  std::optional<double> lambda;
  bool lambda_cv = false;
  std::optional<double> level;
  bool center = false;

  void add_to(CLI::App* app, bool with_method = true) {
    if (with_method)
      app->add_option("--method", method, "Estimator: tasc, sc or rsc")
          ->check(CLI::IsMember({"tasc", "sc", "rsc"}));
    app->add_option("--d", d, "Latent dimension (tasc) or singular values kept (rsc)");
    app->add_option("--n1", n1, "Maximum EM iterations");
    app->add_option("--restarts", restarts, "EM random restarts");
    app->add_option("--lambda", lambda, "RSC ridge coefficient");
    app->add_flag("--lambda-cv", lambda_cv, "Choose the RSC ridge coefficient on 1e-1..1e6");
    app->add_option("--level", level, "Confidence level for TASC bands");
    app->add_flag("--center", center, "Subtract the donor mean trajectory before fitting");
  }

  MethodSpec base_spec() const {
    MethodSpec spec;
    if (!config.empty())
      spec = spec_from_json(parse_json(read_file(config), "method config"), spec);
    return spec;
  }

  MethodSpec apply(MethodSpec spec) const {
    if (d) spec.em.d = spec.rsc.d = *d;
    if (n1) spec.em.n_iters = *n1;
    if (restarts) spec.em.n_restarts = *restarts;
    if (lambda) spec.rsc.lambda = *lambda;
    if (lambda_cv) spec.rsc.cv_grid = default_lambda_grid();
    if (level) spec.level = *level;
    if (center) spec.center = true;
    spec.em.validate();
    return spec;
  }

  MethodSpec spec(bool method_given) const {
    MethodSpec s = base_spec();
    if (method_given || config.empty()) s.method = parse_method(method);
    return apply(s);
  }
};

std::string counterfactual_csv(const PanelData& panel, const MethodPrediction& pred,
                               const Meta& meta) {
  std::ostringstream out;
  out << meta.csv_preamble() << "t,label,y_hat,ci_lower,ci_upper,observed,effect\n";
  const VectorXd obs = panel.target_post();
  for (Index j = 0; j < pred.post.size(); ++j) {
    const Index t = panel.t0() + j;
    out << t + 1 << ',' << panel.time_labels()[static_cast<std::size_t>(t)] << ','
        << num(pred.post(j)) << ',';
    if (pred.tasc) out << num(pred.tasc->ci_lower(j)) << ',' << num(pred.tasc->ci_upper(j));
    else out << ',';
    out << ',' << num(obs(j)) << ',' << num(obs(j) - pred.post(j)) << '\n';
  }
  return out.str();
}

json counterfactual_json(const PanelData& panel, const MethodPrediction& pred, const Meta& meta,
                         const std::string& method) {
  json rows = json::array();
  const VectorXd obs = panel.target_post();
  auto opt = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (Index j = 0; j < pred.post.size(); ++j) {
    const Index t = panel.t0() + j;
    json r = {{"t", t + 1},
              {"label", panel.time_labels()[static_cast<std::size_t>(t)]},
              {"y_hat", pred.post(j)},
              {"observed", opt(obs(j))},
              {"effect", opt(obs(j) - pred.post(j))}};
    if (pred.tasc) {
      r["ci_lower"] = pred.tasc->ci_lower(j);
      r["ci_upper"] = pred.tasc->ci_upper(j);
    }
    rows.push_back(std::move(r));
  }
  return {{"meta", meta.to_json()}, {"method", method}, {"target", panel.unit_labels()[0]},
          {"t0", panel.t0()}, {"rows", std::move(rows)}};
}

int cmd_infer(const PanelArgs& pa, const MethodArgs& ma, bool method_given, const std::string& output,
              const std::string& format, const Meta& meta, std::ostream& out) {
  const Format fmt = parse_format(format);
  const PanelData panel = pa.load();
  const MethodSpec spec = ma.spec(method_given);
  const auto pred = fit_predict(panel, spec, meta.seed);

  const fs::path dir(output);
  if (fmt == Format::Csv)
    write_file(dir / "counterfactual.csv", counterfactual_csv(panel, pred, meta));
  else
    write_file(dir / "counterfactual.json",
               counterfactual_json(panel, pred, meta, spec.display_name()).dump(2) + "\n");
  if (pred.weights) write_file(dir / "weights.json", with_meta(weights_to_json(*pred.weights), meta));
  if (pred.theta)
    write_file(dir / "theta.json", with_meta(theta_to_json(*pred.theta, pred.loglik_trace), meta));
  out << "wrote " << pred.post.size() << " counterfactual rows to " << dir.string() << "\n";
  return kOk;
}

std::string matrix_csv(const MatrixXd& m, const std::vector<std::string>& units, const Meta& meta) {
  std::ostringstream out;
  out << meta.csv_preamble() << "unit";
  for (Index j = 0; j < m.cols(); ++j) out << ",t" << j + 1;
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    out << units[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) out << ',' << num(m(i, j));
    out << '\n';
  }
  return out.str();
}

int cmd_simulate(const std::string& config_path, const SimulationConfig& flags_cfg,
                 const CLI::App* sub, bool seed_given, const std::string& output, const Meta& meta,
                 std::ostream& out) {
  SimulationConfig cfg;
  if (!config_path.empty()) cfg = simulation_config_from_json(read_file(config_path), cfg);
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--n-units")) cfg.n_units = flags_cfg.n_units;
  if (given("--d")) cfg.d_true = flags_cfg.d_true;
  if (given("--t-total")) cfg.t_total = flags_cfg.t_total;
  if (given("--t0")) cfg.t0 = flags_cfg.t0;
  if (given("--q-range")) cfg.a_q = flags_cfg.a_q, cfg.b_q = flags_cfg.b_q;
  if (given("--r-range")) cfg.a_r = flags_cfg.a_r, cfg.b_r = flags_cfg.b_r;
  if (given("--spectral-radius")) cfg.spectral_radius = flags_cfg.spectral_radius;
  if (seed_given) cfg.seed = meta.seed;
  cfg.validate();
  Meta m = meta;
  m.seed = cfg.seed;

  const auto sim = simulate(cfg);
  const fs::path dir(output);
  std::vector<std::string> units = sim.panel.unit_labels();
  write_file(dir / "panel.csv", matrix_csv(sim.panel.values(), units, m));
  write_file(dir / "signal.csv", matrix_csv(sim.signal, units, m));
  write_file(dir / "theta.json", with_meta(theta_to_json(sim.theta_true), m));
  write_file(dir / "config.json", with_meta(simulation_config_to_json(cfg), m));
  PanelSidecar side{sim.panel.n_units(), sim.panel.n_times(), sim.panel.t0(), units[0]};
  write_file(dir / "sidecar.json", with_meta(sidecar_to_json(side), m));
  const auto snr = snr_stats(sim);
  out << "mean |signal| " << snr.mean_abs_signal << ", mean |noise| " << snr.mean_abs_noise << "\n";
  return kOk;
}

int cmd_placebo(const PanelArgs& pa, const MethodArgs& ma, bool method_given,
                std::vector<double> ratios, const std::string& output, const Meta& meta,
                std::ostream& out) {
  if (ratios.empty()) ratios = {10.0, 5.0, 2.0};
  for (double r : ratios)
    if (!(r > 0.0)) throw ConfigError("--ratio values must be > 0");
  const PanelData panel = pa.load();
  const MethodSpec spec = ma.spec(method_given);

  const auto target = fit_predict(panel, spec, derive_seed(meta.seed, {0ULL}));
  const double target_rmse = rmse(target.pre_fit, panel.target_pre());
  const double target_mse = target_rmse * target_rmse;
  const auto res = placebo_suite(panel, spec, meta.seed);

  const fs::path dir(output);
  std::ostringstream units;
  units << meta.csv_preamble() << "unit,role,rmse_pre,rmse_post,pre_mse_ratio,error\n";
  units << panel.unit_labels()[0] << ",target," << num(target_rmse) << ','
        << (panel.target_post_missing() ? "" : num(rmse(target.post, panel.target_post())))
        << ",1,\n";
  for (const auto& u : res.per_unit) {
    units << u.label << ",placebo," << num(u.rmse_pre) << ',' << num(u.rmse_post) << ','
          << (u.ok() && target_mse > 0.0 ? num(u.rmse_pre * u.rmse_pre / target_mse) : "") << ','
          << (u.ok() ? "" : "\"" + u.error + "\"") << '\n';
  }
  write_file(dir / "placebo.csv", units.str());

  std::ostringstream gaps;
  gaps << meta.csv_preamble() << "unit,t,gap\n";
  for (const auto& u : res.per_unit)
    for (Index t = 0; t < u.gap.size(); ++t) gaps << u.label << ',' << t + 1 << ',' << num(u.gap(t)) << '\n';
  write_file(dir / "gaps.csv", gaps.str());

  std::ostringstream kept;
  kept << meta.csv_preamble() << "ratio,unit\n";
  for (double r : ratios)
    for (const auto& label : threshold_filter(res, target_mse, r)) kept << num(r) << ',' << label << '\n';
  write_file(dir / "thresholds.csv", kept.str());

  int failed = 0;
  for (const auto& u : res.per_unit) failed += u.ok() ? 0 : 1;
  out << res.per_unit.size() << " placebo units, " << failed << " failed; target pre-MSE "
      << target_mse << "\n";
  return kOk;
}

int cmd_permute(const PanelArgs& pa, const std::string& sim_config, const MethodArgs& ma,
                bool method_given, int shuffles, int replicates, bool identity,
                const std::string& truth_name, const std::string& output, const std::string& format,
                const Meta& meta, std::ostream& out) {
  const Format fmt = parse_format(format);
  if (pa.input.empty() == sim_config.empty())
    throw ConfigError("give exactly one of --input or --sim-config");
  if (replicates < 1) throw ConfigError("--replicates must be >= 1");
  if (truth_name != "signal" && truth_name != "observed")
    throw ConfigError("--truth must be 'signal' or 'observed'");
  const MethodSpec spec = ma.spec(method_given);

  std::vector<PermutationResult> results;
  if (!pa.input.empty()) {
    results.push_back(permutation_stress_test(pa.load(), spec, shuffles, meta.seed, identity));
  } else {
    const SimulationConfig base = simulation_config_from_json(read_file(sim_config));
    const Truth truth = truth_name == "signal" ? Truth::Signal : Truth::Observed;
    for (int r = 0; r < replicates; ++r) {
      SimulationConfig c = base;
      if (replicates > 1) c.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(r)});
      results.push_back(permutation_stress_test(
          c, spec, shuffles, derive_seed(meta.seed, {static_cast<std::uint64_t>(r)}), identity, truth));
    }
  }

  double ordered = 0.0, shuffled = 0.0;
  int n_shuffled = 0;
  for (const auto& r : results) {
    ordered += r.rmse_ordered;
    for (double s : r.rmse_shuffled)
      if (std::isfinite(s)) shuffled += s, ++n_shuffled;
  }
  const double mean_ordered = ordered / static_cast<double>(results.size());
  const double ratio = n_shuffled ? shuffled / n_shuffled / mean_ordered
                                  : std::numeric_limits<double>::quiet_NaN();

  if (fmt == Format::Csv) {
    std::ostringstream csv;
    csv << meta.csv_preamble() << "replicate,kind,index,rmse,error\n";
    for (std::size_t r = 0; r < results.size(); ++r) {
      csv << r << ",ordered,," << num(results[r].rmse_ordered) << ",\n";
      for (std::size_t s = 0; s < results[r].rmse_shuffled.size(); ++s)
        csv << r << ",shuffled," << s << ',' << num(results[r].rmse_shuffled[s]) << ','
            << (results[r].errors[s].empty() ? "" : "\"" + results[r].errors[s] + "\"") << '\n';
    }
    csv << ",ratio,," << num(ratio) << ",\n";
    write_file(output, csv.str());
  } else {
    json reps = json::array();
    for (const auto& r : results)
      reps.push_back({{"rmse_ordered", r.rmse_ordered}, {"rmse_shuffled", r.rmse_shuffled},
                      {"errors", r.errors}});
    json j = {{"meta", meta.to_json()},
              {"method", spec.display_name()},
              {"replicates", std::move(reps)},
              {"mean_ratio", std::isfinite(ratio) ? json(ratio) : json(nullptr)}};
    write_file(output, j.dump(2) + "\n");
  }
  out << "mean shuffled / ordered RMSE: " << ratio << "\n";
  return kOk;
}

int cmd_bench(const std::string& matrix_path, const std::string& methods_csv, const MethodArgs& ma,
              std::optional<int> replicates, Index buckets, int threads, const std::string& output,
              const std::string& format, const Meta& meta, std::ostream& out) {
  const Format fmt = parse_format(format);
  const json doc = parse_json(read_file(matrix_path), "regime matrix");
  if (!doc.is_object() || !doc.contains("regimes"))
    throw ConfigError("regime matrix needs a 'regimes' array");
  for (const auto& [key, value] : doc.items())
    if (key != "regimes" && key != "methods" && key != "replicates" && key != "truth")
      throw ConfigError("regime matrix: unknown key '" + key + "'");

  std::vector<Regime> regimes;
  for (const auto& r : doc.at("regimes")) {
    Regime g;
    g.name = r.value("name", "regime" + std::to_string(regimes.size()));
    if (r.contains("sim")) g.sim = simulation_config_from_json(r.at("sim").dump());
    regimes.push_back(std::move(g));
  }
  if (regimes.empty()) throw ConfigError("regime matrix has no regimes");

  std::vector<MethodSpec> methods;
  if (!methods_csv.empty()) {
    std::stringstream ss(methods_csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
      MethodSpec s = ma.base_spec();
      s.method = parse_method(name);
      methods.push_back(ma.apply(s));
    }
  } else if (doc.contains("methods")) {
    for (const auto& m : doc.at("methods")) methods.push_back(ma.apply(spec_from_json(m, MethodSpec{})));
  }
  if (methods.empty()) throw ConfigError("no methods: use --methods or a 'methods' array");

  SweepOptions opts;
  opts.seed = meta.seed;
  opts.replicates = replicates ? *replicates : doc.value("replicates", 1);
  opts.n_buckets = buckets;
  opts.threads = threads;
  const std::string truth = doc.value("truth", std::string("signal"));
  if (truth != "signal" && truth != "observed") throw ConfigError("truth must be 'signal' or 'observed'");
  opts.truth = truth == "signal" ? Truth::Signal : Truth::Observed;

  const auto reports = method_sweep(regimes, methods, opts);
  if (fmt == Format::Csv) {
    std::ostringstream csv;
    csv << meta.csv_preamble();
    write_sweep_csv(csv, reports);
    write_file(output, csv.str());
  } else {
    json j = {{"meta", meta.to_json()}, {"reports", json::parse(sweep_to_json(reports))}};
    write_file(output, j.dump(2) + "\n");
  }
  int failed = 0;
  for (const auto& r : reports) failed += r.ok() ? 0 : 1;
  for (const auto& g : regimes) {
    out << g.name << ':';
    for (const auto& m : methods)
      out << ' ' << m.display_name() << '=' << median_rmse(reports, g.name, m.display_name());
    out << '\n';
  }
  out << reports.size() << " rows, " << failed << " failed\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-aware synthetic control and baselines"};
  app.set_version_flag("--version", "tasc " TASC_VERSION);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int verbosity = 0;
  bool quiet = false;
  std::string output;
  std::string format = "csv";
  app.add_option("--seed", seed, "Root seed for every random choice")->capture_default_str();
  app.add_flag("-v,--verbose", verbosity, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Only errors");

  auto add_output = [&](CLI::App* sub, const char* what) {
    sub->add_option("--output", output, what)->required();
    sub->add_option("--seed", seed, "Root seed for every random choice");
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  };

  PanelArgs panel_args;
  MethodArgs method_args;

  auto* infer = app.add_subcommand("infer", "Fit one estimator and write the counterfactual");
  panel_args.add_to(infer);
  method_args.add_to(infer);
  infer->add_option("--config", method_args.config, "Method config JSON");
  add_output(infer, "Output directory");
  add_format(infer);

  std::string sim_config;
  SimulationConfig sim_flags;
  std::vector<double> q_range, r_range;
  auto* simulate_cmd = app.add_subcommand("simulate", "Draw a synthetic panel");
  simulate_cmd->add_option("--config", sim_config, "Simulation config JSON");
  simulate_cmd->add_option("--n-units", sim_flags.n_units, "Rows N, target included");
  simulate_cmd->add_option("--d", sim_flags.d_true, "True latent dimension");
  simulate_cmd->add_option("--t-total", sim_flags.t_total, "Columns T");
  simulate_cmd->add_option("--t0", sim_flags.t0, "Pre-intervention columns");
  simulate_cmd->add_option("--q-range", q_range, "a_q b_q")->expected(2);
  simulate_cmd->add_option("--r-range", r_range, "a_r b_r")->expected(2);
  simulate_cmd->add_option("--spectral-radius", sim_flags.spectral_radius, "Spectral radius of A");
  add_output(simulate_cmd, "Output directory");

  std::vector<double> ratios;
  auto* placebo = app.add_subcommand("placebo", "Placebo fits with each donor as the target");
  PanelArgs placebo_panel;
  MethodArgs placebo_method;
  placebo_panel.add_to(placebo);
  placebo_method.add_to(placebo);
  placebo->add_option("--config", placebo_method.config, "Method config JSON");
  placebo->add_option("--ratio", ratios, "Pre-MSE ratio thresholds (default 10 5 2)");
  add_output(placebo, "Output directory");

  PanelArgs permute_panel;
  MethodArgs permute_method;
  int shuffles = 20;
  int replicates = 1;
  bool identity = false;
  std::string truth = "signal";
  std::string permute_sim;
  auto* permute = app.add_subcommand("permute", "Shuffle pre and post columns and refit");
  permute->add_option("--input", permute_panel.input, "Panel CSV");
  permute->add_option("--t0", permute_panel.t0, "Number of pre-intervention columns");
  permute->add_option("--target-row", permute_panel.target_row, "Data row of the treated unit");
  permute->add_flag("--no-header", permute_panel.no_header, "CSV has no header");
  permute->add_option("--sidecar", permute_panel.sidecar, "Panel sidecar JSON");
  permute->add_option("--sim-config", permute_sim, "Simulation config JSON instead of a panel");
  permute->add_option("--shuffles", shuffles, "Shuffled copies per panel")->check(CLI::PositiveNumber);
  permute->add_option("--replicates", replicates, "Simulated panels (with --sim-config)");
  permute->add_flag("--identity", identity, "Use identity permutations");
  permute->add_option("--truth", truth, "Simulated scoring target: signal or observed");
  permute_method.add_to(permute);
  permute->add_option("--config", permute_method.config, "Method config JSON");
  add_output(permute, "Output file");
  add_format(permute);

  std::string matrix;
  std::string methods;
  std::optional<int> bench_reps;
  Index buckets = 5;
  int threads = 1;
  MethodArgs bench_method;
  auto* bench = app.add_subcommand("bench", "Run a regime by method sweep");
  bench->add_option("--config", matrix, "Regime matrix JSON")->required();
  bench->add_option("--methods", methods, "Comma list overriding the matrix's methods");
  bench->add_option("--replicates", bench_reps, "Replicates per regime");
  bench->add_option("--buckets", buckets, "Horizon buckets")->check(CLI::PositiveNumber);
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  bench_method.add_to(bench, false);
  add_output(bench, "Output file");
  add_format(bench);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  set_log_level(quiet ? LogLevel::Quiet
                      : verbosity >= 2 ? LogLevel::Debug
                      : verbosity == 1 ? LogLevel::Info
                                       : LogLevel::Warn);
  Meta meta;
  meta.command = join_command(args);
  meta.seed = seed;

  try {
    if (*infer)
      return cmd_infer(panel_args, method_args, infer->count("--method") > 0, output, format, meta, out);
    if (*simulate_cmd) {
      if (!q_range.empty()) sim_flags.a_q = q_range[0], sim_flags.b_q = q_range[1];
      if (!r_range.empty()) sim_flags.a_r = r_range[0], sim_flags.b_r = r_range[1];
      const bool seed_given = app.count("--seed") + simulate_cmd->count("--seed") > 0;
      return cmd_simulate(sim_config, sim_flags, simulate_cmd, seed_given, output, meta, out);
    }
    if (*placebo)
      return cmd_placebo(placebo_panel, placebo_method, placebo->count("--method") > 0, ratios,
                         output, meta, out);
    if (*permute)
      return cmd_permute(permute_panel, permute_sim, permute_method, permute->count("--method") > 0,
                         shuffles, replicates, identity, truth, output, format, meta, out);
    if (*bench)
      return cmd_bench(matrix, methods, bench_method, bench_reps, buckets, threads, output, format,
                       meta, out);
  } catch (const ParseError& e) {
    err << "tasc: parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "tasc: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "tasc: numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "tasc: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace tasc::cli
