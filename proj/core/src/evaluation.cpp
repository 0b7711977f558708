#include "tasc/evaluation.hpp"

#include "tasc/errors.hpp"
#include "tasc/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

namespace tasc {

namespace {

std::vector<Index> random_permutation(Index n, Rng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::vector<Index> identity_permutation(Index n) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  return p;
}

// Placebo panel: donor j becomes the target, the real target row is dropped.
PanelData placebo_panel(const PanelData& panel, Index j) {
  const Index n = panel.n_donors();
  MatrixXd v(n, panel.n_times());
  std::vector<std::string> labels;
  v.row(0) = panel.values().row(j);
  labels.push_back(panel.unit_labels()[static_cast<std::size_t>(j)]);
  Index r = 1;
  for (Index i = 1; i < panel.n_units(); ++i) {
    if (i == j) continue;
    v.row(r++) = panel.values().row(i);
    labels.push_back(panel.unit_labels()[static_cast<std::size_t>(i)]);
  }
  return PanelData(std::move(v), panel.t0(), std::move(labels), panel.time_labels());
}

template <typename Task>
void run_parallel(std::size_t n_tasks, int threads, Task&& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n_tasks < 2) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n_tasks); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n_tasks; i = next++) task(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Tasc: return "tasc";
    case Method::Sc: return "sc";
    case Method::Rsc: return "rsc";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "tasc") return Method::Tasc;
  if (name == "sc") return Method::Sc;
  if (name == "rsc") return Method::Rsc;
  throw ConfigError("unknown method '" + name + "' (expected tasc, sc or rsc)");
}

MethodPrediction fit_predict(const PanelData& panel, const MethodSpec& spec, std::uint64_t seed) {
  std::optional<CenteredPanel> centered;
  if (spec.center) centered = mean_center(panel, CenteringBasis::DonorsOnly);
  const PanelData& data = centered ? centered->panel : panel;

  MethodPrediction out;
  switch (spec.method) {
    case Method::Tasc: {
      EmConfig em = spec.em;
      em.seed = seed;
      auto res = tasc_infer(data, em, spec.level, spec.ci_variance);
      out.post = res.estimate.y_hat;
      out.pre_fit = res.estimate.fitted_pre;
      out.loglik_trace = res.fit.loglik_trace;
      out.theta = std::move(res.theta);
      out.tasc = std::move(res.estimate);
      break;
    }
    case Method::Sc: {
      auto w = sc_fit(data.target_pre(), data.donors_pre(), spec.sc);
      out.post = sc_predict(w, data.donors_post());
      out.pre_fit = sc_predict(w, data.donors_pre());
      out.weights = std::move(w);
      break;
    }
    case Method::Rsc: {
      auto fit = rsc_fit(data, spec.rsc);
      out.post = rsc_predict(fit.weights, fit.denoised.rightCols(data.n_post()));
      out.pre_fit = rsc_predict(fit.weights, fit.denoised.leftCols(data.t0()));
      out.weights = std::move(fit.weights);
      break;
    }
  }
  if (centered) {
    const Index t0 = panel.t0();
    const VectorXd shift = centered->mean_trajectory.tail(panel.n_post());
    out.post += shift;
    out.pre_fit += centered->mean_trajectory.head(t0);
    if (out.tasc) {
      out.tasc->y_hat += shift;
      out.tasc->ci_lower += shift;
      out.tasc->ci_upper += shift;
      out.tasc->fitted_pre += centered->mean_trajectory.head(t0);
    }
  }
  return out;
}

double rmse(const VectorXd& pred, const VectorXd& truth) {
  if (pred.size() != truth.size()) throw ConfigError("rmse: length mismatch");
  if (pred.size() == 0) throw ConfigError("rmse: empty input");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

std::vector<BucketRmse> rmse_by_horizon(const VectorXd& pred, const VectorXd& truth,
                                        Index n_buckets) {
  if (pred.size() != truth.size()) throw ConfigError("rmse_by_horizon: length mismatch");
  if (n_buckets < 1 || n_buckets > pred.size())
    throw ConfigError("n_buckets must lie in [1, horizon length]");
  const Index width = pred.size() / n_buckets;
  std::vector<BucketRmse> out;
  for (Index b = 0; b < n_buckets; ++b) {
    const Index begin = b * width;
    const Index end = b + 1 == n_buckets ? pred.size() : begin + width;
    out.push_back({begin, end, rmse(pred.segment(begin, end - begin), truth.segment(begin, end - begin))});
  }
  return out;
}

PlaceboResult placebo_suite(const PanelData& panel, const MethodSpec& spec, std::uint64_t seed) {
  if (panel.n_donors() < 2) throw ConfigError("placebo tests need at least 2 donors");
  PlaceboResult out;
  for (Index j = 1; j < panel.n_units(); ++j) {
    PlaceboUnit unit;
    unit.label = panel.unit_labels()[static_cast<std::size_t>(j)];
    try {
      const PanelData pseudo = placebo_panel(panel, j);
      const auto pred = fit_predict(pseudo, spec, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
      unit.rmse_pre = rmse(pred.pre_fit, pseudo.target_pre());
      unit.rmse_post = rmse(pred.post, pseudo.target_post());
      VectorXd fitted(panel.n_times());
      fitted << pred.pre_fit, pred.post;
      unit.gap = pseudo.values().row(0).transpose() - fitted;
    } catch (const Error& e) {
      unit.error = e.what();
      unit.rmse_pre = unit.rmse_post = std::numeric_limits<double>::quiet_NaN();
    }
    out.per_unit.push_back(std::move(unit));
  }
  return out;
}

std::vector<std::string> threshold_filter(const PlaceboResult& placebo, double target_pre_mse,
                                          double ratio) {
  if (!(ratio > 0.0)) throw ConfigError("threshold ratio must be > 0");
  std::vector<std::string> kept;
  for (const auto& u : placebo.per_unit) {
    if (!u.ok()) continue;
    const double mse = u.rmse_pre * u.rmse_pre;
    if (std::isinf(ratio) || mse <= ratio * target_pre_mse) kept.push_back(u.label);
  }
  return kept;
}

double PermutationResult::mean_ratio() const {
  double sum = 0.0;
  int count = 0;
  for (double r : rmse_shuffled)
    if (std::isfinite(r)) {
      sum += r;
      ++count;
    }
  if (count == 0 || rmse_ordered == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sum / count / rmse_ordered;
}

namespace {

VectorXd target_truth(const SimulatedPanel& sim, Truth truth) {
  return truth == Truth::Signal ? VectorXd(sim.signal.row(0).transpose())
                                : VectorXd(sim.panel.values().row(0).transpose());
}

// truth_post is the post-intervention path the predictions are scored
// against; each shuffle permutes it together with the panel.
PermutationResult stress_test(const PanelData& panel, const VectorXd& truth_post,
                              const MethodSpec& spec, int n_shuffles, std::uint64_t seed,
                              bool identity_only) {
  if (n_shuffles < 1) throw ConfigError("n_shuffles must be >= 1");

  MethodSpec fixed = spec;
  if (spec.method == Method::Rsc && !spec.rsc.cv_grid.empty()) {
    fixed.rsc.lambda = rsc_fit(panel, spec.rsc).weights.lambda;
    fixed.rsc.cv_grid.clear();
  }
  const std::uint64_t fit_seed = derive_seed(seed, {0xF17ULL});

  PermutationResult out;
  out.rmse_ordered = rmse(fit_predict(panel, fixed, fit_seed).post, truth_post);
  for (int s = 0; s < n_shuffles; ++s) {
    Rng rng(derive_seed(seed, {0x5415ULL, static_cast<std::uint64_t>(s)}));
    const auto perm_pre =
        identity_only ? identity_permutation(panel.t0()) : random_permutation(panel.t0(), rng);
    const auto perm_post =
        identity_only ? identity_permutation(panel.n_post()) : random_permutation(panel.n_post(), rng);
    try {
      const PanelData shuffled = permute_columns(panel, perm_pre, perm_post);
      VectorXd truth(truth_post.size());
      for (Index j = 0; j < truth.size(); ++j) truth(j) = truth_post(perm_post[j]);
      out.rmse_shuffled.push_back(rmse(fit_predict(shuffled, fixed, fit_seed).post, truth));
      out.errors.emplace_back();
    } catch (const Error& e) {
      out.rmse_shuffled.push_back(std::numeric_limits<double>::quiet_NaN());
      out.errors.emplace_back("shuffle " + std::to_string(s) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

PermutationResult permutation_stress_test(const PanelData& panel, const MethodSpec& spec,
                                          int n_shuffles, std::uint64_t seed, bool identity_only) {
  if (panel.target_post_missing())
    throw ConfigError("permutation stress test needs observed target post values");
  return stress_test(panel, panel.target_post(), spec, n_shuffles, seed, identity_only);
}

PermutationResult permutation_stress_test(const SimulationConfig& config, const MethodSpec& spec,
                                          int n_shuffles, std::uint64_t seed, bool identity_only,
                                          Truth truth) {
  const SimulatedPanel sim = simulate(config);
  return stress_test(sim.panel, target_truth(sim, truth).tail(sim.panel.n_post()), spec, n_shuffles,
                     seed, identity_only);
}

std::vector<EvalReport> method_sweep(const std::vector<Regime>& regimes,
                                     const std::vector<MethodSpec>& methods,
                                     const SweepOptions& options) {
  if (options.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (methods.empty()) throw ConfigError("method_sweep needs at least one method");
  const std::size_t n_reg = regimes.size();
  const auto n_rep = static_cast<std::size_t>(options.replicates);
  const std::size_t n_meth = methods.size();
  std::vector<EvalReport> reports(n_reg * n_rep * n_meth);

  run_parallel(n_reg * n_rep, options.threads, [&](std::size_t cell) {
    const std::size_t r = cell / n_rep;
    const std::size_t k = cell % n_rep;
    SimulationConfig sim = regimes[r].sim;
    sim.seed = derive_seed(options.seed, {r, k});
    std::optional<SimulatedPanel> data;
    std::string sim_error;
    try {
      data = simulate(sim);
    } catch (const Error& e) {
      sim_error = e.what();
    }
    for (std::size_t m = 0; m < n_meth; ++m) {
      EvalReport& rep = reports[cell * n_meth + m];
      rep.regime = regimes[r].name;
      rep.method = methods[m].display_name();
      rep.replicate = static_cast<int>(k);
      rep.seed = sim.seed;
      if (!data) {
        rep.error = "simulation failed: " + sim_error;
        continue;
      }
      try {
        const auto& panel = data->panel;
        const auto pred = fit_predict(panel, methods[m], derive_seed(options.seed, {r, k, m, 1}));
        const VectorXd full = target_truth(*data, options.truth);
        const VectorXd truth = full.tail(panel.n_post());
        rep.rmse_post = rmse(pred.post, truth);
        rep.rmse_pre = rmse(pred.pre_fit, full.head(panel.t0()));
        rep.rmse_by_bucket =
            rmse_by_horizon(pred.post, truth, std::min<Index>(options.n_buckets, truth.size()));
        if (pred.tasc) rep.ci_width = confidence_width(*pred.tasc);
      } catch (const Error& e) {
        rep.error = e.what();
        rep.rmse_post = rep.rmse_pre = std::numeric_limits<double>::quiet_NaN();
      }
    }
  });
  return reports;
}

void write_sweep_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "regime,method,replicate,metric,value\n";
  auto row = [&](const EvalReport& r, const std::string& metric, double value) {
    out << r.regime << ',' << r.method << ',' << r.replicate << ',' << metric << ',';
    if (std::isfinite(value)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      out << buf;
    } else {
      out << "nan";
    }
    out << '\n';
  };
  for (const auto& r : reports) {
    if (!r.ok()) {
      row(r, "failed", 1.0);
      continue;
    }
    row(r, "rmse_post", r.rmse_post);
    row(r, "rmse_pre", r.rmse_pre);
    for (std::size_t b = 0; b < r.rmse_by_bucket.size(); ++b)
      row(r, "rmse_bucket_" + std::to_string(b + 1), r.rmse_by_bucket[b].rmse);
    if (r.ci_width) row(r, "ci_width", *r.ci_width);
  }
}

std::string sweep_to_json(const std::vector<EvalReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j = {{"regime", r.regime},
                        {"method", r.method},
                        {"replicate", r.replicate},
                        {"seed", r.seed}};
    if (!r.ok()) {
      j["error"] = r.error;
    } else {
      j["rmse_post"] = r.rmse_post;
      j["rmse_pre"] = r.rmse_pre;
      nlohmann::json buckets = nlohmann::json::array();
      for (const auto& b : r.rmse_by_bucket)
        buckets.push_back({{"begin", b.begin}, {"end", b.end}, {"rmse", b.rmse}});
      j["rmse_by_bucket"] = buckets;
      if (r.ci_width) j["ci_width"] = *r.ci_width;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_rmse(const std::vector<EvalReport>& reports, const std::string& regime,
                   const std::string& method) {
  std::vector<double> v;
  for (const auto& r : reports)
    if (r.ok() && r.regime == regime && r.method == method) v.push_back(r.rmse_post);
  return median(std::move(v));
}

}  // namespace tasc
