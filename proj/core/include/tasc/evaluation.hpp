#ifndef TASC_EVALUATION_HPP
#define TASC_EVALUATION_HPP

#include "tasc/baselines.hpp"
#include "tasc/em.hpp"
#include "tasc/panel.hpp"
#include "tasc/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tasc {

enum class Method { Tasc, Sc, Rsc };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Estimator choice plus the settings each estimator reads.
struct MethodSpec {
  Method method = Method::Tasc;
  EmConfig em;
  RscConfig rsc;
  ScOptions sc;
  double level = 0.95;
  CiVariance ci_variance = CiVariance::Predictive;
  bool center = false;  // donors-only mean-centering before fitting
  std::string label;    // report name; defaults to the method name

  std::string display_name() const { return label.empty() ? method_name(method) : label; }
};

/// Output of one fit on one panel, in the panel's original units.
struct MethodPrediction {
  VectorXd post;        // counterfactual target path for t > t0
  VectorXd pre_fit;     // in-sample target fit for t <= t0
  std::optional<CounterfactualEstimate> tasc;  // TASC only
  std::optional<DonorWeights> weights;         // SC / RSC only
  std::optional<StateSpaceParams> theta;       // TASC only
  std::vector<double> loglik_trace;            // TASC only
};

/// Fits `spec` on `panel` and predicts the target's post-intervention path.
/// `seed` replaces spec.em.seed.
MethodPrediction fit_predict(const PanelData& panel, const MethodSpec& spec, std::uint64_t seed);

double rmse(const VectorXd& pred, const VectorXd& truth);

struct BucketRmse {
  Index begin = 0;  // offset into the horizon, inclusive
  Index end = 0;    // exclusive
  double rmse = 0.0;
};

/// RMSE over n_buckets contiguous equal segments; the last absorbs any remainder.
std::vector<BucketRmse> rmse_by_horizon(const VectorXd& pred, const VectorXd& truth,
                                        Index n_buckets);

struct PlaceboUnit {
  std::string label;
  double rmse_pre = 0.0;
  double rmse_post = 0.0;
  VectorXd gap;  // observed - predicted over all T columns
  std::string error;  // non-empty when the fit failed

  bool ok() const noexcept { return error.empty(); }
};

struct PlaceboResult {
  std::vector<PlaceboUnit> per_unit;
};

/// Treats each donor in turn as the target (the real target row is dropped)
/// and records its fit quality.
PlaceboResult placebo_suite(const PanelData& panel, const MethodSpec& spec, std::uint64_t seed);

/// Labels of placebo units whose pre-intervention MSE is at most
/// ratio * target_pre_mse. Failed units are never retained.
std::vector<std::string> threshold_filter(const PlaceboResult& placebo, double target_pre_mse,
                                          double ratio);

/// What simulated predictions are scored against: the observed target row
/// (signal plus noise) or its noiseless signal.
enum class Truth { Observed, Signal };

struct PermutationResult {
  double rmse_ordered = 0.0;
  std::vector<double> rmse_shuffled;
  std::vector<std::string> errors;  // per shuffle, empty on success

  double mean_ratio() const;  // mean shuffled RMSE over ordered RMSE
};

/// Fits on the panel as given and on n_shuffles copies whose pre and post
/// columns are shuffled separately. RMSE is against the equally permuted
/// observed target, or for a simulated panel against the truth chosen by
/// `truth`. RSC's lambda, when cross-validated, is chosen on the ordered panel
/// and held fixed for the shuffles.
PermutationResult permutation_stress_test(const PanelData& panel, const MethodSpec& spec,
                                          int n_shuffles, std::uint64_t seed,
                                          bool identity_only = false);
PermutationResult permutation_stress_test(const SimulationConfig& config, const MethodSpec& spec,
                                          int n_shuffles, std::uint64_t seed,
                                          bool identity_only = false, Truth truth = Truth::Signal);

struct Regime {
  std::string name;
  SimulationConfig sim;
};

struct EvalReport {
  std::string regime;
  std::string method;
  int replicate = 0;
  std::uint64_t seed = 0;
  double rmse_post = 0.0;
  double rmse_pre = 0.0;
  std::vector<BucketRmse> rmse_by_bucket;
  std::optional<double> ci_width;
  std::string error;  // non-empty when the cell failed

  bool ok() const noexcept { return error.empty(); }
};

struct SweepOptions {
  int replicates = 1;
  std::uint64_t seed = 0;
  Index n_buckets = 5;
  int threads = 1;
  Truth truth = Truth::Signal;
};

/// Every (regime, replicate) draws one panel from a seed derived from
/// (seed, regime, replicate); every method is scored on that panel. Rows are
/// ordered by (regime, replicate, method) regardless of completion order.
std::vector<EvalReport> method_sweep(const std::vector<Regime>& regimes,
                                     const std::vector<MethodSpec>& methods,
                                     const SweepOptions& options);

/// Long format: regime,method,replicate,metric,value.
void write_sweep_csv(std::ostream& out, const std::vector<EvalReport>& reports);
std::string sweep_to_json(const std::vector<EvalReport>& reports);

/// Median over successful reports matching (regime, method); NaN if none.
double median_rmse(const std::vector<EvalReport>& reports, const std::string& regime,
                   const std::string& method);

double median(std::vector<double> values);

}  // namespace tasc

#endif  // TASC_EVALUATION_HPP
