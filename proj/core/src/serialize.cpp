#include "tasc/serialize.hpp"

#include "tasc/errors.hpp"

#include <json.hpp>

#include <set>

namespace tasc {

using nlohmann::json;

namespace {

json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd matrix_from_json(const json& j, const char* name) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ParseError(std::string("matrix '") + name + "' has inconsistent size");
  MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[idx++].get<double>();
  return m;
}

json parse_object(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* what) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void read_if(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string theta_to_json(const StateSpaceParams& theta, const std::vector<double>& loglik_trace) {
  json j = {{"latent_dim", theta.latent_dim()},
            {"obs_dim", theta.obs_dim()},
            {"diag_noise", theta.diag_noise},
            {"A", matrix_to_json(theta.A)},
            {"H", matrix_to_json(theta.H)},
            {"Q", matrix_to_json(theta.Q)},
            {"R", matrix_to_json(theta.R)},
            {"m0", matrix_to_json(theta.m0)},
            {"P0", matrix_to_json(theta.P0)},
            {"loglik_trace", loglik_trace}};
  return j.dump(2);
}

ThetaDocument theta_from_json(const std::string& text) {
  const json j = parse_object(text, "theta");
  return guarded("theta", [&] {
    ThetaDocument doc;
    auto& t = doc.theta;
    t.diag_noise = j.value("diag_noise", true);
    t.A = matrix_from_json(j.at("A"), "A");
    t.H = matrix_from_json(j.at("H"), "H");
    t.Q = matrix_from_json(j.at("Q"), "Q");
    t.R = matrix_from_json(j.at("R"), "R");
    const MatrixXd m0 = matrix_from_json(j.at("m0"), "m0");
    if (m0.cols() != 1) throw ParseError("theta: m0 must be a column vector");
    t.m0 = m0.col(0);
    t.P0 = matrix_from_json(j.at("P0"), "P0");
    if (j.contains("latent_dim") && j.at("latent_dim").get<Index>() != t.latent_dim())
      throw ParseError("theta: latent_dim disagrees with A");
    if (j.contains("obs_dim") && j.at("obs_dim").get<Index>() != t.obs_dim())
      throw ParseError("theta: obs_dim disagrees with H");
    read_if(j, "loglik_trace", doc.loglik_trace);
    return doc;
  });
}

std::string weights_to_json(const DonorWeights& weights) {
  json j = {{"kind", weights.kind == WeightKind::Simplex ? "simplex" : "ridge"},
            {"f", std::vector<double>(weights.f.data(), weights.f.data() + weights.f.size())},
            {"lambda", weights.lambda},
            {"d", weights.d}};
  return j.dump(2);
}

DonorWeights weights_from_json(const std::string& text) {
  const json j = parse_object(text, "weights");
  return guarded("weights", [&] {
    DonorWeights w;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "simplex")
      w.kind = WeightKind::Simplex;
    else if (kind == "ridge")
      w.kind = WeightKind::Ridge;
    else
      throw ParseError("weights: unknown kind '" + kind + "'");
    const auto f = j.at("f").get<std::vector<double>>();
    w.f = Eigen::Map<const VectorXd>(f.data(), static_cast<Index>(f.size()));
    read_if(j, "lambda", w.lambda);
    read_if(j, "d", w.d);
    return w;
  });
}

EmConfig em_config_from_json(const std::string& text, EmConfig base) {
  const json j = parse_object(text, "em config");
  reject_unknown(j, {"d", "n_iters", "rel_tol", "n_restarts", "seed", "diag_noise", "seasonal"},
                 "em config");
  return guarded("em config", [&] {
    read_if(j, "d", base.d);
    read_if(j, "n_iters", base.n_iters);
    read_if(j, "rel_tol", base.rel_tol);
    read_if(j, "n_restarts", base.n_restarts);
    read_if(j, "seed", base.seed);
    read_if(j, "diag_noise", base.diag_noise);
    if (j.contains("seasonal")) {
      const auto s = j.at("seasonal").get<std::vector<double>>();
      base.seasonal = Eigen::Map<const VectorXd>(s.data(), static_cast<Index>(s.size()));
    }
    base.validate();
    return base;
  });
}

RscConfig rsc_config_from_json(const std::string& text, RscConfig base) {
  const json j = parse_object(text, "rsc config");
  reject_unknown(j, {"d", "lambda", "cv_grid"}, "rsc config");
  return guarded("rsc config", [&] {
    read_if(j, "d", base.d);
    read_if(j, "lambda", base.lambda);
    read_if(j, "cv_grid", base.cv_grid);
    return base;
  });
}

SimulationConfig simulation_config_from_json(const std::string& text, SimulationConfig base) {
  const json j = parse_object(text, "simulation config");
  reject_unknown(j,
                 {"d_true", "n_units", "t_total", "t0", "a_q", "b_q", "a_r", "b_r",
                  "spectral_radius", "seed"},
                 "simulation config");
  return guarded("simulation config", [&] {
    read_if(j, "d_true", base.d_true);
    read_if(j, "n_units", base.n_units);
    read_if(j, "t_total", base.t_total);
    read_if(j, "t0", base.t0);
    read_if(j, "a_q", base.a_q);
    read_if(j, "b_q", base.b_q);
    read_if(j, "a_r", base.a_r);
    read_if(j, "b_r", base.b_r);
    read_if(j, "spectral_radius", base.spectral_radius);
    read_if(j, "seed", base.seed);
    base.validate();
    return base;
  });
}

std::string simulation_config_to_json(const SimulationConfig& c) {
  json j = {{"d_true", c.d_true}, {"n_units", c.n_units}, {"t_total", c.t_total},
            {"t0", c.t0},         {"a_q", c.a_q},         {"b_q", c.b_q},
            {"a_r", c.a_r},       {"b_r", c.b_r},         {"spectral_radius", c.spectral_radius},
            {"seed", c.seed}};
  return j.dump(2);
}

}  // namespace tasc
