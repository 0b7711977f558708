#ifndef TASC_SERIALIZE_HPP
#define TASC_SERIALIZE_HPP

#include "tasc/baselines.hpp"
#include "tasc/em.hpp"
#include "tasc/simulation.hpp"
#include "tasc/state_space.hpp"

#include <string>
#include <vector>

namespace tasc {

/// JSON document for a fitted model: dimensions, row-major matrices, flags
/// and the EM log-likelihood trace. Doubles are written with 17 significant
/// digits so parse(dump(x)) == x.
std::string theta_to_json(const StateSpaceParams& theta, const std::vector<double>& loglik_trace = {});

struct ThetaDocument {
  StateSpaceParams theta;
  std::vector<double> loglik_trace;
};

ThetaDocument theta_from_json(const std::string& text);

/// {kind, f[], lambda, d}
std::string weights_to_json(const DonorWeights& weights);
DonorWeights weights_from_json(const std::string& text);

/// Config documents. Missing keys keep their defaults; unknown keys are rejected.
EmConfig em_config_from_json(const std::string& text, EmConfig base = {});
RscConfig rsc_config_from_json(const std::string& text, RscConfig base = {});
SimulationConfig simulation_config_from_json(const std::string& text, SimulationConfig base = {});
std::string simulation_config_to_json(const SimulationConfig& config);

}  // namespace tasc

#endif  // TASC_SERIALIZE_HPP
