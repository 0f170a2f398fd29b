#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rhc/env.hpp"
#include "rhc/model.hpp"
#include "rhc/objective.hpp"
#include "rhc/policy.hpp"
#include "rhc/solver.hpp"

namespace rhc {

/// Thrown for invalid configuration; carries one message per offending field.
class ConfigError : public ArgumentError {
public:
    explicit ConfigError(std::vector<std::string> fields);
    const std::vector<std::string>& fields() const { return fields_; }

private:
    std::vector<std::string> fields_;
};

const std::vector<std::string>& algorithm_names();

struct ExperimentConfig {
    // [env]
    std::string env_name = "linear_toy";
    env::ConfigMap env_overrides;
    // [model]
    model::ModelConfig model;
    // [policy]
    policy::FeatureConfig protagonist_features{policy::FeatureKind::affine, 32, 1.0, 5.0};
    policy::FeatureConfig adversary_features{policy::FeatureKind::affine, 32, 1.0, 5.0};
    policy::FeatureConfig eta_features{policy::FeatureKind::affine, 32, 1.0, 5.0};
    std::uint64_t feature_seed = 7;
    std::string init = "zero";  // zero | random
    double init_scale = 0.5;
    // [solver]
    solver::CemConfig solver;
    int eval_particles = 256;
    int robust_particles = 64;
    int robust_budget = 200;
    int diagnostic_particles = 32;
    int adversary_grid = 7;  // points per adversary parameter for grid minima
    // [penalty]
    objective::PenaltyConfig penalty;  // threshold is taken from the environment
    // [run]
    std::vector<std::string> algorithms{"rhc_ucrl"};
    int episodes = 50;
    std::vector<std::uint64_t> seeds{1};
    bool oracle = true;
    double oracle_lambda = 1000.0;
    int oracle_particles = 32;
    double oracle_feasibility_tol = 1e-6;
    solver::CemConfig oracle_solver{64, 8, 30, 1.0, 64, 8, 15, 32, 11};
    bool record_wall_time = false;
    bool diagnostics = true;

    void validate() const;
};

/// Parse the sectioned key = value format. Unknown sections/keys and bad
/// values raise ConfigError listing every offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Full, re-parseable text of every setting (used by --print-defaults and
/// echoed into run outputs).
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace rhc
