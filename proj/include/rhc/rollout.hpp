#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rhc/common.hpp"
#include "rhc/env.hpp"
#include "rhc/model.hpp"
#include "rhc/policy.hpp"

namespace rhc::rollout {

enum class Mode { true_env, mean, optimistic, pessimistic };

std::string to_string(Mode mode);

struct PerformanceEstimate {
    double j_r = 0.0;
    double j_u = 0.0;
    double std_err_r = 0.0;
    double std_err_u = 0.0;
    int n_particles = 0;
    int n_dropped = 0;
    Mode mode = Mode::true_env;
    std::uint64_t seed = 0;
};

/// Per-particle noise sequences: noise[particle][h]. Particle i uses the
/// stream derive_seed(seed, i), so two calls with one seed share noise.
std::vector<std::vector<Vector>> common_noise(const env::EnvSpec& spec, int n_particles,
                                              std::uint64_t seed);

struct Players {
    const policy::PolicySpec& protagonist_spec;
    const Vector& protagonist;
    const policy::PolicySpec& adversary_spec;
    const Vector& adversary;
};

/// One simulated episode from s_0 under `dynamics`. Returns false if a
/// non-finite state appeared. `states` (if non-null) receives s_0..s_H and
/// `queries` (if non-null) the visited (s_h, a_h, a_bar_h).
bool simulate(const env::Environment& env, const env::TransitionModel& dynamics, const Players& players,
              const std::vector<Vector>& noise, double& total_reward, double& total_utility,
              std::vector<Vector>* states = nullptr, std::vector<Vector>* queries = nullptr);

/// Monte-Carlo estimate of (J_r, J_u) under `dynamics` with common random numbers.
/// Non-finite particles are dropped; more than half dropped throws DivergenceError.
PerformanceEstimate evaluate(const env::Environment& env, const env::TransitionModel& dynamics,
                             const Players& players, const std::vector<std::vector<Vector>>& noise,
                             Mode mode = Mode::true_env, std::uint64_t seed = 0);

PerformanceEstimate evaluate(const env::Environment& env, const env::TransitionModel& dynamics,
                             const Players& players, int n_particles, std::uint64_t seed,
                             Mode mode = Mode::true_env);

PerformanceEstimate evaluate_true(const env::Environment& env, const Players& players, int n_particles,
                                  std::uint64_t seed);

/// Evaluate under f~ = mu + beta eta sigma with the bundle's eta_opt / eta_pes.
PerformanceEstimate optimistic_value(const env::Environment& env, const model::DynamicsModel& model,
                                     double beta, const policy::PolicySet& set,
                                     const policy::PolicyBundle& bundle, int n_particles, std::uint64_t seed);
PerformanceEstimate pessimistic_value(const env::Environment& env, const model::DynamicsModel& model,
                                      double beta, const policy::PolicySet& set,
                                      const policy::PolicyBundle& bundle, int n_particles, std::uint64_t seed);
PerformanceEstimate mean_value(const env::Environment& env, const model::DynamicsModel& model,
                               const policy::PolicySet& set, const policy::PolicyBundle& bundle,
                               int n_particles, std::uint64_t seed);

}  // namespace rhc::rollout
