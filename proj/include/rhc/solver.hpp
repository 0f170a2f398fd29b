#pragma once

#include <functional>
#include <vector>

#include "rhc/common.hpp"
#include "rhc/env.hpp"
#include "rhc/model.hpp"
#include "rhc/objective.hpp"
#include "rhc/policy.hpp"
#include "rhc/rollout.hpp"

namespace rhc::solver {

struct CemConfig {
    int population = 64;
    int elites = 8;
    int iterations = 20;
    double init_scale = 1.0;
    int inner_population = 32;
    int inner_elites = 4;
    int inner_iterations = 5;
    int particles = 16;  // Monte-Carlo particles per candidate evaluation
    std::uint64_t seed = 0;

    void validate() const;
};

struct CemResult {
    Vector best;
    double best_score = 0.0;
    bool converged = false;
    int evaluations = 0;
    std::vector<double> best_history;  // best-ever score after each iteration
};

using Score = std::function<double(const Vector&)>;
using Projector = std::function<void(Vector&)>;

struct CemSettings {
    int population = 64;
    int elites = 8;
    int iterations = 20;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
};

/// Cross-entropy search. Incumbents are scored in the first iteration alongside
/// the sampled population. Returns the best candidate ever scored. Ties are
/// broken towards the lexicographically smallest parameter vector.
CemResult cem_maximize(const Score& score, const Vector& init_mean, const CemSettings& s,
                       const Projector& project = {}, const std::vector<Vector>& incumbents = {});
CemResult cem_minimize(const Score& score, const Vector& init_mean, const CemSettings& s,
                       const Projector& project = {}, const std::vector<Vector>& incumbents = {});

/// Outer-loop settings taken from a CemConfig.
CemResult cem_maximize(const Score& score, int dim, const CemConfig& cfg);
CemResult cem_minimize(const Score& score, int dim, const CemConfig& cfg);

/// Everything needed to score policies for one planning problem. A null model
/// means the true environment dynamics.
struct Game {
    const env::Environment& env;
    const policy::PolicySet& set;
    const model::DynamicsModel* model = nullptr;
    double beta = 0.0;
    double lambda = 0.0;
    double threshold = 0.0;
    bool hallucinate = true;  // co-optimize eta; ignored (treated false) when beta = 0 or no model
    std::uint64_t noise_seed = 0;
    int particles = 16;
};

struct ProtagonistChoice {
    Vector protagonist;
    Vector eta_opt;
    Vector adversary;  // inner best response found for the returned protagonist
    double value = 0.0;
    CemResult search;
};

struct AdversaryChoice {
    Vector adversary;
    Vector eta_pes;
    double value = 0.0;
    CemResult search;
};

/// max over (pi, eta_opt) of min over pi_bar of J_r^(o) - lambda [b - J_u^(o)]_+.
/// The inner minimization runs a CEM with the same seed for every outer candidate.
ProtagonistChoice select_protagonist(const Game& game, const CemConfig& cfg,
                                     const policy::PolicyBundle& warm_start);

/// min over (pi_bar, eta_pes) of J_r^(p) - lambda [b - J_u^(p)]_+ at fixed pi_t.
AdversaryChoice select_adversary(const Game& game, const Vector& protagonist, const CemConfig& cfg,
                                 const policy::PolicyBundle& warm_start);

/// Inner best response: min over pi_bar of the rectified objective with the
/// given protagonist and eta (eta empty means no hallucination).
CemResult inner_minimum(const Game& game, const std::vector<std::vector<Vector>>& noise,
                        const Vector& protagonist, const Vector& eta_opt, const CemConfig& cfg,
                        const std::vector<Vector>& incumbents);

struct RobustValue {
    double value = 0.0;  // estimate of min over pi_bar of J_r(f, pi, pi_bar)
    double std_err = 0.0;
    double j_u = 0.0;
    Vector adversary;
    int evaluations = 0;
};

/// Adversary-only CEM on the true environment with a fixed evaluation budget.
RobustValue robust_value(const env::Environment& env, const policy::PolicySet& set, const Vector& protagonist,
                         int particles, std::uint64_t seed, int budget = 200,
                         const std::vector<Vector>& incumbents = {});

}  // namespace rhc::solver
