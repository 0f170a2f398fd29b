#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rhc/config.hpp"
#include "rhc/env.hpp"
#include "rhc/model.hpp"
#include "rhc/objective.hpp"
#include "rhc/policy.hpp"
#include "rhc/solver.hpp"

namespace rhc::learner {

/// Seed used for every robust-value estimate (oracle and played policies), so
/// that replaying the oracle policy gives exactly zero regret.
inline constexpr std::uint64_t kRobustEvalSeed = 0x5eed0f0a11ULL;

/// Problem instance shared by the learner, the oracle and the theory checks.
struct Problem {
    env::EnvironmentPtr env;
    policy::PolicySet set;
};

Problem make_problem(const ExperimentConfig& cfg);

/// Per-episode quantities beyond the ledger, kept for the bound audits.
struct EpisodeDiagnostics {
    int episode = 0;
    double beta = 0.0;
    double lambda = 0.0;
    int data_size = 0;           // records the model used for selection was fitted on
    double selection_value = 0;  // max-min optimistic rectified value found by the solver
    double adversary_value = 0;  // pessimistic rectified value at (pi_t, pi_bar_t)
    double j_r_opt = 0.0;        // J_r^(o)(pi_t, pi_bar_t)
    double j_u_opt = 0.0;
    double j_r_pes = 0.0;
    double j_u_pes = 0.0;
    double j_r_std_err = 0.0;    // ledger-grade true evaluation
    double j_u_std_err = 0.0;
    double robust_value = 0.0;
    double robust_std_err = 0.0;
    double sigma_sum = 0.0;      // E sum_h ||sigma_{t-1}(s_h, a_h, a_bar_h)|| on the true system
    double sigma_sq_sum = 0.0;   // E sum_h ||sigma_{t-1}||^2 on the true system
    double min_grid_opt_utility = 0.0;  // min over the adversary grid of J_u^(o)(pi_t, .); NaN if skipped
    double mean_lipschitz = 0.0;
    double sigma_lipschitz = 0.0;
    double protagonist_lipschitz = 0.0;
    double adversary_lipschitz = 0.0;
    bool protagonist_converged = false;
    bool adversary_converged = false;
};

struct OracleResult {
    Vector pi_star;
    double value = 0.0;         // robust value min_pi_bar J_r(f, pi_star, pi_bar)
    double std_err = 0.0;
    double max_min_value = 0.0; // rectified max-min value with the oracle lambda
    double robust_utility = 0.0;  // min_pi_bar J_u(f, pi_star, pi_bar)
    double max_robust_utility = 0.0;
    bool feasible = true;
    std::string method;         // grid | cem
    int evaluations = 0;
    std::string cache_key;
    bool from_cache = false;
};

/// Raised when no policy in the class is robustly feasible.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, double max_robust_utility)
        : std::runtime_error(what), max_robust_utility_(max_robust_utility)
    {
    }
    double max_robust_utility() const { return max_robust_utility_; }

private:
    double max_robust_utility_;
};

struct SeedRun {
    std::string algorithm;
    std::uint64_t seed = 0;
    objective::LearningLedger ledger;
    std::vector<EpisodeDiagnostics> diagnostics;
    std::vector<env::Trajectory> trajectories;
    policy::PolicyBundle final_bundle;
    bool aborted = false;
    std::string abort_reason;
};

/// Brute-force max-min on the true dynamics. Full grid over the protagonist
/// parameters when there are at most 3 of them, nested CEM otherwise.
/// Throws InfeasibleError if the best policy is not robustly feasible.
OracleResult compute_oracle(const ExperimentConfig& cfg, const Problem& problem);

/// Same, but reads/writes a JSON cache in `cache_dir` keyed by a content hash
/// of every setting the oracle depends on.
OracleResult compute_oracle_cached(const ExperimentConfig& cfg, const Problem& problem,
                                   const std::filesystem::path& cache_dir);

std::string oracle_cache_key(const ExperimentConfig& cfg);

/// Robust value of a protagonist on the true system using the shared seed.
solver::RobustValue robust_value(const ExperimentConfig& cfg, const Problem& problem, const Vector& protagonist);

using ProgressFn = std::function<void(const SeedRun&, int episode)>;

/// One seed of one algorithm. `oracle_value` is the regret reference.
SeedRun run_seed(const ExperimentConfig& cfg, const Problem& problem, const std::string& algorithm,
                 std::uint64_t seed, double oracle_value, const ProgressFn& progress = {});

/// All algorithms x seeds in config order.
std::vector<SeedRun> run(const ExperimentConfig& cfg, const Problem& problem, double oracle_value,
                         const ProgressFn& progress = {});

/// Points per dimension used for the protagonist grid (0 when the grid is not used).
int oracle_grid_points(int protagonist_dim);

/// Evenly spaced grid over [-bound, bound]^dim with `points` per dimension.
std::vector<Vector> parameter_grid(int dim, int points, double bound);

}  // namespace rhc::learner
