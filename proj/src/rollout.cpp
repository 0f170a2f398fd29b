#include "rhc/rollout.hpp"

#include <cmath>
#include <sstream>

namespace rhc::rollout {

std::string to_string(Mode mode)
{
    switch (mode) {
    case Mode::true_env: return "true_env";
    case Mode::mean: return "mean";
    case Mode::optimistic: return "optimistic";
    case Mode::pessimistic: return "pessimistic";
    }
    return "?";
}

std::vector<std::vector<Vector>> common_noise(const env::EnvSpec& spec, int n_particles,
                                              std::uint64_t seed)
{
    require(n_particles >= 1, "rollout: n_particles must be >= 1");
    std::vector<std::vector<Vector>> out;
    out.reserve(n_particles);
    for (int i = 0; i < n_particles; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        out.push_back(env::sample_noise(spec, rng));
    }
    return out;
}

bool simulate(const env::Environment& env, const env::TransitionModel& dynamics, const Players& players,
              const std::vector<Vector>& noise, double& total_reward, double& total_utility,
              std::vector<Vector>* states, std::vector<Vector>* queries)
{
    const auto& sp = env.spec();
    total_reward = 0.0;
    total_utility = 0.0;
    Vector s = sp.initial_state;
    Vector a, abar, next;
    if (states) {
        states->clear();
        states->push_back(s);
    }
    if (queries) queries->clear();
    for (int h = 0; h < sp.horizon; ++h) {
        policy::act_into(players.protagonist_spec, players.protagonist, s, a);
        policy::act_into(players.adversary_spec, players.adversary, s, abar);
        total_reward += env.reward(s, a, abar);
        total_utility += env.utility(s, a, abar);
        if (queries) queries->push_back(model::make_query(s, a, abar));
        dynamics.next_state(s, a, abar, noise[h], next);
        if (!next.allFinite()) return false;
        s.swap(next);
        if (states) states->push_back(s);
    }
    return true;
}

PerformanceEstimate evaluate(const env::Environment& env, const env::TransitionModel& dynamics,
                             const Players& players, const std::vector<std::vector<Vector>>& noise,
                             Mode mode, std::uint64_t seed)
{
    require(!noise.empty(), "rollout: need at least one particle");
    const int n = static_cast<int>(noise.size());
    double sum_r = 0.0, sum_u = 0.0, sq_r = 0.0, sq_u = 0.0;
    int kept = 0;
    for (int i = 0; i < n; ++i) {
        double r = 0.0, u = 0.0;
        if (!simulate(env, dynamics, players, noise[i], r, u)) continue;
        ++kept;
        sum_r += r;
        sum_u += u;
        sq_r += r * r;
        sq_u += u * u;
    }
    const int dropped = n - kept;
    if (2 * dropped > n) {
        std::ostringstream os;
        os << "rollout: " << dropped << " of " << n << " particles diverged (" << to_string(mode)
           << " dynamics, env " << env.spec().name << ")";
        throw DivergenceError(os.str());
    }
    PerformanceEstimate est;
    est.mode = mode;
    est.seed = seed;
    est.n_particles = kept;
    est.n_dropped = dropped;
    est.j_r = sum_r / kept;
    est.j_u = sum_u / kept;
    if (kept > 1) {
        const double var_r = std::max(0.0, (sq_r - kept * est.j_r * est.j_r) / (kept - 1));
        const double var_u = std::max(0.0, (sq_u - kept * est.j_u * est.j_u) / (kept - 1));
        est.std_err_r = std::sqrt(var_r / kept);
        est.std_err_u = std::sqrt(var_u / kept);
    }
    return est;
}

PerformanceEstimate evaluate(const env::Environment& env, const env::TransitionModel& dynamics,
                             const Players& players, int n_particles, std::uint64_t seed, Mode mode)
{
    return evaluate(env, dynamics, players, common_noise(env.spec(), n_particles, seed), mode, seed);
}

PerformanceEstimate evaluate_true(const env::Environment& env, const Players& players, int n_particles,
                                  std::uint64_t seed)
{
    env::TrueTransition truth(env);
    return evaluate(env, truth, players, n_particles, seed, Mode::true_env);
}

namespace {

PerformanceEstimate hallucinated(const env::Environment& env, const model::DynamicsModel& model, double beta,
                                 const policy::PolicySet& set, const policy::PolicyBundle& bundle,
                                 const Vector& eta, model::HallucinationMode hmode, Mode mode,
                                 int n_particles, std::uint64_t seed)
{
    model::HallucinatedDynamics dyn(model, beta, &set.eta, &eta, hmode);
    Players players{set.protagonist, bundle.protagonist, set.adversary, bundle.adversary};
    return evaluate(env, dyn, players, n_particles, seed, mode);
}

}  // namespace

PerformanceEstimate optimistic_value(const env::Environment& env, const model::DynamicsModel& model,
                                     double beta, const policy::PolicySet& set,
                                     const policy::PolicyBundle& bundle, int n_particles, std::uint64_t seed)
{
    return hallucinated(env, model, beta, set, bundle, bundle.eta_opt, model::HallucinationMode::optimistic,
                        Mode::optimistic, n_particles, seed);
}

PerformanceEstimate pessimistic_value(const env::Environment& env, const model::DynamicsModel& model,
                                      double beta, const policy::PolicySet& set,
                                      const policy::PolicyBundle& bundle, int n_particles, std::uint64_t seed)
{
    return hallucinated(env, model, beta, set, bundle, bundle.eta_pes, model::HallucinationMode::pessimistic,
                        Mode::pessimistic, n_particles, seed);
}

PerformanceEstimate mean_value(const env::Environment& env, const model::DynamicsModel& model,
                               const policy::PolicySet& set, const policy::PolicyBundle& bundle,
                               int n_particles, std::uint64_t seed)
{
    return hallucinated(env, model, 0.0, set, bundle, bundle.eta_opt, model::HallucinationMode::mean,
                        Mode::mean, n_particles, seed);
}

}  // namespace rhc::rollout
