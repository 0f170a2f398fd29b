#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rhc/common.hpp"

namespace rhc::env {

/// Static description of an episodic environment with adversarial inputs.
/// The constants behind the dynamics and the affine reward/utility rescaling
/// are kept in `parameters` so runs can log them verbatim.
struct EnvSpec {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    int adv_action_dim = 0;
    int horizon = 1;
    Vector initial_state;
    double threshold = 0.0;  // b, in summed-utility units
    double noise_std = 0.0;
    Vector action_low, action_high;
    Vector adv_action_low, adv_action_high;
    std::map<std::string, double> parameters;

    void validate() const;
    int input_dim() const { return state_dim + action_dim + adv_action_dim; }
};

struct TransitionRecord {
    Vector state;
    Vector action;
    Vector adv_action;
    Vector next_state;
    double reward = 0.0;
    double utility = 0.0;
    int episode = 0;
    int step = 0;
};

struct Trajectory {
    std::vector<TransitionRecord> records;
    double total_reward = 0.0;
    double total_utility = 0.0;
};

/// Global Lipschitz constants of f, r and u on the environment's domain,
/// all taken w.r.t. the Euclidean norm of the joint input (s, a, a_bar).
/// An infinite value means the function is discontinuous.
struct LipschitzConstants {
    double dynamics = 0.0;
    double reward = 0.0;
    double utility = 0.0;
};

class Environment {
public:
    explicit Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
    virtual ~Environment() = default;

    const EnvSpec& spec() const { return spec_; }

    /// f(s, a, a_bar): noise-free next state.
    virtual void mean_dynamics(const Vector& s, const Vector& a, const Vector& abar,
                               Vector& next) const = 0;
    virtual double reward(const Vector& s, const Vector& a, const Vector& abar) const = 0;
    virtual double utility(const Vector& s, const Vector& a, const Vector& abar) const = 0;
    virtual LipschitzConstants lipschitz() const = 0;

    /// Uniform draw from the (compact) state domain the Lipschitz constants hold on.
    virtual Vector sample_state(Rng& rng) const = 0;

    Vector mean_dynamics(const Vector& s, const Vector& a, const Vector& abar) const
    {
        Vector next(spec_.state_dim);
        mean_dynamics(s, a, abar, next);
        return next;
    }

private:
    EnvSpec spec_;
};

using EnvironmentPtr = std::shared_ptr<const Environment>;

/// Anything that can produce s_{h+1} from (s_h, a_h, a_bar_h) and an externally
/// drawn noise sample: the true environment or a hallucinated model.
class TransitionModel {
public:
    virtual ~TransitionModel() = default;
    virtual void next_state(const Vector& s, const Vector& a, const Vector& abar,
                            const Vector& noise, Vector& next) const = 0;
};

class TrueTransition final : public TransitionModel {
public:
    explicit TrueTransition(const Environment& env) : env_(env) {}
    void next_state(const Vector& s, const Vector& a, const Vector& abar, const Vector& noise,
                    Vector& next) const override
    {
        env_.mean_dynamics(s, a, abar, next);
        next += noise;
    }

private:
    const Environment& env_;
};
using ConfigMap = std::map<std::string, double>;
using ActionFn = std::function<Vector(const Vector&)>;

struct StepResult {
    Vector next_state;
    double reward = 0.0;
    double utility = 0.0;
    bool clipped = false;  // an action was outside its bounds and got clipped
};

/// One transition s' = f(s, a, a_bar) + noise. Deterministic given its inputs;
/// out-of-bound actions are clipped and flagged.
StepResult step(const Environment& env, const Vector& s, const Vector& a, const Vector& abar,
                const Vector& noise);

/// Clip `v` into [lo, hi] elementwise; returns true if anything moved.
bool clip_into(Vector& v, const Vector& lo, const Vector& hi);

/// Draw H x p i.i.d. N(0, noise_std^2) samples for one episode.
std::vector<Vector> sample_noise(const EnvSpec& spec, Rng& rng);

/// Roll out (protagonist, adversary) on the true environment from s_0.
/// Pure function of (env, policies, seed). Throws DivergenceError on non-finite states.
Trajectory rollout_true(const Environment& env, const ActionFn& protagonist,
                        const ActionFn& adversary, std::uint64_t seed, int episode = 0);

/// Names accepted by make_env.
const std::vector<std::string>& env_names();

/// Build a named environment. Accepted override keys depend on the environment;
/// common ones are horizon, noise_std, adversary_magnitude and threshold.
EnvironmentPtr make_env(const std::string& name, const ConfigMap& overrides = {});

}  // namespace rhc::env
