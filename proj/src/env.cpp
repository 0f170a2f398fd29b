#include "rhc/env.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>

namespace rhc::env {

void EnvSpec::validate() const
{
    require(state_dim >= 1 && action_dim >= 1 && adv_action_dim >= 1,
            "EnvSpec: dimensions must be positive");
    require(horizon >= 1, "EnvSpec: horizon must be >= 1");
    require(noise_std >= 0.0, "EnvSpec: noise_std must be >= 0");
    require(initial_state.size() == state_dim, "EnvSpec: initial_state has wrong length");
    require(action_low.size() == action_dim && action_high.size() == action_dim,
            "EnvSpec: action bounds have wrong length");
    require(adv_action_low.size() == adv_action_dim && adv_action_high.size() == adv_action_dim,
            "EnvSpec: adversary bounds have wrong length");
    require((action_low.array() < action_high.array()).all(),
            "EnvSpec: action_low must be < action_high");
    require((adv_action_low.array() < adv_action_high.array()).all(),
            "EnvSpec: adv_action_low must be < adv_action_high");
}

bool clip_into(Vector& v, const Vector& lo, const Vector& hi)
{
    bool moved = false;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double c = std::clamp(v[i], lo[i], hi[i]);
        if (c != v[i]) {
            moved = true;
            v[i] = c;
        }
    }
    return moved;
}

StepResult step(const Environment& env, const Vector& s, const Vector& a, const Vector& abar,
                const Vector& noise)
{
    const EnvSpec& sp = env.spec();
    if (s.size() != sp.state_dim || a.size() != sp.action_dim ||
        abar.size() != sp.adv_action_dim || noise.size() != sp.state_dim) {
        std::ostringstream os;
        os << "step: dimension mismatch (state " << s.size() << "/" << sp.state_dim << ", action "
           << a.size() << "/" << sp.action_dim << ", adversary " << abar.size() << "/"
           << sp.adv_action_dim << ", noise " << noise.size() << "/" << sp.state_dim << ")";
        throw ArgumentError(os.str());
    }
    Vector ac = a;
    Vector bc = abar;
    StepResult out;
    out.clipped = clip_into(ac, sp.action_low, sp.action_high);
    out.clipped = clip_into(bc, sp.adv_action_low, sp.adv_action_high) || out.clipped;
    out.next_state.resize(sp.state_dim);
    env.mean_dynamics(s, ac, bc, out.next_state);
    out.next_state += noise;
    out.reward = env.reward(s, ac, bc);
    out.utility = env.utility(s, ac, bc);
    return out;
}

std::vector<Vector> sample_noise(const EnvSpec& spec, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> out(spec.horizon, Vector(spec.state_dim));
    for (auto& w : out)
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = spec.noise_std * normal(rng);
    return out;
}

Trajectory rollout_true(const Environment& env, const ActionFn& protagonist,
                        const ActionFn& adversary, std::uint64_t seed, int episode)
{
    const EnvSpec& sp = env.spec();
    Rng rng(seed);
    const auto noise = sample_noise(sp, rng);
    Trajectory traj;
    traj.records.reserve(sp.horizon);
    Vector s = sp.initial_state;
    for (int h = 0; h < sp.horizon; ++h) {
        TransitionRecord rec;
        rec.state = s;
        rec.action = protagonist(s);
        rec.adv_action = adversary(s);
        clip_into(rec.action, sp.action_low, sp.action_high);
        clip_into(rec.adv_action, sp.adv_action_low, sp.adv_action_high);
        StepResult res = step(env, s, rec.action, rec.adv_action, noise[h]);
        if (!res.next_state.allFinite()) {
            std::ostringstream os;
            os << "rollout_true: non-finite state in env '" << sp.name << "' at episode " << episode
               << ", step " << h;
            throw DivergenceError(os.str());
        }
        rec.next_state = res.next_state;
        rec.reward = res.reward;
        rec.utility = res.utility;
        rec.episode = episode;
        rec.step = h;
        assert(rec.reward >= 0.0 && rec.reward <= 1.0);
        assert(rec.utility >= 0.0 && rec.utility <= 1.0);
        traj.total_reward += rec.reward;
        traj.total_utility += rec.utility;
        s = res.next_state;
        traj.records.push_back(std::move(rec));
    }
    return traj;
}

namespace {

using Params = std::map<std::string, double>;

Params apply_overrides(const std::string& env_name, Params defaults, const ConfigMap& overrides)
{
    for (const auto& [key, value] : overrides) {
        auto it = defaults.find(key);
        if (it == defaults.end()) {
            std::ostringstream os;
            os << "make_env(" << env_name << "): unknown override '" << key << "'; accepted:";
            for (const auto& [k, v] : defaults) os << " " << k;
            throw ArgumentError(os.str());
        }
        if (!std::isfinite(value))
            throw ArgumentError("make_env(" + env_name + "): override '" + key + "' is not finite");
        it->second = value;
    }
    return defaults;
}

Vector filled(int n, double v) { return Vector::Constant(n, v); }

double spectral_norm(const Matrix& m)
{
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

// s' = a s + b u + c u_bar, with a 1-D state.
class LinearToy final : public Environment {
public:
    explicit LinearToy(EnvSpec spec) : Environment(std::move(spec))
    {
        const auto& p = this->spec().parameters;
        a_ = p.at("state_gain");
        b_ = p.at("action_gain");
        c_ = p.at("adversary_gain");
        amax_ = std::max(std::abs(this->spec().action_low[0]), std::abs(this->spec().action_high[0]));
        advmax_ = p.at("adversary_magnitude");
        state_box_ = p.at("state_box");
    }

    void mean_dynamics(const Vector& s, const Vector& a, const Vector& abar,
                       Vector& next) const override
    {
        next.resize(1);
        next[0] = a_ * s[0] + b_ * a[0] + c_ * abar[0];
    }
    double reward(const Vector& s, const Vector&, const Vector&) const override
    {
        return std::clamp(1.0 - std::abs(s[0]), 0.0, 1.0);
    }
    double utility(const Vector&, const Vector& a, const Vector&) const override
    {
        const double x = std::clamp(a[0] / amax_, -1.0, 1.0);
        return 1.0 - x * x;
    }
    LipschitzConstants lipschitz() const override
    {
        return {std::sqrt(a_ * a_ + b_ * b_ + c_ * c_), 1.0, 2.0 / amax_};
    }
    Vector sample_state(Rng& rng) const override
    {
        std::uniform_real_distribution<double> u(-state_box_, state_box_);
        return Vector::Constant(1, u(rng));
    }

private:
    double a_, b_, c_, amax_, advmax_, state_box_;
};

// Torque-driven pendulum, state (cos th, sin th, th_dot), th = 0 upright.
// Physics step is explicit Euler; the adversary then shifts the angle and
// angular velocity before the next state is emitted.
class AdvPendulum final : public Environment {
public:
    explicit AdvPendulum(EnvSpec spec) : Environment(std::move(spec))
    {
        const auto& p = this->spec().parameters;
        dt_ = p.at("dt");
        grav_coef_ = 3.0 * p.at("gravity") / (2.0 * p.at("length"));
        torque_coef_ = 3.0 / (p.at("mass") * p.at("length") * p.at("length"));
        max_speed_ = p.at("max_speed");
        max_torque_ = p.at("max_torque");
        height_threshold_ = p.at("height_threshold");
        w_angle_ = p.at("angle_weight");
        w_speed_ = p.at("speed_weight");
        w_torque_ = p.at("torque_cost");
        w_sum_ = w_angle_ + w_speed_ + w_torque_;
    }

    void mean_dynamics(const Vector& s, const Vector& a, const Vector& abar,
                       Vector& next) const override
    {
        const double th = std::atan2(s[1], s[0]);
        const double thdot = s[2];
        const double tau = std::clamp(a[0], -max_torque_, max_torque_);
        double th_new = th + dt_ * thdot;
        double thdot_new = thdot + dt_ * (grav_coef_ * s[1] + torque_coef_ * tau);
        th_new += abar[0];
        thdot_new += abar[1];
        thdot_new = std::clamp(thdot_new, -max_speed_, max_speed_);
        next.resize(3);
        next[0] = std::cos(th_new);
        next[1] = std::sin(th_new);
        next[2] = thdot_new;
    }
    double reward(const Vector& s, const Vector& a, const Vector&) const override
    {
        const double angle_dev = 0.5 * (1.0 - std::clamp(s[0], -1.0, 1.0));
        const double v = std::clamp(s[2] / max_speed_, -1.0, 1.0);
        const double t = std::clamp(a[0] / max_torque_, -1.0, 1.0);
        const double cost = (w_angle_ * angle_dev + w_speed_ * v * v + w_torque_ * t * t) / w_sum_;
        return std::clamp(1.0 - cost, 0.0, 1.0);
    }
    double utility(const Vector& s, const Vector&, const Vector&) const override
    {
        return s[0] >= height_threshold_ ? 1.0 : 0.0;
    }
    LipschitzConstants lipschitz() const override
    {
        // |d theta| <= (pi/2) * chord on the unit circle; chord of the output angle
        // is bounded by the angle change. Rows bound |d theta'| and |d th_dot'| in terms of
        // (chord, |d th_dot|, |d tau|, |d abar_0|, |d abar_1|), whose norm is ||dx||.
        Matrix m(2, 5);
        m << std::numbers::pi / 2.0, dt_, 0.0, 1.0, 0.0,
             dt_ * grav_coef_, 1.0, dt_ * torque_coef_, 0.0, 1.0;
        const double lr = std::sqrt(std::pow(0.5 * w_angle_, 2) +
                                    std::pow(2.0 * w_speed_ / max_speed_, 2) +
                                    std::pow(2.0 * w_torque_ / max_torque_, 2)) / w_sum_;
        return {spectral_norm(m), lr, std::numeric_limits<double>::infinity()};
    }
    Vector sample_state(Rng& rng) const override
    {
        std::uniform_real_distribution<double> th(-std::numbers::pi, std::numbers::pi);
        std::uniform_real_distribution<double> v(-max_speed_, max_speed_);
        const double t = th(rng);
        Vector s(3);
        s << std::cos(t), std::sin(t), v(rng);
        return s;
    }

private:
    double dt_, grav_coef_, torque_coef_, max_speed_, max_torque_, height_threshold_;
    double w_angle_, w_speed_, w_torque_, w_sum_;
};

// Cart-pole with a continuous force, state (x, x_dot, th, th_dot). The adversary
// shifts the cart velocity and pole angular velocity after the physics step.
class AdvCartPole final : public Environment {
public:
    explicit AdvCartPole(EnvSpec spec) : Environment(std::move(spec))
    {
        const auto& p = this->spec().parameters;
        g_ = p.at("gravity");
        mc_ = p.at("cart_mass");
        mp_ = p.at("pole_mass");
        half_len_ = p.at("pole_half_length");
        force_mag_ = p.at("force_mag");
        dt_ = p.at("dt");
        max_speed_ = p.at("max_speed");
        theta_thr_ = p.at("theta_threshold");
        x_thr_ = p.at("x_threshold");
        x_box_ = p.at("x_box");
        lf_ = estimate_dynamics_lipschitz();
    }

    void mean_dynamics(const Vector& s, const Vector& a, const Vector& abar,
                       Vector& next) const override
    {
        const double x = s[0], xdot = s[1], th = s[2], thdot = s[3];
        const double force = force_mag_ * std::clamp(a[0], -1.0, 1.0);
        const double total = mc_ + mp_;
        const double pml = mp_ * half_len_;
        const double c = std::cos(th), sn = std::sin(th);
        const double temp = (force + pml * thdot * thdot * sn) / total;
        const double thacc = (g_ * sn - c * temp) / (half_len_ * (4.0 / 3.0 - mp_ * c * c / total));
        const double xacc = temp - pml * thacc * c / total;
        next.resize(4);
        next[0] = x + dt_ * xdot;
        next[1] = std::clamp(xdot + dt_ * xacc + abar[0], -max_speed_, max_speed_);
        next[2] = th + dt_ * thdot;
        next[3] = std::clamp(thdot + dt_ * thacc + abar[1], -max_speed_, max_speed_);
    }
    double reward(const Vector& s, const Vector&, const Vector&) const override
    {
        return std::clamp(1.0 - std::abs(s[2]) / theta_thr_, 0.0, 1.0);
    }
    double utility(const Vector& s, const Vector&, const Vector&) const override
    {
        return 1.0 - std::clamp(std::abs(s[0]) / x_thr_, 0.0, 1.0);
    }
    LipschitzConstants lipschitz() const override
    {
        return {lf_, 1.0 / theta_thr_, 1.0 / x_thr_};
    }
    Vector sample_state(Rng& rng) const override
    {
        std::uniform_real_distribution<double> x(-x_box_, x_box_);
        std::uniform_real_distribution<double> v(-max_speed_, max_speed_);
        std::uniform_real_distribution<double> th(-std::numbers::pi, std::numbers::pi);
        Vector s(4);
        s << x(rng), v(rng), th(rng), v(rng);
        return s;
    }

private:
    // The dynamics do not depend on x and are smooth in the remaining inputs on
    // the clipped-velocity box, so sup ||J|| over a dense sample bounds the global
    // constant; a 25% margin covers the sampling gap.
    double estimate_dynamics_lipschitz() const
    {
        Rng rng(0x5eed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double best = 0.0;
        Vector s(4), a(1), b(2), fp(4), fm(4);
        const double eps = 1e-6;
        for (int k = 0; k < 20000; ++k) {
            s = sample_state(rng);
            a[0] = u(rng);
            b[0] = u(rng) * spec().adv_action_high[0];
            b[1] = u(rng) * spec().adv_action_high[1];
            Eigen::Matrix<double, 4, 7> jac;
            for (int j = 0; j < 7; ++j) {
                Vector sp = s, ap = a, bp = b, sm = s, am = a, bm = b;
                if (j < 4) { sp[j] += eps; sm[j] -= eps; }
                else if (j == 4) { ap[0] += eps; am[0] -= eps; }
                else { bp[j - 5] += eps; bm[j - 5] -= eps; }
                mean_dynamics(sp, ap, bp, fp);
                mean_dynamics(sm, am, bm, fm);
                jac.col(j) = (fp - fm) / (2 * eps);
            }
            best = std::max(best, spectral_norm(jac));
        }
        return 1.25 * best;
    }

    double g_, mc_, mp_, half_len_, force_mag_, dt_, max_speed_, theta_thr_, x_thr_, x_box_;
    double lf_ = 0.0;
};

EnvironmentPtr build_linear_toy(const ConfigMap& overrides)
{
    Params p = apply_overrides("linear_toy",
                               {{"horizon", 10},
                                {"noise_std", 0.01},
                                {"adversary_magnitude", 1.0},
                                {"threshold", 7.0},
                                {"initial_state", 1.0},
                                {"state_gain", 0.9},
                                {"action_gain", 0.5},
                                {"adversary_gain", -0.3},
                                {"action_magnitude", 1.0},
                                {"state_box", 3.0}},
                               overrides);
    EnvSpec sp;
    sp.name = "linear_toy";
    sp.state_dim = sp.action_dim = sp.adv_action_dim = 1;
    sp.horizon = static_cast<int>(p["horizon"]);
    sp.initial_state = filled(1, p["initial_state"]);
    sp.threshold = p["threshold"];
    sp.noise_std = p["noise_std"];
    sp.action_low = filled(1, -p["action_magnitude"]);
    sp.action_high = filled(1, p["action_magnitude"]);
    sp.adv_action_low = filled(1, -p["adversary_magnitude"]);
    sp.adv_action_high = filled(1, p["adversary_magnitude"]);
    p["reward_scale"] = 1.0;   // r = clip(1 - |s|, 0, 1)
    p["utility_scale"] = 1.0;  // u = 1 - (a / action_magnitude)^2
    sp.parameters = p;
    return std::make_shared<LinearToy>(sp);
}

EnvironmentPtr build_pendulum(const ConfigMap& overrides)
{
    Params p = apply_overrides("adv_pendulum",
                               {{"horizon", 30},
                                {"noise_std", 0.01},
                                {"adversary_magnitude", 0.3},
                                {"threshold", 27.0},
                                {"initial_angle", 0.0},
                                {"initial_velocity", 0.0},
                                {"gravity", 10.0},
                                {"mass", 1.0},
                                {"length", 1.0},
                                {"dt", 0.05},
                                {"max_speed", 8.0},
                                {"max_torque", 2.0},
                                {"height_threshold", 0.7},
                                {"angle_weight", 1.0},
                                {"speed_weight", 0.1},
                                {"torque_cost", 0.001}},
                               overrides);
    EnvSpec sp;
    sp.name = "adv_pendulum";
    sp.state_dim = 3;
    sp.action_dim = 1;
    sp.adv_action_dim = 2;
    sp.horizon = static_cast<int>(p["horizon"]);
    sp.initial_state = Vector(3);
    sp.initial_state << std::cos(p["initial_angle"]), std::sin(p["initial_angle"]),
        p["initial_velocity"];
    sp.threshold = p["threshold"];
    sp.noise_std = p["noise_std"];
    sp.action_low = filled(1, -p["max_torque"]);
    sp.action_high = filled(1, p["max_torque"]);
    sp.adv_action_low = filled(2, -p["adversary_magnitude"]);
    sp.adv_action_high = filled(2, p["adversary_magnitude"]);
    sp.parameters = p;
    return std::make_shared<AdvPendulum>(sp);
}

EnvironmentPtr build_cartpole(const ConfigMap& overrides)
{
    // Raw per-step cost |x| is rescaled to u = 1 - |x| / x_threshold, so a raw
    // cumulative-cost budget C maps to b = H - C / x_threshold.
    Params p = apply_overrides("adv_cartpole",
                               {{"horizon", 50},
                                {"noise_std", 0.01},
                                {"adversary_magnitude", 0.3},
                                {"threshold", -1.0},
                                {"raw_cost_budget", 30.0},
                                {"gravity", 9.8},
                                {"cart_mass", 1.0},
                                {"pole_mass", 0.1},
                                {"pole_half_length", 0.5},
                                {"force_mag", 10.0},
                                {"dt", 0.05},
                                {"max_speed", 10.0},
                                {"theta_threshold", 12.0 * std::numbers::pi / 180.0},
                                {"x_threshold", 2.4},
                                {"x_box", 5.0}},
                               overrides);
    EnvSpec sp;
    sp.name = "adv_cartpole";
    sp.state_dim = 4;
    sp.action_dim = 1;
    sp.adv_action_dim = 2;
    sp.horizon = static_cast<int>(p["horizon"]);
    sp.initial_state = Vector::Zero(4);
    if (p["threshold"] < 0.0)
        p["threshold"] = std::max(0.0, sp.horizon - p["raw_cost_budget"] / p["x_threshold"]);
    sp.threshold = p["threshold"];
    sp.noise_std = p["noise_std"];
    sp.action_low = filled(1, -1.0);
    sp.action_high = filled(1, 1.0);
    sp.adv_action_low = filled(2, -p["adversary_magnitude"]);
    sp.adv_action_high = filled(2, p["adversary_magnitude"]);
    sp.parameters = p;
    return std::make_shared<AdvCartPole>(sp);
}

}  // namespace

const std::vector<std::string>& env_names()
{
    static const std::vector<std::string> names{"linear_toy", "adv_pendulum", "adv_cartpole"};
    return names;
}

EnvironmentPtr make_env(const std::string& name, const ConfigMap& overrides)
{
    if (name == "linear_toy") return build_linear_toy(overrides);
    if (name == "adv_pendulum") return build_pendulum(overrides);
    if (name == "adv_cartpole") return build_cartpole(overrides);
    std::ostringstream os;
    os << "unknown environment '" << name << "'; expected one of:";
    for (const auto& n : env_names()) os << " " << n;
    throw ArgumentError(os.str());
}

}  // namespace rhc::env
