#include "rhc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rhc/env.hpp"
#include "rhc/model.hpp"
#include "rhc/objective.hpp"
#include "rhc/policy.hpp"
#include "rhc/rollout.hpp"

namespace rhc::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack for floating-point round-off on inequalities that hold exactly.
bool exceeds(double lhs, double rhs, double tolerance)
{
    return lhs > rhs + tolerance + 1e-12 * std::max(1.0, std::abs(rhs));
}

}  // namespace

double LipschitzProfile::policy_factor() const { return std::sqrt(1.0 + L_pi * L_pi + L_pibar * L_pibar); }
double LipschitzProfile::L_f_pi() const { return L_f * policy_factor(); }
double LipschitzProfile::C() const { return (1.0 + L_f + 2.0 * L_sigma) * policy_factor(); }
double LipschitzProfile::L_r_lambda_u() const { return L_r + lambda * L_u; }

void BoundConstants::validate() const
{
    require(c > 2.0, "BoundConstants: c must be > 2");
    require(R_max > 0.0, "BoundConstants: R_max must be > 0");
    require(H >= 1, "BoundConstants: H must be >= 1");
    require(beta_T >= 0.0, "BoundConstants: beta_T must be >= 0");
}

double BoundConstants::alpha(const LipschitzProfile& p, double sigma_sum) const
{
    const double denom =
        p.lambda * 2.0 * p.L_u * H * std::pow(beta_T, H) * std::pow(p.C(), H) * sigma_sum;
    return denom > 0.0 ? c * R_max / denom : kInf;
}

void CheckReport::add(double lhs, double rhs, double tolerance)
{
    ++trials;
    if (exceeds(lhs, rhs, tolerance)) ++violations;
    if (rhs > 0.0 && std::isfinite(rhs)) max_ratio = std::max(max_ratio, lhs / rhs);
    const double excess = lhs - rhs;
    if (trials == 1 || excess > max_excess) max_excess = excess;
}

namespace {

const std::vector<std::string> kEnvs{"linear_toy", "adv_pendulum", "adv_cartpole"};

policy::FeatureConfig random_features(Rng& rng)
{
    std::uniform_int_distribution<int> pick(0, 2);
    policy::FeatureConfig f;
    f.kind = static_cast<policy::FeatureKind>(pick(rng));
    f.num_features = 8;
    f.bandwidth = 1.0;
    f.weight_bound = 5.0;
    return f;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// A state close to s on the environment's domain.
Vector nearby_state(const env::Environment& e, const Vector& s, double scale, Rng& rng)
{
    std::normal_distribution<double> n(0.0, scale);
    if (e.spec().name == "adv_pendulum") {
        const double th = std::atan2(s[1], s[0]) + n(rng);
        Vector out(3);
        out << std::cos(th), std::sin(th), s[2] + n(rng);
        return out;
    }
    Vector out = s;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += n(rng);
    return out;
}

// GP posterior fitted on random transitions of the environment's true dynamics.
std::shared_ptr<model::GpModel> random_posterior(const env::EnvironmentPtr& e, int n, Rng& rng)
{
    const auto& sp = e->spec();
    std::vector<env::TransitionRecord> recs;
    for (int i = 0; i < n; ++i) {
        env::TransitionRecord r;
        r.state = e->sample_state(rng);
        r.action.resize(sp.action_dim);
        for (int j = 0; j < sp.action_dim; ++j) r.action[j] = uniform(rng, sp.action_low[j], sp.action_high[j]);
        r.adv_action.resize(sp.adv_action_dim);
        for (int j = 0; j < sp.adv_action_dim; ++j)
            r.adv_action[j] = uniform(rng, sp.adv_action_low[j], sp.adv_action_high[j]);
        r.next_state = e->mean_dynamics(r.state, r.action, r.adv_action);
        std::normal_distribution<double> noise(0.0, 0.05);
        for (int j = 0; j < sp.state_dim; ++j) r.next_state[j] += noise(rng);
        recs.push_back(r);
    }
    model::ModelConfig cfg;
    cfg.lengthscale = uniform(rng, 0.5, 2.0);
    cfg.signal_variance = uniform(rng, 0.2, 2.0);
    cfg.observation_noise = 0.05 * 0.05;
    auto m = model::fit(recs, e, cfg, 0);
    return std::const_pointer_cast<model::GpModel>(std::dynamic_pointer_cast<const model::GpModel>(m));
}

// f(x) = mu(x) + beta * c .* sigma(x) with a constant c in [-1, 1]^p: a member
// of the plausible set whose Lipschitz constant is bounded in closed form.
class ShiftedModel final : public env::TransitionModel {
public:
    ShiftedModel(const model::DynamicsModel& m, double beta, Vector c) : m_(m), beta_(beta), c_(std::move(c)) {}
    void next_state(const Vector& s, const Vector& a, const Vector& abar, const Vector& noise,
                    Vector& next) const override
    {
        Vector sigma;
        m_.predict(model::make_query(s, a, abar), next, sigma);
        next.array() += beta_ * c_.array() * sigma.array();
        next += noise;
    }
    double lipschitz() const { return m_.mean_lipschitz() + beta_ * c_.cwiseAbs().maxCoeff() * m_.sigma_lipschitz(); }

private:
    const model::DynamicsModel& m_;
    double beta_;
    Vector c_;
};

}  // namespace

CheckReport check_lemma1(const Options& opt)
{
    CheckReport rep;
    rep.name = "lemma1_composite_lipschitz";
    Rng rng(derive_seed(opt.seed, 1));
    std::vector<env::EnvironmentPtr> envs;
    for (const auto& n : kEnvs) envs.push_back(env::make_env(n));
    for (long long k = 0; k < opt.lemma1_trials; ++k) {
        const auto& e = *envs[k % envs.size()];
        const auto& sp = e.spec();
        const auto pspec = policy::make_spec(sp.state_dim, sp.action_low, sp.action_high, random_features(rng), rng());
        const auto aspec =
            policy::make_spec(sp.state_dim, sp.adv_action_low, sp.adv_action_high, random_features(rng), rng());
        const Vector pp = policy::random_params(pspec, uniform(rng, 0.0, 3.0), rng);
        const Vector ap = policy::random_params(aspec, uniform(rng, 0.0, 3.0), rng);
        const Vector s = e.sample_state(rng);
        const Vector s2 = (k % 2 == 0) ? e.sample_state(rng) : nearby_state(e, s, std::pow(10.0, uniform(rng, -4, -1)), rng);
        const Vector f1 = e.mean_dynamics(s, policy::act(pspec, pp, s), policy::act(aspec, ap, s));
        const Vector f2 = e.mean_dynamics(s2, policy::act(pspec, pp, s2), policy::act(aspec, ap, s2));
        LipschitzProfile prof;
        prof.L_f = e.lipschitz().dynamics;
        prof.L_pi = policy::lipschitz_bound(pspec, pp);
        prof.L_pibar = policy::lipschitz_bound(aspec, ap);
        rep.add((f1 - f2).norm(), prof.L_f_pi() * (s - s2).norm());
    }
    return rep;
}

double lemma1_tightness(std::uint64_t seed, int trials)
{
    const auto e = env::make_env("linear_toy");
    const auto& sp = e->spec();
    const double a = sp.parameters.at("state_gain"), b = sp.parameters.at("action_gain"),
                 c = sp.parameters.at("adversary_gain");
    policy::FeatureConfig lin{policy::FeatureKind::linear, 1, 1.0, 5.0};
    const auto pspec = policy::make_spec(1, sp.action_low, sp.action_high, lin, 0);
    const auto aspec = policy::make_spec(1, sp.adv_action_low, sp.adv_action_high, lin, 0);
    // (1, k, kbar) parallel to the gradient (a, b, c) makes Cauchy-Schwarz tight.
    const Vector pp = Vector::Constant(1, b / a);
    const Vector ap = Vector::Constant(1, c / a / sp.adv_action_high[0]);
    LipschitzProfile prof;
    prof.L_f = e->lipschitz().dynamics;
    prof.L_pi = policy::lipschitz_bound(pspec, pp);
    prof.L_pibar = policy::lipschitz_bound(aspec, ap);
    Rng rng(seed);
    double best = 0.0;
    for (int k = 0; k < trials; ++k) {
        const Vector s = Vector::Constant(1, uniform(rng, -1e-3, 1e-3));
        const Vector s2 = Vector::Constant(1, uniform(rng, -1e-3, 1e-3));
        if (s[0] == s2[0]) continue;
        const Vector f1 = e->mean_dynamics(s, policy::act(pspec, pp, s), policy::act(aspec, ap, s));
        const Vector f2 = e->mean_dynamics(s2, policy::act(pspec, pp, s2), policy::act(aspec, ap, s2));
        best = std::max(best, (f1 - f2).norm() / (prof.L_f_pi() * (s - s2).norm()));
    }
    return best;
}

std::vector<CheckReport> check_lemma2_3_4(const Options& opt)
{
    CheckReport l2, l3, l4;
    l2.name = "lemma2_reward_deviation";
    l3.name = "lemma3_utility_deviation";
    l4.name = "lemma4_robust_utility_deviation";
    l4.notes.push_back("min over a finite adversary grid of " + std::to_string(opt.lemma4_grid) + " policies");
    Rng rng(derive_seed(opt.seed, 2));
    for (long long k = 0; k < opt.coupled_trials; ++k) {
        const std::string& name = kEnvs[k % kEnvs.size()];
        const auto e = env::make_env(name, {{"horizon", opt.coupled_horizon}, {"noise_std", uniform(rng, 0.0, 0.1)}});
        const auto& sp = e->spec();
        const auto post = random_posterior(e, 20, rng);
        policy::FeatureConfig aff{policy::FeatureKind::affine, 8, 1.0, 5.0};
        const auto set = policy::make_policy_set(sp, aff, aff, aff, rng());
        const Vector prot = policy::random_params(set.protagonist, uniform(rng, 0.0, 2.0), rng);
        const Vector eta = policy::random_params(set.eta, 2.0, rng);
        const double beta = uniform(rng, 0.0, 2.0);
        const model::HallucinatedDynamics tilde(*post, beta, &set.eta, &eta, model::HallucinationMode::optimistic);
        const env::TrueTransition truth(*e);
        const auto noise = rollout::common_noise(sp, opt.coupled_particles, rng());
        const auto L = e->lipschitz();
        const double lpi = policy::lipschitz_bound(set.protagonist, prot);

        double min_f = kInf, min_t = kInf, sup_rhs = 0.0;
        for (int g = 0; g < opt.lemma4_grid; ++g) {
            const Vector adv = policy::random_params(set.adversary, uniform(rng, 0.0, 2.0), rng);
            rollout::Players players{set.protagonist, prot, set.adversary, adv};
            double jr_f = 0, ju_f = 0, jr_t = 0, ju_t = 0, dev = 0;
            std::vector<Vector> sf, st;
            int kept = 0;
            for (const auto& n : noise) {
                double r1, u1, r2, u2;
                const bool ok1 = rollout::simulate(*e, truth, players, n, r1, u1, &sf);
                const bool ok2 = rollout::simulate(*e, tilde, players, n, r2, u2, &st);
                if (!ok1 || !ok2) continue;
                ++kept;
                jr_f += r1;
                ju_f += u1;
                jr_t += r2;
                ju_t += u2;
                for (std::size_t h = 0; h < sf.size(); ++h) dev += (sf[h] - st[h]).norm();
            }
            if (kept == 0) continue;
            jr_f /= kept;
            ju_f /= kept;
            jr_t /= kept;
            ju_t /= kept;
            dev /= kept;
            LipschitzProfile prof;
            prof.L_pi = lpi;
            prof.L_pibar = policy::lipschitz_bound(set.adversary, adv);
            const double rhs_r = L.reward * prof.policy_factor() * dev;
            const double rhs_u = std::isfinite(L.utility) ? L.utility * prof.policy_factor() * dev : kInf;
            l2.add(std::abs(jr_f - jr_t), rhs_r);
            l3.add(std::abs(ju_f - ju_t), rhs_u);
            min_f = std::min(min_f, ju_f);
            min_t = std::min(min_t, ju_t);
            sup_rhs = std::max(sup_rhs, rhs_u);
        }
        if (std::isfinite(min_f)) l4.add(std::abs(min_f - min_t), sup_rhs);
    }
    return {l2, l3, l4};
}

std::vector<CheckReport> check_lemma5(const Options& opt)
{
    CheckReport stated, safe;
    stated.name = "lemma5_state_deviation_exp_h_minus_1";
    safe.name = "lemma5_state_deviation_exp_h";
    Rng rng(derive_seed(opt.seed, 5));
    const std::vector<std::string> envs{"linear_toy", "adv_pendulum"};
    for (long long k = 0; k < opt.lemma5_trials; ++k) {
        const auto e = env::make_env(envs[k % envs.size()], {{"horizon", opt.lemma5_horizon}});
        const auto& sp = e->spec();
        const auto post = random_posterior(e, static_cast<int>(uniform(rng, 5, 40)), rng);
        policy::FeatureConfig aff{policy::FeatureKind::affine, 8, 1.0, 5.0};
        const auto set = policy::make_policy_set(sp, aff, aff, aff, rng());
        const Vector prot = policy::random_params(set.protagonist, uniform(rng, 0.0, 2.0), rng);
        const Vector adv = policy::random_params(set.adversary, uniform(rng, 0.0, 2.0), rng);
        const Vector eta = policy::random_params(set.eta, 3.0, rng);
        const double beta = (k % 10 == 0) ? 0.0 : uniform(rng, 0.0, 3.0);
        Vector c(sp.state_dim);
        for (int i = 0; i < sp.state_dim; ++i) c[i] = uniform(rng, -1.0, 1.0);
        const ShiftedModel f(*post, beta, c);
        const model::HallucinatedDynamics ftilde(*post, beta, &set.eta, &eta, model::HallucinationMode::optimistic);

        LipschitzProfile prof;
        prof.L_f = f.lipschitz();
        prof.L_sigma = post->sigma_lipschitz();
        prof.L_pi = policy::lipschitz_bound(set.protagonist, prot);
        prof.L_pibar = policy::lipschitz_bound(set.adversary, adv);
        const double base = (1.0 + prof.L_f + 2.0 * beta * prof.L_sigma) * prof.policy_factor();

        Rng nrng(rng());
        const auto noise = env::sample_noise(sp, nrng);
        rollout::Players players{set.protagonist, prot, set.adversary, adv};
        std::vector<Vector> s, st, queries;
        double r, u;
        if (!rollout::simulate(*e, f, players, noise, r, u, &s, &queries)) continue;
        if (!rollout::simulate(*e, ftilde, players, noise, r, u, &st)) continue;
        double sigma_sum = 0.0;
        Vector mu, sigma;
        for (int h = 0; h <= sp.horizon; ++h) {
            const double lhs = (s[h] - st[h]).norm();
            const double rhs_stated = h == 0 ? 0.0 : 2.0 * beta * std::pow(base, h - 1) * sigma_sum;
            const double rhs_safe = h == 0 ? 0.0 : 2.0 * beta * std::pow(base, h) * sigma_sum;
            stated.add(lhs, rhs_stated);
            safe.add(lhs, rhs_safe);
            if (h < sp.horizon) {
                post->predict(queries[h], mu, sigma);
                sigma_sum += sigma.norm();
            }
        }
    }
    return {stated, safe};
}

std::vector<CheckReport> check_propositions(const Options& opt)
{
    using objective::rectify;
    CheckReport diff, absb, embed, corner;
    diff.name = "proposition_rectifier_difference";
    absb.name = "proposition_rectifier_abs";
    embed.name = "proposition_two_coordinate_embedding";
    corner.name = "proposition_boundary_grid";
    embed.notes.push_back("functional M(x) = max_i x_i applied to (a, 0), (b, 0)");
    Rng rng(derive_seed(opt.seed, 7));
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    auto max_coord = [](double x0, double x1) { return std::max(x0, x1); };
    for (long long k = 0; k < opt.proposition_pairs; ++k) {
        const double a = u(rng), b = u(rng);
        diff.add(rectify(a) - rectify(b), rectify(a - b));
        absb.add(rectify(a), std::abs(a));
        embed.add(max_coord(a, 0.0) - max_coord(b, 0.0), max_coord(a - b, 0.0 - 0.0));
    }
    const std::vector<double> edge{0.0, -0.0, 1e-300, -1e-300, 4.9e-324, -4.9e-324, 1e-12, -1e-12, 1.0, -1.0};
    for (double a : edge)
        for (double b : edge) {
            corner.add(rectify(a) - rectify(b), rectify(a - b));
            corner.add(rectify(a), std::abs(a));
        }
    return {diff, absb, embed, corner};
}

std::vector<CheckReport> check_lemma6_7_8(const AuditSeries& run, const AuditTolerance& tol)
{
    CheckReport l6, l7, l8;
    l6.name = "lemma6_optimistic_violation";
    l7.name = "lemma7_violation";
    l8.name = "lemma8_regret";
    for (auto* r : {&l6, &l7, &l8}) {
        r->exact = false;
        r->notes.push_back("adversary minima and oracle value are budget-approximate; tolerance z = " +
                           objective::format_double(tol.z) + " standard errors");
    }
    const auto& k = run.constants;
    const int H = k.H;
    long long skipped6 = 0;
    for (const auto& ep : run.episodes) {
        LipschitzProfile p = run.profile;
        p.lambda = ep.lambda;
        const double bh_ch = std::pow(k.beta_T, H) * std::pow(p.C(), H);
        const double penalty_term = ep.lambda > 0.0 ? k.c * k.R_max / ep.lambda : kInf;
        if (std::isfinite(ep.min_grid_opt_utility) && ep.lambda > 0.0)
            l6.add(objective::rectify(run.threshold - ep.min_grid_opt_utility), penalty_term, tol.absolute);
        else
            ++skipped6;
        const double rhs7 = penalty_term + 2.0 * p.L_u * H * bh_ch * ep.sigma_sum;
        l7.add(ep.instant_violation, rhs7, tol.z * ep.violation_std_err + tol.absolute);
        const double rhs8 = 4.0 * p.L_r_lambda_u() * bh_ch * H * ep.sigma_sum;
        l8.add(ep.instant_regret, std::isnan(rhs8) ? kInf : rhs8, tol.z * ep.regret_std_err + tol.absolute);
    }
    if (skipped6 > 0)
        l6.notes.push_back(std::to_string(skipped6) + " episodes skipped (no grid minimum logged or lambda = 0)");
    return {l6, l7, l8};
}

TheoremResult check_theorem1(const AuditSeries& run, const AuditTolerance& tol)
{
    TheoremResult out;
    out.regret_envelope.name = "theorem_regret_envelope";
    out.violation_envelope.name = "theorem_violation_envelope";
    out.regret_envelope.exact = out.violation_envelope.exact = false;
    const auto& k = run.constants;
    const int H = k.H;
    double R = 0.0, V = 0.0, G = 0.0, var_r = 0.0, var_v = 0.0, penalty_sum = 0.0;
    std::vector<double> r_over_t, v_over_t;
    int T = 0;
    for (const auto& ep : run.episodes) {
        ++T;
        R += ep.instant_regret;
        V += ep.instant_violation;
        G += ep.gamma_increment;
        var_r += ep.regret_std_err * ep.regret_std_err;
        var_v += ep.violation_std_err * ep.violation_std_err;
        LipschitzProfile p = run.profile;
        p.lambda = ep.lambda;
        penalty_sum += ep.lambda > 0.0 ? k.c * k.R_max / ep.lambda : kInf;
        const double bh_ch = std::pow(k.beta_T, H) * std::pow(p.C(), H);
        const double root = std::pow(H, 1.5) * std::sqrt(T * G);
        double rb = 4.0 * p.L_r_lambda_u() * bh_ch * root;
        double vb = 2.0 * p.L_u * bh_ch * root + penalty_sum;
        if (std::isnan(rb)) rb = kInf;
        if (std::isnan(vb)) vb = kInf;
        out.regret_envelope.add(R, rb, tol.z * std::sqrt(var_r) + tol.absolute);
        out.violation_envelope.add(V, vb, tol.z * std::sqrt(var_v) + tol.absolute);
        out.regret_bound = rb;
        out.violation_bound = vb;
        r_over_t.push_back(R / T);
        v_over_t.push_back(V / T);
    }
    if (T >= 2) {
        const int mid = T / 2 - 1;
        out.regret_trend = r_over_t.back() <= r_over_t[mid];
        out.violation_trend = v_over_t.back() <= v_over_t[mid];
    }
    return out;
}

}  // namespace rhc::theory
