#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rhc/rollout.hpp"

using namespace rhc;

namespace {

struct Fixture {
    env::EnvironmentPtr env;
    policy::PolicySet set;
    policy::PolicyBundle bundle;

    explicit Fixture(const std::string& name, const env::ConfigMap& overrides = {})
        : env(env::make_env(name, overrides))
    {
        policy::FeatureConfig f;
        set = policy::make_policy_set(env->spec(), f, f, f, 3);
        bundle = policy::PolicyBundle::zeros(set);
    }

    rollout::Players players() const
    {
        return {set.protagonist, bundle.protagonist, set.adversary, bundle.adversary};
    }
};

// E[max(0, 1 - |X|)] for X ~ N(m, s^2) by 40-point Gauss-Hermite quadrature.
double expected_toy_reward(double m, double s)
{
    // Nodes and weights via the Golub-Welsch recurrence, computed once.
    static const auto rule = [] {
        const int n = 40;
        Matrix j = Matrix::Zero(n, n);
        for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(j);
        std::vector<std::pair<double, double>> out;
        for (int i = 0; i < n; ++i)
            out.emplace_back(eig.eigenvalues()[i], std::sqrt(M_PI) * std::pow(eig.eigenvectors()(0, i), 2));
        return out;
    }();
    if (s == 0.0) return std::max(0.0, 1.0 - std::abs(m));
    double total = 0.0;
    for (const auto& [x, w] : rule) total += w * std::max(0.0, 1.0 - std::abs(m + std::sqrt(2.0) * s * x));
    return total / std::sqrt(M_PI);
}

class Exploding final : public env::TransitionModel {
public:
    explicit Exploding(double cutoff) : cutoff_(cutoff) {}
    void next_state(const Vector& s, const Vector&, const Vector&, const Vector& noise, Vector& next) const override
    {
        next = s + noise;
        if (noise[0] > cutoff_) next[0] = std::numeric_limits<double>::infinity();
    }

private:
    double cutoff_;
};

}  // namespace

TEST(CommonNoise, ParticlesUseDerivedStreams)
{
    const auto e = env::make_env("adv_pendulum");
    const auto a = rollout::common_noise(e->spec(), 5, 17);
    const auto b = rollout::common_noise(e->spec(), 8, 17);
    ASSERT_EQ(a.size(), 5u);
    for (int i = 0; i < 5; ++i) {
        Rng rng(derive_seed(17, i));
        const auto direct = env::sample_noise(e->spec(), rng);
        ASSERT_EQ(a[i].size(), 30u);
        for (int h = 0; h < 30; ++h) {
            EXPECT_EQ(a[i][h], direct[h]);
            EXPECT_EQ(b[i][h], a[i][h]);
        }
    }
    EXPECT_NE(rollout::common_noise(e->spec(), 1, 18)[0][0], a[0][0]);
    EXPECT_THROW(rollout::common_noise(e->spec(), 0, 1), ArgumentError);
}

TEST(Evaluate, ToyMatchesQuadratureOracle)
{
    const double sigma = 0.2;
    Fixture f("linear_toy", {{"noise_std", sigma}});
    double expected = 0.0, mean = 1.0, var = 0.0;
    for (int h = 0; h < 10; ++h) {
        expected += expected_toy_reward(mean, std::sqrt(var));
        mean *= 0.9;
        var = 0.81 * var + sigma * sigma;
    }
    const auto est = rollout::evaluate_true(*f.env, f.players(), 20000, 5);
    EXPECT_NEAR(est.j_r, expected, 4 * est.std_err_r);
    EXPECT_DOUBLE_EQ(est.j_u, 10.0);
    EXPECT_EQ(est.std_err_u, 0.0);
    EXPECT_EQ(est.n_particles, 20000);
    EXPECT_EQ(est.mode, rollout::Mode::true_env);
}

TEST(Evaluate, SingleNoiselessParticleMatchesTrueRollout)
{
    Fixture f("adv_pendulum", {{"noise_std", 0.0}});
    Rng rng(2);
    f.bundle.protagonist = policy::random_params(f.set.protagonist, 1.0, rng);
    f.bundle.adversary = policy::random_params(f.set.adversary, 1.0, rng);
    const auto traj = env::rollout_true(
        *f.env, [&](const Vector& s) { return policy::act(f.set.protagonist, f.bundle.protagonist, s); },
        [&](const Vector& s) { return policy::act(f.set.adversary, f.bundle.adversary, s); }, 1);
    const auto est = rollout::evaluate_true(*f.env, f.players(), 1, 9);
    EXPECT_DOUBLE_EQ(est.j_r, traj.total_reward);
    EXPECT_DOUBLE_EQ(est.j_u, traj.total_utility);
}

TEST(Evaluate, StdErrIsSampleStdOverRootN)
{
    Fixture f("linear_toy", {{"noise_std", 0.3}});
    const auto noise = rollout::common_noise(f.env->spec(), 50, 4);
    env::TrueTransition truth(*f.env);
    std::vector<double> r;
    for (const auto& n : noise) {
        double jr = 0.0, ju = 0.0;
        ASSERT_TRUE(rollout::simulate(*f.env, truth, f.players(), n, jr, ju));
        r.push_back(jr);
    }
    double m = 0.0;
    for (double v : r) m += v / r.size();
    double ss = 0.0;
    for (double v : r) ss += (v - m) * (v - m);
    const auto est = rollout::evaluate(*f.env, truth, f.players(), noise);
    EXPECT_NEAR(est.j_r, m, 1e-12);
    EXPECT_NEAR(est.std_err_r, std::sqrt(ss / (r.size() - 1) / r.size()), 1e-12);
}

TEST(Simulate, RecordsStatesAndQueries)
{
    Fixture f("adv_cartpole");
    const auto noise = rollout::common_noise(f.env->spec(), 1, 1);
    env::TrueTransition truth(*f.env);
    std::vector<Vector> states, queries;
    double r = 0.0, u = 0.0;
    ASSERT_TRUE(rollout::simulate(*f.env, truth, f.players(), noise[0], r, u, &states, &queries));
    EXPECT_EQ(states.size(), 51u);
    EXPECT_EQ(queries.size(), 50u);
    EXPECT_EQ(states[0], f.env->spec().initial_state);
    EXPECT_EQ(queries[3].head(4), states[3]);
    EXPECT_EQ(queries[3].size(), 7);
}

TEST(Evaluate, DivergedParticlesAreDroppedOrFatal)
{
    Fixture f("linear_toy", {{"noise_std", 1.0}});
    const auto noise = rollout::common_noise(f.env->spec(), 200, 3);
    // P(some step of 10 exceeds 2.5 sigma) is about 6%.
    const auto est = rollout::evaluate(*f.env, Exploding(2.5), f.players(), noise);
    EXPECT_GT(est.n_dropped, 0);
    EXPECT_EQ(est.n_particles + est.n_dropped, 200);
    EXPECT_TRUE(std::isfinite(est.j_r));
    EXPECT_THROW(rollout::evaluate(*f.env, Exploding(-10.0), f.players(), noise), DivergenceError);
}

TEST(Hallucinated, ExactModelReproducesTrueDynamics)
{
    Fixture f("adv_pendulum");
    Rng rng(6);
    f.bundle.protagonist = policy::random_params(f.set.protagonist, 1.0, rng);
    f.bundle.eta_opt = policy::random_params(f.set.eta, 1.0, rng);
    f.bundle.eta_pes = policy::random_params(f.set.eta, 1.0, rng);
    model::ExactModel exact(f.env);
    const auto truth = rollout::evaluate_true(*f.env, f.players(), 16, 21);
    for (const auto& est : {rollout::optimistic_value(*f.env, exact, 2.0, f.set, f.bundle, 16, 21),
                            rollout::pessimistic_value(*f.env, exact, 2.0, f.set, f.bundle, 16, 21),
                            rollout::mean_value(*f.env, exact, f.set, f.bundle, 16, 21)}) {
        EXPECT_NEAR(est.j_r, truth.j_r, 1e-12);
        EXPECT_NEAR(est.j_u, truth.j_u, 1e-12);
    }
}

TEST(Hallucinated, EtaMovesPredictionsWithinBand)
{
    Fixture f("linear_toy", {{"initial_state", 0.5}});
    // One noisy observation far away leaves sigma near the prior everywhere on the path.
    model::GaussianProcess gp(Vector::Constant(3, 1.0), 0.01, 1e-4);
    gp.fit(Matrix::Constant(1, 3, 50.0), Matrix::Zero(1, 1));
    model::GpModel m(1, gp);
    // eta = +1 pushes the state up, eta = -1 down; reward 1 - |s| falls for s > 0.
    f.bundle.eta_opt = Vector::Zero(f.set.eta.param_count());
    f.bundle.eta_pes = f.bundle.eta_opt;
    f.bundle.eta_opt.tail(1).setConstant(-20.0);
    f.bundle.eta_pes.tail(1).setConstant(20.0);
    const auto mean = rollout::mean_value(*f.env, m, f.set, f.bundle, 4, 1);
    const auto opt = rollout::optimistic_value(*f.env, m, 1.0, f.set, f.bundle, 4, 1);
    const auto pes = rollout::pessimistic_value(*f.env, m, 1.0, f.set, f.bundle, 4, 1);
    EXPECT_GT(opt.j_r, mean.j_r);
    EXPECT_LT(pes.j_r, mean.j_r);
    // Each step moves the state by at most beta * sigma = 0.1.
    EXPECT_LT(opt.j_r - mean.j_r, 0.1 * 45 + 1e-9);
}
