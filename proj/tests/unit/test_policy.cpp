#include <gtest/gtest.h>

#include <cmath>

#include "rhc/policy.hpp"

using namespace rhc;
using namespace rhc::policy;

namespace {

PolicySpec spec_of(FeatureKind kind, int in = 3, int out = 2, std::uint64_t seed = 5)
{
    FeatureConfig cfg;
    cfg.kind = kind;
    cfg.num_features = 16;
    cfg.bandwidth = 0.8;
    Vector lo(out), hi(out);
    for (int i = 0; i < out; ++i) {
        lo[i] = -1.0 - i;
        hi[i] = 2.0 + 0.5 * i;
    }
    return make_spec(in, lo, hi, cfg, seed);
}

Vector random_vec(int n, double scale, Rng& rng)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

}  // namespace

TEST(Spec, ParameterCounts)
{
    EXPECT_EQ(spec_of(FeatureKind::linear).param_count(), 6);
    EXPECT_EQ(spec_of(FeatureKind::affine).param_count(), 8);
    EXPECT_EQ(spec_of(FeatureKind::random_fourier).param_count(), 32);
    EXPECT_EQ(spec_of(FeatureKind::random_fourier).omega.rows(), 16);
}

TEST(Spec, ParseFeatureKind)
{
    EXPECT_EQ(parse_feature_kind("linear"), FeatureKind::linear);
    EXPECT_EQ(to_string(parse_feature_kind("random_fourier")), "random_fourier");
    try {
        parse_feature_kind("mlp");
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("affine"), std::string::npos);
    }
}

TEST(Spec, RejectsBadBounds)
{
    FeatureConfig cfg;
    EXPECT_THROW(make_spec(2, Vector::Constant(1, 1.0), Vector::Constant(1, -1.0), cfg, 0), ArgumentError);
    cfg.weight_bound = 0.0;
    EXPECT_THROW(make_spec(2, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), cfg, 0), ArgumentError);
}

TEST(Act, ZeroParametersGiveMidpoint)
{
    for (auto kind : {FeatureKind::linear, FeatureKind::affine, FeatureKind::random_fourier}) {
        const auto s = spec_of(kind);
        const Vector out = act(s, Vector::Zero(s.param_count()), Vector::Constant(3, 0.7));
        EXPECT_TRUE(out.isApprox(s.mid()));
    }
}

TEST(Act, MatchesHandComputedTanh)
{
    const auto s = spec_of(FeatureKind::affine);
    Matrix w(2, 3);
    w << 0.1, -0.2, 0.3, 0.5, 0.0, -0.4;
    Vector b(2);
    b << 0.05, -0.1;
    const Vector p = flatten(s, w, b);
    Vector x(3);
    x << 1.0, 2.0, -1.0;
    const Vector out = act(s, p, x);
    const double z0 = 0.1 - 0.4 - 0.3 + 0.05, z1 = 0.5 + 0.4 - 0.1;
    EXPECT_NEAR(out[0], 0.5 + 1.5 * std::tanh(z0), 1e-15);
    EXPECT_NEAR(out[1], 0.25 + 2.25 * std::tanh(z1), 1e-15);
}

TEST(Act, FourierFeaturesMatchDefinition)
{
    const auto s = spec_of(FeatureKind::random_fourier);
    Rng rng(1);
    const Vector x = random_vec(3, 2.0, rng);
    Vector phi;
    features(s, x, phi);
    for (int i = 0; i < 16; ++i) {
        double z = s.phase[i];
        for (int j = 0; j < 3; ++j) z += s.omega(i, j) * x[j];
        EXPECT_NEAR(phi[i], std::sqrt(2.0 / 16) * std::cos(z), 1e-14);
    }
    // Same seed, same features; different seed, different features.
    EXPECT_EQ(spec_of(FeatureKind::random_fourier, 3, 2, 5).omega, s.omega);
    EXPECT_NE(spec_of(FeatureKind::random_fourier, 3, 2, 6).omega, s.omega);
}

TEST(Act, OutputsStayInBounds)
{
    Rng rng(2);
    for (auto kind : {FeatureKind::linear, FeatureKind::affine, FeatureKind::random_fourier}) {
        const auto s = spec_of(kind);
        for (int k = 0; k < 500; ++k) {
            const Vector p = random_vec(s.param_count(), 50.0, rng);
            const Vector out = act(s, p, random_vec(3, 100.0, rng));
            EXPECT_TRUE((out.array() >= s.output_low.array()).all());
            EXPECT_TRUE((out.array() <= s.output_high.array()).all());
        }
    }
}

TEST(Act, LengthMismatchThrows)
{
    const auto s = spec_of(FeatureKind::affine);
    EXPECT_THROW(act(s, Vector::Zero(7), Vector::Zero(3)), ArgumentError);
    EXPECT_THROW(act(s, Vector::Zero(8), Vector::Zero(2)), ArgumentError);
}

TEST(Params, FlattenRoundTrip)
{
    Rng rng(3);
    for (auto kind : {FeatureKind::linear, FeatureKind::affine, FeatureKind::random_fourier}) {
        const auto s = spec_of(kind);
        const Vector p = random_vec(s.param_count(), 1.0, rng);
        const Matrix w = unflatten_weights(s, p);
        const Vector b = unflatten_bias(s, p);
        EXPECT_EQ(w.rows(), 2);
        EXPECT_EQ(w.cols(), s.feature_dim());
        EXPECT_EQ(flatten(s, w, b), p);
    }
}

TEST(Params, ProjectionClipsRowsAndBias)
{
    const auto s = spec_of(FeatureKind::affine);
    Matrix w(2, 3);
    w << 3.0, 4.0, 12.0, 0.1, 0.2, 0.3;
    Vector b(2);
    b << -9.0, 1.0;
    Vector p = flatten(s, w, b);
    project(s, p);
    const Matrix pw = unflatten_weights(s, p);
    EXPECT_NEAR(pw.row(0).norm(), 5.0, 1e-12);
    EXPECT_TRUE(pw.row(0).isApprox(w.row(0) * 5.0 / 13.0));
    EXPECT_EQ(pw.row(1), w.row(1));
    EXPECT_EQ(unflatten_bias(s, p)[0], -5.0);
    EXPECT_EQ(unflatten_bias(s, p)[1], 1.0);
}

TEST(Params, RandomParamsAreProjectedAndSeeded)
{
    const auto s = spec_of(FeatureKind::affine);
    Rng a(4), b(4);
    const Vector pa = random_params(s, 20.0, a);
    EXPECT_EQ(pa, random_params(s, 20.0, b));
    EXPECT_LE(unflatten_weights(s, pa).rowwise().norm().maxCoeff(), 5.0 + 1e-12);
    EXPECT_LE(unflatten_bias(s, pa).cwiseAbs().maxCoeff(), 5.0);
}

TEST(Lipschitz, BoundHoldsOnRandomPairs)
{
    Rng rng(5);
    for (auto kind : {FeatureKind::linear, FeatureKind::affine, FeatureKind::random_fourier}) {
        const auto s = spec_of(kind);
        for (int k = 0; k < 50; ++k) {
            const Vector p = random_params(s, 3.0, rng);
            const double bound = lipschitz_bound(s, p);
            EXPECT_LE(bound, class_lipschitz_bound(s) + 1e-12);
            for (int j = 0; j < 200; ++j) {
                const Vector x1 = random_vec(3, 3.0, rng);
                const Vector x2 = j % 2 ? Vector(x1 + random_vec(3, 1e-3, rng)) : random_vec(3, 3.0, rng);
                const double ratio = (act(s, p, x1) - act(s, p, x2)).norm() / (x1 - x2).norm();
                EXPECT_LE(ratio, bound * (1 + 1e-12));
            }
        }
    }
}

TEST(Lipschitz, ZeroPolicyIsConstant)
{
    const auto s = spec_of(FeatureKind::affine);
    EXPECT_EQ(lipschitz_bound(s, Vector::Zero(s.param_count())), 0.0);
}

TEST(PolicySet, DimensionsFollowEnvironment)
{
    env::EnvSpec e;
    e.state_dim = 3;
    e.action_dim = 1;
    e.adv_action_dim = 2;
    e.action_low = Vector::Constant(1, -2);
    e.action_high = Vector::Constant(1, 2);
    e.adv_action_low = Vector::Constant(2, -0.3);
    e.adv_action_high = Vector::Constant(2, 0.3);
    FeatureConfig f;
    const auto set = make_policy_set(e, f, f, f, 1);
    EXPECT_EQ(set.protagonist.input_dim, 3);
    EXPECT_EQ(set.protagonist.output_dim, 1);
    EXPECT_EQ(set.adversary.output_dim, 2);
    EXPECT_EQ(set.eta.input_dim, 6);
    EXPECT_EQ(set.eta.output_dim, 3);
    EXPECT_EQ(set.eta.output_high, Vector::Constant(3, 1.0));
    const auto z = PolicyBundle::zeros(set);
    EXPECT_EQ(z.protagonist.size(), 4);
    EXPECT_EQ(z.eta_pes.size(), 21);
}
