#include "rhc/policy.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace rhc::policy {

FeatureKind parse_feature_kind(const std::string& name)
{
    if (name == "linear") return FeatureKind::linear;
    if (name == "affine") return FeatureKind::affine;
    if (name == "random_fourier") return FeatureKind::random_fourier;
    throw ArgumentError("unknown feature kind '" + name +
                        "'; expected one of: linear affine random_fourier");
}

std::string to_string(FeatureKind kind)
{
    switch (kind) {
    case FeatureKind::linear: return "linear";
    case FeatureKind::affine: return "affine";
    case FeatureKind::random_fourier: return "random_fourier";
    }
    return "?";
}

int PolicySpec::feature_dim() const
{
    return features == FeatureKind::random_fourier ? num_features : input_dim;
}

int PolicySpec::param_count() const
{
    return output_dim * feature_dim() + (has_bias() ? output_dim : 0);
}

double PolicySpec::feature_lipschitz() const
{
    if (features != FeatureKind::random_fourier) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(omega);
    return std::sqrt(2.0 / num_features) * svd.singularValues()(0);
}

PolicySpec make_spec(int input_dim, const Vector& low, const Vector& high, const FeatureConfig& cfg,
                     std::uint64_t feature_seed)
{
    require(input_dim >= 1, "policy: input_dim must be >= 1");
    require(low.size() == high.size() && low.size() >= 1, "policy: bad output bounds");
    require((low.array() <= high.array()).all(), "policy: output_low must be <= output_high");
    require(cfg.weight_bound > 0.0, "policy: weight_bound must be > 0");
    PolicySpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = static_cast<int>(low.size());
    spec.output_low = low;
    spec.output_high = high;
    spec.features = cfg.kind;
    spec.num_features = cfg.num_features;
    spec.bandwidth = cfg.bandwidth;
    spec.weight_bound = cfg.weight_bound;
    if (cfg.kind == FeatureKind::random_fourier) {
        require(cfg.num_features >= 1, "policy: num_features must be >= 1");
        require(cfg.bandwidth > 0.0, "policy: bandwidth must be > 0");
        Rng rng(feature_seed);
        std::normal_distribution<double> normal(0.0, 1.0 / cfg.bandwidth);
        std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
        spec.omega.resize(cfg.num_features, input_dim);
        for (int i = 0; i < cfg.num_features; ++i)
            for (int j = 0; j < input_dim; ++j) spec.omega(i, j) = normal(rng);
        spec.phase.resize(cfg.num_features);
        for (int i = 0; i < cfg.num_features; ++i) spec.phase[i] = uni(rng);
    }
    return spec;
}

void features(const PolicySpec& spec, const Vector& x, Vector& phi)
{
    if (spec.features != FeatureKind::random_fourier) {
        phi = x;
        return;
    }
    phi.noalias() = spec.omega * x;
    phi += spec.phase;
    phi = std::sqrt(2.0 / spec.num_features) * phi.array().cos();
}

Matrix unflatten_weights(const PolicySpec& spec, const Vector& params)
{
    require(params.size() == spec.param_count(), "policy: parameter vector has wrong length");
    const int k = spec.feature_dim();
    Matrix w(spec.output_dim, k);
    for (int i = 0; i < spec.output_dim; ++i) w.row(i) = params.segment(i * k, k).transpose();
    return w;
}

Vector unflatten_bias(const PolicySpec& spec, const Vector& params)
{
    require(params.size() == spec.param_count(), "policy: parameter vector has wrong length");
    if (!spec.has_bias()) return Vector::Zero(spec.output_dim);
    return params.tail(spec.output_dim);
}

Vector flatten(const PolicySpec& spec, const Matrix& weights, const Vector& bias)
{
    const int k = spec.feature_dim();
    require(weights.rows() == spec.output_dim && weights.cols() == k, "policy: weights have wrong shape");
    Vector out(spec.param_count());
    for (int i = 0; i < spec.output_dim; ++i) out.segment(i * k, k) = weights.row(i).transpose();
    if (spec.has_bias()) {
        if (bias.size() == 0)
            out.tail(spec.output_dim).setZero();
        else {
            require(bias.size() == spec.output_dim, "policy: bias has wrong length");
            out.tail(spec.output_dim) = bias;
        }
    }
    return out;
}

void act_into(const PolicySpec& spec, const Vector& params, const Vector& x, Vector& out)
{
    if (params.size() != spec.param_count() || x.size() != spec.input_dim)
        throw ArgumentError("act: parameter or input length mismatch");
    Vector phi;
    features(spec, x, phi);
    const int k = spec.feature_dim();
    out.resize(spec.output_dim);
    for (int i = 0; i < spec.output_dim; ++i) {
        double z = params.segment(i * k, k).dot(phi);
        if (spec.has_bias()) z += params[spec.output_dim * k + i];
        const double mid = 0.5 * (spec.output_low[i] + spec.output_high[i]);
        const double half = 0.5 * (spec.output_high[i] - spec.output_low[i]);
        out[i] = std::clamp(mid + half * std::tanh(z), spec.output_low[i], spec.output_high[i]);
    }
}

Vector act(const PolicySpec& spec, const Vector& params, const Vector& x)
{
    Vector out;
    act_into(spec, params, x, out);
    return out;
}

double lipschitz_bound(const PolicySpec& spec, const Vector& params)
{
    Matrix w = unflatten_weights(spec, params);
    w = spec.half_range().asDiagonal() * w;
    if (w.isZero(0.0)) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(w);
    return svd.singularValues()(0) * spec.feature_lipschitz();
}

double class_lipschitz_bound(const PolicySpec& spec)
{
    return spec.half_range().maxCoeff() * std::sqrt(static_cast<double>(spec.output_dim)) *
           spec.weight_bound * spec.feature_lipschitz();
}

void project(const PolicySpec& spec, Vector& params)
{
    require(params.size() == spec.param_count(), "policy: parameter vector has wrong length");
    const int k = spec.feature_dim();
    for (int i = 0; i < spec.output_dim; ++i) {
        auto row = params.segment(i * k, k);
        const double n = row.norm();
        if (n > spec.weight_bound) row *= spec.weight_bound / n;
    }
    if (spec.has_bias()) {
        auto b = params.tail(spec.output_dim);
        b = b.cwiseMax(-spec.weight_bound).cwiseMin(spec.weight_bound);
    }
}

Vector perturb(const PolicySpec& spec, const Vector& params, double scale, Rng& rng)
{
    Vector out = params;
    if (scale > 0.0) {
        std::normal_distribution<double> normal(0.0, scale);
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += normal(rng);
    }
    project(spec, out);
    return out;
}

Vector random_params(const PolicySpec& spec, double scale, Rng& rng)
{
    return perturb(spec, Vector::Zero(spec.param_count()), scale, rng);
}

PolicySet make_policy_set(const env::EnvSpec& env, const FeatureConfig& protagonist,
                          const FeatureConfig& adversary, const FeatureConfig& eta,
                          std::uint64_t feature_seed)
{
    PolicySet set;
    set.protagonist = make_spec(env.state_dim, env.action_low, env.action_high, protagonist,
                                derive_seed(feature_seed, 1));
    set.adversary = make_spec(env.state_dim, env.adv_action_low, env.adv_action_high, adversary,
                              derive_seed(feature_seed, 2));
    set.eta = make_spec(env.input_dim(), Vector::Constant(env.state_dim, -1.0),
                        Vector::Constant(env.state_dim, 1.0), eta, derive_seed(feature_seed, 3));
    return set;
}

PolicyBundle PolicyBundle::zeros(const PolicySet& set)
{
    return {Vector::Zero(set.protagonist.param_count()), Vector::Zero(set.adversary.param_count()),
            Vector::Zero(set.eta.param_count()), Vector::Zero(set.eta.param_count())};
}

}  // namespace rhc::policy
