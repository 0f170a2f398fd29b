#pragma once

#include <string>

#include "rhc/common.hpp"
#include "rhc/env.hpp"

namespace rhc::policy {

enum class FeatureKind { linear, affine, random_fourier };

FeatureKind parse_feature_kind(const std::string& name);
std::string to_string(FeatureKind kind);

/// Deterministic map x -> mid + half .* tanh(W phi(x) + b).
/// `linear`: phi(x) = x, no bias. `affine`: phi(x) = x plus a bias vector.
/// `random_fourier`: phi(x) = sqrt(2/m) cos(Omega x + phase), Omega ~ N(0, 1/bandwidth^2).
struct PolicySpec {
    int input_dim = 0;
    int output_dim = 0;
    Vector output_low, output_high;
    FeatureKind features = FeatureKind::affine;
    int num_features = 32;
    double bandwidth = 1.0;
    double weight_bound = 5.0;  // max row norm of W, and max |b_i|
    Matrix omega;               // m x input_dim (random_fourier only)
    Vector phase;               // m (random_fourier only)

    int feature_dim() const;
    bool has_bias() const { return features == FeatureKind::affine; }
    int param_count() const;
    /// Lipschitz constant of phi w.r.t. the Euclidean norm.
    double feature_lipschitz() const;
    Vector mid() const { return 0.5 * (output_low + output_high); }
    Vector half_range() const { return 0.5 * (output_high - output_low); }
};

struct FeatureConfig {
    FeatureKind kind = FeatureKind::affine;
    int num_features = 32;
    double bandwidth = 1.0;
    double weight_bound = 5.0;
};

PolicySpec make_spec(int input_dim, const Vector& low, const Vector& high, const FeatureConfig& cfg,
                     std::uint64_t feature_seed);

void features(const PolicySpec& spec, const Vector& x, Vector& phi);

Vector act(const PolicySpec& spec, const Vector& params, const Vector& x);
void act_into(const PolicySpec& spec, const Vector& params, const Vector& x, Vector& out);

/// Closed-form upper bound on the Lipschitz constant of act(spec, params, .).
double lipschitz_bound(const PolicySpec& spec, const Vector& params);
/// Bound valid for every projected parameter vector of the class.
double class_lipschitz_bound(const PolicySpec& spec);

Matrix unflatten_weights(const PolicySpec& spec, const Vector& params);
Vector unflatten_bias(const PolicySpec& spec, const Vector& params);
Vector flatten(const PolicySpec& spec, const Matrix& weights, const Vector& bias = Vector());

/// Clip each row of W to norm weight_bound and each bias entry to +-weight_bound.
void project(const PolicySpec& spec, Vector& params);
Vector perturb(const PolicySpec& spec, const Vector& params, double scale, Rng& rng);

/// Random parameters drawn N(0, scale^2) and projected.
Vector random_params(const PolicySpec& spec, double scale, Rng& rng);

/// The four policy classes used by the learner, built from an environment.
/// eta takes the joint query (s, a, a_bar) and outputs in [-1, 1]^p.
struct PolicySet {
    PolicySpec protagonist;
    PolicySpec adversary;
    PolicySpec eta;
};

PolicySet make_policy_set(const env::EnvSpec& env, const FeatureConfig& protagonist,
                          const FeatureConfig& adversary, const FeatureConfig& eta,
                          std::uint64_t feature_seed);

struct PolicyBundle {
    Vector protagonist;
    Vector adversary;
    Vector eta_opt;
    Vector eta_pes;

    static PolicyBundle zeros(const PolicySet& set);
};

}  // namespace rhc::policy
