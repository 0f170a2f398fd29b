#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rhc/common.hpp"
#include "rhc/env.hpp"
#include "rhc/policy.hpp"

namespace rhc::model {

/// Exact GP regression with a zero prior mean and a squared-exponential ARD
/// kernel shared by all output columns. Since the kernel is shared, the
/// posterior variance is the same for every output.
class GaussianProcess {
public:
    GaussianProcess(Vector lengthscales, double signal_variance, double noise_variance);

    /// Condition on inputs X (n x d) and targets Y (n x k). n = 0 yields the prior.
    void fit(const Matrix& x, const Matrix& y);

    void predict(const Vector& x, Vector& mean, double& variance) const;
    double kernel(const Vector& a, const Vector& b) const;

    int size() const { return static_cast<int>(x_.cols()); }
    int input_dim() const { return static_cast<int>(lengthscales_.size()); }
    int output_dim() const { return output_dim_; }
    double signal_variance() const { return signal_variance_; }
    double noise_variance() const { return noise_variance_; }
    const Vector& lengthscales() const { return lengthscales_; }
    double jitter() const { return jitter_; }
    /// Per-output sum_i |alpha_i|, where alpha = (K + s^2 I)^{-1} y.
    Vector alpha_l1() const;

private:
    Vector lengthscales_;
    Vector inv_sq_ls_;
    double signal_variance_;
    double noise_variance_;
    double jitter_ = 0.0;
    int output_dim_ = 0;
    Matrix x_;      // d x n, inputs scaled by 1/lengthscale
    Matrix alpha_;  // n x k
    Matrix l_inv_;  // inverse of the lower Cholesky factor of K + (s^2 + jitter) I
};

/// Anything that returns a predictive mean of the next state and an
/// elementwise epistemic standard deviation for a query (s, a, a_bar).
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;
    virtual int state_dim() const = 0;
    /// `query` is the concatenation (s, a, a_bar). mu already includes s.
    virtual void predict(const Vector& query, Vector& mu, Vector& sigma) const = 0;
    virtual double prior_std() const = 0;
    /// Lipschitz bounds of mu and sigma as maps R^{p+q+t} -> R^p (Euclidean).
    virtual double mean_lipschitz() const = 0;
    virtual double sigma_lipschitz() const = 0;
};

using ModelPtr = std::shared_ptr<const DynamicsModel>;

struct BetaConfig {
    std::string mode = "constant";  // constant | log_growth
    double value = 2.0;
    double beta0 = 1.0;
    double growth = 1.0;
};

double beta_schedule(int episode, const BetaConfig& cfg);

struct ModelConfig {
    std::string kind = "gp";        // gp | exact
    double lengthscale = 1.0;       // used for every input dim unless lengthscales is set
    Vector lengthscales;
    double signal_variance = 1.0;
    double observation_noise = -1.0;  // variance; < 0 means env noise_std^2
    double noise_floor = 1e-8;        // lower bound on the variance used in the solve
    int data_cap = 2000;
    int refit_every = 1;
    BetaConfig beta;
};

/// GP per state coordinate on state-difference targets s' - s.
class GpModel final : public DynamicsModel {
public:
    GpModel(int state_dim, GaussianProcess gp);

    int state_dim() const override { return state_dim_; }
    void predict(const Vector& query, Vector& mu, Vector& sigma) const override;
    double prior_std() const override { return std::sqrt(gp_.signal_variance()); }
    double mean_lipschitz() const override;
    double sigma_lipschitz() const override;

    const GaussianProcess& gp() const { return gp_; }

private:
    int state_dim_;
    GaussianProcess gp_;
};

/// The true mean dynamics with zero epistemic uncertainty.
class ExactModel final : public DynamicsModel {
public:
    explicit ExactModel(env::EnvironmentPtr env) : env_(std::move(env)) {}

    int state_dim() const override { return env_->spec().state_dim; }
    void predict(const Vector& query, Vector& mu, Vector& sigma) const override;
    double prior_std() const override { return 0.0; }
    double mean_lipschitz() const override { return env_->lipschitz().dynamics; }
    double sigma_lipschitz() const override { return 0.0; }

private:
    env::EnvironmentPtr env_;
};

/// Fit the configured model to transition records. GP fits keep at most
/// data_cap records, subsampled uniformly without replacement using `seed`.
ModelPtr fit(const std::vector<env::TransitionRecord>& records, const env::EnvironmentPtr& env,
             const ModelConfig& cfg, std::uint64_t seed);

Vector make_query(const Vector& s, const Vector& a, const Vector& abar);

enum class HallucinationMode { optimistic, pessimistic, mean };

/// f~(x) = mu(x) + beta * eta(x) .* sigma(x), eta clipped to [-1, 1]^p.
/// In `mean` mode eta is ignored (treated as 0).
class HallucinatedDynamics final : public env::TransitionModel {
public:
    HallucinatedDynamics(const DynamicsModel& model, double beta, const policy::PolicySpec* eta_spec,
                         const Vector* eta_params, HallucinationMode mode);

    void next_state(const Vector& s, const Vector& a, const Vector& abar, const Vector& noise,
                    Vector& next) const override;
    /// Noise-free part of next_state; also returns mu and sigma at the query.
    void predict(const Vector& query, Vector& mean_next, Vector& mu, Vector& sigma) const;

    double beta() const { return beta_; }
    HallucinationMode mode() const { return mode_; }

private:
    const DynamicsModel& model_;
    double beta_;
    const policy::PolicySpec* eta_spec_;
    const Vector* eta_params_;
    HallucinationMode mode_;
};

/// sum over visited queries of ||sigma(x)||^2.
double information_gain_increment(const DynamicsModel& model, const std::vector<Vector>& visited);

}  // namespace rhc::model
