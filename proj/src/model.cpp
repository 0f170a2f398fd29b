#include "rhc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace rhc::model {

GaussianProcess::GaussianProcess(Vector lengthscales, double signal_variance, double noise_variance)
    : lengthscales_(std::move(lengthscales)),
      signal_variance_(signal_variance),
      noise_variance_(noise_variance)
{
    require(lengthscales_.size() >= 1, "GaussianProcess: need at least one lengthscale");
    require((lengthscales_.array() > 0.0).all(), "GaussianProcess: lengthscales must be > 0");
    require(signal_variance_ > 0.0, "GaussianProcess: signal variance must be > 0");
    require(noise_variance_ >= 0.0, "GaussianProcess: noise variance must be >= 0");
    inv_sq_ls_ = lengthscales_.array().inverse().square();
}

double GaussianProcess::kernel(const Vector& a, const Vector& b) const
{
    const double r2 = ((a - b).array().square() * inv_sq_ls_.array()).sum();
    return signal_variance_ * std::exp(-0.5 * r2);
}

void GaussianProcess::fit(const Matrix& x, const Matrix& y)
{
    require(x.rows() == y.rows(), "GaussianProcess::fit: X and Y row counts differ");
    require(x.rows() == 0 || x.cols() == input_dim(), "GaussianProcess::fit: X has wrong width");
    require(x.allFinite() && y.allFinite(), "GaussianProcess::fit: non-finite training data");
    output_dim_ = static_cast<int>(y.cols());
    const Eigen::Index n = x.rows();
    x_ = (x * lengthscales_.array().inverse().matrix().asDiagonal()).transpose();
    jitter_ = 0.0;
    if (n == 0) {
        alpha_.resize(0, output_dim_);
        l_inv_.resize(0, 0);
        return;
    }
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = signal_variance_;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = signal_variance_ * std::exp(-0.5 * (x_.col(i) - x_.col(j)).squaredNorm());
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix a = k;
        a.diagonal().array() += noise_variance_ + jitter;
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success) {
            l_inv_ = Matrix::Identity(n, n);
            llt.matrixL().solveInPlace(l_inv_);
            alpha_ = llt.solve(y);
            jitter_ = jitter;
            return;
        }
        jitter = jitter == 0.0 ? 1e-10 * signal_variance_ : jitter * 10.0;
    }
    Matrix a = k;
    a.diagonal().array() += noise_variance_;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream os;
    os << "GaussianProcess::fit: kernel matrix not positive definite after jitter up to " << jitter / 10.0
       << " (n = " << n << ", eigenvalues in [" << ev.minCoeff() << ", " << ev.maxCoeff()
       << "], condition number " << ev.maxCoeff() / std::max(std::abs(ev.minCoeff()), 1e-300) << ")";
    throw NumericalError(os.str());
}

void GaussianProcess::predict(const Vector& x, Vector& mean, double& variance) const
{
    if (x.size() != input_dim()) throw ArgumentError("GaussianProcess::predict: query has wrong length");
    if (!x.allFinite()) throw ArgumentError("GaussianProcess::predict: non-finite query");
    const Eigen::Index n = x_.cols();
    mean.setZero(output_dim_);
    if (n == 0) {
        variance = signal_variance_;
        return;
    }
    const Vector xs = x.cwiseProduct(lengthscales_.cwiseInverse());
    const Vector kx = signal_variance_ * (-0.5 * (x_.colwise() - xs).colwise().squaredNorm().transpose().array()).exp();
    mean.noalias() = alpha_.transpose() * kx;
    const Vector v = l_inv_.triangularView<Eigen::Lower>() * kx;
    variance = std::max(signal_variance_ - v.squaredNorm(), 0.0);
}

Vector GaussianProcess::alpha_l1() const
{
    if (alpha_.rows() == 0) return Vector::Zero(output_dim_);
    return alpha_.cwiseAbs().colwise().sum().transpose();
}

double beta_schedule(int episode, const BetaConfig& cfg)
{
    require(episode >= 1, "beta_schedule: episode must be >= 1");
    if (cfg.mode == "constant") {
        require(cfg.value >= 0.0, "beta_schedule: value must be >= 0");
        return cfg.value;
    }
    if (cfg.mode == "log_growth") {
        require(cfg.beta0 >= 0.0 && cfg.growth >= 0.0, "beta_schedule: beta0 and growth must be >= 0");
        return cfg.beta0 * std::sqrt(1.0 + cfg.growth * std::log(static_cast<double>(episode)));
    }
    throw ArgumentError("unknown beta mode '" + cfg.mode + "'; expected one of: constant log_growth");
}

GpModel::GpModel(int state_dim, GaussianProcess gp) : state_dim_(state_dim), gp_(std::move(gp)) {}

void GpModel::predict(const Vector& query, Vector& mu, Vector& sigma) const
{
    double var = 0.0;
    gp_.predict(query, mu, var);
    mu += query.head(state_dim_);
    sigma.setConstant(state_dim_, std::sqrt(var));
}

double GpModel::mean_lipschitz() const
{
    // |d/dx k(x, x_i)| <= s^2 r exp(-r^2/2) / l_min <= s^2 exp(-1/2) / l_min.
    const double per_alpha =
        gp_.signal_variance() * std::exp(-0.5) / gp_.lengthscales().minCoeff();
    return 1.0 + per_alpha * gp_.alpha_l1().norm();
}

double GpModel::sigma_lipschitz() const
{
    // sigma(x) is an RKHS distance after a contraction, so
    // |sigma(x) - sigma(x')| <= sqrt(2 s^2 (1 - k(r)/s^2)) <= s r / l_min per coordinate.
    return std::sqrt(static_cast<double>(state_dim_) * gp_.signal_variance()) /
           gp_.lengthscales().minCoeff();
}

void ExactModel::predict(const Vector& query, Vector& mu, Vector& sigma) const
{
    const auto& sp = env_->spec();
    if (query.size() != sp.input_dim()) throw ArgumentError("ExactModel::predict: query has wrong length");
    env_->mean_dynamics(query.head(sp.state_dim), query.segment(sp.state_dim, sp.action_dim),
                        query.tail(sp.adv_action_dim), mu);
    sigma.setZero(sp.state_dim);
}

Vector make_query(const Vector& s, const Vector& a, const Vector& abar)
{
    Vector q(s.size() + a.size() + abar.size());
    q << s, a, abar;
    return q;
}

ModelPtr fit(const std::vector<env::TransitionRecord>& records, const env::EnvironmentPtr& env,
             const ModelConfig& cfg, std::uint64_t seed)
{
    if (cfg.kind == "exact") return std::make_shared<ExactModel>(env);
    if (cfg.kind != "gp") throw ArgumentError("unknown model kind '" + cfg.kind + "'; expected one of: gp exact");
    require(cfg.data_cap >= 1, "model: data_cap must be >= 1");
    const auto& sp = env->spec();
    const int d = sp.input_dim();
    Vector ls = cfg.lengthscales.size() > 0 ? cfg.lengthscales : Vector::Constant(d, cfg.lengthscale);
    require(ls.size() == d, "model: lengthscales must have one entry per input dimension");
    const double obs = cfg.observation_noise < 0.0 ? sp.noise_std * sp.noise_std : cfg.observation_noise;
    GaussianProcess gp(ls, cfg.signal_variance, std::max(obs, cfg.noise_floor));

    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (records.size() > static_cast<std::size_t>(cfg.data_cap)) {
        std::vector<std::size_t> kept;
        Rng rng(seed);
        std::sample(idx.begin(), idx.end(), std::back_inserter(kept), cfg.data_cap, rng);
        idx = std::move(kept);
    }
    Matrix x(idx.size(), d);
    Matrix y(idx.size(), sp.state_dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& rec = records[idx[r]];
        x.row(r) = make_query(rec.state, rec.action, rec.adv_action).transpose();
        y.row(r) = (rec.next_state - rec.state).transpose();
    }
    gp.fit(x, y);
    return std::make_shared<GpModel>(sp.state_dim, std::move(gp));
}

HallucinatedDynamics::HallucinatedDynamics(const DynamicsModel& model, double beta,
                                           const policy::PolicySpec* eta_spec, const Vector* eta_params,
                                           HallucinationMode mode)
    : model_(model), beta_(beta), eta_spec_(eta_spec), eta_params_(eta_params), mode_(mode)
{
    require(beta >= 0.0, "HallucinatedDynamics: beta must be >= 0");
    if (mode != HallucinationMode::mean)
        require(eta_spec != nullptr && eta_params != nullptr,
                "HallucinatedDynamics: optimistic/pessimistic modes need an eta policy");
}

void HallucinatedDynamics::predict(const Vector& query, Vector& mean_next, Vector& mu, Vector& sigma) const
{
    model_.predict(query, mu, sigma);
    mean_next = mu;
    if (mode_ == HallucinationMode::mean || beta_ == 0.0) return;
    Vector eta;
    policy::act_into(*eta_spec_, *eta_params_, query, eta);
    eta = eta.cwiseMax(-1.0).cwiseMin(1.0);
    mean_next.array() += beta_ * eta.array() * sigma.array();
}

void HallucinatedDynamics::next_state(const Vector& s, const Vector& a, const Vector& abar,
                                      const Vector& noise, Vector& next) const
{
    Vector mu, sigma;
    predict(make_query(s, a, abar), next, mu, sigma);
    next += noise;
}

double information_gain_increment(const DynamicsModel& model, const std::vector<Vector>& visited)
{
    double total = 0.0;
    Vector mu, sigma;
    for (const auto& x : visited) {
        model.predict(x, mu, sigma);
        total += sigma.squaredNorm();
    }
    return total;
}

}  // namespace rhc::model
