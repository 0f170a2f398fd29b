#include "rhc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rhc::solver {

void CemConfig::validate() const
{
    require(population >= 1 && elites >= 1 && elites <= population, "solver: need 1 <= elites <= population");
    require(inner_population >= 1 && inner_elites >= 1 && inner_elites <= inner_population,
            "solver: need 1 <= inner_elites <= inner_population");
    require(iterations >= 1 && inner_iterations >= 1, "solver: iterations must be >= 1");
    require(init_scale > 0.0, "solver: init_scale must be > 0");
    require(particles >= 1, "solver: particles must be >= 1");
}

namespace {

bool lex_less(const Vector& a, const Vector& b)
{
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

struct Candidate {
    Vector x;
    double score;
};

// Higher score first; equal scores resolved by lexicographic order.
bool better(const Candidate& a, const Candidate& b)
{
    if (a.score != b.score) return a.score > b.score;
    return lex_less(a.x, b.x);
}

}  // namespace

CemResult cem_maximize(const Score& score, const Vector& init_mean, const CemSettings& s,
                       const Projector& project, const std::vector<Vector>& incumbents)
{
    require(s.population >= 1 && s.elites >= 1 && s.elites <= s.population && s.iterations >= 1,
            "cem: need 1 <= elites <= population and iterations >= 1");
    const Eigen::Index dim = init_mean.size();
    CemResult res;
    res.best_score = -std::numeric_limits<double>::infinity();
    Vector mean = init_mean;
    Vector stddev = Vector::Constant(dim, s.init_scale);
    Rng rng(s.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double lo_seen = std::numeric_limits<double>::infinity();
    double hi_seen = -std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (int it = 0; it < s.iterations; ++it) {
        std::vector<Candidate> pop;
        pop.reserve(s.population + incumbents.size());
        if (it == 0)
            for (const auto& inc : incumbents) {
                require(inc.size() == dim, "cem: incumbent has wrong length");
                Vector x = inc;
                if (project) project(x);
                pop.push_back({x, 0.0});
            }
        for (int k = 0; k < s.population; ++k) {
            Vector x(dim);
            for (Eigen::Index j = 0; j < dim; ++j) x[j] = mean[j] + stddev[j] * normal(rng);
            if (project) project(x);
            pop.push_back({x, 0.0});
        }
        for (auto& c : pop) {
            const double v = score(c.x);
            c.score = std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
            ++res.evaluations;
            if (std::isfinite(v)) {
                lo_seen = std::min(lo_seen, v);
                hi_seen = std::max(hi_seen, v);
            }
        }
        std::sort(pop.begin(), pop.end(), better);
        if (!have_best || better(pop.front(), {res.best, res.best_score})) {
            res.best = pop.front().x;
            res.best_score = pop.front().score;
            have_best = true;
        }
        res.best_history.push_back(res.best_score);

        const int ne = std::min<int>(s.elites, static_cast<int>(pop.size()));
        mean.setZero();
        for (int k = 0; k < ne; ++k) mean += pop[k].x;
        mean /= ne;
        stddev.setZero();
        for (int k = 0; k < ne; ++k) stddev += (pop[k].x - mean).cwiseAbs2();
        stddev = (stddev / ne).cwiseSqrt();
    }
    const bool informative = std::isfinite(lo_seen) && hi_seen > lo_seen;
    res.converged = informative && stddev.size() > 0 && stddev.maxCoeff() < 1e-2 * s.init_scale;
    if (dim == 0) res.converged = informative;
    return res;
}

CemResult cem_minimize(const Score& score, const Vector& init_mean, const CemSettings& s,
                       const Projector& project, const std::vector<Vector>& incumbents)
{
    CemResult r = cem_maximize([&](const Vector& x) { return -score(x); }, init_mean, s, project, incumbents);
    r.best_score = -r.best_score;
    for (auto& h : r.best_history) h = -h;
    return r;
}

CemResult cem_maximize(const Score& score, int dim, const CemConfig& cfg)
{
    cfg.validate();
    return cem_maximize(score, Vector::Zero(dim),
                        {cfg.population, cfg.elites, cfg.iterations, cfg.init_scale, cfg.seed});
}

CemResult cem_minimize(const Score& score, int dim, const CemConfig& cfg)
{
    cfg.validate();
    return cem_minimize(score, Vector::Zero(dim),
                        {cfg.population, cfg.elites, cfg.iterations, cfg.init_scale, cfg.seed});
}

namespace {

bool uses_eta(const Game& g) { return g.hallucinate && g.model != nullptr && g.beta > 0.0; }

// Objective of one (protagonist, adversary, eta) triple under the game's dynamics.
double game_value(const Game& g, const std::vector<std::vector<Vector>>& noise, const Vector& prot,
                  const Vector& adv, const Vector* eta, model::HallucinationMode hmode)
{
    rollout::Players players{g.set.protagonist, prot, g.set.adversary, adv};
    rollout::PerformanceEstimate est;
    try {
        if (g.model == nullptr) {
            env::TrueTransition truth(g.env);
            est = rollout::evaluate(g.env, truth, players, noise);
        } else {
            const auto mode = eta ? hmode : model::HallucinationMode::mean;
            model::HallucinatedDynamics dyn(*g.model, g.beta, &g.set.eta, eta, mode);
            est = rollout::evaluate(g.env, dyn, players, noise);
        }
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return objective::rectified_objective(est.j_r, est.j_u, g.lambda, g.threshold);
}

Projector projector_for(const policy::PolicySpec& a, const policy::PolicySpec* b)
{
    return [&a, b](Vector& x) {
        Vector head = x.head(a.param_count());
        policy::project(a, head);
        x.head(a.param_count()) = head;
        if (b) {
            Vector tail = x.tail(b->param_count());
            policy::project(*b, tail);
            x.tail(b->param_count()) = tail;
        }
    };
}

std::vector<Vector> box_grid(int dim, int points, double bound)
{
    std::vector<Vector> out;
    if (dim == 1) {
        for (int i = 0; i < points; ++i) out.push_back(Vector::Constant(1, -bound + 2.0 * bound * i / (points - 1)));
    } else if (dim == 2) {
        for (int i = 0; i < points; ++i)
            for (int j = 0; j < points; ++j) {
                Vector v(2);
                v << -bound + 2.0 * bound * i / (points - 1), -bound + 2.0 * bound * j / (points - 1);
                out.push_back(v);
            }
    }
    return out;
}


// Low-dimensional adversaries often attain their minimum on the boundary of
// the weight box, which a search started near the origin can miss.
std::vector<Vector> boundary_candidates(const policy::PolicySpec& spec, int points)
{
    std::vector<Vector> out;
    for (auto& v : box_grid(spec.param_count(), points, spec.weight_bound))
        if (!v.isZero(0.0)) out.push_back(std::move(v));
    return out;
}

Vector join(const Vector& a, const Vector& b)
{
    Vector out(a.size() + b.size());
    out << a, b;
    return out;
}

}  // namespace

CemResult inner_minimum(const Game& game, const std::vector<std::vector<Vector>>& noise,
                        const Vector& protagonist, const Vector& eta_opt, const CemConfig& cfg,
                        const std::vector<Vector>& incumbents)
{
    const Vector* eta = eta_opt.size() > 0 ? &eta_opt : nullptr;
    auto score = [&](const Vector& adv) {
        return game_value(game, noise, protagonist, adv, eta, model::HallucinationMode::optimistic);
    };
    const auto& adv_spec = game.set.adversary;
    CemSettings s{cfg.inner_population, cfg.inner_elites, cfg.inner_iterations, cfg.init_scale,
                  derive_seed(cfg.seed, 0x1a7e)};
    return cem_minimize(score, Vector::Zero(adv_spec.param_count()), s, projector_for(adv_spec, nullptr),
                        incumbents);
}

ProtagonistChoice select_protagonist(const Game& game, const CemConfig& cfg,
                                     const policy::PolicyBundle& warm_start)
{
    cfg.validate();
    const auto noise = rollout::common_noise(game.env.spec(), cfg.particles, game.noise_seed);
    const bool eta_on = uses_eta(game);
    const int np = game.set.protagonist.param_count();
    const int ne = eta_on ? game.set.eta.param_count() : 0;

    std::vector<Vector> inner_incumbents{Vector::Zero(game.set.adversary.param_count())};
    if (warm_start.adversary.size() == game.set.adversary.param_count() && !warm_start.adversary.isZero(0.0))
        inner_incumbents.push_back(warm_start.adversary);
    for (auto& v : boundary_candidates(game.set.adversary, 3)) inner_incumbents.push_back(v);

    auto split = [&](const Vector& x, Vector& prot, Vector& eta) {
        prot = x.head(np);
        eta = eta_on ? Vector(x.tail(ne)) : Vector();
    };
    auto score = [&](const Vector& x) {
        Vector prot, eta;
        split(x, prot, eta);
        return inner_minimum(game, noise, prot, eta, cfg, inner_incumbents).best_score;
    };
    Vector warm = warm_start.protagonist.size() == np ? warm_start.protagonist : Vector::Zero(np);
    if (eta_on)
        warm = join(warm, warm_start.eta_opt.size() == ne ? warm_start.eta_opt : Vector::Zero(ne));
    CemSettings s{cfg.population, cfg.elites, cfg.iterations, cfg.init_scale, cfg.seed};
    ProtagonistChoice out;
    std::vector<Vector> incumbents{warm};
    for (const auto& v : boundary_candidates(game.set.protagonist, 3))
        incumbents.push_back(eta_on ? join(v, warm.tail(ne)) : v);
    out.search = cem_maximize(score, warm, s, projector_for(game.set.protagonist, eta_on ? &game.set.eta : nullptr),
                              incumbents);
    if (!std::isfinite(out.search.best_score)) {
        // Every candidate diverged: keep the incumbent.
        out.protagonist = warm.head(np);
        out.eta_opt = eta_on ? Vector(warm.tail(ne)) : Vector::Zero(game.set.eta.param_count());
        out.adversary = warm_start.adversary.size() > 0 ? warm_start.adversary
                                                         : Vector::Zero(game.set.adversary.param_count());
        out.value = out.search.best_score;
        return out;
    }
    split(out.search.best, out.protagonist, out.eta_opt);
    if (!eta_on) out.eta_opt = Vector::Zero(game.set.eta.param_count());
    const Vector eta_arg = eta_on ? out.eta_opt : Vector();
    CemResult inner = inner_minimum(game, noise, out.protagonist, eta_arg, cfg, inner_incumbents);
    out.adversary = inner.best;
    out.value = inner.best_score;
    return out;
}

AdversaryChoice select_adversary(const Game& game, const Vector& protagonist, const CemConfig& cfg,
                                 const policy::PolicyBundle& warm_start)
{
    cfg.validate();
    const auto noise = rollout::common_noise(game.env.spec(), cfg.particles, derive_seed(game.noise_seed, 0xad));
    const bool eta_on = uses_eta(game);
    const int na = game.set.adversary.param_count();
    const int ne = eta_on ? game.set.eta.param_count() : 0;
    auto score = [&](const Vector& x) {
        const Vector adv = x.head(na);
        if (!eta_on) return game_value(game, noise, protagonist, adv, nullptr, model::HallucinationMode::mean);
        const Vector eta = x.tail(ne);
        return game_value(game, noise, protagonist, adv, &eta, model::HallucinationMode::pessimistic);
    };
    Vector warm = warm_start.adversary.size() == na ? warm_start.adversary : Vector::Zero(na);
    if (eta_on)
        warm = join(warm, warm_start.eta_pes.size() == ne ? warm_start.eta_pes : Vector::Zero(ne));
    std::vector<Vector> incumbents{warm};
    if (!warm.isZero(0.0)) incumbents.push_back(Vector::Zero(warm.size()));
    for (const auto& v : boundary_candidates(game.set.adversary, 3))
        incumbents.push_back(eta_on ? join(v, warm.tail(ne)) : v);
    CemSettings s{cfg.population, cfg.elites, cfg.iterations, cfg.init_scale, derive_seed(cfg.seed, 0xad)};
    AdversaryChoice out;
    out.search = cem_minimize(score, warm, s, projector_for(game.set.adversary, eta_on ? &game.set.eta : nullptr),
                              incumbents);
    const Vector& best = std::isfinite(out.search.best_score) ? out.search.best : warm;
    out.adversary = best.head(na);
    out.eta_pes = eta_on ? Vector(best.tail(ne)) : Vector::Zero(game.set.eta.param_count());
    out.value = out.search.best_score;
    return out;
}


RobustValue robust_value(const env::Environment& env, const policy::PolicySet& set, const Vector& protagonist,
                         int particles, std::uint64_t seed, int budget, const std::vector<Vector>& incumbents)
{
    require(budget >= 2, "robust_value: budget must be >= 2");
    const auto noise = rollout::common_noise(env.spec(), particles, seed);
    env::TrueTransition truth(env);
    auto estimate = [&](const Vector& adv) {
        rollout::Players players{set.protagonist, protagonist, set.adversary, adv};
        return rollout::evaluate(env, truth, players, noise);
    };
    auto score = [&](const Vector& adv) {
        try {
            return estimate(adv).j_r;
        } catch (const DivergenceError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    const int dim = set.adversary.param_count();
    std::vector<Vector> inc{Vector::Zero(dim)};
    for (const auto& v : incumbents)
        if (v.size() == dim) inc.push_back(v);
    for (auto& v : boundary_candidates(set.adversary, dim == 1 ? 11 : 5)) inc.push_back(v);
    const int per_iter = std::max(1, std::min(20, budget / 10));
    const int remaining = budget - static_cast<int>(inc.size());
    const int iters = std::max(1, remaining / per_iter);
    CemSettings s{per_iter, std::max(1, per_iter / 5), iters, 0.5 * set.adversary.weight_bound,
                  derive_seed(seed, 0xb0b)};
    CemResult r = cem_minimize(score, Vector::Zero(set.adversary.param_count()), s,
                               projector_for(set.adversary, nullptr), inc);
    RobustValue out;
    out.adversary = r.best;
    out.evaluations = r.evaluations;
    const auto est = estimate(r.best);
    out.value = est.j_r;
    out.std_err = est.std_err_r;
    out.j_u = est.j_u;
    return out;
}

}  // namespace rhc::solver
