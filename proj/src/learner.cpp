#include "rhc/learner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "rhc/io.hpp"
#include "rhc/rollout.hpp"

namespace rhc::learner {

using objective::format_double;

Problem make_problem(const ExperimentConfig& cfg)
{
    Problem p;
    p.env = env::make_env(cfg.env_name, cfg.env_overrides);
    p.set = policy::make_policy_set(p.env->spec(), cfg.protagonist_features, cfg.adversary_features,
                                    cfg.eta_features, cfg.feature_seed);
    return p;
}

int oracle_grid_points(int protagonist_dim)
{
    if (protagonist_dim <= 2) return 101;
    if (protagonist_dim == 3) return 21;
    return 0;
}

std::vector<Vector> parameter_grid(int dim, int points, double bound)
{
    require(dim >= 1 && points >= 2, "parameter_grid: need dim >= 1 and points >= 2");
    std::vector<double> axis(points);
    for (int i = 0; i < points; ++i) axis[i] = -bound + 2.0 * bound * i / (points - 1);
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(points);
    std::vector<Vector> out;
    out.reserve(total);
    std::vector<int> idx(dim, 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v[d] = axis[idx[d]];
        out.push_back(v);
        for (int d = dim - 1; d >= 0; --d) {
            if (++idx[d] < points) break;
            idx[d] = 0;
        }
    }
    return out;
}

solver::RobustValue robust_value(const ExperimentConfig& cfg, const Problem& problem, const Vector& protagonist)
{
    return solver::robust_value(*problem.env, problem.set, protagonist, cfg.robust_particles, kRobustEvalSeed,
                                cfg.robust_budget);
}

namespace {

std::vector<Vector> projected_grid(const policy::PolicySpec& spec, int points)
{
    auto grid = parameter_grid(spec.param_count(), points, spec.weight_bound);
    for (auto& v : grid) policy::project(spec, v);
    return grid;
}

double score_true(const Problem& p, const std::vector<std::vector<Vector>>& noise, const Vector& prot,
                  const Vector& adv, double lambda, double b, double* j_u = nullptr)
{
    env::TrueTransition truth(*p.env);
    rollout::Players players{p.set.protagonist, prot, p.set.adversary, adv};
    const auto est = rollout::evaluate(*p.env, truth, players, noise);
    if (j_u) *j_u = est.j_u;
    return objective::rectified_objective(est.j_r, est.j_u, lambda, b);
}

struct InnerMin {
    double value;
    Vector adversary;
};

// min over the adversary class of `f(adv)`: grid when small, CEM otherwise.
InnerMin adversary_min(const Problem& p, const ExperimentConfig& cfg, const std::vector<Vector>& adv_grid,
                       const std::function<double(const Vector&)>& f)
{
    if (!adv_grid.empty()) {
        InnerMin best{std::numeric_limits<double>::infinity(), adv_grid.front()};
        for (const auto& a : adv_grid) {
            const double v = f(a);
            if (v < best.value) best = {v, a};
        }
        return best;
    }
    const auto& o = cfg.oracle_solver;
    solver::CemSettings s{o.inner_population, o.inner_elites, o.inner_iterations, o.init_scale,
                          derive_seed(o.seed, 0x1a7e)};
    const auto& spec = p.set.adversary;
    auto r = solver::cem_minimize(f, Vector::Zero(spec.param_count()), s,
                                  [&spec](Vector& x) { policy::project(spec, x); },
                                  {Vector::Zero(spec.param_count())});
    return {r.best_score, r.best};
}

std::vector<Vector> oracle_adversary_grid(const policy::PolicySpec& spec)
{
    const int d = spec.param_count();
    if (d == 1) return projected_grid(spec, 101);
    if (d == 2) return projected_grid(spec, 21);
    return {};
}

}  // namespace

OracleResult compute_oracle(const ExperimentConfig& cfg, const Problem& p)
{
    const double b = p.env->spec().threshold;
    const double lambda = cfg.oracle_lambda;
    const auto noise = rollout::common_noise(p.env->spec(), cfg.oracle_particles, derive_seed(kRobustEvalSeed, 0x0c));
    const auto adv_grid = oracle_adversary_grid(p.set.adversary);
    OracleResult out;

    auto max_min = [&](const Vector& prot) {
        return adversary_min(p, cfg, adv_grid, [&](const Vector& a) {
            ++out.evaluations;
            return score_true(p, noise, prot, a, lambda, b);
        });
    };
    auto robust_utility = [&](const Vector& prot) {
        return adversary_min(p, cfg, adv_grid, [&](const Vector& a) {
                   ++out.evaluations;
                   double ju = 0.0;
                   score_true(p, noise, prot, a, 0.0, b, &ju);
                   return ju;
               })
            .value;
    };

    const int dp = p.set.protagonist.param_count();
    const int points = oracle_grid_points(dp);
    std::vector<Vector> prot_grid;
    if (points > 0) {
        out.method = "grid";
        prot_grid = projected_grid(p.set.protagonist, points);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& prot : prot_grid) {
            const double v = max_min(prot).value;
            if (v > best) {
                best = v;
                out.pi_star = prot;
            }
        }
        out.max_min_value = best;
    } else {
        out.method = "cem";
        auto r = solver::cem_maximize([&](const Vector& prot) { return max_min(prot).value; }, dp, cfg.oracle_solver);
        out.pi_star = r.best;
        out.max_min_value = r.best_score;
    }
    out.robust_utility = robust_utility(out.pi_star);
    if (out.robust_utility < b - cfg.oracle_feasibility_tol) {
        out.feasible = false;
        double best_u = -std::numeric_limits<double>::infinity();
        if (!prot_grid.empty()) {
            for (const auto& prot : prot_grid) best_u = std::max(best_u, robust_utility(prot));
        } else {
            auto r = solver::cem_maximize(robust_utility, dp, cfg.oracle_solver);
            best_u = r.best_score;
        }
        out.max_robust_utility = best_u;
        std::ostringstream os;
        os << "constraint is infeasible for env " << p.env->spec().name << ": threshold b = " << b
           << " but the best robust utility found is " << best_u << " (method " << out.method << ")";
        throw InfeasibleError(os.str(), best_u);
    }
    out.max_robust_utility = out.robust_utility;
    const auto rv = robust_value(cfg, p, out.pi_star);
    out.value = rv.value;
    out.std_err = rv.std_err;
    return out;
}

std::string oracle_cache_key(const ExperimentConfig& cfg)
{
    const auto e = env::make_env(cfg.env_name, cfg.env_overrides);
    std::ostringstream os;
    os << "oracle-v2\nenv=" << cfg.env_name << "\n";
    for (const auto& [k, v] : e->spec().parameters) os << k << "=" << format_double(v) << "\n";
    for (const auto* f : {&cfg.protagonist_features, &cfg.adversary_features}) {
        os << "features=" << policy::to_string(f->kind) << "," << f->num_features << ","
           << format_double(f->bandwidth) << "," << format_double(f->weight_bound) << "\n";
    }
    const auto& o = cfg.oracle_solver;
    os << "feature_seed=" << cfg.feature_seed << "\noracle_lambda=" << format_double(cfg.oracle_lambda)
       << "\noracle_particles=" << cfg.oracle_particles
       << "\noracle_tol=" << format_double(cfg.oracle_feasibility_tol) << "\noracle_cem=" << o.population << ","
       << o.elites << "," << o.iterations << "," << format_double(o.init_scale) << "," << o.inner_population << ","
       << o.inner_elites << "," << o.inner_iterations << "," << o.seed << "\nrobust=" << cfg.robust_particles
       << "," << cfg.robust_budget << "," << kRobustEvalSeed << "\n";
    return io::sha256_hex(os.str());
}

OracleResult compute_oracle_cached(const ExperimentConfig& cfg, const Problem& problem,
                                   const std::filesystem::path& cache_dir)
{
    using nlohmann::json;
    const std::string key = oracle_cache_key(cfg);
    const auto path = cache_dir / ("oracle_" + key + ".json");
    if (std::filesystem::exists(path)) {
        try {
            const json j = json::parse(io::read_file(path));
            if (j.at("key").get<std::string>() == key) {
                OracleResult r;
                const auto pi = j.at("pi_star").get<std::vector<double>>();
                r.pi_star = Eigen::Map<const Vector>(pi.data(), static_cast<Eigen::Index>(pi.size()));
                r.value = j.at("value").get<double>();
                r.std_err = j.at("std_err").get<double>();
                r.max_min_value = j.at("max_min_value").get<double>();
                r.robust_utility = j.at("robust_utility").get<double>();
                r.max_robust_utility = j.at("max_robust_utility").get<double>();
                r.method = j.at("method").get<std::string>();
                r.evaluations = j.at("evaluations").get<int>();
                r.cache_key = key;
                r.from_cache = true;
                return r;
            }
        } catch (const std::exception&) {
            // Unreadable cache entry: recompute and overwrite.
        }
    }
    OracleResult r = compute_oracle(cfg, problem);
    r.cache_key = key;
    json j;
    j["key"] = key;
    j["pi_star"] = std::vector<double>(r.pi_star.data(), r.pi_star.data() + r.pi_star.size());
    j["value"] = r.value;
    j["std_err"] = r.std_err;
    j["max_min_value"] = r.max_min_value;
    j["robust_utility"] = r.robust_utility;
    j["max_robust_utility"] = r.max_robust_utility;
    j["method"] = r.method;
    j["evaluations"] = r.evaluations;
    j["oracle_lambda"] = cfg.oracle_lambda;
    j["oracle_particles"] = cfg.oracle_particles;
    j["robust_budget"] = cfg.robust_budget;
    io::write_file(path, j.dump(2) + "\n");
    return r;
}

namespace {

env::ActionFn action_fn(const policy::PolicySpec& spec, const Vector& params)
{
    return [&spec, params](const Vector& s) { return policy::act(spec, params, s); };
}

// E sum_h ||sigma(x_h)|| and E sum_h ||sigma(x_h)||^2 along true-system rollouts.
std::pair<double, double> sigma_sums(const Problem& p, const model::DynamicsModel& model,
                                     const rollout::Players& players, int particles, std::uint64_t seed)
{
    const auto noise = rollout::common_noise(p.env->spec(), particles, seed);
    env::TrueTransition truth(*p.env);
    double s1 = 0.0, s2 = 0.0;
    int kept = 0;
    std::vector<Vector> queries;
    Vector mu, sigma;
    for (const auto& n : noise) {
        double r = 0.0, u = 0.0;
        if (!rollout::simulate(*p.env, truth, players, n, r, u, nullptr, &queries)) continue;
        ++kept;
        for (const auto& q : queries) {
            model.predict(q, mu, sigma);
            s1 += sigma.norm();
            s2 += sigma.squaredNorm();
        }
    }
    if (kept == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    return {s1 / kept, s2 / kept};
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& cfg, const Problem& p, const std::string& algorithm, std::uint64_t seed,
                 double oracle_value, const ProgressFn& progress)
{
    const auto& env = *p.env;
    const auto& sp = env.spec();
    const double b = sp.threshold;
    const bool greedy = algorithm == "greedy_mean";
    const bool unconstrained = algorithm == "rh_ucrl";
    if (!greedy && !unconstrained && algorithm != "rhc_ucrl")
        throw ArgumentError("unknown algorithm '" + algorithm + "'; expected one of: rhc_ucrl rh_ucrl greedy_mean");

    SeedRun run;
    run.algorithm = algorithm;
    run.seed = seed;
    run.ledger = objective::LearningLedger(oracle_value, b);

    policy::PolicyBundle bundle = policy::PolicyBundle::zeros(p.set);
    if (cfg.init == "random") {
        Rng rng(derive_seed(seed, 0x1417));
        bundle.protagonist = policy::random_params(p.set.protagonist, cfg.init_scale, rng);
        bundle.adversary = policy::random_params(p.set.adversary, cfg.init_scale, rng);
    }

    std::vector<env::TransitionRecord> records;
    model::ModelPtr model = model::fit(records, p.env, cfg.model, derive_seed(seed, 0, 5));
    int fitted_on = 0;

    for (int t = 1; t <= cfg.episodes; ++t) {
        const auto start = std::chrono::steady_clock::now();
        try {
            const double beta = greedy ? 0.0 : model::beta_schedule(t, cfg.model.beta);
            const double lambda = unconstrained ? 0.0 : cfg.penalty.effective_lambda(cfg.episodes);
            solver::Game game{env, p.set, model.get(), beta, lambda, b, !greedy, derive_seed(seed, t, 1),
                              cfg.solver.particles};
            solver::CemConfig sc = cfg.solver;
            sc.seed = derive_seed(cfg.solver.seed, seed, t);

            // Episode 1 plays the initial policies; later episodes select with
            // the model fitted on every earlier episode.
            solver::ProtagonistChoice prot;
            solver::AdversaryChoice adv;
            policy::PolicyBundle next = bundle;
            if (t > 1) {
                prot = solver::select_protagonist(game, sc, bundle);
                adv = solver::select_adversary(game, prot.protagonist, sc, bundle);
                next = {prot.protagonist, adv.adversary, prot.eta_opt, adv.eta_pes};
            } else {
                prot.value = adv.value = std::numeric_limits<double>::quiet_NaN();
            }

            auto traj = env::rollout_true(env, action_fn(p.set.protagonist, next.protagonist),
                                          action_fn(p.set.adversary, next.adversary), derive_seed(seed, t, 3), t);
            std::vector<Vector> visited;
            visited.reserve(traj.records.size());
            for (const auto& r : traj.records) visited.push_back(model::make_query(r.state, r.action, r.adv_action));
            const double gamma_inc = model::information_gain_increment(*model, visited);

            rollout::Players players{p.set.protagonist, next.protagonist, p.set.adversary, next.adversary};
            const auto est = rollout::evaluate_true(env, players, cfg.eval_particles, derive_seed(seed, t, 4));
            const auto rv = robust_value(cfg, p, next.protagonist);

            EpisodeDiagnostics d;
            d.episode = t;
            d.beta = beta;
            d.lambda = lambda;
            d.data_size = fitted_on;
            d.selection_value = prot.value;
            d.adversary_value = adv.value;
            d.j_r_std_err = est.std_err_r;
            d.j_u_std_err = est.std_err_u;
            d.robust_value = rv.value;
            d.robust_std_err = rv.std_err;
            d.mean_lipschitz = model->mean_lipschitz();
            d.sigma_lipschitz = model->sigma_lipschitz();
            d.protagonist_lipschitz = policy::lipschitz_bound(p.set.protagonist, next.protagonist);
            d.adversary_lipschitz = policy::lipschitz_bound(p.set.adversary, next.adversary);
            d.protagonist_converged = prot.search.converged;
            d.adversary_converged = adv.search.converged;
            d.min_grid_opt_utility = std::numeric_limits<double>::quiet_NaN();
            if (cfg.diagnostics) {
                const auto opt = rollout::optimistic_value(env, *model, beta, p.set, next, cfg.solver.particles,
                                                           derive_seed(seed, t, 1));
                const auto pes = rollout::pessimistic_value(env, *model, beta, p.set, next, cfg.solver.particles,
                                                            derive_seed(seed, t, 1));
                d.j_r_opt = opt.j_r;
                d.j_u_opt = opt.j_u;
                d.j_r_pes = pes.j_r;
                d.j_u_pes = pes.j_u;
                std::tie(d.sigma_sum, d.sigma_sq_sum) =
                    sigma_sums(p, *model, players, cfg.diagnostic_particles, derive_seed(seed, t, 6));
                if (p.set.adversary.param_count() <= 2) {
                    model::HallucinatedDynamics dyn(*model, beta, &p.set.eta, &next.eta_opt,
                                                    model::HallucinationMode::optimistic);
                    const auto noise = rollout::common_noise(sp, cfg.solver.particles, derive_seed(seed, t, 1));
                    double worst = std::numeric_limits<double>::infinity();
                    for (auto& a : projected_grid(p.set.adversary, cfg.adversary_grid)) {
                        rollout::Players gp{p.set.protagonist, next.protagonist, p.set.adversary, a};
                        worst = std::min(worst, rollout::evaluate(env, dyn, gp, noise).j_u);
                    }
                    d.min_grid_opt_utility = worst;
                }
            }
            double wall = 0.0;
            if (cfg.record_wall_time)
                wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            run.ledger.record_episode(est.j_r, est.j_u, rv.value, gamma_inc, wall);
            run.diagnostics.push_back(d);

            records.insert(records.end(), traj.records.begin(), traj.records.end());
            run.trajectories.push_back(std::move(traj));
            if (t % cfg.model.refit_every == 0) {
                model = model::fit(records, p.env, cfg.model, derive_seed(seed, t, 5));
                fitted_on = static_cast<int>(std::min<std::size_t>(records.size(), cfg.model.data_cap));
            }
            bundle = next;
        } catch (const DivergenceError& e) {
            run.aborted = true;
            run.abort_reason = "episode " + std::to_string(t) + ": " + e.what();
            break;
        }
        if (progress) progress(run, t);
    }
    run.final_bundle = bundle;
    return run;
}

std::vector<SeedRun> run(const ExperimentConfig& cfg, const Problem& problem, double oracle_value,
                         const ProgressFn& progress)
{
    std::vector<SeedRun> out;
    for (const auto& alg : cfg.algorithms)
        for (auto seed : cfg.seeds) out.push_back(run_seed(cfg, problem, alg, seed, oracle_value, progress));
    return out;
}

}  // namespace rhc::learner
