#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <Eigen/Cholesky>

#include "rhc/config.hpp"
#include "rhc/io.hpp"
#include "rhc/learner.hpp"
#include "rhc/model.hpp"
#include "rhc/report.hpp"
#include "rhc/solver.hpp"
#include "rhc/theory.hpp"
#include "support/direct_gp.hpp"

namespace fs = std::filesystem;
using namespace rhc;
using namespace rhc::directgp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double minutes_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count() / 60.0;
}

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

ExperimentConfig shipped(const std::string& name)
{
    return load_config(fs::path(RHC_SOURCE_DIR) / "configs" / name);
}

void progress(const learner::SeedRun& r, int t)
{
    if (t % 50 == 0) std::cerr << "  " << r.algorithm << " seed " << r.seed << " episode " << t << "\n";
}

// Pendulum: constrained learner stays safe where the unconstrained one does not.
Outcome safety_separation()
{
    const auto start = Clock::now();
    const auto cfg = shipped("pendulum_safety.toml");
    const auto p = learner::make_problem(cfg);
    const auto runs = learner::run(cfg, p, 0.0, progress);
    const int tail = 50;
    std::map<std::string, double> violation;
    std::map<std::string, int> count;
    int satisfied = 0, rhc_episodes = 0;
    for (const auto& r : runs) {
        if (r.aborted) return {false, r.algorithm + " seed " + std::to_string(r.seed) + " aborted: " + r.abort_reason};
        const auto& rows = r.ledger.rows();
        for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) {
            violation[r.algorithm] += rows[i].instant_violation;
            ++count[r.algorithm];
            if (r.algorithm == "rhc_ucrl") {
                satisfied += rows[i].instant_violation == 0.0;
                ++rhc_episodes;
            }
        }
    }
    const double v_rhc = violation["rhc_ucrl"] / count["rhc_ucrl"];
    const double v_rh = violation["rh_ucrl"] / count["rh_ucrl"];
    const double frac = static_cast<double>(satisfied) / rhc_episodes;
    const double mins = minutes_since(start);
    const bool pass = v_rhc < 0.5 * v_rh && frac >= 0.8 && mins < 30.0;
    return {pass, "final-50 mean violation rhc=" + fmt(v_rhc) + " rh=" + fmt(v_rh) + " (need < 50%), rhc satisfied " +
                      fmt(100.0 * frac, 3) + "% (need >= 80%), " + fmt(mins, 3) + " min (need < 30)"};
}

// Toy: R_T/T and V_T/T shrink between T = 75 and T = 300, and the envelope holds.
Outcome empirical_sublinearity()
{
    const auto start = Clock::now();
    const auto cfg = shipped("toy_sublinear.toml");
    const auto p = learner::make_problem(cfg);
    const auto oracle = learner::compute_oracle(cfg, p);
    const auto runs = learner::run(cfg, p, oracle.value, progress);
    double r75 = 0.0, r300 = 0.0, v75 = 0.0, v300 = 0.0;
    for (const auto& r : runs) {
        if (r.aborted) return {false, "seed " + std::to_string(r.seed) + " aborted: " + r.abort_reason};
        const auto& rows = r.ledger.rows();
        r75 += rows[74].regret_sum / 75.0;
        v75 += rows[74].violation_sum / 75.0;
        r300 += rows[299].regret_sum / 300.0;
        v300 += rows[299].violation_sum / 300.0;
    }
    const double n = static_cast<double>(runs.size());
    r75 /= n, r300 /= n, v75 /= n, v300 /= n;

    report::RunInputs in{"toy_sublinear.toml", dump_config(cfg), &cfg, &p, oracle};
    int envelope_failures = 0;
    for (const auto& s : report::audit_series(report::summary_json(in, runs)))
        envelope_failures += !check_theorem1(s).regret_envelope.passed();
    const double mins = minutes_since(start);
    const bool pass = r300 < r75 && v300 < v75 && envelope_failures == 0 && mins < 15.0;
    return {pass, "mean R_T/T " + fmt(r75) + " -> " + fmt(r300) + ", mean V_T/T " + fmt(v75) + " -> " + fmt(v300) +
                      ", envelope failures " + std::to_string(envelope_failures) + "/" + std::to_string(runs.size()) +
                      ", " + fmt(mins, 3) + " min (need < 15)"};
}

// GP fit/predict against explicit inversion on random datasets.
Outcome gp_oracle_match()
{
    const auto start = Clock::now();
    Rng rng(2024);
    std::uniform_int_distribution<int> n_dist(1, 50), d_dist(1, 4), k_dist(1, 3);
    std::uniform_real_distribution<double> ls_dist(0.3, 2.0), sv_dist(0.2, 3.0), noise_dist(1e-3, 0.1);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = n_dist(rng), d = d_dist(rng), k = k_dist(rng);
        Vector ls(d);
        for (int i = 0; i < d; ++i) ls[i] = ls_dist(rng);
        const double sv = sv_dist(rng), noise = noise_dist(rng);
        const Matrix x = uniform(n, d, -2, 2, rng);
        const Matrix y = uniform(n, k, -1, 1, rng);
        model::GaussianProcess gp(ls, sv, noise);
        gp.fit(x, y);
        DirectPosterior oracle(x, y, ls, sv, noise);
        for (int q = 0; q < 20; ++q) {
            const Vector query = uniform(d, 1, -2.5, 2.5, rng).col(0);
            Vector m1, m2;
            double v1 = 0.0, v2 = 0.0;
            gp.predict(query, m1, v1);
            oracle.predict(query, m2, v2);
            worst = std::max({worst, (m1 - m2).cwiseAbs().maxCoeff(), std::abs(v1 - v2)});
        }
    }
    const double mins = minutes_since(start);
    return {worst <= 1e-8 && mins < 1.0,
            "max abs deviation " + fmt(worst, 3) + " over 50 datasets (need <= 1e-8), " + fmt(mins * 60.0, 3) + " s"};
}

// Coverage of beta = 2 bands for functions drawn from the prior.
Outcome calibration()
{
    const auto start = Clock::now();
    Rng rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int trials = 200, n_train = 30, n_query = 500, d = 2;
    const Vector ls = Vector::Constant(d, 0.7);
    const double sv = 1.0, noise = 1e-2, beta = 2.0;
    long long covered = 0, total = 0;
    for (int t = 0; t < trials; ++t) {
        const Matrix pts = uniform(n_train + n_query, d, -2, 2, rng);
        Matrix k = gram(pts, pts, ls, sv);
        k.diagonal().array() += 1e-6;
        Eigen::LLT<Matrix> llt(k);
        if (llt.info() != Eigen::Success) return {false, "prior Gram matrix not positive definite"};
        const Matrix l = llt.matrixL();
        Vector z(pts.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
        const Vector f = l * z;
        Matrix y(n_train, 1);
        for (int i = 0; i < n_train; ++i) y(i, 0) = f[i] + std::sqrt(noise) * normal(rng);
        model::GaussianProcess gp(ls, sv, noise);
        gp.fit(pts.topRows(n_train), y);
        for (int q = 0; q < n_query; ++q) {
            Vector m;
            double v = 0.0;
            gp.predict(pts.row(n_train + q).transpose(), m, v);
            covered += std::abs(f[n_train + q] - m[0]) <= beta * std::sqrt(v);
            ++total;
        }
    }
    const double coverage = static_cast<double>(covered) / total;
    const double mins = minutes_since(start);
    return {coverage >= 0.95 && mins < 5.0,
            "coverage " + fmt(coverage, 5) + " over " + std::to_string(total) + " queries (need >= 0.95), " +
                fmt(mins * 60.0, 3) + " s"};
}

// Every analysis inequality at full trial counts.
Outcome exactness_gate()
{
    const auto start = Clock::now();
    theory::Options opt;
    std::vector<theory::CheckReport> gated{theory::check_lemma1(opt)};
    for (auto& r : theory::check_lemma2_3_4(opt)) gated.push_back(r);
    gated.push_back(theory::check_lemma5(opt)[1]);
    for (auto& r : theory::check_propositions(opt)) gated.push_back(r);
    bool pass = true;
    std::string detail;
    for (const auto& r : gated) {
        pass = pass && r.violations == 0;
        detail += r.name + " " + std::to_string(r.violations) + "/" + std::to_string(r.trials) + "; ";
        std::cerr << "  " << report::check_line(r) << "\n";
    }
    const double mins = minutes_since(start);
    return {pass && mins < 10.0, "violations " + detail + fmt(mins, 3) + " min (need < 10)"};
}

ExperimentConfig two_parameter_toy(double bound)
{
    ExperimentConfig c;
    c.env_name = "linear_toy";
    policy::FeatureConfig lin{policy::FeatureKind::linear, 1, 1.0, bound};
    c.protagonist_features = c.adversary_features = c.eta_features = lin;
    return c;
}

// Noise-free toy: solver max-min against a 101 x 101 grid.
Outcome saddle_point()
{
    const auto start = Clock::now();
    auto cfg = two_parameter_toy(2.0);
    cfg.env_overrides["noise_std"] = 0.0;
    const auto p = learner::make_problem(cfg);
    const double lambda = cfg.penalty.lambda, b = p.env->spec().threshold;
    auto objective = [&](const Vector& k, const Vector& kb) {
        const auto est = rollout::evaluate_true(*p.env, {p.set.protagonist, k, p.set.adversary, kb}, 1, 0);
        return objective::rectified_objective(est.j_r, est.j_u, lambda, b);
    };
    const auto grid = learner::parameter_grid(1, 101, 2.0);
    double saddle = -std::numeric_limits<double>::infinity();
    for (const auto& k : grid) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& kb : grid) worst = std::min(worst, objective(k, kb));
        saddle = std::max(saddle, worst);
    }
    solver::Game game{*p.env, p.set, nullptr, 0.0, lambda, b, true, 1, 1};
    const auto zeros = policy::PolicyBundle::zeros(p.set);
    const solver::CemConfig search{24, 4, 8, 1.0, 12, 3, 5, 1, 7};
    const auto prot = solver::select_protagonist(game, search, zeros);
    const auto adv = solver::select_adversary(game, prot.protagonist, search, zeros);
    const double gap = std::abs(adv.value - saddle);
    const double mins = minutes_since(start);
    return {gap <= 0.05 && mins < 2.0, "solver " + fmt(adv.value, 6) + " vs grid " + fmt(saddle, 6) + ", gap " +
                                           fmt(gap, 3) + " (need <= 0.05), " + fmt(mins * 60.0, 3) + " s"};
}

struct Shell {
    int code = -1;
    std::string out;
};

Shell shell(const std::string& cmd)
{
    Shell r;
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".csv" || ext == ".json"))
            files[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
    }
    return files;
}

// Identical invocations produce identical CSV and JSON bytes.
Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / ("rhc_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string env = "RHC_OUTPUT_ROOT='" + root.string() + "' '" + RHCUCRL_BIN + "' ";
    const std::string config = (fs::path(RHC_SOURCE_DIR) / "configs" / "smoke.toml").string();
    const std::vector<std::string> commands{"run '" + config + "'", "verify lemmas --trials 300 --seed 5",
                                            "verify propositions --trials 5000 --seed 5",
                                            "verify theorem --run-dir '" + (root / "smoke").string() + "'"};
    std::vector<std::map<std::string, std::string>> snaps;
    for (int round = 0; round < 2; ++round) {
        for (const auto& c : commands) {
            const auto r = shell(env + c);
            if (r.code != 0 && !(c.rfind("verify theorem", 0) == 0 && r.code == 1)) {
                fs::remove_all(root);
                return {false, "'" + c + "' exited with " + std::to_string(r.code) + ": " + r.out};
            }
        }
        snaps.push_back(snapshot(root));
    }
    fs::remove_all(root);
    int differing = 0;
    for (const auto& [name, bytes] : snaps[0]) {
        auto it = snaps[1].find(name);
        if (it == snaps[1].end() || it->second != bytes) {
            ++differing;
            std::cerr << "  differs: " << name << "\n";
        }
    }
    const bool pass = differing == 0 && snaps[0].size() == snaps[1].size() && !snaps[0].empty();
    return {pass, std::to_string(snaps[0].size()) + " CSV/JSON files compared over run + verify, " +
                      std::to_string(differing) + " differ"};
}

// b = 0 collapses the constrained learner onto the unconstrained one; with the
// exact model and beta = 0 nothing is left to learn.
Outcome degenerate_reductions()
{
    auto cfg = two_parameter_toy(2.0);
    cfg.solver = {12, 3, 3, 1.0, 6, 2, 2, 4, 0};
    cfg.eval_particles = 64;
    cfg.robust_particles = 32;
    cfg.robust_budget = 60;
    cfg.diagnostic_particles = 8;
    cfg.episodes = 10;
    cfg.seeds = {1, 2, 3};

    auto open = cfg;
    open.env_overrides["threshold"] = 0.0;
    open.algorithms = {"rhc_ucrl", "rh_ucrl"};
    const auto p0 = learner::make_problem(open);
    const auto runs0 = learner::run(open, p0, 0.0);
    int mismatched = 0;
    for (std::size_t s = 0; s < open.seeds.size(); ++s) {
        const auto& a = runs0[s].trajectories;
        const auto& b = runs0[s + open.seeds.size()].trajectories;
        for (std::size_t t = 0; t < a.size(); ++t)
            for (std::size_t h = 0; h < a[t].records.size(); ++h)
                mismatched += a[t].records[h].action != b[t].records[h].action ||
                              a[t].records[h].adv_action != b[t].records[h].adv_action ||
                              a[t].records[h].next_state != b[t].records[h].next_state;
    }

    auto exact = cfg;
    exact.model.kind = "exact";
    exact.model.beta.value = 0.0;
    const auto p1 = learner::make_problem(exact);
    const auto oracle = learner::compute_oracle(exact, p1);
    const auto runs1 = learner::run(exact, p1, oracle.value);
    double gamma = 0.0, worst_ratio = 0.0;
    int over = 0, checked = 0;
    for (const auto& r : runs1) {
        gamma += r.ledger.gamma_sum();
        // Episode 1 plays the initial policies, which the learner did not choose.
        for (std::size_t t = 1; t < r.diagnostics.size(); ++t) {
            const double se = std::hypot(r.diagnostics[t].robust_std_err, oracle.std_err);
            const double regret = std::abs(r.ledger.rows()[t].instant_regret);
            worst_ratio = std::max(worst_ratio, se > 0.0 ? regret / (2.0 * se) : (regret > 0.0 ? 1e300 : 0.0));
            over += !(regret < 2.0 * se || regret == 0.0);
            ++checked;
        }
    }
    const bool pass = mismatched == 0 && gamma == 0.0 && over == 0;
    return {pass, "b=0 mismatched steps " + std::to_string(mismatched) + ", exact-model Gamma_T " + fmt(gamma) +
                      ", episodes with |regret| >= 2 std-err " + std::to_string(over) + "/" + std::to_string(checked) +
                      " (worst ratio " + fmt(worst_ratio, 3) + ")"};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "pendulum safety separation", safety_separation},
        {2, "toy empirical sublinearity", empirical_sublinearity},
        {3, "GP direct-solve equivalence", gp_oracle_match},
        {4, "GP calibration coverage", calibration},
        {5, "analysis exactness gate", exactness_gate},
        {6, "saddle point vs grid", saddle_point},
        {7, "determinism", determinism},
        {8, "degenerate reductions", degenerate_reductions},
    };
    bool all = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
                  << std::endl;
    }
    return all ? 0 : 1;
}
