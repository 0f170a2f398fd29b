#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rhc/config.hpp"
#include "rhc/io.hpp"
#include "rhc/learner.hpp"
#include "rhc/report.hpp"
#include "rhc/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rhc;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

fs::path output_root()
{
    const char* root = std::getenv("RHC_OUTPUT_ROOT");
    return root && *root ? fs::path(root) : fs::path("runs");
}

std::optional<ExperimentConfig> load(const fs::path& path, std::string& text)
{
    try {
        text = io::read_file(path);
        return parse_config(text);
    } catch (const ConfigError& e) {
        std::cerr << "invalid config " << path << ":\n";
        for (const auto& f : e.fields()) std::cerr << "  " << f << "\n";
    } catch (const std::exception& e) {
        std::cerr << "cannot load config " << path << ": " << e.what() << "\n";
    }
    return std::nullopt;
}

int cmd_run(const std::string& config_path, bool print_defaults)
{
    if (print_defaults) {
        if (config_path.empty()) {
            std::cout << dump_config(ExperimentConfig{});
            return kOk;
        }
        std::string text;
        auto cfg = load(config_path, text);
        if (!cfg) return kUsageError;
        std::cout << dump_config(*cfg);
        return kOk;
    }
    if (config_path.empty()) {
        std::cerr << "run: a config file is required\n";
        return kUsageError;
    }
    std::string text;
    auto cfg = load(config_path, text);
    if (!cfg) return kUsageError;

    const fs::path dir = output_root() / fs::path(config_path).stem();
    try {
        const auto problem = learner::make_problem(*cfg);
        report::RunInputs in{config_path, text, &*cfg, &problem, std::nullopt};
        double reference = 0.0;
        if (cfg->oracle) {
            in.oracle = learner::compute_oracle_cached(*cfg, problem, output_root() / "oracle_cache");
            reference = in.oracle->value;
            std::cerr << "oracle value " << reference << " (" << in.oracle->method
                      << (in.oracle->from_cache ? ", cached" : "") << ")\n";
        }
        const auto runs = learner::run(*cfg, problem, reference, [&](const learner::SeedRun& r, int t) {
            if (t % 10 == 0 || t == cfg->episodes)
                std::cerr << r.algorithm << " seed " << r.seed << " episode " << t << "/" << cfg->episodes
                          << " R_T=" << r.ledger.regret_sum() << " V_T=" << r.ledger.violation_sum() << "\n";
        });
        report::write_run(dir, in, runs);
        std::cout << dir.string() << "\n";
        for (const auto& r : runs)
            if (r.aborted) {
                std::cerr << r.algorithm << " seed " << r.seed << " aborted: " << r.abort_reason << "\n";
                return kRuntimeFailure;
            }
    } catch (const learner::InfeasibleError& e) {
        std::cerr << "refusing to start: " << e.what() << "\nmax achievable robust utility: "
                  << e.max_robust_utility() << "\n";
        return kRuntimeFailure;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}

struct VerifyArgs {
    std::string suite;
    std::string run_dir;
    std::uint64_t seed = 1;
    long long trials = 0;
    std::string out;
    long long max_violations = 0;
};

int cmd_verify(const VerifyArgs& a)
{
    const bool lemmas = a.suite == "lemmas" || a.suite == "all";
    const bool props = a.suite == "propositions" || a.suite == "all";
    const bool theorem = a.suite == "theorem" || (a.suite == "all" && !a.run_dir.empty());
    if (a.suite == "theorem" && a.run_dir.empty()) {
        std::cerr << "verify theorem: --run-dir is required\n";
        return kUsageError;
    }

    theory::Options opt;
    opt.seed = a.seed;
    if (a.trials > 0) {
        opt.lemma1_trials = opt.coupled_trials = opt.lemma5_trials = a.trials;
        opt.proposition_pairs = a.trials;
    }

    json checks = json::array();
    std::ostringstream text;
    bool gate = true;
    auto record = [&](const theory::CheckReport& r, bool gated, long long allowed) {
        const bool ok = r.violations <= allowed;
        if (gated && !ok) gate = false;
        auto j = report::check_json(r);
        j["gated"] = gated;
        j["allowed_violations"] = allowed;
        checks.push_back(j);
        text << report::check_line(r) << (gated ? "" : "  [informational]") << "\n";
    };

    try {
        if (lemmas) {
            record(theory::check_lemma1(opt), true, 0);
            for (const auto& r : theory::check_lemma2_3_4(opt)) record(r, true, 0);
            const auto l5 = theory::check_lemma5(opt);
            record(l5[0], false, 0);
            record(l5[1], true, 0);
        }
        if (props)
            for (const auto& r : theory::check_propositions(opt)) record(r, true, 0);
        json trends = json::array();
        if (theorem) {
            const fs::path summary = fs::path(a.run_dir) / "summary.json";
            if (!fs::exists(summary)) {
                std::cerr << "verify theorem: no summary.json in " << a.run_dir << "\n";
                return kUsageError;
            }
            for (const auto& s : report::audit_series(json::parse(io::read_file(summary)))) {
                const std::string tag = " [" + s.algorithm + " seed " + std::to_string(s.seed) + "]";
                for (auto r : theory::check_lemma6_7_8(s)) {
                    r.name += tag;
                    record(r, true, a.max_violations);
                }
                auto t = theory::check_theorem1(s);
                t.regret_envelope.name += tag;
                t.violation_envelope.name += tag;
                record(t.regret_envelope, true, a.max_violations);
                record(t.violation_envelope, true, a.max_violations);
                trends.push_back({{"algorithm", s.algorithm},
                                  {"seed", s.seed},
                                  {"regret_trend", t.regret_trend},
                                  {"violation_trend", t.violation_trend},
                                  {"regret_bound", t.regret_bound},
                                  {"violation_bound", t.violation_bound}});
                text << "trend" << tag << ": R_T/T non-increasing over final half: "
                     << (t.regret_trend ? "yes" : "no")
                     << ", V_T/T non-increasing over final half: " << (t.violation_trend ? "yes" : "no") << "\n";
            }
        }
        text << (gate ? "GATE PASS" : "GATE FAIL") << "\n";

        json j;
        j["suite"] = a.suite;
        j["seed"] = a.seed;
        j["trials_override"] = a.trials;
        j["checks"] = std::move(checks);
        if (theorem) j["trends"] = std::move(trends);
        j["gate_passed"] = gate;
        const fs::path out = a.out.empty() ? output_root() / "verify" : fs::path(a.out);
        io::write_file(out / ("verify_" + a.suite + ".json"), j.dump(2) + "\n");
        io::write_file(out / ("verify_" + a.suite + ".txt"), text.str());
        std::cout << text.str();
    } catch (const std::exception& e) {
        std::cerr << "verify failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return gate ? kOk : kRuntimeFailure;
}

int cmd_plot(const std::string& dir)
{
    if (!fs::is_directory(dir)) {
        std::cerr << "plot: not a directory: " << dir << "\n";
        return kUsageError;
    }
    try {
        for (const auto& f : report::write_plots(dir)) std::cout << (fs::path(dir) / f).string() << "\n";
    } catch (const ArgumentError& e) {
        std::cerr << "plot: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "plot failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}

int cmd_oracle(const std::string& config_path)
{
    std::string text;
    auto cfg = load(config_path, text);
    if (!cfg) return kUsageError;
    try {
        const auto problem = learner::make_problem(*cfg);
        const auto r = learner::compute_oracle_cached(*cfg, problem, output_root() / "oracle_cache");
        json j{{"cache_key", r.cache_key},
               {"from_cache", r.from_cache},
               {"method", r.method},
               {"value", r.value},
               {"std_err", r.std_err},
               {"max_min_value", r.max_min_value},
               {"robust_utility", r.robust_utility},
               {"evaluations", r.evaluations},
               {"pi_star", std::vector<double>(r.pi_star.data(), r.pi_star.data() + r.pi_star.size())}};
        std::cout << j.dump(2) << "\n";
    } catch (const learner::InfeasibleError& e) {
        std::cerr << e.what() << "\nmax achievable robust utility: " << e.max_robust_utility() << "\n";
        return kRuntimeFailure;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "oracle failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust constrained model-based RL experiments"};
    app.require_subcommand(1);

    std::string run_config;
    bool print_defaults = false;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", run_config, "Config file");
    run->add_flag("--print-defaults", print_defaults, "Print every setting (defaults, or the given config resolved)");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Numerically check the analysis inequalities");
    verify->add_option("suite", va.suite, "lemmas | propositions | theorem | all")
        ->required()
        ->check(CLI::IsMember({"lemmas", "propositions", "theorem", "all"}));
    verify->add_option("--run-dir", va.run_dir, "Run directory for the theorem suite");
    verify->add_option("--seed", va.seed, "Seed for the randomized checks");
    verify->add_option("--trials", va.trials, "Override the number of trials of each check");
    verify->add_option("--out", va.out, "Report directory (default <output root>/verify)");
    verify->add_option("--max-violations", va.max_violations,
                       "Violations tolerated per run-based check (lemmas 6-8, theorem)");

    std::string plot_dir;
    auto* plot = app.add_subcommand("plot", "Render SVG plots for a run directory");
    plot->add_option("run_dir", plot_dir, "Run directory")->required();

    std::string oracle_config;
    auto* oracle = app.add_subcommand("oracle", "Compute or inspect the cached oracle policy");
    oracle->add_option("config", oracle_config, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    if (*run) return cmd_run(run_config, print_defaults);
    if (*verify) return cmd_verify(va);
    if (*plot) return cmd_plot(plot_dir);
    if (*oracle) return cmd_oracle(oracle_config);
    return kUsageError;
}
