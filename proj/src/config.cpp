#include "rhc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace rhc {

namespace {

std::string join_fields(const std::vector<std::string>& fields)
{
    std::string out = "invalid configuration:";
    for (const auto& f : fields) out += "\n  " + f;
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Drop a trailing "# comment" that is not inside quotes.
std::string strip_comment(const std::string& s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (!quoted && s[i] == '#') return trim(s.substr(0, i));
    }
    return trim(s);
}

std::string unquote(const std::string& s)
{
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> parse_list(const std::string& raw)
{
    std::string s = trim(raw);
    if (s.empty() || s.front() != '[') return {unquote(s)};
    if (s.back() != ']') throw std::invalid_argument("unterminated list");
    s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& raw)
{
    const std::string s = unquote(trim(raw));
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("expected a number");
    return v;
}

long long to_int(const std::string& raw)
{
    const std::string s = unquote(trim(raw));
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("expected an integer");
    return v;
}

std::uint64_t to_u64(const std::string& raw)
{
    const std::string s = unquote(trim(raw));
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("expected a non-negative integer");
    return v;
}

bool to_bool(const std::string& raw)
{
    const std::string s = unquote(trim(raw));
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Table = std::map<std::string, std::map<std::string, Setter>>;

#define RHC_INT(field) [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<int>(to_int(v)); }
#define RHC_DBL(field) [](ExperimentConfig& c, const std::string& v) { c.field = to_double(v); }
#define RHC_U64(field) [](ExperimentConfig& c, const std::string& v) { c.field = to_u64(v); }
#define RHC_BOOL(field) [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(v); }
#define RHC_STR(field) [](ExperimentConfig& c, const std::string& v) { c.field = unquote(trim(v)); }

const Table& table()
{
    static const Table t = {
        {"model",
         {{"kind", RHC_STR(model.kind)},
          {"lengthscale", RHC_DBL(model.lengthscale)},
          {"lengthscales",
           [](ExperimentConfig& c, const std::string& v) {
               auto items = parse_list(v);
               c.model.lengthscales.resize(static_cast<Eigen::Index>(items.size()));
               for (std::size_t i = 0; i < items.size(); ++i) c.model.lengthscales[i] = to_double(items[i]);
           }},
          {"signal_variance", RHC_DBL(model.signal_variance)},
          {"observation_noise", RHC_DBL(model.observation_noise)},
          {"noise_floor", RHC_DBL(model.noise_floor)},
          {"data_cap", RHC_INT(model.data_cap)},
          {"refit_every", RHC_INT(model.refit_every)},
          {"beta_mode", RHC_STR(model.beta.mode)},
          {"beta", RHC_DBL(model.beta.value)},
          {"beta0", RHC_DBL(model.beta.beta0)},
          {"beta_growth", RHC_DBL(model.beta.growth)}}},
        {"policy",
         {{"protagonist_features",
           [](ExperimentConfig& c, const std::string& v) {
               c.protagonist_features.kind = policy::parse_feature_kind(unquote(trim(v)));
           }},
          {"adversary_features",
           [](ExperimentConfig& c, const std::string& v) {
               c.adversary_features.kind = policy::parse_feature_kind(unquote(trim(v)));
           }},
          {"eta_features",
           [](ExperimentConfig& c, const std::string& v) {
               c.eta_features.kind = policy::parse_feature_kind(unquote(trim(v)));
           }},
          {"num_features",
           [](ExperimentConfig& c, const std::string& v) {
               const int m = static_cast<int>(to_int(v));
               c.protagonist_features.num_features = c.adversary_features.num_features =
                   c.eta_features.num_features = m;
           }},
          {"bandwidth",
           [](ExperimentConfig& c, const std::string& v) {
               const double b = to_double(v);
               c.protagonist_features.bandwidth = c.adversary_features.bandwidth = c.eta_features.bandwidth = b;
           }},
          {"weight_bound",
           [](ExperimentConfig& c, const std::string& v) {
               const double w = to_double(v);
               c.protagonist_features.weight_bound = c.adversary_features.weight_bound =
                   c.eta_features.weight_bound = w;
           }},
          {"feature_seed", RHC_U64(feature_seed)},
          {"init", RHC_STR(init)},
          {"init_scale", RHC_DBL(init_scale)}}},
        {"solver",
         {{"population", RHC_INT(solver.population)},
          {"elites", RHC_INT(solver.elites)},
          {"iterations", RHC_INT(solver.iterations)},
          {"init_scale", RHC_DBL(solver.init_scale)},
          {"inner_population", RHC_INT(solver.inner_population)},
          {"inner_elites", RHC_INT(solver.inner_elites)},
          {"inner_iterations", RHC_INT(solver.inner_iterations)},
          {"particles", RHC_INT(solver.particles)},
          {"seed", RHC_U64(solver.seed)},
          {"eval_particles", RHC_INT(eval_particles)},
          {"robust_particles", RHC_INT(robust_particles)},
          {"robust_budget", RHC_INT(robust_budget)},
          {"diagnostic_particles", RHC_INT(diagnostic_particles)},
          {"adversary_grid", RHC_INT(adversary_grid)}}},
        {"penalty",
         {{"lambda", RHC_DBL(penalty.lambda)},
          {"schedule", RHC_BOOL(penalty.schedule)},
          {"kappa", RHC_DBL(penalty.kappa)}}},
        {"run",
         {{"algorithms",
           [](ExperimentConfig& c, const std::string& v) { c.algorithms = parse_list(v); }},
          {"algorithm",
           [](ExperimentConfig& c, const std::string& v) { c.algorithms = parse_list(v); }},
          {"episodes", RHC_INT(episodes)},
          {"seeds",
           [](ExperimentConfig& c, const std::string& v) {
               c.seeds.clear();
               for (const auto& item : parse_list(v)) c.seeds.push_back(to_u64(item));
           }},
          {"oracle", RHC_BOOL(oracle)},
          {"oracle_lambda", RHC_DBL(oracle_lambda)},
          {"oracle_particles", RHC_INT(oracle_particles)},
          {"oracle_feasibility_tol", RHC_DBL(oracle_feasibility_tol)},
          {"oracle_population", RHC_INT(oracle_solver.population)},
          {"oracle_elites", RHC_INT(oracle_solver.elites)},
          {"oracle_iterations", RHC_INT(oracle_solver.iterations)},
          {"oracle_inner_population", RHC_INT(oracle_solver.inner_population)},
          {"oracle_inner_elites", RHC_INT(oracle_solver.inner_elites)},
          {"oracle_inner_iterations", RHC_INT(oracle_solver.inner_iterations)},
          {"record_wall_time", RHC_BOOL(record_wall_time)},
          {"diagnostics", RHC_BOOL(diagnostics)}}},
    };
    return t;
}

#undef RHC_INT
#undef RHC_DBL
#undef RHC_U64
#undef RHC_BOOL
#undef RHC_STR

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields)
    : ArgumentError(join_fields(fields)), fields_(std::move(fields))
{
}

const std::vector<std::string>& algorithm_names()
{
    static const std::vector<std::string> names{"rhc_ucrl", "rh_ucrl", "greedy_mean"};
    return names;
}

void ExperimentConfig::validate() const
{
    std::vector<std::string> errors;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };
    try {
        env::make_env(env_name, env_overrides);
    } catch (const ArgumentError& e) {
        errors.push_back(std::string("[env] ") + e.what());
    }
    check(model.kind == "gp" || model.kind == "exact", "[model] kind: expected one of gp exact, got '" + model.kind + "'");
    check(model.beta.mode == "constant" || model.beta.mode == "log_growth",
          "[model] beta_mode: expected one of constant log_growth, got '" + model.beta.mode + "'");
    check(model.beta.value >= 0.0 && model.beta.beta0 >= 0.0 && model.beta.growth >= 0.0,
          "[model] beta, beta0, beta_growth must be >= 0");
    check(model.lengthscale > 0.0, "[model] lengthscale must be > 0");
    check(model.signal_variance > 0.0, "[model] signal_variance must be > 0");
    check(model.noise_floor >= 0.0, "[model] noise_floor must be >= 0");
    check(model.data_cap >= 1, "[model] data_cap must be >= 1");
    check(model.refit_every >= 1, "[model] refit_every must be >= 1");
    check(init == "zero" || init == "random", "[policy] init: expected one of zero random, got '" + init + "'");
    check(init_scale >= 0.0, "[policy] init_scale must be >= 0");
    for (const auto* f : {&protagonist_features, &adversary_features, &eta_features}) {
        check(f->weight_bound > 0.0, "[policy] weight_bound must be > 0");
        check(f->num_features >= 1, "[policy] num_features must be >= 1");
        check(f->bandwidth > 0.0, "[policy] bandwidth must be > 0");
    }
    try {
        solver.validate();
    } catch (const ArgumentError& e) {
        errors.push_back(std::string("[solver] ") + e.what());
    }
    try {
        oracle_solver.validate();
    } catch (const ArgumentError& e) {
        errors.push_back(std::string("[run] oracle_") + e.what());
    }
    check(eval_particles >= 1, "[solver] eval_particles must be >= 1");
    check(robust_particles >= 1, "[solver] robust_particles must be >= 1");
    check(robust_budget >= 2, "[solver] robust_budget must be >= 2");
    check(diagnostic_particles >= 1, "[solver] diagnostic_particles must be >= 1");
    check(adversary_grid >= 2, "[solver] adversary_grid must be >= 2");
    try {
        penalty.validate();
    } catch (const ArgumentError& e) {
        errors.push_back(std::string("[penalty] ") + e.what());
    }
    check(!algorithms.empty(), "[run] algorithms: at least one algorithm is required");
    for (const auto& a : algorithms) {
        bool known = false;
        for (const auto& n : algorithm_names()) known = known || a == n;
        if (!known) errors.push_back("[run] algorithms: unknown algorithm '" + a +
                                     "'; expected one of: rhc_ucrl rh_ucrl greedy_mean");
    }
    check(episodes >= 1, "[run] episodes must be >= 1");
    check(!seeds.empty(), "[run] seeds: at least one seed is required");
    check(oracle_lambda > 0.0, "[run] oracle_lambda must be > 0");
    check(oracle_particles >= 1, "[run] oracle_particles must be >= 1");
    if (!errors.empty()) throw ConfigError(errors);
}

ExperimentConfig parse_config(const std::string& text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
    }
    ExperimentConfig cfg;
    std::vector<std::string> errors;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            errors.push_back("key '" + section + "' appears outside any section");
            continue;
        }
        if (section == "env") {
            for (const auto& [key, node] : body) {
                const std::string raw = strip_comment(node.data());
                if (key == "name") {
                    cfg.env_name = unquote(raw);
                    continue;
                }
                try {
                    cfg.env_overrides[key] = to_double(raw);
                } catch (const std::exception& e) {
                    errors.push_back("[env] " + key + ": " + e.what() + ", got '" + raw + "'");
                }
            }
            continue;
        }
        auto sec = table().find(section);
        if (sec == table().end()) {
            errors.push_back("unknown section [" + section + "]; expected env model policy solver penalty run");
            continue;
        }
        for (const auto& [key, node] : body) {
            const std::string raw = strip_comment(node.data());
            auto it = sec->second.find(key);
            if (it == sec->second.end()) {
                std::string msg = "[" + section + "] unknown key '" + key + "'; accepted:";
                for (const auto& [k, v] : sec->second) msg += " " + k;
                errors.push_back(msg);
                continue;
            }
            try {
                it->second(cfg, raw);
            } catch (const std::exception& e) {
                errors.push_back("[" + section + "] " + key + ": " + e.what() + ", got '" + raw + "'");
            }
        }
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        errors.insert(errors.end(), e.fields().begin(), e.fields().end());
    }
    if (!errors.empty()) throw ConfigError(errors);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path.string() + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c)
{
    using objective::format_double;
    auto q = [](const std::string& s) { return "\"" + s + "\""; };
    std::ostringstream os;
    os << "[env]\nname = " << q(c.env_name) << "\n";
    const auto env = env::make_env(c.env_name, c.env_overrides);
    for (const auto& [k, v] : env->spec().parameters)
        if (k != "reward_scale" && k != "utility_scale") os << k << " = " << format_double(v) << "\n";
    os << "\n[model]\nkind = " << q(c.model.kind) << "\nlengthscale = " << format_double(c.model.lengthscale) << "\n";
    if (c.model.lengthscales.size() > 0) {
        os << "lengthscales = [";
        for (Eigen::Index i = 0; i < c.model.lengthscales.size(); ++i)
            os << (i ? ", " : "") << format_double(c.model.lengthscales[i]);
        os << "]\n";
    }
    os << "signal_variance = " << format_double(c.model.signal_variance) << "\n"
       << "observation_noise = " << format_double(c.model.observation_noise) << "\n"
       << "noise_floor = " << format_double(c.model.noise_floor) << "\n"
       << "data_cap = " << c.model.data_cap << "\n"
       << "refit_every = " << c.model.refit_every << "\n"
       << "beta_mode = " << q(c.model.beta.mode) << "\n"
       << "beta = " << format_double(c.model.beta.value) << "\n"
       << "beta0 = " << format_double(c.model.beta.beta0) << "\n"
       << "beta_growth = " << format_double(c.model.beta.growth) << "\n";
    os << "\n[policy]\nprotagonist_features = " << q(policy::to_string(c.protagonist_features.kind)) << "\n"
       << "adversary_features = " << q(policy::to_string(c.adversary_features.kind)) << "\n"
       << "eta_features = " << q(policy::to_string(c.eta_features.kind)) << "\n"
       << "num_features = " << c.protagonist_features.num_features << "\n"
       << "bandwidth = " << format_double(c.protagonist_features.bandwidth) << "\n"
       << "weight_bound = " << format_double(c.protagonist_features.weight_bound) << "\n"
       << "feature_seed = " << c.feature_seed << "\n"
       << "init = " << q(c.init) << "\n"
       << "init_scale = " << format_double(c.init_scale) << "\n";
    const auto& s = c.solver;
    os << "\n[solver]\npopulation = " << s.population << "\nelites = " << s.elites
       << "\niterations = " << s.iterations << "\ninit_scale = " << format_double(s.init_scale)
       << "\ninner_population = " << s.inner_population << "\ninner_elites = " << s.inner_elites
       << "\ninner_iterations = " << s.inner_iterations << "\nparticles = " << s.particles
       << "\nseed = " << s.seed << "\neval_particles = " << c.eval_particles
       << "\nrobust_particles = " << c.robust_particles << "\nrobust_budget = " << c.robust_budget
       << "\ndiagnostic_particles = " << c.diagnostic_particles << "\nadversary_grid = " << c.adversary_grid
       << "\n";
    os << "\n[penalty]\nlambda = " << format_double(c.penalty.lambda)
       << "\nschedule = " << (c.penalty.schedule ? "true" : "false")
       << "\nkappa = " << format_double(c.penalty.kappa) << "\n";
    os << "\n[run]\nalgorithms = [";
    for (std::size_t i = 0; i < c.algorithms.size(); ++i) os << (i ? ", " : "") << q(c.algorithms[i]);
    os << "]\nepisodes = " << c.episodes << "\nseeds = [";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : "") << c.seeds[i];
    const auto& o = c.oracle_solver;
    os << "]\noracle = " << (c.oracle ? "true" : "false") << "\noracle_lambda = " << format_double(c.oracle_lambda)
       << "\noracle_particles = " << c.oracle_particles
       << "\noracle_feasibility_tol = " << format_double(c.oracle_feasibility_tol)
       << "\noracle_population = " << o.population << "\noracle_elites = " << o.elites
       << "\noracle_iterations = " << o.iterations << "\noracle_inner_population = " << o.inner_population
       << "\noracle_inner_elites = " << o.inner_elites << "\noracle_inner_iterations = " << o.inner_iterations
       << "\nrecord_wall_time = " << (c.record_wall_time ? "true" : "false")
       << "\ndiagnostics = " << (c.diagnostics ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace rhc
