#include "rhc/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "rhc/io.hpp"

#ifndef RHC_VERSION
#define RHC_VERSION "0.1.0"
#endif

namespace rhc::report {

using nlohmann::json;
namespace fs = std::filesystem;

const char* artifact_version() { return RHC_VERSION; }

namespace {

// JSON has no non-finite numbers; spell them out so they survive a round trip.
json num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double read_num(const json& j)
{
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    throw ArgumentError("summary: expected a number, got " + j.dump());
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string px(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

json profile_json(const theory::LipschitzProfile& p)
{
    return {{"L_f", num(p.L_f)},         {"L_pi", num(p.L_pi)},   {"L_pibar", num(p.L_pibar)},
            {"L_sigma", num(p.L_sigma)}, {"L_r", num(p.L_r)},     {"L_u", num(p.L_u)},
            {"lambda", num(p.lambda)},   {"C", num(p.C())},       {"L_f_pi", num(p.L_f_pi())},
            {"L_r_lambda_u", num(p.L_r_lambda_u())}};
}

}  // namespace

theory::LipschitzProfile run_profile(const learner::Problem& problem, const std::vector<learner::SeedRun>& runs)
{
    const auto L = problem.env->lipschitz();
    theory::LipschitzProfile p;
    p.L_f = L.dynamics;
    p.L_r = L.reward;
    p.L_u = L.utility;
    p.L_pi = policy::class_lipschitz_bound(problem.set.protagonist);
    p.L_pibar = policy::class_lipschitz_bound(problem.set.adversary);
    for (const auto& r : runs)
        for (const auto& d : r.diagnostics) {
            p.L_f = std::max(p.L_f, d.mean_lipschitz);
            p.L_sigma = std::max(p.L_sigma, d.sigma_lipschitz);
            p.lambda = std::max(p.lambda, d.lambda);
        }
    return p;
}

theory::BoundConstants run_constants(const learner::Problem& problem, const std::vector<learner::SeedRun>& runs)
{
    theory::BoundConstants k;
    k.H = problem.env->spec().horizon;
    k.R_max = k.H;
    for (const auto& r : runs)
        for (const auto& d : r.diagnostics) k.beta_T = std::max(k.beta_T, d.beta);
    return k;
}

std::string ledger_filename(const std::string& algorithm, std::uint64_t seed)
{
    return "ledger_" + algorithm + "_seed" + std::to_string(seed) + ".csv";
}

json summary_json(const RunInputs& in, const std::vector<learner::SeedRun>& runs)
{
    const auto& cfg = *in.cfg;
    const auto& sp = in.problem->env->spec();
    json j;
    j["schema_version"] = kSummarySchemaVersion;
    j["artifact_version"] = artifact_version();
    j["config_sha256"] = io::sha256_hex(in.config_text);
    j["config"] = dump_config(cfg);
    j["env"] = sp.name;
    j["horizon"] = sp.horizon;
    j["threshold"] = num(sp.threshold);
    if (in.oracle) {
        const auto& o = *in.oracle;
        j["oracle"] = {{"enabled", true},
                       {"value", num(o.value)},
                       {"std_err", num(o.std_err)},
                       {"max_min_value", num(o.max_min_value)},
                       {"robust_utility", num(o.robust_utility)},
                       {"method", o.method},
                       {"evaluations", o.evaluations},
                       {"cache_key", o.cache_key},
                       {"pi_star", std::vector<double>(o.pi_star.data(), o.pi_star.data() + o.pi_star.size())}};
    } else {
        j["oracle"] = {{"enabled", false}, {"value", 0.0}, {"std_err", 0.0},
                       {"note", "oracle disabled; regret is measured against 0"}};
    }
    j["profile"] = profile_json(run_profile(*in.problem, runs));
    const auto k = run_constants(*in.problem, runs);
    j["constants"] = {{"c", num(k.c)}, {"R_max", num(k.R_max)}, {"H", k.H}, {"beta_T", num(k.beta_T)}};
    const double oracle_se = in.oracle ? in.oracle->std_err : 0.0;

    json arr = json::array();
    for (const auto& r : runs) {
        json jr;
        jr["algorithm"] = r.algorithm;
        jr["seed"] = r.seed;
        jr["ledger"] = ledger_filename(r.algorithm, r.seed);
        jr["episodes"] = r.ledger.size();
        jr["aborted"] = r.aborted;
        jr["abort_reason"] = r.abort_reason;
        double wall = 0.0;
        for (const auto& row : r.ledger.rows()) wall += row.wall_ms;
        jr["final"] = {{"R_T", num(r.ledger.regret_sum())},
                       {"V_T", num(r.ledger.violation_sum())},
                       {"Gamma_T", num(r.ledger.gamma_sum())},
                       {"wall_ms", num(wall)}};
        json diags = json::array();
        for (std::size_t i = 0; i < r.diagnostics.size(); ++i) {
            const auto& d = r.diagnostics[i];
            const auto& row = r.ledger.rows()[i];
            diags.push_back({{"episode", d.episode},
                             {"beta", num(d.beta)},
                             {"lambda", num(d.lambda)},
                             {"data_size", d.data_size},
                             {"instant_regret", num(row.instant_regret)},
                             {"instant_violation", num(row.instant_violation)},
                             {"gamma_increment", num(row.gamma_increment)},
                             {"selection_value", num(d.selection_value)},
                             {"adversary_value", num(d.adversary_value)},
                             {"j_r_opt", num(d.j_r_opt)},
                             {"j_u_opt", num(d.j_u_opt)},
                             {"j_r_pes", num(d.j_r_pes)},
                             {"j_u_pes", num(d.j_u_pes)},
                             {"j_r_std_err", num(d.j_r_std_err)},
                             {"j_u_std_err", num(d.j_u_std_err)},
                             {"robust_value", num(d.robust_value)},
                             {"robust_std_err", num(d.robust_std_err)},
                             {"regret_std_err", num(std::hypot(d.robust_std_err, oracle_se))},
                             {"sigma_sum", num(d.sigma_sum)},
                             {"sigma_sq_sum", num(d.sigma_sq_sum)},
                             {"min_grid_opt_utility", num(d.min_grid_opt_utility)},
                             {"mean_lipschitz", num(d.mean_lipschitz)},
                             {"sigma_lipschitz", num(d.sigma_lipschitz)},
                             {"protagonist_lipschitz", num(d.protagonist_lipschitz)},
                             {"adversary_lipschitz", num(d.adversary_lipschitz)},
                             {"protagonist_converged", d.protagonist_converged},
                             {"adversary_converged", d.adversary_converged}});
        }
        jr["diagnostics"] = std::move(diags);
        arr.push_back(std::move(jr));
    }
    j["runs"] = std::move(arr);
    return j;
}

std::vector<theory::AuditSeries> audit_series(const json& s)
{
    theory::LipschitzProfile p;
    const auto& jp = s.at("profile");
    p.L_f = read_num(jp.at("L_f"));
    p.L_pi = read_num(jp.at("L_pi"));
    p.L_pibar = read_num(jp.at("L_pibar"));
    p.L_sigma = read_num(jp.at("L_sigma"));
    p.L_r = read_num(jp.at("L_r"));
    p.L_u = read_num(jp.at("L_u"));
    p.lambda = read_num(jp.at("lambda"));
    theory::BoundConstants k;
    const auto& jk = s.at("constants");
    k.c = read_num(jk.at("c"));
    k.R_max = read_num(jk.at("R_max"));
    k.H = jk.at("H").get<int>();
    k.beta_T = read_num(jk.at("beta_T"));

    std::vector<theory::AuditSeries> out;
    for (const auto& jr : s.at("runs")) {
        theory::AuditSeries a;
        a.algorithm = jr.at("algorithm").get<std::string>();
        a.seed = jr.at("seed").get<std::uint64_t>();
        a.threshold = read_num(s.at("threshold"));
        a.profile = p;
        a.constants = k;
        for (const auto& d : jr.at("diagnostics")) {
            theory::AuditEpisode e;
            e.lambda = read_num(d.at("lambda"));
            e.beta = read_num(d.at("beta"));
            e.instant_regret = read_num(d.at("instant_regret"));
            e.instant_violation = read_num(d.at("instant_violation"));
            e.gamma_increment = read_num(d.at("gamma_increment"));
            e.sigma_sum = read_num(d.at("sigma_sum"));
            e.min_grid_opt_utility = read_num(d.at("min_grid_opt_utility"));
            e.regret_std_err = read_num(d.at("regret_std_err"));
            e.violation_std_err = read_num(d.at("j_u_std_err"));
            a.episodes.push_back(e);
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<LoadedLedger> load_ledgers(const fs::path& dir)
{
    std::vector<std::pair<std::string, std::uint64_t>> keys;
    const auto summary = dir / "summary.json";
    if (fs::exists(summary)) {
        const json s = json::parse(io::read_file(summary));
        for (const auto& jr : s.at("runs"))
            keys.emplace_back(jr.at("algorithm").get<std::string>(), jr.at("seed").get<std::uint64_t>());
    } else if (fs::is_directory(dir)) {
        static const std::regex pattern(R"(^ledger_(.+)_seed(\d+)\.csv$)");
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        for (const auto& n : names) {
            std::smatch m;
            if (std::regex_match(n, m, pattern)) keys.emplace_back(m[1].str(), std::stoull(m[2].str()));
        }
    }
    std::vector<LoadedLedger> out;
    for (const auto& [alg, seed] : keys) {
        std::ifstream is(dir / ledger_filename(alg, seed));
        if (!is) throw ArgumentError("missing ledger " + (dir / ledger_filename(alg, seed)).string());
        out.push_back({alg, seed, objective::LearningLedger::read_csv(is)});
    }
    return out;
}

namespace {

struct Series {
    std::string label;
    std::vector<double> mean, lo, hi;
    int seeds = 0;
};

using Field = double (*)(const objective::LedgerRow&);

// Per-algorithm mean and min/max over seeds, in order of first appearance.
std::vector<Series> aggregate(const std::vector<LoadedLedger>& ledgers, const std::function<double(const objective::LedgerRow&)>& field)
{
    std::vector<Series> out;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<const LoadedLedger*>> groups;
    for (const auto& l : ledgers) {
        auto [it, added] = index.emplace(l.algorithm, out.size());
        if (added) {
            out.push_back({l.algorithm, {}, {}, {}, 0});
            groups.emplace_back();
        }
        groups[it->second].push_back(&l);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        auto& s = out[g];
        s.seeds = static_cast<int>(groups[g].size());
        std::size_t n = 0;
        for (const auto* l : groups[g]) n = std::max<std::size_t>(n, l->ledger.rows().size());
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
            int k = 0;
            for (const auto* l : groups[g]) {
                if (i >= l->ledger.rows().size()) continue;
                const double v = field(l->ledger.rows()[i]);
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                ++k;
            }
            s.mean.push_back(sum / k);
            s.lo.push_back(lo);
            s.hi.push_back(hi);
        }
    }
    return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Panel {
    double x, y, w, h;
    std::string title, ylabel;
    std::vector<Series> series;
    std::optional<double> hline;
    std::string hline_label;
};

void draw_panel(std::ostringstream& os, const Panel& p)
{
    std::size_t n = 0;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& s : p.series) {
        n = std::max(n, s.mean.size());
        for (std::size_t i = 0; i < s.mean.size(); ++i) {
            for (double v : {s.lo[i], s.hi[i], s.mean[i]})
                if (std::isfinite(v)) {
                    ymin = std::min(ymin, v);
                    ymax = std::max(ymax, v);
                }
        }
    }
    if (p.hline) {
        ymin = std::min(ymin, *p.hline);
        ymax = std::max(ymax, *p.hline);
    }
    if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
    if (ymax - ymin < 1e-12) ymin -= 1.0, ymax += 1.0;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double xmin = n <= 1 ? 0.5 : 1.0, xmax = n <= 1 ? 1.5 : static_cast<double>(n);

    const double left = p.x + 60, right = p.x + p.w - 10, top = p.y + 30, bottom = p.y + p.h - 40;
    auto sx = [&](double e) { return left + (e - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double v) { return bottom - (v - ymin) / (ymax - ymin) * (bottom - top); };

    os << "<g class=\"panel\">\n";
    os << "<text class=\"title\" x=\"" << px((left + right) / 2) << "\" y=\"" << px(p.y + 18)
       << "\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(p.title) << "</text>\n";
    os << "<rect class=\"frame\" x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(right - left)
       << "\" height=\"" << px(bottom - top) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = ymin + (ymax - ymin) * i / 4.0;
        os << "<text class=\"ytick\" x=\"" << px(left - 4) << "\" y=\"" << px(sy(v) + 4)
           << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v) << "</text>\n";
        const double e = xmin + (xmax - xmin) * i / 4.0;
        os << "<text class=\"xtick\" x=\"" << px(sx(e)) << "\" y=\"" << px(bottom + 14)
           << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(e) << "</text>\n";
    }
    os << "<text class=\"xlabel\" x=\"" << px((left + right) / 2) << "\" y=\"" << px(bottom + 30)
       << "\" text-anchor=\"middle\" font-size=\"11\">episode</text>\n";
    os << "<text class=\"ylabel\" x=\"" << px(p.x + 12) << "\" y=\"" << px((top + bottom) / 2)
       << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " << px(p.x + 12) << " "
       << px((top + bottom) / 2) << ")\">" << xml_escape(p.ylabel) << "</text>\n";

    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        if (s.seeds > 1 && s.mean.size() > 1) {
            os << "<polygon class=\"band\" data-label=\"" << xml_escape(s.label) << "\" fill=\"" << color
               << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.hi.size(); ++i) os << px(sx(i + 1.0)) << "," << px(sy(s.hi[i])) << " ";
            for (std::size_t i = s.lo.size(); i-- > 0;) os << px(sx(i + 1.0)) << "," << px(sy(s.lo[i])) << " ";
            os << "\"/>\n";
        }
        os << "<polyline class=\"series\" data-label=\"" << xml_escape(s.label) << "\" fill=\"none\" stroke=\""
           << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.mean.size(); ++i) {
            if (i) os << " ";
            os << px(sx(i + 1.0)) << "," << px(sy(s.mean[i]));
        }
        os << "\"/>\n";
        if (s.mean.size() == 1)
            os << "<circle class=\"point\" data-label=\"" << xml_escape(s.label) << "\" cx=\"" << px(sx(1.0))
               << "\" cy=\"" << px(sy(s.mean[0])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        os << "<text class=\"legend\" x=\"" << px(right - 6) << "\" y=\"" << px(top + 14 + 14 * k)
           << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << xml_escape(s.label)
           << (s.seeds > 1 ? " (mean, range over " + std::to_string(s.seeds) + " seeds)" : std::string())
           << "</text>\n";
    }
    if (p.hline) {
        os << "<line class=\"threshold\" data-value=\"" << objective::format_double(*p.hline) << "\" x1=\""
           << px(left) << "\" x2=\"" << px(right) << "\" y1=\"" << px(sy(*p.hline)) << "\" y2=\""
           << px(sy(*p.hline)) << "\" stroke=\"#000\" stroke-dasharray=\"6,4\"/>\n";
        os << "<text class=\"threshold-label\" x=\"" << px(left + 4) << "\" y=\"" << px(sy(*p.hline) - 4)
           << "\" font-size=\"10\">" << xml_escape(p.hline_label) << "</text>\n";
    }
    os << "</g>\n";
}

std::string svg_document(double w, double h, const std::vector<Panel>& panels)
{
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(w) << "\" height=\"" << px(h)
       << "\" viewBox=\"0 0 " << px(w) << " " << px(h) << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    for (const auto& p : panels) draw_panel(os, p);
    os << "</svg>\n";
    return os.str();
}

}  // namespace

std::string reward_svg(const std::vector<LoadedLedger>& ledgers)
{
    Panel p{0, 0, 640, 360, "Reward per episode", "J_r (true system)",
            aggregate(ledgers, [](const objective::LedgerRow& r) { return r.j_r_true; }), std::nullopt, ""};
    return svg_document(640, 360, {p});
}

std::string cost_svg(const std::vector<LoadedLedger>& ledgers, const PlotContext& ctx)
{
    const double H = ctx.horizon;
    Panel p{0, 0, 640, 360, "Cost per episode", "H - J_u (true system)",
            aggregate(ledgers, [H](const objective::LedgerRow& r) { return H - r.j_u_true; }), std::nullopt, ""};
    if (ctx.threshold) {
        p.hline = H - *ctx.threshold;
        p.hline_label = "constraint J_u >= b = " + fmt(*ctx.threshold);
    }
    return svg_document(640, 360, {p});
}

std::string cumulative_svg(const std::vector<LoadedLedger>& ledgers)
{
    std::vector<Panel> panels{
        {0, 0, 640, 260, "Cumulative regret R_T", "R_T",
         aggregate(ledgers, [](const objective::LedgerRow& r) { return r.regret_sum; }), std::nullopt, ""},
        {0, 260, 640, 260, "Cumulative violation V_T", "V_T",
         aggregate(ledgers, [](const objective::LedgerRow& r) { return r.violation_sum; }), std::nullopt, ""},
        {0, 520, 640, 260, "Information gain Gamma_T", "Gamma_T",
         aggregate(ledgers, [](const objective::LedgerRow& r) { return r.gamma_sum; }), std::nullopt, ""}};
    return svg_document(640, 780, panels);
}

std::vector<std::string> write_plots(const fs::path& dir)
{
    const auto ledgers = load_ledgers(dir);
    bool any = false;
    for (const auto& l : ledgers) any = any || l.ledger.size() > 0;
    if (!any) throw ArgumentError("no ledger rows to plot in " + dir.string());
    PlotContext ctx;
    const auto summary = dir / "summary.json";
    if (fs::exists(summary)) {
        const json s = json::parse(io::read_file(summary));
        ctx.horizon = s.at("horizon").get<int>();
        ctx.threshold = read_num(s.at("threshold"));
    }
    io::write_file(dir / "reward.svg", reward_svg(ledgers));
    io::write_file(dir / "cost.svg", cost_svg(ledgers, ctx));
    io::write_file(dir / "cumulative.svg", cumulative_svg(ledgers));
    return {"reward.svg", "cost.svg", "cumulative.svg"};
}

std::vector<std::string> write_run(const fs::path& dir, const RunInputs& in, const std::vector<learner::SeedRun>& runs)
{
    fs::create_directories(dir);
    std::vector<std::string> files;
    json per_seed = json::array();
    for (const auto& r : runs) {
        std::ostringstream os;
        r.ledger.write_csv(os);
        const auto name = ledger_filename(r.algorithm, r.seed);
        io::write_file(dir / name, os.str());
        files.push_back(name);
        per_seed.push_back({{"algorithm", r.algorithm}, {"seed", r.seed}, {"files", {name}}});
    }
    io::write_file(dir / "summary.json", summary_json(in, runs).dump(2) + "\n");
    files.push_back("summary.json");
    bool any_rows = false;
    for (const auto& r : runs) any_rows = any_rows || r.ledger.size() > 0;
    if (any_rows)
        for (auto& f : write_plots(dir)) files.push_back(f);

    json m;
    m["manifest_schema_version"] = 1;
    m["ledger_schema_version"] = kLedgerSchemaVersion;
    m["ledger_columns"] = objective::kLedgerHeader;
    m["summary_schema_version"] = kSummarySchemaVersion;
    m["artifact_version"] = artifact_version();
    m["config_path"] = in.config_path.string();
    m["config_sha256"] = io::sha256_hex(in.config_text);
    m["output_dir"] = dir.string();
    json listed = json::array();
    for (const auto& f : files) {
        const auto bytes = io::read_file(dir / f);
        listed.push_back({{"name", f}, {"sha256", io::sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }
    m["files"] = std::move(listed);
    m["per_seed"] = std::move(per_seed);
    if (in.cfg->record_wall_time) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["timestamps"] = {{"written", buf}};
    } else {
        m["timestamps"] = nullptr;
    }
    io::write_file(dir / "manifest.json", m.dump(2) + "\n");
    files.push_back("manifest.json");
    return files;
}

json check_json(const theory::CheckReport& r)
{
    return {{"name", r.name},       {"trials", r.trials},         {"violations", r.violations},
            {"max_ratio", num(r.max_ratio)}, {"max_excess", num(r.max_excess)}, {"exact", r.exact},
            {"passed", r.passed()}, {"notes", r.notes}};
}

std::string check_line(const theory::CheckReport& r)
{
    std::ostringstream os;
    os << (r.passed() ? "PASS " : "FAIL ") << r.name << ": trials=" << r.trials << " violations=" << r.violations
       << " max_ratio=" << fmt(r.max_ratio) << " max_excess=" << fmt(r.max_excess);
    for (const auto& n : r.notes) os << "\n     note: " << n;
    return os.str();
}

}  // namespace rhc::report
