#include "rhc/objective.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace rhc::objective {

const char* const kLedgerHeader =
    "episode,j_r_true,j_u_true,instant_regret,instant_regret_clamped,instant_violation,"
    "gamma_increment,R_T,V_T,Gamma_T,wall_ms";

void PenaltyConfig::validate() const
{
    require(std::isfinite(lambda) && lambda >= 0.0, "penalty: lambda must be >= 0");
    require(std::isfinite(threshold), "penalty: threshold must be finite");
    if (schedule) require(kappa > 0.0 && kappa < 0.5, "penalty: kappa must lie in (0, 0.5)");
}

double PenaltyConfig::effective_lambda(int total_episodes) const
{
    if (!schedule) return lambda;
    return std::pow(static_cast<double>(std::max(total_episodes, 1)), kappa);
}

double rectified_objective(double j_r, double j_u, double lambda, double threshold)
{
    const double gap = rectify(threshold - j_u);
    return gap == 0.0 ? j_r : j_r - lambda * gap;
}

double rectified_objective(double j_r, double j_u, const PenaltyConfig& cfg)
{
    return rectified_objective(j_r, j_u, cfg.lambda, cfg.threshold);
}

const LedgerRow& LearningLedger::record_episode(double j_r_true, double j_u_true, double robust_value,
                                                double gamma_inc, double wall_ms)
{
    LedgerRow row;
    row.episode = size() + 1;
    row.j_r_true = j_r_true;
    row.j_u_true = j_u_true;
    row.instant_regret = oracle_value_ - robust_value;
    row.instant_regret_clamped = rectify(row.instant_regret);
    row.instant_violation = rectify(threshold_ - j_u_true);
    row.gamma_increment = gamma_inc;
    row.regret_sum = regret_sum() + row.instant_regret;
    row.violation_sum = violation_sum() + row.instant_violation;
    row.gamma_sum = gamma_sum() + row.gamma_increment;
    row.wall_ms = wall_ms;
    rows_.push_back(row);
    return rows_.back();
}

bool LearningLedger::sums_consistent() const
{
    double r = 0.0, v = 0.0, g = 0.0;
    for (const auto& row : rows_) {
        r += row.instant_regret;
        v += row.instant_violation;
        g += row.gamma_increment;
        if (r != row.regret_sum || v != row.violation_sum || g != row.gamma_sum) return false;
        if (row.instant_violation < 0.0) return false;
    }
    return true;
}

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void LearningLedger::write_csv(std::ostream& os) const
{
    os << kLedgerHeader << '\n';
    for (const auto& r : rows_) {
        os << r.episode << ',' << format_double(r.j_r_true) << ',' << format_double(r.j_u_true) << ','
           << format_double(r.instant_regret) << ',' << format_double(r.instant_regret_clamped) << ','
           << format_double(r.instant_violation) << ',' << format_double(r.gamma_increment) << ','
           << format_double(r.regret_sum) << ',' << format_double(r.violation_sum) << ','
           << format_double(r.gamma_sum) << ',' << format_double(r.wall_ms) << '\n';
    }
}

LearningLedger LearningLedger::read_csv(std::istream& is, double oracle_value, double threshold)
{
    LearningLedger ledger(oracle_value, threshold);
    std::string line;
    if (!std::getline(is, line) || line != kLedgerHeader)
        throw ArgumentError("ledger CSV: missing or unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc()) throw ArgumentError("ledger CSV: bad number '" + cell + "'");
            f.push_back(v);
        }
        if (f.size() != 11) throw ArgumentError("ledger CSV: expected 11 columns, got " + std::to_string(f.size()));
        LedgerRow r;
        r.episode = static_cast<int>(f[0]);
        r.j_r_true = f[1];
        r.j_u_true = f[2];
        r.instant_regret = f[3];
        r.instant_regret_clamped = f[4];
        r.instant_violation = f[5];
        r.gamma_increment = f[6];
        r.regret_sum = f[7];
        r.violation_sum = f[8];
        r.gamma_sum = f[9];
        r.wall_ms = f[10];
        ledger.rows_.push_back(r);
    }
    return ledger;
}

RectifierCheck rectifier_properties(double a, double b)
{
    return {rectify(a) - rectify(b) <= rectify(a - b), rectify(a) <= std::abs(a)};
}

}  // namespace rhc::objective
