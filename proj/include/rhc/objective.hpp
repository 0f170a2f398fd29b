#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rhc/common.hpp"

namespace rhc::objective {

struct PenaltyConfig {
    double lambda = 50.0;
    double threshold = 0.0;  // b
    bool schedule = false;   // lambda_T = T^kappa
    double kappa = 0.25;

    void validate() const;
    /// Penalty weight to use when the run has `total_episodes` episodes.
    double effective_lambda(int total_episodes) const;
};

inline double rectify(double x) { return x > 0.0 ? x : 0.0; }

/// j_r - lambda * [b - j_u]_+
double rectified_objective(double j_r, double j_u, double lambda, double threshold);
double rectified_objective(double j_r, double j_u, const PenaltyConfig& cfg);

struct LedgerRow {
    int episode = 0;
    double j_r_true = 0.0;
    double j_u_true = 0.0;
    double instant_regret = 0.0;
    double instant_regret_clamped = 0.0;
    double instant_violation = 0.0;
    double gamma_increment = 0.0;
    double regret_sum = 0.0;     // R_T
    double violation_sum = 0.0;  // V_T
    double gamma_sum = 0.0;      // Gamma_T
    double wall_ms = 0.0;
};

class LearningLedger {
public:
    LearningLedger() = default;
    LearningLedger(double oracle_value, double threshold) : oracle_value_(oracle_value), threshold_(threshold) {}

    /// instant_regret = oracle_value - robust_value; instant_violation = [b - j_u_true]_+.
    const LedgerRow& record_episode(double j_r_true, double j_u_true, double robust_value, double gamma_inc,
                                    double wall_ms = 0.0);

    const std::vector<LedgerRow>& rows() const { return rows_; }
    int size() const { return static_cast<int>(rows_.size()); }
    double oracle_value() const { return oracle_value_; }
    double threshold() const { return threshold_; }
    double regret_sum() const { return rows_.empty() ? 0.0 : rows_.back().regret_sum; }
    double violation_sum() const { return rows_.empty() ? 0.0 : rows_.back().violation_sum; }
    double gamma_sum() const { return rows_.empty() ? 0.0 : rows_.back().gamma_sum; }

    /// Recompute the running sums from the increments and compare exactly.
    bool sums_consistent() const;

    void write_csv(std::ostream& os) const;
    static LearningLedger read_csv(std::istream& is, double oracle_value = 0.0, double threshold = 0.0);

private:
    double oracle_value_ = 0.0;
    double threshold_ = 0.0;
    std::vector<LedgerRow> rows_;
};

extern const char* const kLedgerHeader;

/// Format a double so that it round-trips exactly (shortest representation).
std::string format_double(double v);

struct RectifierCheck {
    bool difference_bound;  // [a]_+ - [b]_+ <= [a - b]_+
    bool abs_bound;         // [a]_+ <= |a|
};

RectifierCheck rectifier_properties(double a, double b);

}  // namespace rhc::objective
