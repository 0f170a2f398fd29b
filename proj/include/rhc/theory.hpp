#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rhc/common.hpp"

namespace rhc::theory {

struct LipschitzProfile {
    double L_f = 0.0;
    double L_pi = 0.0;
    double L_pibar = 0.0;
    double L_sigma = 0.0;
    double L_r = 0.0;
    double L_u = 0.0;
    double lambda = 0.0;

    double policy_factor() const;  // sqrt(1 + L_pi^2 + L_pibar^2)
    double L_f_pi() const;         // L_f * policy_factor
    double C() const;              // (1 + L_f + 2 L_sigma) * policy_factor
    double L_r_lambda_u() const;   // L_r + lambda L_u
};

struct BoundConstants {
    double c = 4.0;
    double R_max = 1.0;
    int H = 1;
    double beta_T = 0.0;

    void validate() const;
    /// alpha = c R_max / (lambda 2 L_u H beta_T^H C^H S); +inf when the denominator is 0.
    double alpha(const LipschitzProfile& p, double sigma_sum) const;
};

/// Result of checking one inequality over many instances. ratio = LHS / RHS.
struct CheckReport {
    std::string name;
    long long trials = 0;
    long long violations = 0;
    double max_ratio = 0.0;      // largest LHS/RHS over trials with RHS > 0
    double max_excess = 0.0;     // largest LHS - RHS (negative when every instance has slack)
    bool exact = true;           // zero violations required (otherwise within tolerance)
    std::vector<std::string> notes;

    bool passed() const { return violations == 0; }
    void add(double lhs, double rhs, double tolerance = 0.0);
};

struct Options {
    std::uint64_t seed = 1;
    long long lemma1_trials = 10000;
    long long coupled_trials = 1000;   // Lemmas 2-4
    int coupled_particles = 1000;
    int coupled_horizon = 5;
    int lemma4_grid = 5;
    long long lemma5_trials = 1000;
    int lemma5_horizon = 5;
    long long proposition_pairs = 1000000;
};

/// Composite Lipschitz bound of s -> f(s, pi(s), pi_bar(s)) on every environment.
CheckReport check_lemma1(const Options& opt);

/// Lemma 1 tightness probe: linear dynamics with policies aligned to the
/// dynamics' gradient; returns the max observed ratio.
double lemma1_tightness(std::uint64_t seed, int trials);

/// Coupled rollouts under f and a perturbed f~ sharing noise.
/// Returns reports for the reward bound, the utility bound and the min-over-adversary bound.
std::vector<CheckReport> check_lemma2_3_4(const Options& opt);

/// Pathwise state deviation between two members of the plausible set.
/// Returns the report with exponent h-1 and the one with exponent h.
std::vector<CheckReport> check_lemma5(const Options& opt);

/// Both rectifier inequalities on uniform pairs, the two-coordinate embedding,
/// and a boundary grid around zero.
std::vector<CheckReport> check_propositions(const Options& opt);

/// Per-episode quantities of a completed run needed by the lemma 6-8 and theorem audits.
struct AuditEpisode {
    double lambda = 0.0;
    double beta = 0.0;
    double instant_regret = 0.0;
    double instant_violation = 0.0;
    double gamma_increment = 0.0;
    double sigma_sum = 0.0;             // E sum_h ||sigma_{t-1}||
    double min_grid_opt_utility = 0.0;  // NaN if not computed
    double regret_std_err = 0.0;
    double violation_std_err = 0.0;
};

struct AuditSeries {
    std::string algorithm;
    std::uint64_t seed = 0;
    double threshold = 0.0;
    LipschitzProfile profile;  // lambda is taken per episode
    BoundConstants constants;
    std::vector<AuditEpisode> episodes;
};

struct AuditTolerance {
    double z = 3.0;      // multiples of the logged standard error
    double absolute = 1e-9;
};

/// Lemma 6, 7 and 8 per episode (adversary minima are budget-approximate).
std::vector<CheckReport> check_lemma6_7_8(const AuditSeries& run, const AuditTolerance& tol = {});

struct TheoremResult {
    CheckReport regret_envelope;
    CheckReport violation_envelope;
    bool regret_trend = false;     // R_T / T decreasing over the final half
    bool violation_trend = false;  // V_T / T non-increasing over the final half
    double regret_bound = 0.0;
    double violation_bound = 0.0;
};

/// R_T <= 4 L_(r,lambda,u) beta^H C^H H^1.5 sqrt(T Gamma_T) and
/// V_T <= 2 L_u beta^H C^H H^1.5 sqrt(T Gamma_T) + sum_t c R_max / lambda_t.
TheoremResult check_theorem1(const AuditSeries& run, const AuditTolerance& tol = {});

}  // namespace rhc::theory
