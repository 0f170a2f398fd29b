#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhc/config.hpp"
#include "rhc/learner.hpp"
#include "rhc/theory.hpp"

namespace rhc::report {

inline constexpr int kLedgerSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

/// Version string baked in at configure time (`git describe` when available).
const char* artifact_version();

/// Lipschitz constants of the configured policy class and environment, with
/// the model constants taken as the worst value logged over the runs.
theory::LipschitzProfile run_profile(const learner::Problem& problem, const std::vector<learner::SeedRun>& runs);
theory::BoundConstants run_constants(const learner::Problem& problem, const std::vector<learner::SeedRun>& runs);

std::string ledger_filename(const std::string& algorithm, std::uint64_t seed);

struct RunInputs {
    std::filesystem::path config_path;
    std::string config_text;  // raw bytes of the config file
    const ExperimentConfig* cfg = nullptr;
    const learner::Problem* problem = nullptr;
    std::optional<learner::OracleResult> oracle;
};

nlohmann::json summary_json(const RunInputs& in, const std::vector<learner::SeedRun>& runs);

/// Audit inputs for every (algorithm, seed) recorded in a summary.
std::vector<theory::AuditSeries> audit_series(const nlohmann::json& summary);

/// Writes ledgers, summary.json, the three plots, and manifest.json (last).
/// Returns the emitted file names relative to `dir`.
std::vector<std::string> write_run(const std::filesystem::path& dir, const RunInputs& in,
                                   const std::vector<learner::SeedRun>& runs);

/// One ledger loaded back from a run directory.
struct LoadedLedger {
    std::string algorithm;
    std::uint64_t seed = 0;
    objective::LearningLedger ledger;
};

/// Ledgers of a run directory in (algorithm, seed) order. Algorithm order
/// follows summary.json when present.
std::vector<LoadedLedger> load_ledgers(const std::filesystem::path& dir);

struct PlotContext {
    int horizon = 0;
    std::optional<double> threshold;  // b
};

std::string reward_svg(const std::vector<LoadedLedger>& ledgers);
/// Cost = H - J_u per episode, with the constraint drawn at H - b.
std::string cost_svg(const std::vector<LoadedLedger>& ledgers, const PlotContext& ctx);
std::string cumulative_svg(const std::vector<LoadedLedger>& ledgers);

/// Reads the ledgers (and summary.json for the threshold) and writes
/// reward.svg, cost.svg and cumulative.svg. Throws ArgumentError when there
/// is nothing to plot.
std::vector<std::string> write_plots(const std::filesystem::path& dir);

nlohmann::json check_json(const theory::CheckReport& r);
std::string check_line(const theory::CheckReport& r);

}  // namespace rhc::report
