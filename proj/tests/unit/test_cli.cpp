#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "rhc/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

fs::path scratch()
{
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / ("rhc_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

// Runs the CLI with the output root inside the scratch dir; stderr is merged.
Result cli(const std::string& args, const std::string& root = "root")
{
    const std::string cmd = "cd '" + scratch().string() + "' && RHC_OUTPUT_ROOT='" + (scratch() / root).string() +
                            "' '" + RHCUCRL_BIN + "' " + args + " 2>&1";
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const char* kSmoke = R"([env]
name = "linear_toy"

[policy]
protagonist_features = "linear"
adversary_features = "linear"

[solver]
population = 4
elites = 2
iterations = 1
inner_population = 3
inner_elites = 1
inner_iterations = 1
particles = 2
eval_particles = 4
robust_particles = 2
robust_budget = 12
diagnostic_particles = 2

[run]
episodes = 3
seeds = [1, 2]
oracle = false
)";

fs::path write_config(const std::string& name, const std::string& text)
{
    const auto p = scratch() / name;
    rhc::io::write_file(p, text);
    return p;
}

}  // namespace

class CliRun : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        write_config("smoke.toml", kSmoke);
        first_ = new Result(cli("run smoke.toml", "a"));
        second_ = new Result(cli("run smoke.toml", "b"));
    }
    static void TearDownTestSuite()
    {
        delete first_;
        delete second_;
        fs::remove_all(scratch());
    }
    static Result* first_;
    static Result* second_;
};

Result* CliRun::first_ = nullptr;
Result* CliRun::second_ = nullptr;

TEST_F(CliRun, SmokeRunEmitsArtifacts)
{
    ASSERT_EQ(first_->code, 0) << first_->out;
    const auto dir = scratch() / "a" / "smoke";
    int csv = 0, svg = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        csv += e.path().extension() == ".csv";
        svg += e.path().extension() == ".svg";
    }
    EXPECT_EQ(csv, 2);
    EXPECT_EQ(svg, 3);
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    const json m = json::parse(rhc::io::read_file(dir / "manifest.json"));
    EXPECT_EQ(m.at("files").size(), 6u);
    EXPECT_EQ(m.at("config_sha256"), rhc::io::sha256_hex(std::string(kSmoke)));
}

TEST_F(CliRun, RerunIsByteIdentical)
{
    ASSERT_EQ(second_->code, 0) << second_->out;
    for (const auto& e : fs::directory_iterator(scratch() / "a" / "smoke")) {
        const auto name = e.path().filename();
        if (name == "manifest.json") continue;  // records its own output_dir
        EXPECT_EQ(rhc::io::read_file(e.path()), rhc::io::read_file(scratch() / "b" / "smoke" / name)) << name;
    }
    const json a = json::parse(rhc::io::read_file(scratch() / "a" / "smoke" / "manifest.json"));
    const json b = json::parse(rhc::io::read_file(scratch() / "b" / "smoke" / "manifest.json"));
    EXPECT_EQ(a.at("files"), b.at("files"));
}

TEST_F(CliRun, PlotRegeneratesFromRunDir)
{
    const auto dir = scratch() / "a" / "smoke";
    const auto before = rhc::io::read_file(dir / "reward.svg");
    fs::remove(dir / "reward.svg");
    const auto r = cli("plot '" + dir.string() + "'");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(rhc::io::read_file(dir / "reward.svg"), before);
}

TEST_F(CliRun, TheoremSuiteReadsRunDir)
{
    const auto r = cli("verify theorem --run-dir '" + (scratch() / "a" / "smoke").string() + "' --out vt");
    EXPECT_NE(r.out.find("trend [rhc_ucrl seed 1]"), std::string::npos) << r.out;
    EXPECT_TRUE(r.code == 0 || r.code == 1);
    EXPECT_TRUE(fs::exists(scratch() / "vt" / "verify_theorem.json"));
}

TEST(Cli, UnknownAlgorithmIsUsageError)
{
    write_config("bad_alg.toml", "[run]\nalgorithms = [\"ppo\"]\n");
    const auto r = cli("run bad_alg.toml");
    EXPECT_EQ(r.code, 2);
    for (const char* n : {"ppo", "rhc_ucrl", "rh_ucrl", "greedy_mean"}) EXPECT_NE(r.out.find(n), std::string::npos) << r.out;
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(cli("verify theorem").code, 2);
    EXPECT_EQ(cli("plot /nonexistent/run").code, 2);
    EXPECT_EQ(cli("run").code, 2);
    EXPECT_EQ(cli("run missing.toml").code, 2);
    EXPECT_EQ(cli("verify everything").code, 2);
    EXPECT_EQ(cli("").code, 2);
}

TEST(Cli, InfeasibleThresholdRefusesToStart)
{
    write_config("infeasible.toml", "[env]\nname = \"linear_toy\"\nthreshold = 10.5\n"
                                    "[policy]\nprotagonist_features = \"linear\"\nadversary_features = \"linear\"\n");
    const auto r = cli("oracle infeasible.toml");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("max achievable robust utility: 10"), std::string::npos) << r.out;
}

TEST(Cli, PrintDefaultsParsesBack)
{
    const auto r = cli("run --print-defaults");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("[solver]"), std::string::npos);
    write_config("defaults.toml", r.out);
    const auto again = cli("run defaults.toml --print-defaults");
    EXPECT_EQ(again.code, 0);
    EXPECT_EQ(again.out, r.out);
}

TEST(Cli, PropositionsReportIsReproducible)
{
    const auto a = cli("verify propositions --trials 2000 --out va");
    const auto b = cli("verify propositions --trials 2000 --out vb");
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("GATE PASS"), std::string::npos);
    EXPECT_EQ(rhc::io::read_file(scratch() / "va" / "verify_propositions.json"),
              rhc::io::read_file(scratch() / "vb" / "verify_propositions.json"));
}

TEST(Cli, ShippedConfigsParse)
{
    for (const auto& e : fs::directory_iterator(fs::path(RHC_SOURCE_DIR) / "configs")) {
        const auto r = cli("run '" + e.path().string() + "' --print-defaults");
        EXPECT_EQ(r.code, 0) << e.path() << "\n" << r.out;
    }
}
