#include <gtest/gtest.h>

#include <filesystem>

#include "rhc/config.hpp"

using namespace rhc;

namespace {

std::vector<std::string> errors_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.fields();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle)
{
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip)
{
    ExperimentConfig d;
    d.validate();
    const std::string text = dump_config(d);
    for (const char* section : {"[env]", "[model]", "[policy]", "[solver]", "[penalty]", "[run]"})
        EXPECT_NE(text.find(section), std::string::npos) << section;
    EXPECT_EQ(dump_config(parse_config(text)), text);
}

TEST(Config, ParsesEverySection)
{
    const auto c = parse_config(R"(
# comment line
[env]
name = "adv_pendulum"
adversary_magnitude = 0.1   # trailing comment
horizon = 20

[model]
kind = "exact"
data_cap = 150
beta_mode = "log_growth"
beta0 = 1.5

[policy]
protagonist_features = "random_fourier"
num_features = 8

[solver]
population = 10
elites = 2
particles = 3

[penalty]
lambda = 12.5

[run]
algorithms = ["rhc_ucrl", "rh_ucrl"]
episodes = 7
seeds = [3, 4, 5]
oracle = false
)");
    EXPECT_EQ(c.env_name, "adv_pendulum");
    EXPECT_EQ(c.env_overrides.at("adversary_magnitude"), 0.1);
    EXPECT_EQ(c.env_overrides.at("horizon"), 20.0);
    EXPECT_EQ(c.model.kind, "exact");
    EXPECT_EQ(c.model.data_cap, 150);
    EXPECT_EQ(c.model.beta.mode, "log_growth");
    EXPECT_EQ(c.model.beta.beta0, 1.5);
    EXPECT_EQ(c.protagonist_features.kind, policy::FeatureKind::random_fourier);
    EXPECT_EQ(c.protagonist_features.num_features, 8);
    EXPECT_EQ(c.solver.population, 10);
    EXPECT_EQ(c.solver.particles, 3);
    EXPECT_EQ(c.penalty.lambda, 12.5);
    EXPECT_EQ(c.algorithms, (std::vector<std::string>{"rhc_ucrl", "rh_ucrl"}));
    EXPECT_EQ(c.episodes, 7);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
    EXPECT_FALSE(c.oracle);
}

TEST(Config, UnknownAlgorithmListsChoices)
{
    const auto e = errors_of("[run]\nalgorithms = [\"ppo\"]\n");
    ASSERT_EQ(e.size(), 1u);
    for (const char* n : {"rhc_ucrl", "rh_ucrl", "greedy_mean", "ppo"}) EXPECT_NE(e[0].find(n), std::string::npos);
}

TEST(Config, ReportsEveryBadFieldAtOnce)
{
    const auto e = errors_of(R"(
[model]
lengthscale = abc
colour = 3
[solver]
population = -4
[bogus]
x = 1
)");
    EXPECT_EQ(e.size(), 4u);
    EXPECT_TRUE(any_contains(e, "[model] lengthscale"));
    EXPECT_TRUE(any_contains(e, "unknown key 'colour'"));
    EXPECT_TRUE(any_contains(e, "[solver] solver: need 1 <= elites <= population"));
    EXPECT_TRUE(any_contains(e, "unknown section [bogus]"));
}

TEST(Config, UnknownKeyListsAcceptedKeys)
{
    const auto e = errors_of("[penalty]\nlamda = 3\n");
    ASSERT_EQ(e.size(), 1u);
    EXPECT_NE(e[0].find("lambda"), std::string::npos);
    EXPECT_NE(e[0].find("kappa"), std::string::npos);
}

TEST(Config, SemanticValidation)
{
    EXPECT_TRUE(any_contains(errors_of("[env]\nname = \"lunar_lander\"\n"), "lunar_lander"));
    EXPECT_TRUE(any_contains(errors_of("[env]\ngravity = 9.8\n"), "[env]"));
    EXPECT_TRUE(any_contains(errors_of("[solver]\nelites = 100\npopulation = 10\n"), "[solver]"));
    EXPECT_TRUE(any_contains(errors_of("[model]\nkind = \"nn\"\n"), "[model] kind"));
    EXPECT_TRUE(any_contains(errors_of("[run]\nepisodes = 0\n"), "episodes"));
    EXPECT_TRUE(any_contains(errors_of("[run]\noracle = maybe\n"), "oracle"));
    EXPECT_TRUE(any_contains(errors_of("[penalty]\nlambda = -2\n"), "[penalty]"));
    EXPECT_TRUE(any_contains(errors_of("[run]\nseeds = [1, x]\n"), "seeds"));
}

TEST(Config, KeyOutsideSectionRejected)
{
    EXPECT_TRUE(any_contains(errors_of("episodes = 3\n"), "outside any section"));
}

TEST(Config, MissingFileIsConfigError)
{
    EXPECT_THROW(load_config(std::filesystem::path("/nonexistent/dir/x.toml")), ConfigError);
}
