#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("fdelab_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI with captured stdout/stderr.
    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "fdelab");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        auto* old_out = std::cout.rdbuf(out.rdbuf());
        auto* old_err = std::cerr.rdbuf(err.rdbuf());
        const int code = fdelab::cli::run_cli(static_cast<int>(argv.size()), argv.data());
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        stdout_ = out.str();
        stderr_ = err.str();
        return code;
    }

    json summary(const fs::path& run_dir) const {
        std::ifstream in(run_dir / "summary.json");
        return json::parse(in);
    }

    fs::path dir_;
    std::string stdout_, stderr_;
};

}  // namespace

TEST_F(CliTest, ProfileOnIntervalMeetsResidual) {
    const auto out = dir_ / "run";
    ASSERT_EQ(run({"profile", "--domain", "interval", "--a", "0", "--b", "1", "--m", "3", "--n", "256", "--out",
                   out.string()}),
              fdelab::cli::kExitOk)
        << stderr_;
    const json s = summary(out);
    EXPECT_EQ(s["subcommand"], "profile");
    EXPECT_LT(s["result"]["residual"].get<double>(), 1e-8);
    EXPECT_TRUE(s["result"]["accepted"].get<bool>());
    for (const char* f : {"rayleigh.bin", "rayleigh.json", "rayleigh.csv", "manifest.json", "config.ini"})
        EXPECT_TRUE(fs::exists(out / f)) << f;

    std::ifstream in(out / "manifest.json");
    const json manifest = json::parse(in);
    EXPECT_TRUE(manifest.contains("versions"));
    EXPECT_TRUE(manifest.contains("wall_time_s"));
    EXPECT_EQ(manifest["csv_columns"]["monitors.csv"], "t,J,R,h10,lm,linf");
}

TEST_F(CliTest, MissingDomainIsUsageError) {
    EXPECT_EQ(run({"profile", "--m", "3", "--out", (dir_ / "x").string()}), fdelab::cli::kExitConfig);
    EXPECT_NE(stderr_.find("--domain"), std::string::npos);
    EXPECT_NE(stderr_.find("Usage"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run({"explode", "--domain", "interval"}), fdelab::cli::kExitConfig);
    EXPECT_EQ(run({}), fdelab::cli::kExitConfig);
}

TEST_F(CliTest, InvalidParametersAreConfigErrors) {
    const std::string out = (dir_ / "x").string();
    EXPECT_EQ(run({"profile", "--domain", "interval", "--m", "1.5", "--out", out}), fdelab::cli::kExitConfig);
    EXPECT_EQ(run({"profile", "--domain", "interval", "--n", "4", "--out", out}), fdelab::cli::kExitConfig);
    EXPECT_EQ(run({"profile", "--domain", "annulus", "--N", "2", "--a", "0", "--out", out}),
              fdelab::cli::kExitConfig);
    EXPECT_EQ(run({"profile", "--domain", "polar", "--a", "1", "--b", "2", "--n", "8", "--ntheta", "16",
                   "--method", "shooting", "--out", out}),
              fdelab::cli::kExitConfig);
}

TEST_F(CliTest, SolverFailureExitsOneWithDiagnostic) {
    const std::string out = (dir_ / "x").string();
    EXPECT_EQ(run({"evolve", "--domain", "interval", "--n", "32", "--scale", "0", "--out", out}),
              fdelab::cli::kExitSolver);
    EXPECT_NE(stderr_.find("fdelab evolve:"), std::string::npos);
}

TEST_F(CliTest, SummaryIsDeterministic) {
    const std::vector<std::string> base{"rescaled", "--domain", "interval", "--n", "32",  "--s-horizon",
                                        "1",        "--dt",     "0.05",     "--seed", "7"};
    auto with_out = [&](const fs::path& p) {
        auto a = base;
        a.insert(a.end(), {"--out", p.string()});
        return a;
    };
    ASSERT_EQ(run(with_out(dir_ / "a")), 0) << stderr_;
    ASSERT_EQ(run(with_out(dir_ / "b")), 0) << stderr_;
    EXPECT_EQ(summary(dir_ / "a"), summary(dir_ / "b"));
}

TEST_F(CliTest, ConfigEchoReproducesRun) {
    const auto first = dir_ / "first";
    ASSERT_EQ(run({"profile", "--domain", "interval", "--n", "64", "--m", "4", "--out", first.string()}), 0)
        << stderr_;
    const auto second = dir_ / "second";
    ASSERT_EQ(run({"--config", (first / "config.ini").string(), "profile", "--out", second.string()}), 0) << stderr_;
    EXPECT_EQ(summary(first), summary(second));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
    const auto ini = dir_ / "run.ini";
    {
        std::ofstream f(ini);
        f << "[profile]\ndomain=interval\nm=3\nn=40\n";
    }
    const auto from_file = dir_ / "file";
    ASSERT_EQ(run({"--config", ini.string(), "profile", "--out", from_file.string()}), 0) << stderr_;
    const auto overridden = dir_ / "flag";
    ASSERT_EQ(run({"--config", ini.string(), "profile", "--n", "48", "--out", overridden.string()}), 0) << stderr_;

    auto nodes = [&](const fs::path& p) {
        return summary(p)["result"]["rayleigh"]["grid"]["n"].get<int>();
    };
    EXPECT_EQ(nodes(from_file), 40);
    EXPECT_EQ(nodes(overridden), 48);
}

TEST_F(CliTest, AnnulusBreaksSymmetry) {
    const auto out = dir_ / "ann";
    ASSERT_EQ(run({"annulus", "--N", "2", "--m", "3", "--a", "1", "--b", "1.1", "--nr", "32", "--ntheta", "128",
                   "--samples", "0", "--out", out.string()}),
              0)
        << stderr_;
    const json s = summary(out)["result"];
    EXPECT_TRUE(s["threshold"]["satisfied"].get<bool>());
    EXPECT_FALSE(s["minimizer"]["is_radial"].get<bool>());
    EXPECT_GT(s["certificate"]["best_gap"].get<double>(), 0.0);
}
