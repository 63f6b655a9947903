// SPDX-License-Identifier: Apache-2.0
#include "test_util.hpp"

#include "snnconv/error.hpp"
#include "snnconv/fixtures.hpp"
#include "snnconv/pipeline.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace snnconv;
using nlohmann::json;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with `args`; stdout and stderr go to `log`. Returns the exit status.
int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + SNNCONV_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Fixture model and inputs written through the CLI.
struct Workspace {
    TempDir dir{"pipeline"};
    Workspace() {
        const int rc = cli("fixture -o \"" + dir.path().string() + "\" --seed 3", dir / "fixture.log");
        if (rc != 0) throw std::runtime_error(testutil::read_file(dir / "fixture.log"));
    }
    std::string base_args() const {
        return "--model \"" + (dir / "model.json").string() + "\" --calib \"" + (dir / "calib").string() +
               "\" --eval \"" + (dir / "eval").string() + "\"";
    }
};

} // namespace

TEST(Cli, MissingCalibrationDirIsAnInputError) {
    Workspace ws;
    const fs::path missing = ws.dir / "no_such_dir";
    const int rc = cli("calibrate --model \"" + (ws.dir / "model.json").string() + "\" --calib \"" +
                           missing.string() + "\" -o \"" + (ws.dir / "out").string() + "\"",
                       ws.dir / "err.log");
    EXPECT_EQ(rc, 2);
    const std::string log = testutil::read_file(ws.dir / "err.log");
    EXPECT_NE(log.find(missing.string()), std::string::npos) << log;
}

TEST(Cli, UnknownFlagExitsTwo) {
    TempDir dir("cli");
    EXPECT_EQ(cli("run --no-such-flag", dir / "log"), 2);
}

TEST(Cli, CalibrateIsByteIdenticalOnRerun) {
    Workspace ws;
    const std::string args = "calibrate " + ws.base_args() + " -o \"";
    ASSERT_EQ(cli(args + (ws.dir / "a").string() + "\"", ws.dir / "a.log"), 0) << testutil::read_file(ws.dir / "a.log");
    ASSERT_EQ(cli(args + (ws.dir / "b").string() + "\"", ws.dir / "b.log"), 0);
    const std::string a = testutil::read_file(ws.dir / "a" / "stats.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, testutil::read_file(ws.dir / "b" / "stats.json"));
    const json j = json::parse(a);
    EXPECT_EQ(j["mode"], "p99.9");
    EXPECT_EQ(j["sample_count"], 32);
}

TEST(Cli, RunWritesReports) {
    Workspace ws;
    const fs::path out = ws.dir / "run";
    ASSERT_EQ(cli("run " + ws.base_args() + " -T 200 --t-list 10 50 200 -o \"" + out.string() + "\"", ws.dir / "log"), 0)
        << testutil::read_file(ws.dir / "log");
    for (const char* f : {"decoded_outputs.json", "decoded_outputs.f32", "firing_report.json", "histogram.csv",
                          "raster.csv", "convergence.json", "energy.json", "run_config.json"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const json conv = json::parse(testutil::read_file(out / "convergence.json"));
    ASSERT_EQ(conv["series"].size(), 1u);
    EXPECT_EQ(conv["series"][0]["points"].size(), 3u);
    const json dec = json::parse(testutil::read_file(out / "decoded_outputs.json"));
    EXPECT_EQ(dec["outputs"].size(), 8u);
    EXPECT_EQ(fs::file_size(out / "decoded_outputs.f32"), 8u * 3u * sizeof(float));
}

TEST(Cli, SingleStepRunIsValid) {
    Workspace ws;
    const fs::path out = ws.dir / "t1";
    ASSERT_EQ(cli("run " + ws.base_args() + " -T 1 -o \"" + out.string() + "\"", ws.dir / "log"), 0)
        << testutil::read_file(ws.dir / "log");
    const json fr = json::parse(testutil::read_file(out / "firing_report.json"));
    EXPECT_EQ(fr["T"], 1);
}

TEST(Cli, RunIsDeterministic) {
    Workspace ws;
    const std::string args = "run " + ws.base_args() + " -T 100 --trace -o \"";
    ASSERT_EQ(cli(args + (ws.dir / "a").string() + "\"", ws.dir / "a.log"), 0);
    ASSERT_EQ(cli(args + (ws.dir / "b").string() + "\"", ws.dir / "b.log"), 0);
    for (const char* f : {"decoded_outputs.json", "decoded_outputs.f32", "firing_report.json", "histogram.csv",
                          "raster.csv", "trace.csv", "convergence.json", "energy.json"}) {
        EXPECT_EQ(testutil::read_file(ws.dir / "a" / f), testutil::read_file(ws.dir / "b" / f)) << f;
    }
}

TEST(Cli, CompareMatchesIndependentRuns) {
    Workspace ws;
    const std::string common = ws.base_args() + " -T 200 --t-list 20 200 ";
    ASSERT_EQ(cli("compare " + common + "-o \"" + (ws.dir / "cmp").string() + "\"", ws.dir / "c.log"), 0)
        << testutil::read_file(ws.dir / "c.log");
    ASSERT_EQ(cli("run " + common + "--scheme layer -o \"" + (ws.dir / "ln").string() + "\"", ws.dir / "l.log"), 0);
    ASSERT_EQ(cli("run " + common + "--scheme channel -o \"" + (ws.dir / "cn").string() + "\"", ws.dir / "n.log"), 0);
    const json cmp = json::parse(testutil::read_file(ws.dir / "cmp" / "convergence.json"));
    const json ln = json::parse(testutil::read_file(ws.dir / "ln" / "convergence.json"));
    const json cn = json::parse(testutil::read_file(ws.dir / "cn" / "convergence.json"));
    ASSERT_EQ(cmp["series"].size(), 2u);
    EXPECT_EQ(cmp["series"][0], ln["series"][0]);
    EXPECT_EQ(cmp["series"][1], cn["series"][0]);
}

TEST(Cli, AnalyzeAndEnergy) {
    Workspace ws;
    ASSERT_EQ(cli("analyze " + ws.base_args() + " --percentile max -o \"" + (ws.dir / "an").string() + "\"",
                  ws.dir / "a.log"),
              0);
    const json prof = json::parse(testutil::read_file(ws.dir / "an" / "profile.json"));
    const auto& first = prof["layer_norm"]["layers"][0]["normalized"];
    EXPECT_LT(first[3].get<float>(), 0.05f);
    ASSERT_EQ(cli("energy --published -o \"" + (ws.dir / "en").string() + "\"", ws.dir / "e.log"), 0);
    const json pub = json::parse(testutil::read_file(ws.dir / "en" / "published_comparison.json"));
    EXPECT_DOUBLE_EQ(pub["gpu"]["energy_j_2sf"].get<double>(), 0.12);
}

TEST(Config, UnknownKeyRejected) {
    TempDir dir("cfg");
    testutil::write_file(dir / "cfg.json", R"({"model": "m.json", "timestep": 10})");
    EXPECT_THROW(load_config(dir / "cfg.json"), InputError);
}

TEST(Config, PathsResolveAgainstConfigFile) {
    TempDir dir("cfg");
    testutil::write_file(dir / "cfg.json",
                         R"({"model": "m.json", "calibration_dir": "calib", "scheme": "layer", "timesteps": 50})");
    const RunConfig c = load_config(dir / "cfg.json");
    EXPECT_EQ(c.model, dir / "m.json");
    EXPECT_EQ(c.calibration_dir, dir / "calib");
    EXPECT_EQ(c.scheme, NormScheme::layer_norm);
    EXPECT_EQ(c.timesteps, 50u);
}

TEST(Config, DefaultTimeList) {
    EXPECT_EQ(default_t_list(100), (std::vector<std::size_t>{1, 2, 5, 10, 20, 50, 100}));
    EXPECT_EQ(default_t_list(30), (std::vector<std::size_t>{1, 2, 5, 10, 20, 30}));
}
