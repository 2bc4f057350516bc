// Copyright 2026 The g2up Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int status = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string &s) {
    std::string q = "'";
    for (char c : s) {
        q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    }
    return q + "'";
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("g2up_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    Result run(const std::vector<std::string> &args) const {
        std::string cmd = "cd " + quote(dir.string()) + " && " + quote(G2UP_CLI);
        for (const auto &a : args) {
            cmd += " " + quote(a);
        }
        cmd += " 2>" + quote((dir / "stderr.txt").string());
        Result r;
        FILE *pipe = popen(cmd.c_str(), "r");
        if (!pipe) {
            return r;
        }
        char buf[4096];
        size_t n;
        while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
            r.out.append(buf, n);
        }
        int st = pclose(pipe);
        r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
        r.err = slurp(dir / "stderr.txt");
        return r;
    }
};

std::string experiment(const std::string &name) {
    return (fs::path(G2UP_SOURCE_DIR) / "experiments" / name).string();
}

}  // namespace

TEST_F(Cli, QpmReportsPumpAt812) {
    auto r = run({"qpm", "--signal", "800:820:1", "--at", "812"});
    ASSERT_EQ(r.status, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_EQ(j["roots_found"], 21);
    EXPECT_NEAR(j["at"]["pump_nm"].get<double>(), 990, 10);
    EXPECT_NEAR(j["at"]["sfg_nm"].get<double>(), 446, 3);
    EXPECT_TRUE(fs::exists(dir / "qpm.csv"));
    auto m = json::parse(slurp(dir / "qpm.csv.manifest.json"));
    EXPECT_EQ(m["command"], "qpm");
    EXPECT_EQ(m["outputs"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(Cli, DeconvolveValue) {
    auto r = run({"analyze", "--deconvolve", "6.5", "2.5"});
    ASSERT_EQ(r.status, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_NEAR(j["deconvolution"]["resolution_ps"].get<double>(), 3.86, 0.005);
}

TEST_F(Cli, ErrorsAreStructuredWithExitCodes) {
    auto r = run({"analyze", "--deconvolve", "3", "2.5"});
    EXPECT_EQ(r.status, 2);
    auto e = json::parse(r.err);
    EXPECT_EQ(e["error"]["kind"], "domain_error");
    EXPECT_EQ(e["error"]["status"], 2);

    r = run({"qpm", "--signal", "812:812:1", "--poling", "30", "--at", "812"});
    EXPECT_EQ(r.status, 3);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "no_root");

    r = run({"frobnicate"});
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "usage_error");

    r = run({"simulate", "/nonexistent.json"});
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "io_error");
}

TEST_F(Cli, RegimeViolationExitCode) {
    std::ofstream(dir / "bright.json") << R"({
      "source": {"kind": "coherent_cw", "mean_rate": 1000},
      "measurement": {"n_periods": 1000, "delays_ps": [0], "gate": {"type": "gaussian", "fwhm_ps": 4},
                      "conversion_efficiency": 0.35, "transmission": 1, "detector_efficiency": 1}
    })";
    auto r = run({"simulate", "bright.json"});
    EXPECT_EQ(r.status, 4) << r.err;
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "regime_violation");
}

TEST_F(Cli, CoherentSimulateThenAnalyzeMean) {
    auto r = run({"simulate", experiment("coherent.json"), "-o", "g2.csv"});
    ASSERT_EQ(r.status, 0) << r.err;
    r = run({"analyze", "g2.csv", "--mean", "--violation"});
    ASSERT_EQ(r.status, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_NEAR(j["mean"]["mean"].get<double>(), 1.0, 0.01);
    EXPECT_LT(j["mean"]["max_deviation_sigma"].get<double>(), 3.5);
}

TEST_F(Cli, ManifestRegeneratesIdenticalOutput) {
    auto r = run({"simulate", experiment("eom.json"), "--n-periods", "2000000", "-o", "g2.csv", "--histogram",
                  "hist.csv", "--threads", "1"});
    ASSERT_EQ(r.status, 0) << r.err;
    auto m = json::parse(slurp(dir / "g2.csv.manifest.json"));
    std::string first = slurp(dir / "g2.csv");
    fs::rename(dir / "g2.csv", dir / "first.csv");
    fs::rename(dir / "g2.csv.manifest.json", dir / "first.manifest.json");

    // Replay the recorded arguments with a different thread count.
    auto args = m["args"].get<std::vector<std::string>>();
    for (std::size_t i = 0; i + 1 < args.size(); i++) {
        if (args[i] == "--threads") {
            args[i + 1] = "3";
        }
    }
    r = run(args);
    ASSERT_EQ(r.status, 0) << r.err;
    auto again = json::parse(slurp(dir / "g2.csv.manifest.json"));
    EXPECT_EQ(slurp(dir / "g2.csv"), first);
    EXPECT_EQ(again["outputs"], m["outputs"]);
    EXPECT_EQ(again["inputs"], m["inputs"]);
    EXPECT_EQ(again["seed"], m["seed"]);
    EXPECT_EQ(again["resolved_experiment"], m["resolved_experiment"]);
}

TEST_F(Cli, BudgetProduct) {
    auto r = run({"budget"});
    ASSERT_EQ(r.status, 0) << r.err;
    double p = json::parse(r.out)["product"].get<double>();
    EXPECT_GE(p, 1e-6);
    EXPECT_LE(p, 1e-5);
    r = run({"budget", "--factor", "filter=1.5"});
    EXPECT_EQ(r.status, 2);
}
