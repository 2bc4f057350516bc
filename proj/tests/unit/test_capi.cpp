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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "g2up/g2up.h"

namespace fs = std::filesystem;

namespace {

std::string kind() {
    return g2up_last_error_kind();
}

fs::path scratch(const std::string &name) {
    fs::path dir = fs::temp_directory_path() / "g2up_capi_test";
    fs::create_directories(dir);
    return dir / name;
}

const char *kSmallExperiment = R"({
  "source": {"kind": "coherent_cw", "mean_rate": 2.75},
  "measurement": {
    "n_periods": 200000,
    "delays_ps": {"from": -10, "to": 10, "step": 2},
    "gate": {"type": "gaussian", "fwhm_ps": 4.0},
    "conversion_efficiency": 0.35,
    "transmission": 0.08,
    "detector_efficiency": 0.65,
    "rng_seed": 7
  }
})";

}  // namespace

TEST(CApi, Version) {
    EXPECT_FALSE(std::string(g2up_version()).empty());
}

TEST(CApi, QpmPoint) {
    g2up_qpm_point p{};
    ASSERT_EQ(g2up_solve_qpm_pump(812, 3.96, 25, &p), G2UP_OK);
    EXPECT_NEAR(p.pump_nm, 990, 10);
    EXPECT_NEAR(p.sfg_nm, 446, 3);
    EXPECT_LT(std::abs(p.delta_k_rad_per_mm), 1e-6);
    double sfg = 0;
    ASSERT_EQ(g2up_sfg_wavelength(812, p.pump_nm, &sfg), G2UP_OK);
    EXPECT_NEAR(sfg, p.sfg_nm, 1e-9);
}

TEST(CApi, StatusCodesAndKinds) {
    g2up_qpm_point p{};
    EXPECT_EQ(g2up_solve_qpm_pump(812, 30, 25, &p), G2UP_ERR_NUMERICAL);
    EXPECT_EQ(kind(), "no_root");
    double sfg;
    EXPECT_EQ(g2up_sfg_wavelength(-812, 990, &sfg), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "domain_error");
    EXPECT_FALSE(std::string(g2up_last_error()).empty());
    double r;
    EXPECT_EQ(g2up_deconvolve(3, 0, 2.5, 0, &r, nullptr), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "domain_error");
}

TEST(CApi, NullArguments) {
    EXPECT_EQ(g2up_solve_qpm_pump(812, 3.96, 25, nullptr), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "null_argument");
    EXPECT_EQ(g2up_setup_new(nullptr), G2UP_ERR_CONFIG);
    EXPECT_EQ(g2up_experiment_load(nullptr, nullptr), G2UP_ERR_CONFIG);
    g2up_setup_free(nullptr);
    g2up_gate_free(nullptr);
    g2up_experiment_free(nullptr);
    g2up_histogram_free(nullptr);
    g2up_g2_free(nullptr);
}

TEST(CApi, SetupKeys) {
    g2up_setup *s = nullptr;
    ASSERT_EQ(g2up_setup_new(&s), G2UP_OK);
    double v = 0;
    ASSERT_EQ(g2up_setup_get(s, "pump_power_mw", &v), G2UP_OK);
    EXPECT_DOUBLE_EQ(v, 1.5);
    ASSERT_EQ(g2up_setup_set(s, "coupling", 0.05), G2UP_OK);
    ASSERT_EQ(g2up_setup_get(s, "coupling", &v), G2UP_OK);
    EXPECT_DOUBLE_EQ(v, 0.05);
    double pump0 = 0, pump1 = 0;
    g2up_setup_get(s, "pump_nm", &pump0);
    ASSERT_EQ(g2up_setup_set(s, "signal_nm", 830), G2UP_OK);
    g2up_setup_get(s, "pump_nm", &pump1);
    EXPECT_NE(pump0, pump1);
    EXPECT_EQ(g2up_setup_set(s, "nonsense", 1), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "unknown_key");
    EXPECT_EQ(g2up_setup_set(s, "n_time", 100.5), G2UP_ERR_CONFIG);
    EXPECT_EQ(g2up_setup_set(s, "pump_power_mw", NAN), G2UP_ERR_CONFIG);
    g2up_setup_free(s);
}

TEST(CApi, PropagateAndGate) {
    g2up_setup *s = nullptr;
    ASSERT_EQ(g2up_setup_new(&s), G2UP_OK);
    g2up_propagation_summary sum{};
    ASSERT_EQ(g2up_propagate(s, nullptr, &sum), G2UP_OK);
    EXPECT_NEAR(sum.gate_fwhm_ps, 4.0, 0.05);
    EXPECT_LT(sum.manley_rowe_drift, 1e-4);
    g2up_gate *g = nullptr;
    ASSERT_EQ(g2up_gate_simulate(s, &g), G2UP_OK);
    EXPECT_NEAR(g2up_gate_fwhm(g), sum.gate_fwhm_ps, 1e-9);
    auto path = scratch("gate.csv").string();
    ASSERT_EQ(g2up_gate_write_csv(g, path.c_str()), G2UP_OK);
    g2up_gate *back = nullptr;
    ASSERT_EQ(g2up_gate_read_csv(path.c_str(), &back), G2UP_OK);
    EXPECT_NEAR(g2up_gate_fwhm(back), g2up_gate_fwhm(g), 1e-9);
    g2up_gate_free(back);
    g2up_gate_free(g);
    g2up_setup_free(s);
}

TEST(CApi, WriteToMissingDirectoryIsIoError) {
    g2up_gate *g = nullptr;
    ASSERT_EQ(g2up_gate_gaussian(4, 0.05, &g), G2UP_OK);
    EXPECT_EQ(g2up_gate_write_csv(g, "/nonexistent-dir/x.csv"), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "io_error");
    g2up_gate_free(g);
}

TEST(CApi, SimulateEstimateAnalyze) {
    g2up_experiment *e = nullptr;
    ASSERT_EQ(g2up_experiment_parse(kSmallExperiment, ".", &e), G2UP_OK);
    EXPECT_EQ(g2up_experiment_seed(e), 7u);
    EXPECT_NE(std::string(g2up_experiment_resolved_json(e)).find("coherent_cw"), std::string::npos);
    ASSERT_EQ(g2up_experiment_set_threads(e, 2), G2UP_OK);
    g2up_histogram *h = nullptr;
    ASSERT_EQ(g2up_simulate(e, &h), G2UP_OK);
    g2up_g2 *est = nullptr;
    ASSERT_EQ(g2up_estimate(h, &est), G2UP_OK);
    ASSERT_EQ(g2up_g2_size(est), 11u);
    g2up_g2_point p{};
    ASSERT_EQ(g2up_g2_point_at(est, 5, &p), G2UP_OK);
    EXPECT_EQ(p.dt_ps, 0);
    EXPECT_EQ(g2up_g2_point_at(est, 11, &p), G2UP_ERR_CONFIG);

    auto path = scratch("g2.csv").string();
    ASSERT_EQ(g2up_g2_write_csv(est, path.c_str()), G2UP_OK);
    g2up_g2 *back = nullptr;
    ASSERT_EQ(g2up_g2_read_csv(path.c_str(), &back), G2UP_OK);
    ASSERT_EQ(g2up_g2_size(back), 11u);
    for (size_t i = 0; i < 11; i++) {
        g2up_g2_point a{}, b{};
        g2up_g2_point_at(est, i, &a);
        g2up_g2_point_at(back, i, &b);
        EXPECT_EQ(a.g2, b.g2);
        EXPECT_EQ(a.g2_err, b.g2_err);
    }

    g2up_mean_result m{};
    ASSERT_EQ(g2up_mean(est, &m), G2UP_OK);
    EXPECT_NEAR(m.mean, 1, 5 * m.error);
    g2up_violation_result v{};
    ASSERT_EQ(g2up_violation(est, &v), G2UP_OK);
    EXPECT_TRUE(std::isfinite(v.significance_sigma));
    g2up_visibility_result vis{};
    EXPECT_EQ(g2up_visibility(est, 4, 0, &vis), G2UP_ERR_CONFIG);

    g2up_g2_free(back);
    g2up_g2_free(est);
    g2up_histogram_free(h);
    g2up_experiment_free(e);
}

TEST(CApi, SimulationIsSeedDeterministic) {
    auto run = [](uint64_t seed) {
        g2up_experiment *e = nullptr;
        g2up_experiment_parse(kSmallExperiment, ".", &e);
        g2up_experiment_set_seed(e, seed);
        g2up_histogram *h = nullptr;
        g2up_simulate(e, &h);
        g2up_g2 *est = nullptr;
        g2up_estimate(h, &est);
        g2up_g2_point p{};
        g2up_g2_point_at(est, 5, &p);
        g2up_g2_free(est);
        g2up_histogram_free(h);
        g2up_experiment_free(e);
        return p.c;
    };
    EXPECT_EQ(run(11), run(11));
    EXPECT_NE(run(11), run(12));
}

TEST(CApi, BadExperimentJson) {
    g2up_experiment *e = nullptr;
    EXPECT_EQ(g2up_experiment_parse("{not json", ".", &e), G2UP_ERR_CONFIG);
    EXPECT_EQ(e, nullptr);
    EXPECT_EQ(g2up_experiment_load("/nonexistent.json", &e), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "io_error");
}

TEST(CApi, BudgetAndDeconvolve) {
    double r = 0, err = 0;
    ASSERT_EQ(g2up_deconvolve(6.5, 0.1, 2.5, 0, &r, &err), G2UP_OK);
    EXPECT_NEAR(r, 3.8568, 1e-4);
    EXPECT_GT(err, 0);
    double duty = 0;
    ASSERT_EQ(g2up_gate_duty_cycle(4, 76, &duty), G2UP_OK);
    EXPECT_NEAR(duty, 3.04e-4, 1e-12);
    size_t n = g2up_default_budget_size();
    ASSERT_GT(n, 0u);
    std::vector<const char *> names(n);
    std::vector<double> values(n);
    for (size_t i = 0; i < n; i++) {
        ASSERT_EQ(g2up_default_budget_factor(i, &names[i], &values[i]), G2UP_OK);
    }
    const char *name;
    double value;
    EXPECT_EQ(g2up_default_budget_factor(n, &name, &value), G2UP_ERR_CONFIG);
    double product = 0;
    ASSERT_EQ(g2up_budget(names.data(), values.data(), n, &product), G2UP_OK);
    EXPECT_GE(product, 1e-6);
    EXPECT_LE(product, 1e-5);
    values[0] = 1.5;
    EXPECT_EQ(g2up_budget(names.data(), values.data(), n, &product), G2UP_ERR_CONFIG);
    EXPECT_EQ(kind(), "domain_error");
}
