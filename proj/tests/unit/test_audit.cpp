#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "nullaudit/audit.hpp"
#include "nullaudit/errors.hpp"
#include "nullaudit/stats.hpp"

using namespace nullaudit;
using namespace nullaudit::audit;

namespace {

workflows::WorkflowSpec baseline() {
    workflows::WorkflowSpec w;
    w.family = workflows::Family::RandomBaseline;
    w.K = 1;
    return w;
}

// Shared across tests: calibrating is the slow part.
const NullCalibration& small_calibration() {
    static const NullCalibration cal =
        calibrate_stage1(baseline(), canonical_environments(1000), kMinCalibrationReps, 0.05, 31);
    return cal;
}

std::map<std::string, double> observe(const NullCalibration& cal, double v) {
    std::map<std::string, double> m;
    for (const auto& e : cal.envs) m[e.id] = v;
    return m;
}

}  // namespace

TEST(Audit, InflationDiagnosticsExamples) {
    const auto a = inflation_diagnostics(3.0, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(a.delta_z, 2.0);
    EXPECT_DOUBLE_EQ(a.bif_stab, 3.0);
    EXPECT_NEAR(a.deflator, 1.0 / 3.0, 1e-15);
    ASSERT_TRUE(a.bif_raw.has_value());
    EXPECT_DOUBLE_EQ(*a.bif_raw, 3.0);

    const auto b = inflation_diagnostics(3.0, 0.0, 0.5);
    EXPECT_DOUBLE_EQ(b.delta_z, 3.0);
    EXPECT_FALSE(b.bif_raw.has_value());
    EXPECT_DOUBLE_EQ(b.bif_stab, 6.0);

    for (double x : {0.5, 1.0, 2.7}) {
        const auto c = inflation_diagnostics(x, x, 0.5);
        EXPECT_EQ(c.delta_z, 0.0);
        EXPECT_DOUBLE_EQ(c.bif_stab, 1.0);
    }
}

TEST(Audit, InflationDiagnosticsRejectsBadInput) {
    EXPECT_THROW(inflation_diagnostics(-0.1, 1.0), ContractViolation);
    EXPECT_THROW(inflation_diagnostics(1.0, -0.1), ContractViolation);
    EXPECT_THROW(inflation_diagnostics(1.0, 1.0, 0.0), ContractViolation);
    EXPECT_THROW(inflation_diagnostics(std::nan(""), 1.0), ContractViolation);
}

TEST(Audit, DeltaIsTauInvariantAndStabCapped) {
    for (double zwf : {0.0, 0.1, 0.49, 0.5, 1.3}) {
        const double ref = inflation_diagnostics(3.2, zwf, 0.5).delta_z;
        for (double tau = 0.1; tau <= 1.5 + 1e-12; tau += 0.1) {
            const auto d = inflation_diagnostics(3.2, zwf, tau);
            EXPECT_EQ(d.delta_z, ref);
            EXPECT_LE(d.bif_stab, 3.2 / tau + 1e-12);
        }
    }
}

TEST(Audit, BifAndDeltaRankAlike) {
    const double zis = 3.0;
    double prev_bif = 1e300, prev_dz = 1e300;
    for (double zwf = 0.5; zwf < 3.0; zwf += 0.1) {
        const auto d = inflation_diagnostics(zis, zwf, 0.5);
        EXPECT_LT(std::log(*d.bif_raw), std::log(prev_bif));
        EXPECT_LT(d.delta_z, prev_dz);
        prev_bif = *d.bif_raw;
        prev_dz = d.delta_z;
    }
}

TEST(Audit, Stage2Classification) {
    std::vector<double> null(1000);
    for (std::size_t i = 0; i < null.size(); ++i) null[i] = 0.004 * double(i);  // 0 .. 3.996
    const auto zero = stage2_classify(inflation_diagnostics(1.0, 1.0), null);
    EXPECT_FALSE(zero.inflation_flag);
    EXPECT_FALSE(zero.warning);
    EXPECT_DOUBLE_EQ(zero.eps99, stats::quantile_type1(null, 0.99));
    EXPECT_DOUBLE_EQ(zero.eps95, stats::quantile_type1(null, 0.95));
    const auto big = stage2_classify(inflation_diagnostics(4.5, 0.2), null);
    EXPECT_TRUE(big.inflation_flag);
    EXPECT_TRUE(big.warning);
    EXPECT_THROW(stage2_classify(inflation_diagnostics(1.0, 1.0), {}), ContractViolation);
    // Even an all-zero null never flags a zero gap.
    EXPECT_FALSE(stage2_classify(inflation_diagnostics(1.0, 1.0), std::vector<double>(10, 0.0)).inflation_flag);
}

TEST(Audit, CalibrationRefusesSmallM) {
    try {
        calibrate_stage1(baseline(), canonical_environments(1000), 499, 0.05, 1);
        FAIL() << "expected refusal";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("500"), std::string::npos) << e.what();
    }
}

TEST(Audit, BonferroniLevelAndThresholdRange) {
    const auto& cal = small_calibration();
    EXPECT_EQ(cal.envs.size(), 5u);
    EXPECT_NEAR(cal.level, 0.99, 1e-12);
    for (const auto& e : cal.envs) {
        EXPECT_EQ(e.z_wf_star.size(), kMinCalibrationReps);
        EXPECT_DOUBLE_EQ(e.zeta, stats::quantile_type1(e.z_wf_star, 0.99));
        EXPECT_GT(e.zeta, 2.2) << e.id;
        EXPECT_LT(e.zeta, 3.2) << e.id;
    }
}

TEST(Audit, Stage1GateIsMonotoneAndStrict) {
    const auto& cal = small_calibration();
    const auto h = workflows::spec_hash(baseline());
    EXPECT_FALSE(stage1_gate(observe(cal, 0.0), cal, h).falsified);
    EXPECT_TRUE(stage1_gate(observe(cal, 50.0), cal, h).falsified);
    bool failed = false;
    for (double z = 0.0; z < 5.0; z += 0.05) {
        const bool f = stage1_gate(observe(cal, z), cal, h).falsified;
        EXPECT_TRUE(!failed || f) << "z=" << z;
        failed = f;
    }
}

TEST(Audit, Stage1RejectsHashMismatchAndMissingEnvironment) {
    const auto& cal = small_calibration();
    auto other = baseline();
    other.seed = 99;
    EXPECT_THROW(stage1_gate(observe(cal, 1.0), cal, workflows::spec_hash(other)), CalibrationMismatch);
    auto obs = observe(cal, 1.0);
    obs.erase(obs.begin());
    EXPECT_THROW(stage1_gate(obs, cal, workflows::spec_hash(baseline())), ContractViolation);
}

TEST(Audit, ArchiveRoundTrip) {
    const auto& cal = small_calibration();
    const auto dir = std::filesystem::temp_directory_path() / "nullaudit_cal_roundtrip";
    std::filesystem::remove_all(dir);
    save_calibration(cal, dir);
    const auto back = load_calibration(dir);
    EXPECT_EQ(back.workflow_hash, cal.workflow_hash);
    EXPECT_EQ(back.M, cal.M);
    ASSERT_EQ(back.envs.size(), cal.envs.size());
    for (std::size_t i = 0; i < cal.envs.size(); ++i) {
        EXPECT_EQ(back.envs[i].zeta, cal.envs[i].zeta);
        EXPECT_EQ(back.envs[i].z_wf_star, cal.envs[i].z_wf_star);
    }
    // A missing sample file is a mismatch, not a silent pass.
    const auto csv = dir / "env_00.csv";
    ASSERT_TRUE(std::filesystem::exists(csv)) << csv;
    std::filesystem::remove(csv);
    EXPECT_THROW(load_calibration(dir), CalibrationMismatch);
    std::filesystem::remove_all(dir);
}

TEST(Audit, ReplicationsReplay) {
    const auto envs = canonical_environments(500);
    const auto a = run_replication(baseline(), envs[1], 1, 7, 3);
    const auto b = run_replication(baseline(), envs[1], 1, 7, 3);
    EXPECT_EQ(a.z_wf_star, b.z_wf_star);
    const auto c = run_replication(baseline(), envs[1], 1, 7, 4);
    EXPECT_NE(a.z_wf_star, c.z_wf_star);
}

TEST(Audit, RandomBaselinePassesStageOne) {
    const auto& cal = small_calibration();
    const auto target = env::generate(env::default_spec(env::Family::WhiteNoise, 1000, 3));
    const auto rep = run_audit(baseline(), cal, canonical_environments(1000), target, 0xA0D17);
    EXPECT_FALSE(rep.stage1.falsified);
    EXPECT_TRUE(rep.stage2.has_value());
}

TEST(Audit, ArchiveIsBoundToItsWorkflow) {
    auto look = baseline();
    look.family = workflows::Family::Lookahead;
    look.params.acknowledge_protocol_violation = true;
    const auto target = env::generate(env::default_spec(env::Family::WhiteNoise, 1000, 3));
    EXPECT_THROW(run_audit(look, small_calibration(), canonical_environments(1000), target, 0xA0D17),
                 CalibrationMismatch);
}

TEST(Audit, LookaheadFalsifiedEverywhere) {
    auto look = baseline();
    look.family = workflows::Family::Lookahead;
    look.params.acknowledge_protocol_violation = true;
    const auto envs = canonical_environments(1000);
    const auto cal = calibrate_stage1(look, envs, kMinCalibrationReps, 0.05, 32);
    const auto target = env::generate(env::default_spec(env::Family::WhiteNoise, 1000, 3));
    const auto rep = run_audit(look, cal, envs, target, 0xA0D17);
    EXPECT_TRUE(rep.stage1.falsified);
    for (const auto& r : rep.stage1.records) EXPECT_TRUE(r.failed) << r.id;
    EXPECT_EQ(rep.exit_code(), 2);
}

TEST(Audit, ExitCodes) {
    AuditReport r;
    EXPECT_EQ(r.exit_code(), 0);
    r.stage1.falsified = true;
    EXPECT_EQ(r.exit_code(), 2);
    r.stage1.falsified = false;
    r.stage2 = Stage2Verdict{};
    r.stage2->inflation_flag = true;
    EXPECT_EQ(r.exit_code(), 3);
}
