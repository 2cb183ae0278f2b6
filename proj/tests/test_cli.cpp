// End-to-end checks of the command-line surface: exit codes, determinism,
// file formats. Each test shells out to the binary named by LINEGUARD_BIN.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lineguard/csv.hpp"
#include "lineguard/model_io.hpp"
#include "lineguard/taxonomy.hpp"
#include "lineguard/taxonomy_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
    const char* bin = std::getenv("LINEGUARD_BIN");
    return bin ? bin : "";
}

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args, const fs::path& dir, const std::string& env = "") {
    const fs::path log = dir / "run.log";
    const std::string cmd =
        env + (env.empty() ? "" : " ") + binary_path() + " " + args + " > " + log.string() +
        " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        ASSERT_FALSE(binary_path().empty()) << "LINEGUARD_BIN not set";
        dir_ = fs::temp_directory_path() /
               ("lineguard_cli_" +
                std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path file(const std::string& name) const { return dir_ / name; }

    void write_synth_config(const std::string& name, std::size_t cohort, std::uint64_t seed) {
        spit(file(name), "{\"cohort_size\": " + std::to_string(cohort) +
                             ", \"seed\": " + std::to_string(seed) +
                             ", \"default\": {\"prevalence\": 0.3, \"spread\": 0.2}}\n");
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PipelineHappyPathAndDeterminism) {
    write_synth_config("synth.json", 400, 11);
    auto r = run("synth --config " + file("synth.json").string() + " --out " +
                     file("scores.csv").string(),
                 dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;

    r = run("calibrate --scores " + file("scores.csv").string() + " --out " +
                file("model.json").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("crit_present"), std::string::npos);

    r = run("predict --model " + file("model.json").string() + " --scores " +
                file("scores.csv").string() + " --out " + file("verdicts.csv").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;

    r = run("evaluate --model " + file("model.json").string() + " --scores " +
                file("scores.csv").string() + " --report " + file("report.json").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("Overall coverage"), std::string::npos);

    // Re-running predict rewrites the identical file.
    const auto first = slurp(file("verdicts.csv"));
    r = run("predict --model " + file("model.json").string() + " --scores " +
                file("scores.csv").string() + " --out " + file("verdicts.csv").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_EQ(slurp(file("verdicts.csv")), first);

    // Independent mode at alpha 0.1 reports coverage comfortably over 0.89
    // on an exchangeable cohort.
    r = run("calibrate --mode independent --scores " + file("scores.csv").string() +
                " --out " + file("model_ind.json").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    r = run("evaluate --model " + file("model_ind.json").string() + " --scores " +
                file("scores.csv").string() + " --report " + file("report_ind.json").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto report = nlohmann::json::parse(slurp(file("report_ind.json")));
    EXPECT_GE(report["coverage"]["overall"].get<double>(), 0.89);
}

TEST_F(CliTest, CalibrateRejectsBadAlphaOrdering) {
    write_synth_config("synth.json", 50, 3);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("scores.csv").string(),
                  dir_)
                  .exit_code,
              0);
    const auto r = run("calibrate --scores " + file("scores.csv").string() +
                           " --alpha 0.1 --alpha-critical 0.2 --out " +
                           file("model.json").string(),
                       dir_);
    EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliTest, EvaluateRejectsUnlabeledScores) {
    write_synth_config("synth.json", 60, 5);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("scores.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("calibrate --scores " + file("scores.csv").string() + " --out " +
                      file("model.json").string(),
                  dir_)
                  .exit_code,
              0);
    // Strip the labels.
    const auto tax = lineguard::default_ranzcr();
    auto cases = lineguard::read_scores(slurp(file("scores.csv")), tax);
    for (auto& c : cases) c.labels.reset();
    spit(file("unlabeled.csv"), lineguard::write_scores(cases, tax));

    EXPECT_EQ(run("evaluate --model " + file("model.json").string() + " --scores " +
                      file("unlabeled.csv").string() + " --report " +
                      file("report.json").string(),
                  dir_)
                  .exit_code,
              2);
    // predict accepts the same unlabeled file
    EXPECT_EQ(run("predict --model " + file("model.json").string() + " --scores " +
                      file("unlabeled.csv").string() + " --out " +
                      file("verdicts.csv").string(),
                  dir_)
                  .exit_code,
              0);
}

TEST_F(CliTest, FingerprintMismatchExitsThree) {
    write_synth_config("synth.json", 60, 7);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("scores.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("calibrate --scores " + file("scores.csv").string() + " --out " +
                      file("model.json").string(),
                  dir_)
                  .exit_code,
              0);
    // Same class ids, different risk grouping: fingerprint changes.
    auto tax = lineguard::default_ranzcr();
    auto classes = tax.classes();
    classes[10].risk_group = lineguard::RiskGroup::Critical;
    spit(file("tax2.json"),
         lineguard::serialize_taxonomy(lineguard::Taxonomy(tax.version(), classes)));
    const auto r = run("predict --model " + file("model.json").string() + " --scores " +
                           file("scores.csv").string() + " --taxonomy " +
                           file("tax2.json").string() + " --out " + file("v.csv").string(),
                       dir_);
    EXPECT_EQ(r.exit_code, 3);
}

TEST_F(CliTest, SplitIsDeterministicAndExact) {
    // Ten singleton patients at the default ratios split 7/1/1/1.
    const auto tax = lineguard::default_ranzcr();
    std::vector<lineguard::ScoredCase> cases;
    for (int i = 0; i < 10; ++i) {
        lineguard::ScoredCase c;
        c.case_id = "c" + std::to_string(i);
        c.patient_id = "p" + std::to_string(i);
        c.scores.assign(tax.size(), 0.5);
        cases.push_back(std::move(c));
    }
    spit(file("scores.csv"), lineguard::write_scores(cases, tax));
    auto r = run("split --scores " + file("scores.csv").string() +
                     " --ratios 0.7,0.1,0.1,0.1 --seed 42 --out " + file("a").string(),
                 dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    r = run("split --scores " + file("scores.csv").string() +
                " --ratios 0.7,0.1,0.1,0.1 --seed 42 --out " + file("b").string(),
            dir_);
    ASSERT_EQ(r.exit_code, 0);
    for (const char* bucket : {"train", "validation", "test", "calibration"}) {
        const auto a = slurp(file(std::string("a.") + bucket + ".csv"));
        EXPECT_EQ(a, slurp(file(std::string("b.") + bucket + ".csv")));
    }
    EXPECT_EQ(lineguard::read_scores(slurp(file("a.train.csv")), tax).size(), 7u);
    EXPECT_EQ(lineguard::read_scores(slurp(file("a.calibration.csv")), tax).size(), 1u);

    // Ratio strings are parsed strictly.
    EXPECT_EQ(run("split --scores " + file("scores.csv").string() +
                      " --ratios 0.7,0.1,0.1,abc --out " + file("x").string(),
                  dir_)
                  .exit_code,
              2);
    EXPECT_EQ(run("split --scores " + file("scores.csv").string() +
                      " --ratios 0.7,0.1,0.2 --out " + file("x").string(),
                  dir_)
                  .exit_code,
              2);
}

TEST_F(CliTest, DwaReplayOnEqualLosses) {
    std::string losses = "epoch,cls,seg,land\n";
    for (int t = 0; t < 14; ++t) losses += std::to_string(t) + ",0.8,0.8,0.8\n";
    spit(file("losses.csv"), losses);
    const auto r = run("dwa --losses " + file("losses.csv").string() + " --out " +
                           file("weights.csv").string(),
                       dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto out = slurp(file("weights.csv"));
    EXPECT_NE(out.find("\n12,1,1,1\n"), std::string::npos);
    EXPECT_NE(out.find("\n0,1,1,1\n"), std::string::npos);
}

TEST_F(CliTest, TriageWorkloadReport) {
    write_synth_config("synth.json", 200, 13);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("scores.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("calibrate --scores " + file("scores.csv").string() + " --out " +
                      file("model.json").string(),
                  dir_)
                  .exit_code,
              0);
    const auto r = run("triage --model " + file("model.json").string() + " --scores " +
                           file("scores.csv").string() + " --daily-volume 1000 --out " +
                           file("verdicts.csv").string() + " --report " +
                           file("workload.json").string(),
                       dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("per day"), std::string::npos);
    const auto verdicts = slurp(file("verdicts.csv"));
    EXPECT_NE(verdicts.find("case_id,category,fully_confident,set:ett_abnormal"),
              std::string::npos);

    const auto workload = nlohmann::json::parse(slurp(file("workload.json")));
    EXPECT_EQ(workload["cohort_size"], 200);
    EXPECT_EQ(workload["daily_volume"], 1000);
    std::size_t sum = 0;
    for (const auto& [token, entry] : workload["categories"].items())
        sum += entry["count"].get<std::size_t>();
    EXPECT_EQ(sum, 200u);
    // Labeled input: the miss extrapolation block must be populated.
    EXPECT_FALSE(workload["potential_miss"].is_null());
    EXPECT_TRUE(workload["potential_miss"].contains("daily"));
}

TEST_F(CliTest, SynthSeedFlagOverridesConfig) {
    write_synth_config("synth.json", 80, 1);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --seed 99 --out " +
                      file("a.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --seed 99 --out " +
                      file("b.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("c.csv").string(),
                  dir_)
                  .exit_code,
              0);
    EXPECT_EQ(slurp(file("a.csv")), slurp(file("b.csv")));
    EXPECT_NE(slurp(file("a.csv")), slurp(file("c.csv")));
}

TEST_F(CliTest, EnvVarOverridesDefaultTaxonomy) {
    const lineguard::Taxonomy tax("mini", {{"abn", "Abnormal", lineguard::RiskGroup::Critical, "T"},
                                           {"norm", "Normal", lineguard::RiskGroup::Normal, "T"}});
    spit(file("mini.json"), lineguard::serialize_taxonomy(tax));
    spit(file("scores.csv"),
         "case_id,patient_id,p:abn,p:norm,y:abn,y:norm\n"
         "c1,p1,0.9,0.1,1,0\nc2,p2,0.1,0.9,0,1\nc3,p3,0.2,0.8,0,1\n");
    const auto r = run("calibrate --mode independent --scores " + file("scores.csv").string() +
                           " --out " + file("model.json").string(),
                       dir_, "LINEGUARD_TAXONOMY=" + file("mini.json").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto model = lineguard::parse_model(slurp(file("model.json")));
    EXPECT_EQ(model.taxonomy_fingerprint, lineguard::fingerprint(tax));
}

TEST_F(CliTest, EmptyCalibrationStratumExitsThree) {
    // Labeled cohort where no critical class is ever present: the pooled
    // critical/present stratum is empty under risk-sensitive calibration.
    const auto tax = lineguard::default_ranzcr();
    std::vector<lineguard::ScoredCase> cases;
    for (int i = 0; i < 20; ++i) {
        lineguard::ScoredCase c;
        c.case_id = "c" + std::to_string(i);
        c.scores.assign(tax.size(), 0.2);
        std::vector<std::uint8_t> y(tax.size(), 0);
        y[*tax.index_of("ett_normal")] = 1;
        c.labels = std::move(y);
        cases.push_back(std::move(c));
    }
    spit(file("scores.csv"), lineguard::write_scores(cases, tax));
    const auto r = run("calibrate --scores " + file("scores.csv").string() + " --out " +
                           file("model.json").string(),
                       dir_);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.output.find("critical/present"), std::string::npos);
}

TEST_F(CliTest, MismatchedScoreColumnsExitThreeNamingColumn) {
    write_synth_config("synth.json", 40, 9);
    ASSERT_EQ(run("synth --config " + file("synth.json").string() + " --out " +
                      file("scores.csv").string(),
                  dir_)
                  .exit_code,
              0);
    ASSERT_EQ(run("calibrate --scores " + file("scores.csv").string() + " --out " +
                      file("model.json").string(),
                  dir_)
                  .exit_code,
              0);
    auto text = slurp(file("scores.csv"));
    const auto pos = text.find("p:ett_abnormal,p:ett_borderline");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 31, "p:ett_borderline,p:ett_abnormal");
    spit(file("swapped.csv"), text);
    const auto r = run("predict --model " + file("model.json").string() + " --scores " +
                           file("swapped.csv").string() + " --out " + file("v.csv").string(),
                       dir_);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.output.find("p:ett_abnormal"), std::string::npos);
}

TEST_F(CliTest, EvaluateWorkedExampleFixture) {
    // Independent model with every threshold at 0.6 turns p=0.9 into {P},
    // p=0.1 into {A} and p=0.5 into {P,A}; the three fixture cases must land
    // in intervention once and specialist review twice.
    const auto tax = lineguard::default_ranzcr();
    lineguard::CalibrationModel model;
    model.mode = lineguard::CalibrationMode::Independent;
    model.alpha_standard = 0.1;
    model.taxonomy_fingerprint = lineguard::fingerprint(tax);
    model.independent.assign(tax.size(), lineguard::ConformalThreshold{0.6, 10, 9});
    spit(file("model.json"), lineguard::serialize_model(model, tax));

    auto scores_for = [&](const std::map<std::string, double>& overrides) {
        std::vector<double> p(tax.size(), 0.1);
        for (const auto& [id, v] : overrides) p[*tax.index_of(id)] = v;
        return p;
    };
    std::vector<lineguard::ScoredCase> cases(3);
    cases[0] = {"ex1", "p1",
                scores_for({{"ett_abnormal", 0.9}, {"ngt_normal", 0.9}, {"cvc_normal", 0.9}}),
                std::nullopt};
    cases[1] = {"ex2", "p2",
                scores_for({{"ett_normal", 0.9}, {"ngt_borderline", 0.5}, {"cvc_normal", 0.9}}),
                std::nullopt};
    cases[2] = {"ex3", "p3",
                scores_for({{"ett_abnormal", 0.5}, {"ngt_normal", 0.5}, {"cvc_normal", 0.9}}),
                std::nullopt};
    for (auto& c : cases) {
        std::vector<std::uint8_t> y(tax.size(), 0);
        y[*tax.index_of("cvc_normal")] = 1;
        y[*tax.index_of("ett_abnormal")] = c.case_id == "ex1";
        c.labels = std::move(y);
    }
    spit(file("scores.csv"), lineguard::write_scores(cases, tax));
    const auto r = run("evaluate --model " + file("model.json").string() + " --scores " +
                           file("scores.csv").string() + " --report " +
                           file("report.json").string(),
                       dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto report = nlohmann::json::parse(slurp(file("report.json")));
    EXPECT_EQ(report["triage"]["counts"]["immediate_intervention"], 1);
    EXPECT_EQ(report["triage"]["counts"]["specialist_review"], 2);
    EXPECT_EQ(report["triage"]["counts"]["auto_normal"], 0);
    EXPECT_EQ(report["triage"]["fully_confident"]["count"], 1);
}

TEST_F(CliTest, TriageExtrapolatesExactCohortRates) {
    // 95 intervention / 904 review / 1 auto-normal out of 1000 cases; at a
    // daily volume of 1000 the report must read 95 and 904.
    const auto tax = lineguard::default_ranzcr();
    lineguard::CalibrationModel model;
    model.mode = lineguard::CalibrationMode::Independent;
    model.taxonomy_fingerprint = lineguard::fingerprint(tax);
    model.independent.assign(tax.size(), lineguard::ConformalThreshold{0.6, 10, 9});
    spit(file("model.json"), lineguard::serialize_model(model, tax));

    std::vector<lineguard::ScoredCase> cases;
    for (int i = 0; i < 1000; ++i) {
        lineguard::ScoredCase c;
        c.case_id = "c" + std::to_string(i);
        c.scores.assign(tax.size(), 0.1);  // every set defaults to {A}
        if (i < 95) {
            c.scores[*tax.index_of("ett_abnormal")] = 0.9;  // confident critical
        } else if (i < 95 + 904) {
            c.scores[*tax.index_of("ett_abnormal")] = 0.5;  // {P,A}: review
        } else {
            for (const char* id : {"ett_normal", "ngt_normal", "cvc_normal"})
                c.scores[*tax.index_of(id)] = 0.9;  // auto-normal pattern
        }
        cases.push_back(std::move(c));
    }
    spit(file("scores.csv"), lineguard::write_scores(cases, tax));
    const auto r = run("triage --model " + file("model.json").string() + " --scores " +
                           file("scores.csv").string() + " --daily-volume 1000",
                       dir_);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("-> 95 per day"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("-> 904 per day"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("(9.5%)"), std::string::npos);
    EXPECT_NE(r.output.find("(90.4%)"), std::string::npos);
}

TEST_F(CliTest, HelpExistsForEverySubcommandWithDefaults) {
    for (const char* sub : {"calibrate", "predict", "evaluate", "triage", "synth", "split", "dwa"}) {
        const auto r = run(std::string(sub) + " --help", dir_);
        EXPECT_EQ(r.exit_code, 0) << sub;
        EXPECT_NE(r.output.find("--"), std::string::npos) << sub;
    }
    const auto cal = run("calibrate --help", dir_);
    EXPECT_NE(cal.output.find("risk-sensitive"), std::string::npos);
    EXPECT_NE(cal.output.find("0.1"), std::string::npos);
    EXPECT_NE(cal.output.find("0.01"), std::string::npos);
    const auto dwa = run("dwa --help", dir_);
    EXPECT_NE(dwa.output.find("3"), std::string::npos);
    EXPECT_NE(dwa.output.find("2"), std::string::npos);
    EXPECT_NE(dwa.output.find("10"), std::string::npos);
}
