// lineguard: calibrate -> predict -> evaluate -> triage pipelines over
// externally supplied probability scores, plus synth/split/dwa utilities.
//
// Exit codes: 0 ok, 2 malformed input or flags, 3 cross-artifact consistency
// failure (taxonomy/model/scores pairing, empty calibration stratum).

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lineguard/lineguard.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConsistency = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lineguard::input_error("cannot read file \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void atomic_write(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp(target);
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw lineguard::input_error("cannot open \"" + tmp.string() + "\" for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw lineguard::input_error("failed writing \"" + tmp.string() + "\"");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
        throw lineguard::input_error("cannot move \"" + tmp.string() + "\" to \"" + path +
                                     "\": " + ec.message());
}

// --taxonomy flag, then the LINEGUARD_TAXONOMY env override, then the
// built-in registry.
lineguard::Taxonomy load_taxonomy(const std::string& flag_path) {
    if (!flag_path.empty()) return lineguard::parse_taxonomy(read_file(flag_path));
    if (const char* env = std::getenv("LINEGUARD_TAXONOMY"); env && *env)
        return lineguard::parse_taxonomy(read_file(env));
    return lineguard::default_ranzcr();
}

std::string threshold_summary(const lineguard::ConformalThreshold& t) {
    char buf[96];
    if (t.is_infinite())
        std::snprintf(buf, sizeof buf, "q=inf          n=%zu k=%zu", t.n_cal, t.rank_k);
    else
        std::snprintf(buf, sizeof buf, "q=%-12.10f n=%zu k=%zu", t.q_hat, t.n_cal, t.rank_k);
    return buf;
}

lineguard::CalibrationModel load_model_checked(const std::string& path,
                                               const lineguard::Taxonomy& taxonomy) {
    auto model = lineguard::parse_model(read_file(path));
    if (model.taxonomy_fingerprint != lineguard::fingerprint(taxonomy))
        throw lineguard::validation_error(
            "model fingerprint " + model.taxonomy_fingerprint +
            " does not match the active taxonomy (" + lineguard::fingerprint(taxonomy) + ")");
    const std::size_t want = taxonomy.size();
    if (model.mode == lineguard::CalibrationMode::Independent &&
        model.independent.size() != want)
        throw lineguard::validation_error("model stores " +
                                          std::to_string(model.independent.size()) +
                                          " class thresholds, taxonomy has " +
                                          std::to_string(want));
    if (model.mode == lineguard::CalibrationMode::RiskSensitive &&
        model.pooling == lineguard::PoolingMode::PerClass && model.per_class.size() != want)
        throw lineguard::validation_error("model stores " +
                                          std::to_string(model.per_class.size()) +
                                          " class thresholds, taxonomy has " +
                                          std::to_string(want));
    return model;
}

std::vector<lineguard::CaseVerdict> predict_cohort(const lineguard::CalibrationModel& model,
                                                   const std::vector<lineguard::ScoredCase>& cases,
                                                   const lineguard::Taxonomy& taxonomy,
                                                   std::vector<lineguard::PredictionSet>* sets_out =
                                                       nullptr) {
    std::vector<lineguard::CaseVerdict> verdicts;
    verdicts.reserve(cases.size());
    for (const auto& c : cases) {
        auto sets = lineguard::predict_sets(model, c, taxonomy);
        verdicts.push_back(lineguard::make_verdict(c, sets, taxonomy));
        if (sets_out) sets_out->push_back(std::move(sets));
    }
    return verdicts;
}

struct CalibrateArgs {
    std::string scores, taxonomy, mode = "risk-sensitive", pooling = "group", out;
    double alpha = 0.1, alpha_critical = 0.01;
};

int cmd_calibrate(const CalibrateArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    const auto cases = lineguard::read_scores(read_file(args.scores), taxonomy);
    lineguard::CalibrationModel model;
    if (args.mode == "independent") {
        model = lineguard::calibrate_independent(cases, taxonomy, args.alpha);
        for (std::size_t i = 0; i < taxonomy.size(); ++i)
            std::printf("%-28s %s\n", taxonomy.at(i).id.c_str(),
                        threshold_summary(model.independent[i]).c_str());
    } else {
        const auto pooling = args.pooling == "per-class" ? lineguard::PoolingMode::PerClass
                                                         : lineguard::PoolingMode::GroupPooled;
        model = lineguard::calibrate_risk_sensitive(cases, taxonomy, args.alpha,
                                                    args.alpha_critical, pooling);
        if (pooling == lineguard::PoolingMode::GroupPooled) {
            std::printf("%-28s %s\n", "crit_present",
                        threshold_summary(model.crit_present).c_str());
            std::printf("%-28s %s\n", "crit_absent",
                        threshold_summary(model.crit_absent).c_str());
            std::printf("%-28s %s\n", "standard", threshold_summary(model.standard).c_str());
        } else {
            for (std::size_t i = 0; i < taxonomy.size(); ++i) {
                std::printf("%-28s %s\n", (taxonomy.at(i).id + "/present").c_str(),
                            threshold_summary(model.per_class[i].present).c_str());
                std::printf("%-28s %s\n", (taxonomy.at(i).id + "/absent").c_str(),
                            threshold_summary(model.per_class[i].absent).c_str());
            }
        }
    }
    atomic_write(args.out, lineguard::serialize_model(model, taxonomy));
    std::printf("calibrated %zu cases -> %s\n", cases.size(), args.out.c_str());
    return kExitOk;
}

struct PredictArgs {
    std::string model, scores, taxonomy, out;
};

int cmd_predict(const PredictArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    const auto model = load_model_checked(args.model, taxonomy);
    const auto cases = lineguard::read_scores(read_file(args.scores), taxonomy);
    const auto verdicts = predict_cohort(model, cases, taxonomy);
    atomic_write(args.out, lineguard::write_verdicts(verdicts, taxonomy));
    std::printf("predicted %zu cases -> %s\n", verdicts.size(), args.out.c_str());
    return kExitOk;
}

struct EvaluateArgs {
    std::string model, scores, taxonomy, report;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    const auto model = load_model_checked(args.model, taxonomy);
    const auto cases = lineguard::read_scores(read_file(args.scores), taxonomy);
    for (const auto& c : cases) lineguard::require_labels(c);
    std::vector<lineguard::PredictionSet> sets;
    sets.reserve(cases.size());
    predict_cohort(model, cases, taxonomy, &sets);
    const auto report = lineguard::evaluate_cohort(cases, sets, taxonomy);
    if (!args.report.empty()) atomic_write(args.report, report_to_json(report, taxonomy));
    std::fputs(lineguard::report_to_text(report, taxonomy).c_str(), stdout);
    return kExitOk;
}

struct TriageArgs {
    std::string model, scores, taxonomy, out, report;
    std::uint64_t daily_volume = 1000;
};

int cmd_triage(const TriageArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    const auto model = load_model_checked(args.model, taxonomy);
    const auto cases = lineguard::read_scores(read_file(args.scores), taxonomy);
    const auto verdicts = predict_cohort(model, cases, taxonomy);
    if (!args.out.empty()) atomic_write(args.out, lineguard::write_verdicts(verdicts, taxonomy));
    const auto rep = lineguard::workload(verdicts, args.daily_volume);
    if (!args.report.empty()) atomic_write(args.report, lineguard::workload_to_json(rep));
    std::fputs(lineguard::workload_to_text(rep).c_str(), stdout);
    return kExitOk;
}

struct SynthArgs {
    std::string config, taxonomy, out;
    std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    auto config = lineguard::parse_synth_config(read_file(args.config), taxonomy);
    if (args.seed) config.seed = *args.seed;
    const auto cases = lineguard::synth_generate(config, taxonomy);
    atomic_write(args.out, lineguard::write_scores(cases, taxonomy));
    std::printf("generated %zu labeled cases (seed %llu) -> %s\n", cases.size(),
                static_cast<unsigned long long>(config.seed), args.out.c_str());
    return kExitOk;
}

struct SplitArgs {
    std::string scores, taxonomy, ratios = "0.7,0.1,0.1,0.1", out;
    std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& args) {
    const auto taxonomy = load_taxonomy(args.taxonomy);
    const auto cases = lineguard::read_scores(read_file(args.scores), taxonomy);
    lineguard::SplitSpec spec;
    spec.seed = args.seed;
    {
        std::istringstream in(args.ratios);
        std::string field;
        std::size_t k = 0;
        while (std::getline(in, field, ',')) {
            if (k >= 4) throw lineguard::input_error("--ratios needs exactly four values");
            const char* last = field.data() + field.size();
            const auto [ptr, ec] = std::from_chars(field.data(), last, spec.ratios[k]);
            if (ec != std::errc() || ptr != last)
                throw lineguard::input_error("cannot parse ratio \"" + field + "\"");
            ++k;
        }
        if (k != 4) throw lineguard::input_error("--ratios needs exactly four values");
    }
    const auto buckets = lineguard::grouped_split(cases, spec);
    for (std::size_t b = 0; b < 4; ++b) {
        const std::string path =
            args.out + "." + std::string(lineguard::kSplitBucketNames[b]) + ".csv";
        atomic_write(path, lineguard::write_scores(buckets[b], taxonomy));
        std::printf("%-12s %6zu cases -> %s\n", lineguard::kSplitBucketNames[b],
                    buckets[b].size(), path.c_str());
    }
    return kExitOk;
}

struct DwaArgs {
    std::string losses, out;
    double k_norm = 3.0, temperature = 2.0;
    std::size_t warmup = 10;
};

int cmd_dwa(const DwaArgs& args) {
    const auto history = lineguard::read_loss_history(read_file(args.losses));
    lineguard::DwaConfig config;
    config.num_tasks = history.num_tasks();
    config.k_norm = args.k_norm;
    config.temperature = args.temperature;
    config.warmup_epochs = args.warmup;
    atomic_write(args.out, lineguard::write_weights(history, config));
    std::printf("replayed %zu epochs x %zu tasks -> %s\n", history.num_epochs(),
                history.num_tasks(), args.out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal calibration, prediction sets and clinical triage "
                 "over externally supplied probability scores"};
    app.require_subcommand(1);

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Fit conformal thresholds from labeled scores");
    calibrate->add_option("--scores", cal.scores, "Labeled scores CSV")->required();
    calibrate->add_option("--taxonomy", cal.taxonomy, "Taxonomy JSON (default: built-in registry)");
    calibrate->add_option("--mode", cal.mode, "Calibration mode")
        ->check(CLI::IsMember({"independent", "risk-sensitive"}))
        ->capture_default_str();
    calibrate->add_option("--alpha", cal.alpha, "Standard miscoverage rate")
        ->capture_default_str();
    calibrate->add_option("--alpha-critical", cal.alpha_critical,
                          "Critical-present miscoverage rate (risk-sensitive)")
        ->capture_default_str();
    calibrate->add_option("--pooling", cal.pooling, "Risk-sensitive stratification")
        ->check(CLI::IsMember({"group", "per-class"}))
        ->capture_default_str();
    calibrate->add_option("--out", cal.out, "Model JSON output path")->required();

    PredictArgs pred;
    auto* predict = app.add_subcommand("predict", "Construct prediction sets for new scores");
    predict->add_option("--model", pred.model, "Model JSON")->required();
    predict->add_option("--scores", pred.scores, "Scores CSV (labels optional)")->required();
    predict->add_option("--taxonomy", pred.taxonomy, "Taxonomy JSON (default: built-in registry)");
    predict->add_option("--out", pred.out, "Verdict CSV output path")->required();

    EvaluateArgs eval;
    auto* evaluate = app.add_subcommand("evaluate", "Coverage, safety and triage report");
    evaluate->add_option("--model", eval.model, "Model JSON")->required();
    evaluate->add_option("--scores", eval.scores, "Labeled scores CSV")->required();
    evaluate->add_option("--taxonomy", eval.taxonomy, "Taxonomy JSON (default: built-in registry)");
    evaluate->add_option("--report", eval.report, "Report JSON output path");

    TriageArgs tri;
    auto* triage = app.add_subcommand("triage", "Per-case routing and workload extrapolation");
    triage->add_option("--model", tri.model, "Model JSON")->required();
    triage->add_option("--scores", tri.scores, "Scores CSV")->required();
    triage->add_option("--taxonomy", tri.taxonomy, "Taxonomy JSON (default: built-in registry)");
    triage->add_option("--out", tri.out, "Verdict CSV output path");
    triage->add_option("--report", tri.report, "Workload JSON output path");
    triage->add_option("--daily-volume", tri.daily_volume, "Daily case volume to extrapolate to")
        ->capture_default_str();

    SynthArgs syn;
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic cohort");
    synth->add_option("--config", syn.config, "Synth config JSON")->required();
    synth->add_option("--taxonomy", syn.taxonomy, "Taxonomy JSON (default: built-in registry)");
    synth->add_option("--seed", syn.seed, "Override the config seed");
    synth->add_option("--out", syn.out, "Scores CSV output path")->required();

    SplitArgs spl;
    auto* split = app.add_subcommand("split", "Patient-grouped train/val/test/cal split");
    split->add_option("--scores", spl.scores, "Scores CSV")->required();
    split->add_option("--taxonomy", spl.taxonomy, "Taxonomy JSON (default: built-in registry)");
    split->add_option("--ratios", spl.ratios, "train,val,test,cal case-count ratios")
        ->capture_default_str();
    split->add_option("--seed", spl.seed, "Shuffle seed")->capture_default_str();
    split->add_option("--out", spl.out, "Output path prefix")->required();

    DwaArgs dwa;
    auto* dwa_cmd = app.add_subcommand("dwa", "Replay dynamic-weight-averaging task weights");
    dwa_cmd->add_option("--losses", dwa.losses, "Loss history CSV (epoch,<task>...)")->required();
    dwa_cmd->add_option("--k-norm", dwa.k_norm, "Weight normalization constant K")
        ->capture_default_str();
    dwa_cmd->add_option("--temperature", dwa.temperature, "Softmax temperature T")
        ->capture_default_str();
    dwa_cmd->add_option("--warmup-epochs", dwa.warmup, "Equal-weight warm-up epochs")
        ->capture_default_str();
    dwa_cmd->add_option("--out", dwa.out, "Weights CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (calibrate->parsed()) return cmd_calibrate(cal);
        if (predict->parsed()) return cmd_predict(pred);
        if (evaluate->parsed()) return cmd_evaluate(eval);
        if (triage->parsed()) return cmd_triage(tri);
        if (synth->parsed()) return cmd_synth(syn);
        if (split->parsed()) return cmd_split(spl);
        if (dwa_cmd->parsed()) return cmd_dwa(dwa);
    } catch (const lineguard::validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConsistency;
    } catch (const lineguard::calibration_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConsistency;
    } catch (const lineguard::input_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return kExitOk;
}
