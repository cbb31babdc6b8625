#include "zonocert/harness.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "zonocert/checkpoint.hpp"
#include "zonocert/parallel.hpp"

namespace fs = std::filesystem;

namespace zonocert::harness {

namespace {

class DirLock {
public:
    explicit DirLock(const fs::path& dir) : lock_path_(dir / ".lock") {
        fs::create_directories(dir);
        const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw ConfigError("output directory is locked by another run (remove " +
                              lock_path_.string() + " if stale)");
        }
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path lock_path_;
};

// Collects files in a staging subdirectory, then renames them into place.
class StagedOutputs {
public:
    explicit StagedOutputs(const fs::path& dir) : dir_(dir), staging_(dir / ".staging") {
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    ~StagedOutputs() {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }

    std::ofstream create(const std::string& name) {
        names_.push_back(name);
        std::ofstream os(staging_ / name, std::ios::binary);
        if (!os) throw ConfigError("cannot create output file " + name);
        return os;
    }

    void write_checkpoint(const std::string& name, const nn::LayeredNetwork& net,
                          std::uint64_t seed) {
        std::ofstream os = create(name);
        nn::write_checkpoint(os, net, seed);
        if (!os) throw ConfigError("write failed: " + name);
    }

    std::vector<std::string> promote() {
        for (const auto& name : names_) {
            fs::rename(staging_ / name, dir_ / name);
        }
        return names_;
    }

private:
    fs::path dir_;
    fs::path staging_;
    std::vector<std::string> names_;
};

void require_output_dir(const ExperimentConfig& cfg) {
    if (cfg.output_dir.empty()) throw ConfigError("output_dir is required for this command");
}

std::string stage_ckpt_name(int stage) { return "stage_" + std::to_string(stage) + ".ckpt"; }
std::string stage_report_name(int stage) { return "stage_" + std::to_string(stage) + "_report.txt"; }

} // namespace

RunResult run_train(const ExperimentConfig& cfg) {
    require_output_dir(cfg);
    cfg.check_referenced_files();
    DirLock lock(cfg.output_dir);
    StagedOutputs out(cfg.output_dir);

    const data::DatasetSplit train_set = cfg.load_split("train");
    nn::LayeredNetwork net = cfg.build_network();
    if (train_set.num_classes > net.num_classes()) {
        throw ConfigError("dataset has more classes than network outputs");
    }
    train::TrainingConfig tcfg = cfg.training_config();

    {
        std::ofstream os = out.create("config.txt");
        artifact_header(os, cfg);
        os << cfg.canonical();
    }
    train::train(net, train_set, tcfg,
                 [&](int stage, const nn::LayeredNetwork& snapshot, const train::StageReport& rep) {
                     out.write_checkpoint(stage_ckpt_name(stage), snapshot, cfg.seed);
                     std::ofstream os = out.create(stage_report_name(stage));
                     write_stage_report(os, cfg, rep);
                 });
    out.write_checkpoint("final.ckpt", net, cfg.seed);

    RunResult res;
    res.output_dir = cfg.output_dir;
    res.files = out.promote();
    return res;
}

RunResult run_certify(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    require_output_dir(cfg);
    cfg.check_referenced_files();
    if (!fs::exists(checkpoint_path)) {
        throw ConfigError("checkpoint does not exist: " + checkpoint_path);
    }
    DirLock lock(cfg.output_dir);
    StagedOutputs out(cfg.output_dir);

    const nn::Checkpoint ck = nn::read_checkpoint_file(checkpoint_path);
    const data::DatasetSplit test_set = cfg.load_split("test");
    std::vector<cert::Verdict> verdicts;
    const cert::MetricsReport rep = cert::evaluate_metrics(ck.net, test_set, cfg.metrics_config(),
                                                           &verdicts);
    {
        std::ofstream os = out.create("certify_verdicts.txt");
        write_verdict_log(os, cfg, verdicts);
    }
    {
        std::ofstream os = out.create("certify_metrics.txt");
        write_metrics(os, cfg, rep);
    }
    RunResult res;
    res.output_dir = cfg.output_dir;
    res.files = out.promote();
    return res;
}

RunResult run_sweep_lambda(const ExperimentConfig& cfg, const std::vector<double>& lambdas) {
    require_output_dir(cfg);
    cfg.check_referenced_files();
    if (lambdas.empty()) throw ConfigError("lambda list is empty");
    for (double l : lambdas) {
        if (l < 0.0) throw ConfigError("lambda values must be non-negative");
    }
    DirLock lock(cfg.output_dir);
    StagedOutputs out(cfg.output_dir);

    const data::DatasetSplit train_set = cfg.load_split("train");
    const data::DatasetSplit test_set = cfg.load_split("test");

    std::vector<SweepRow> rows;
    for (double l : lambdas) {
        ExperimentConfig variant = cfg;
        variant.lambda = l;
        variant.loss_variant = train::LossVariant::Maar;
        nn::LayeredNetwork net = variant.build_network();
        train::train(net, train_set, variant.training_config());
        const cert::MetricsReport rep =
            cert::evaluate_metrics(net, test_set, variant.metrics_config());
        rows.push_back({l, rep.acc, rep.cr});
    }
    {
        std::ofstream os = out.create("sweep_lambda.txt");
        write_sweep_report(os, cfg, rows);
    }
    RunResult res;
    res.output_dir = cfg.output_dir;
    res.files = out.promote();
    return res;
}

RunResult run_stage_eval(const ExperimentConfig& cfg) {
    require_output_dir(cfg);
    cfg.check_referenced_files();
    // Collect existing stage checkpoints first; they come from a prior train run.
    std::vector<std::string> ckpts;
    for (std::size_t s = 0; s < cfg.stage_plan.size(); ++s) {
        const fs::path p = fs::path(cfg.output_dir) / stage_ckpt_name(static_cast<int>(s));
        if (!fs::exists(p)) throw ConfigError("missing checkpoint: " + p.string());
        ckpts.push_back(p.string());
    }
    DirLock lock(cfg.output_dir);
    StagedOutputs out(cfg.output_dir);
    const data::DatasetSplit test_set = cfg.load_split("test");

    std::vector<StageEvalRow> rows;
    for (std::size_t s = 0; s < ckpts.size(); ++s) {
        const nn::Checkpoint ck = nn::read_checkpoint_file(ckpts[s]);
        const cert::MetricsConfig mcfg = cfg.metrics_config();
        std::vector<cert::Verdict> verdicts;
        const cert::MetricsReport rep = cert::evaluate_metrics(ck.net, test_set, mcfg, &verdicts);
        rows.push_back({static_cast<int>(s), rep.cr, rep.lr});
    }
    {
        std::ofstream os = out.create("stage_eval.txt");
        write_stage_eval(os, cfg, rows);
    }
    RunResult res;
    res.output_dir = cfg.output_dir;
    res.files = out.promote();
    return res;
}

std::string run_report(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
    std::ostringstream report;
    report << "zonocert run report for " << fs::path(dir).filename().string() << "\n";
    const std::vector<std::string> known = {"config.txt",       "certify_metrics.txt",
                                            "sweep_lambda.txt", "stage_eval.txt"};
    bool any = false;
    auto append_file = [&](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        if (!is) return;
        any = true;
        report << "\n== " << p.filename().string() << " ==\n";
        report << is.rdbuf();
    };
    for (const auto& name : known) append_file(fs::path(dir) / name);
    for (int s = 0; s < 64; ++s) {
        const fs::path p = fs::path(dir) / stage_report_name(s);
        if (!fs::exists(p)) break;
        append_file(p);
    }
    if (!any) throw ConfigError("no artifacts found in " + dir);

    const std::string text = report.str();
    const fs::path tmp = fs::path(dir) / ".report.tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw ConfigError("cannot write report in " + dir);
        os << text;
    }
    fs::rename(tmp, fs::path(dir) / "report.txt");
    return text;
}

} // namespace zonocert::harness
