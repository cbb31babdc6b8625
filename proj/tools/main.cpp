#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zonocert/harness.hpp"
#include "zonocert/version.hpp"

namespace {

std::vector<double> parse_lambdas(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        out.push_back(std::stod(cur));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') {
            flush();
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zonocert: certifiably robust training and verification for small networks"};
    app.set_version_flag("--version", std::string(zonocert::kVersion));
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, lambdas = "2,4,6,8,10", report_dir;

    CLI::App* train = app.add_subcommand("train", "train per the stage plan, checkpoint each stage");
    train->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* certify = app.add_subcommand("certify", "certify a checkpoint on the test split");
    certify->add_option("--config", config_path, "experiment config file")->required();
    certify->add_option("--checkpoint", checkpoint_path, "network checkpoint")->required();

    CLI::App* sweep = app.add_subcommand("sweep-lambda", "train and certify across lambda values");
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--lambdas", lambdas, "comma-separated lambda values");

    CLI::App* stage_eval =
        app.add_subcommand("stage-eval", "certify every per-stage checkpoint of a train run");
    stage_eval->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* report = app.add_subcommand("report", "merge run artifacts into report.txt");
    report->add_option("--in", report_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace zonocert::harness;
        if (train->parsed()) {
            const RunResult r = run_train(ExperimentConfig::load(config_path));
            std::cout << "wrote " << r.files.size() << " files to " << r.output_dir << "\n";
        } else if (certify->parsed()) {
            const RunResult r = run_certify(ExperimentConfig::load(config_path), checkpoint_path);
            std::cout << "wrote " << r.files.size() << " files to " << r.output_dir << "\n";
        } else if (sweep->parsed()) {
            const RunResult r =
                run_sweep_lambda(ExperimentConfig::load(config_path), parse_lambdas(lambdas));
            std::cout << "wrote " << r.files.size() << " files to " << r.output_dir << "\n";
        } else if (stage_eval->parsed()) {
            const RunResult r = run_stage_eval(ExperimentConfig::load(config_path));
            std::cout << "wrote " << r.files.size() << " files to " << r.output_dir << "\n";
        } else if (report->parsed()) {
            std::cout << run_report(report_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
