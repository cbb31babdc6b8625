#pragma once

#include <string>
#include <vector>

#include "zonocert/config.hpp"
#include "zonocert/report.hpp"

namespace zonocert::harness {

// One experiment per output directory: an exclusive .lock file guards the
// directory, outputs are staged and promoted by per-file rename on success.
struct RunResult {
    std::string output_dir;
    std::vector<std::string> files;
};

RunResult run_train(const ExperimentConfig& cfg);
RunResult run_certify(const ExperimentConfig& cfg, const std::string& checkpoint_path);
RunResult run_sweep_lambda(const ExperimentConfig& cfg, const std::vector<double>& lambdas);
RunResult run_stage_eval(const ExperimentConfig& cfg);

// Merges the artifacts found in a run directory into one readable report,
// written to <dir>/report.txt and returned.
std::string run_report(const std::string& dir);

} // namespace zonocert::harness
