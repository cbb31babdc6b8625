#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "zonocert/certify.hpp"
#include "zonocert/config.hpp"
#include "zonocert/training.hpp"

namespace zonocert::harness {

// Every artifact starts with these lines, so reruns are attributable and
// byte-comparable: tool version, config hash, seed.
void artifact_header(std::ostream& os, const ExperimentConfig& cfg);

void write_stage_report(std::ostream& os, const ExperimentConfig& cfg,
                        const train::StageReport& report);
void write_verdict_log(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<cert::Verdict>& verdicts);
void write_metrics(std::ostream& os, const ExperimentConfig& cfg, const cert::MetricsReport& rep);

struct SweepRow {
    double lambda = 0.0;
    double acc = 0.0;
    double cr = 0.0;
};
void write_sweep_report(std::ostream& os, const ExperimentConfig& cfg,
                        const std::vector<SweepRow>& rows);

struct StageEvalRow {
    int stage = 0;
    double cr = 0.0;
    double lr = 0.0;
};
void write_stage_eval(std::ostream& os, const ExperimentConfig& cfg,
                      const std::vector<StageEvalRow>& rows);

// Fixed-width table helper (two-space gutters, right-aligned numbers).
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

std::string format_ratio(double v);

} // namespace zonocert::harness
