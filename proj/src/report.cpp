#include "zonocert/report.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "zonocert/checkpoint.hpp"
#include "zonocert/version.hpp"

namespace zonocert::harness {

void artifact_header(std::ostream& os, const ExperimentConfig& cfg) {
    os << "# zonocert " << kVersion << "\n";
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << cfg.hash();
    os << "# config_hash " << h.str() << "\n";
    os << "# seed " << cfg.seed << "\n";
}

std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void write_stage_report(std::ostream& os, const ExperimentConfig& cfg,
                        const train::StageReport& report) {
    artifact_header(os, cfg);
    os << "stage " << report.stage_index << " latent_block " << report.latent_block << "\n";
    for (const auto& e : report.epochs) {
        os << "epoch=" << e.epoch << " accuracy=" << nn::format_double(e.accuracy)
           << " verified_error=" << nn::format_double(e.verified_error)
           << " l_ori=" << nn::format_double(e.l_ori) << " adv=" << nn::format_double(e.adv)
           << " kl_term=" << nn::format_double(e.kl_term) << "\n";
    }
}

void write_verdict_log(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<cert::Verdict>& verdicts) {
    artifact_header(os, cfg);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const cert::Verdict& v = verdicts[i];
        os << "example=" << i << " stage=" << cert::stage_name(v.decided_by)
           << " outcome=" << cert::outcome_name(v.outcome);
        if (v.has_margin) os << " margin=" << nn::format_double(v.zonotope_margin);
        os << " work=" << v.work;
        if (v.budget_exhausted) os << " budget_exhausted=1";
        os << "\n";
    }
}

void write_metrics(std::ostream& os, const ExperimentConfig& cfg, const cert::MetricsReport& rep) {
    artifact_header(os, cfg);
    os << "n=" << rep.n << " correct=" << rep.correct << " certified=" << rep.certified
       << " ve_attacked=" << rep.ve_attacked << " lr_ok=" << rep.lr_ok << "\n";
    os << "acc=" << nn::format_double(rep.acc) << " cr=" << nn::format_double(rep.cr)
       << " ve=" << nn::format_double(rep.ve) << " lr=" << nn::format_double(rep.lr) << "\n";
    os << format_table({"ACC(%)", "CR(%)", "VE(%)", "LR(%)"},
                       {{format_ratio(rep.acc * 100.0), format_ratio(rep.cr * 100.0),
                         format_ratio(rep.ve * 100.0), format_ratio(rep.lr * 100.0)}});
}

void write_sweep_report(std::ostream& os, const ExperimentConfig& cfg,
                        const std::vector<SweepRow>& rows) {
    artifact_header(os, cfg);
    os << "series lambda,acc,cr\n";
    for (const auto& r : rows) {
        os << "point " << nn::format_double(r.lambda) << "," << nn::format_double(r.acc) << ","
           << nn::format_double(r.cr) << "\n";
    }
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        body.push_back({format_ratio(r.lambda), format_ratio(r.acc * 100.0),
                        format_ratio(r.cr * 100.0)});
    }
    os << format_table({"lambda", "ACC(%)", "CR(%)"}, body);
    // Pairwise certified-robustness gaps across the sweep.
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            os << "cr_diff lambda " << nn::format_double(rows[a].lambda) << " vs "
               << nn::format_double(rows[b].lambda) << " = "
               << nn::format_double(rows[a].cr - rows[b].cr) << "\n";
        }
    }
}

void write_stage_eval(std::ostream& os, const ExperimentConfig& cfg,
                      const std::vector<StageEvalRow>& rows) {
    artifact_header(os, cfg);
    for (const auto& r : rows) {
        os << "stage=" << r.stage << " cr=" << nn::format_double(r.cr)
           << " lr=" << nn::format_double(r.lr) << "\n";
    }
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        body.push_back({"Stage #" + std::to_string(r.stage + 1), format_ratio(r.cr * 100.0),
                        format_ratio(r.lr * 100.0)});
    }
    os << format_table({"", "CR(%)", "LR(%)"}, body);
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size() && j < width.size(); ++j) {
            width[j] = std::max(width[j], row[j].size());
        }
    }
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) os << "  ";
            os << std::setw(static_cast<int>(width[j])) << row[j];
        }
        os << "\n";
    };
    emit(header);
    {
        std::vector<std::string> rule;
        for (std::size_t j = 0; j < header.size(); ++j) rule.push_back(std::string(width[j], '-'));
        emit(rule);
    }
    for (const auto& row : rows) emit(row);
    return os.str();
}

} // namespace zonocert::harness
