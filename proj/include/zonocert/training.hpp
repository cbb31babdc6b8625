#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "zonocert/attack.hpp"
#include "zonocert/dataset.hpp"
#include "zonocert/optimizer.hpp"

namespace zonocert::train {

enum class LossVariant { Colt, Mat, Maar };

const char* loss_variant_name(LossVariant v);

struct TrainingConfig {
    double epsilon = 0.05;
    double lambda = 6.0;
    attack::AttackConfig attack;
    nn::OptimizerState optimizer = nn::OptimizerState::adam(1e-4);
    // (latent block l, epochs); l = 0 attacks the input region itself.
    std::vector<std::pair<int, int>> stage_plan;
    LossVariant loss_variant = LossVariant::Maar;
    int batch_size = 100;
    std::uint64_t seed = 1;
    int cauchy_k = 0; // 0 -> exact row L1 when propagating regions
    int threads = 1;

    void validate(const nn::LayeredNetwork& net) const;
};

struct EpochRecord {
    int epoch = 0;
    double accuracy = 0.0;       // natural accuracy on the training set
    double verified_error = 0.0; // attack-based proxy on the training set
    double l_ori = 0.0;          // mean natural cross-entropy
    double adv = 0.0;            // mean adversarial cross-entropy
    double kl_term = 0.0;        // mean lambda * KL * (1 - p_y), zero for Colt/Mat
};

struct StageReport {
    int stage_index = 0;
    int latent_block = 0;
    std::vector<EpochRecord> epochs;
};

// Deterministic seed streams; exposed so a test can replay the exact
// sequence of module calls a stage performs.
std::uint64_t stage_attack_seed(std::uint64_t base, int stage, int epoch, std::uint64_t example_id);
std::uint64_t stage_shuffle_seed(std::uint64_t base, int stage, int epoch);
std::uint64_t stage_ve_seed(std::uint64_t base, int stage, int epoch, std::uint64_t example_id);

// One latent stage: blocks [0, l) must already be frozen. Freezes through
// block l+1 on completion.
StageReport train_stage(nn::LayeredNetwork& net, int latent_block, const data::DatasetSplit& data,
                        const TrainingConfig& cfg, nn::OptimizerState& opt, int stage_index);

using StageSink = std::function<void(int stage_index, const nn::LayeredNetwork& net,
                                     const StageReport& report)>;

// Runs the stage plan in order; the sink fires after each stage (checkpoints).
std::vector<StageReport> train(nn::LayeredNetwork& net, const data::DatasetSplit& data,
                               const TrainingConfig& cfg, const StageSink& sink = {});

} // namespace zonocert::train
