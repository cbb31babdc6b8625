#include "zonocert/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "zonocert/losses.hpp"
#include "zonocert/parallel.hpp"
#include "zonocert/rng.hpp"

namespace zonocert::train {

const char* loss_variant_name(LossVariant v) {
    switch (v) {
    case LossVariant::Colt: return "colt";
    case LossVariant::Mat: return "mat";
    case LossVariant::Maar: return "maar";
    }
    return "?";
}

void TrainingConfig::validate(const nn::LayeredNetwork& net) const {
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    attack.validate();
    if (stage_plan.empty()) throw ConfigError("stage plan is empty");
    int prev = -1;
    for (const auto& [block, epochs] : stage_plan) {
        if (block <= prev) throw ConfigError("stage plan blocks must be strictly increasing");
        if (block < 0 || block >= net.block_count()) {
            throw ConfigError("stage block " + std::to_string(block) + " out of range");
        }
        if (epochs < 1) throw ConfigError("stage epochs must be >= 1");
        prev = block;
    }
}

std::uint64_t stage_attack_seed(std::uint64_t base, int stage, int epoch, std::uint64_t example_id) {
    return derive_seed(base, {0xa11ac, static_cast<std::uint64_t>(stage),
                              static_cast<std::uint64_t>(epoch), example_id});
}

std::uint64_t stage_shuffle_seed(std::uint64_t base, int stage, int epoch) {
    return derive_seed(base, {0x5affe, static_cast<std::uint64_t>(stage),
                              static_cast<std::uint64_t>(epoch)});
}

std::uint64_t stage_ve_seed(std::uint64_t base, int stage, int epoch, std::uint64_t example_id) {
    return derive_seed(base, {0x7e, static_cast<std::uint64_t>(stage),
                              static_cast<std::uint64_t>(epoch), example_id});
}

namespace {

struct ExampleResult {
    nn::GradientMap grads;
    double l_ori = 0.0;
    double adv = 0.0;
    double kl_term = 0.0;
};

ExampleResult process_example(const nn::LayeredNetwork& net, const data::Example& ex,
                              const TrainingConfig& cfg, int latent_block, int stage, int epoch,
                              std::uint64_t example_id, zono::AffineCache& cache) {
    const int prefix = net.prefix_layers(latent_block);
    zono::Zonotope z0 = zono::input_region(ex.x, cfg.epsilon);
    zono::BoundsEstimator est{cfg.cauchy_k,
                              derive_seed(cfg.seed, {0xe57, static_cast<std::uint64_t>(stage), example_id})};
    zono::Zonotope zl = zono::propagate_prefix(net, std::move(z0), prefix, &cache,
                                               cfg.cauchy_k > 0 ? &est : nullptr);
    attack::LatentResult att = attack::latent_pgd(
        zl, net, ex.label, cfg.attack, stage_attack_seed(cfg.seed, stage, epoch, example_id));

    nn::Tape tape;
    nn::TapeNet tn = nn::TapeNet::build(tape, net);
    nn::NodeId x_nat = tape.constant(ex.x);
    nn::NodeId z_nat = tn.forward(tape, net, x_nat, 0);
    nn::NodeId p_nat = tape.softmax(z_nat);
    nn::NodeId x_adv = tape.constant(att.x_adv); // attack output is a constant here
    nn::NodeId z_adv = tn.forward(tape, net, x_adv, prefix);
    nn::NodeId p_adv = tape.softmax(z_adv);

    nn::NodeId loss = 0;
    switch (cfg.loss_variant) {
    case LossVariant::Colt:
        loss = tape_colt(tape, p_nat, p_adv, ex.label);
        break;
    case LossVariant::Mat: {
        const int y_pred = nn::argmax_lowest(tape.value(z_nat));
        loss = tape_mat(tape, p_nat, p_adv, ex.label, y_pred);
        break;
    }
    case LossVariant::Maar:
        loss = tape_maar(tape, p_nat, p_adv, ex.label, cfg.lambda);
        break;
    }

    ExampleResult out;
    out.l_ori = nn::cross_entropy(tape.value(p_nat), ex.label);
    out.adv = nn::cross_entropy(tape.value(p_adv), ex.label);
    if (cfg.loss_variant == LossVariant::Maar) {
        out.kl_term = cfg.lambda * kl_div(tape.value(p_nat), tape.value(p_adv)) *
                      soft_indicator(tape.value(p_nat), ex.label);
    }
    tape.backward(loss);
    for (const auto& key : net.parameter_keys(true)) {
        out.grads[key] = tape.grad(tn.params.at(key));
    }
    return out;
}

} // namespace

StageReport train_stage(nn::LayeredNetwork& net, int latent_block, const data::DatasetSplit& data,
                        const TrainingConfig& cfg, nn::OptimizerState& opt, int stage_index) {
    cfg.validate(net);
    if (data.examples.empty()) throw ConfigError("training set is empty");
    if (latent_block < 0 || latent_block >= net.block_count()) {
        throw ConfigError("latent block " + std::to_string(latent_block) + " out of range");
    }
    if (net.frozen_blocks() != latent_block) {
        throw ConfigError("stage " + std::to_string(stage_index) + " expects exactly " +
                          std::to_string(latent_block) + " frozen blocks, found " +
                          std::to_string(net.frozen_blocks()));
    }

    int epochs = 0;
    for (const auto& [block, ep] : cfg.stage_plan) {
        if (block == latent_block) epochs = ep;
    }
    if (epochs == 0) throw ConfigError("latent block missing from stage plan");

    const std::size_t n = data.examples.size();
    const int threads = resolve_threads(cfg.threads);
    zono::AffineCache cache;
    StageReport report;
    report.stage_index = stage_index;
    report.latent_block = latent_block;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::uint64_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(stage_shuffle_seed(cfg.seed, stage_index, epoch));
        shuffle_rng.shuffle(order);

        double sum_ori = 0.0, sum_adv = 0.0, sum_kl = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
            std::vector<ExampleResult> results(count);
            parallel_for(
                count,
                [&](std::size_t i) {
                    const std::uint64_t id = order[start + i];
                    results[i] = process_example(net, data.examples[static_cast<std::size_t>(id)],
                                                 cfg, latent_block, stage_index, epoch, id, cache);
                },
                threads);
            std::vector<nn::GradientMap> grads;
            grads.reserve(count);
            for (auto& r : results) {
                sum_ori += r.l_ori;
                sum_adv += r.adv;
                sum_kl += r.kl_term;
                grads.push_back(std::move(r.grads));
            }
            nn::GradientMap total = nn::reduce_gradients(std::move(grads));
            const double inv_b = 1.0 / static_cast<double>(count);
            for (auto& [key, g] : total) {
                for (std::int64_t j = 0; j < g.size(); ++j) g[j] *= inv_b;
            }
            opt.step(net, total, epoch);
        }

        // End-of-epoch measurements on the training set.
        std::vector<unsigned char> correct(n, 0), attacked(n, 0);
        parallel_for(
            n,
            [&](std::size_t i) {
                const data::Example& ex = data.examples[i];
                if (net.predict(ex.x) != ex.label) return;
                correct[i] = 1;
                auto res = attack::input_pgd(net, ex.x, ex.label, cfg.epsilon, cfg.attack,
                                             stage_ve_seed(cfg.seed, stage_index, epoch, i));
                attacked[i] = res.success ? 1 : 0;
            },
            threads);
        const std::size_t n_correct = static_cast<std::size_t>(
            std::count(correct.begin(), correct.end(), static_cast<unsigned char>(1)));
        const std::size_t n_attacked = static_cast<std::size_t>(
            std::count(attacked.begin(), attacked.end(), static_cast<unsigned char>(1)));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.accuracy = static_cast<double>(n_correct) / static_cast<double>(n);
        rec.verified_error =
            n_correct == 0 ? 1.0 : static_cast<double>(n_attacked) / static_cast<double>(n_correct);
        rec.l_ori = sum_ori / static_cast<double>(n);
        rec.adv = sum_adv / static_cast<double>(n);
        rec.kl_term = sum_kl / static_cast<double>(n);
        report.epochs.push_back(rec);
    }

    net.freeze_through_block(std::min(latent_block + 1, net.block_count()));
    return report;
}

std::vector<StageReport> train(nn::LayeredNetwork& net, const data::DatasetSplit& data,
                               const TrainingConfig& cfg, const StageSink& sink) {
    cfg.validate(net);
    std::vector<StageReport> reports;
    for (std::size_t s = 0; s < cfg.stage_plan.size(); ++s) {
        const int block = cfg.stage_plan[s].first;
        if (net.frozen_blocks() > block) {
            throw ConfigError("stage plan would unfreeze an earlier layer");
        }
        net.freeze_through_block(block);
        nn::OptimizerState opt = cfg.optimizer;
        opt.reset_buffers();
        StageReport rep = train_stage(net, block, data, cfg, opt, static_cast<int>(s));
        if (sink) sink(static_cast<int>(s), net, rep);
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace zonocert::train
