#include "zonocert/attack.hpp"

#include <algorithm>
#include <cmath>

#include "zonocert/ops.hpp"
#include "zonocert/rng.hpp"
#include "zonocert/tape.hpp"

namespace zonocert::attack {

void AttackConfig::validate() const {
    if (step_size <= 0.0) throw ConfigError("attack step size must be positive");
    if (steps < 1) throw ConfigError("attack needs at least one step");
    if (restarts < 1) throw ConfigError("attack needs at least one restart");
}

namespace {

struct LossGrad {
    double loss;
    nn::Tensor grad;
};

LossGrad suffix_loss_grad(const nn::LayeredNetwork& net, int first_layer, const nn::Tensor& act,
                          int y) {
    nn::Tape tape;
    nn::TapeNet tn = nn::TapeNet::build(tape, net, /*params_constant=*/true);
    nn::NodeId x = tape.leaf(act, true);
    nn::NodeId logits = tn.forward(tape, net, x, first_layer);
    nn::NodeId p = tape.softmax(logits);
    nn::NodeId ce = tape.scale(tape.log_shift(tape.pick(p, y), nn::kProbFloor), -1.0);
    tape.backward(ce);
    return {tape.value(ce)[0], tape.grad(x)};
}

double suffix_loss(const nn::LayeredNetwork& net, int first_layer, const nn::Tensor& act, int y) {
    return nn::cross_entropy(nn::softmax(net.forward_from(first_layer, act)), y);
}

} // namespace

LatentResult latent_pgd(const zono::Zonotope& z, const nn::LayeredNetwork& net, int y,
                        const AttackConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int first_layer = z.layer_tag();
    const int m = z.generator_count();
    Rng rng(seed);

    Eigen::VectorXd best_e = Eigen::VectorXd::Zero(m);
    double best_loss = -1.0;
    bool have_best = false;

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Eigen::VectorXd e(m);
        for (int i = 0; i < m; ++i) e[i] = rng.uniform(-1.0, 1.0);

        for (int step = 0; step <= cfg.steps; ++step) {
            const Eigen::VectorXd xv = z.sample(e);
            nn::Tensor x_cur =
                nn::Tensor::from_vector(std::vector<double>(xv.data(), xv.data() + xv.size()));
            // last iterate only needs its loss, not a gradient
            if (step == cfg.steps) {
                const double loss = suffix_loss(net, first_layer, x_cur, y);
                if (!have_best || loss > best_loss) {
                    best_loss = loss;
                    best_e = e;
                    have_best = true;
                }
                break;
            }
            LossGrad lg = suffix_loss_grad(net, first_layer, x_cur, y);
            if (!have_best || lg.loss > best_loss) {
                best_loss = lg.loss;
                best_e = e;
                have_best = true;
            }
            Eigen::Map<const Eigen::VectorXd> gx(lg.grad.data(), lg.grad.size());
            const Eigen::VectorXd ge = z.generators().transpose() * gx;
            e += cfg.step_size * ge;
            e = e.cwiseMax(-1.0).cwiseMin(1.0);
        }
    }

    LatentResult out;
    out.e_final = best_e;
    const Eigen::VectorXd xv = z.sample(best_e);
    out.x_adv = nn::Tensor::from_vector(std::vector<double>(xv.data(), xv.data() + xv.size()));
    out.loss = best_loss;
    out.misclassified = nn::argmax_lowest(net.forward_from(first_layer, out.x_adv)) != y;
    return out;
}

InputAttackResult input_pgd(const nn::LayeredNetwork& net, const nn::Tensor& x, int y, double eps,
                            const AttackConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (eps < 0.0) throw DomainError("epsilon must be non-negative");
    const std::int64_t d = x.size();
    for (std::int64_t i = 0; i < d; ++i) {
        if (x[i] < 0.0 || x[i] > 1.0) throw DomainError("input outside [0,1]");
    }
    Rng rng(seed);

    auto project = [&](nn::Tensor& p) {
        for (std::int64_t i = 0; i < d; ++i) {
            const double lo = std::max(0.0, x[i] - eps);
            const double hi = std::min(1.0, x[i] + eps);
            p[i] = std::clamp(p[i], lo, hi);
        }
    };

    nn::Tensor best = x;
    double best_loss = -1.0;
    bool best_success = false;
    bool have_best = false;

    auto consider = [&](const nn::Tensor& cand, double loss) {
        const bool success = net.predict(cand) != y;
        // Prefer any misclassifying iterate; among equals, higher loss.
        if (!have_best || (success && !best_success) ||
            (success == best_success && loss > best_loss)) {
            best = cand;
            best_loss = loss;
            best_success = success;
            have_best = true;
        }
    };

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        nn::Tensor cur = x;
        if (eps > 0.0) {
            for (std::int64_t i = 0; i < d; ++i) cur[i] += rng.uniform(-eps, eps);
            project(cur);
        }
        for (int step = 0; step <= cfg.steps; ++step) {
            if (step == cfg.steps || eps == 0.0) {
                consider(cur, suffix_loss(net, 0, cur, y));
                break;
            }
            LossGrad lg = suffix_loss_grad(net, 0, cur, y);
            consider(cur, lg.loss);
            for (std::int64_t i = 0; i < d; ++i) {
                const double g = lg.grad[i];
                cur[i] += cfg.step_size * (g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0));
            }
            project(cur);
        }
    }

    InputAttackResult out;
    out.x_adv = std::move(best);
    out.loss = best_loss;
    out.success = best_success;
    return out;
}

} // namespace zonocert::attack
