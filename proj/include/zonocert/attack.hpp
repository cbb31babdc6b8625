#pragma once

#include <cstdint>

#include "zonocert/network.hpp"
#include "zonocert/zonotope.hpp"

namespace zonocert::attack {

// Cross-entropy is the only attack loss; the knobs are the search budget.
struct AttackConfig {
    double step_size = 0.25;
    int steps = 8;
    int restarts = 1;

    void validate() const;
};

struct LatentResult {
    nn::Tensor x_adv;       // point inside the zonotope, flat
    Eigen::VectorXd e_final;
    double loss = 0.0;      // suffix cross-entropy at x_adv
    bool misclassified = false;
};

// Projected ascent over the generator coefficients: each step moves e by
// step_size * A^T grad and clips back into the unit cube. Initial e is drawn
// uniformly from the cube per restart; the best-loss iterate wins.
LatentResult latent_pgd(const zono::Zonotope& z, const nn::LayeredNetwork& net, int y,
                        const AttackConfig& cfg, std::uint64_t seed);

struct InputAttackResult {
    nn::Tensor x_adv;
    bool success = false; // predict(net, x_adv) != y
    double loss = 0.0;
};

// Sign-step PGD inside B_eps(x) intersected with [0,1]^d. Every iterate is
// projected, so feasibility holds throughout, not just at return.
InputAttackResult input_pgd(const nn::LayeredNetwork& net, const nn::Tensor& x, int y, double eps,
                            const AttackConfig& cfg, std::uint64_t seed);

} // namespace zonocert::attack
