#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "zonocert/attack.hpp"
#include "zonocert/dataset.hpp"
#include "zonocert/network.hpp"
#include "zonocert/zonotope.hpp"

namespace zonocert::cert {

enum class Outcome { Misclassified, Falsified, VerifiedZonotope, VerifiedComplete, Unknown };
enum class Stage { Precheck, PointExact, Pgd, Zonotope, Complete };

const char* outcome_name(Outcome o);
const char* stage_name(Stage s);
inline bool is_verified(Outcome o) {
    return o == Outcome::VerifiedZonotope || o == Outcome::VerifiedComplete;
}

struct Verdict {
    Outcome outcome = Outcome::Unknown;
    Stage decided_by = Stage::Precheck;
    std::optional<nn::Tensor> counterexample;
    // Worst competitor logit-difference upper bound from the zonotope pass;
    // negative means certified.
    double zonotope_margin = 0.0;
    bool has_margin = false;
    int work = 0; // branch-and-bound nodes explored
    bool budget_exhausted = false;
};

struct CertifyConfig {
    double epsilon = 0.05;
    attack::AttackConfig pgd{0.01, 40, 1};
    int bab_budget = 50;
    std::uint64_t seed = 1;
};

// Sound-only check: propagates the input region with exact row-L1 bounds and
// requires upper(z_k - z_y) < 0 for every competitor k (row differences, so
// generator correlations cancel).
bool zonotope_verify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y, double eps,
                     zono::AffineCache* cache = nullptr, double* worst_margin = nullptr);

struct CompleteResult {
    Outcome outcome = Outcome::Unknown; // VerifiedComplete | Falsified | Unknown
    std::optional<nn::Tensor> counterexample;
    int nodes = 0;
    bool budget_exhausted = false;
};

// Depth-first branch-and-bound over unstable ReLU phases. Each node
// re-propagates zonotope bounds under its phase fixture; phase constraints are
// carried as affine rows over the generator cube, and leaves (no crossing
// neurons left) are decided exactly with an LP over the constrained cube.
// Falsified always carries a counterexample that was re-checked concretely.
CompleteResult complete_verify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y,
                               double eps, int max_splits, zono::AffineCache* cache = nullptr);

// Algorithm stages in order: misclassification precheck, PGD falsification,
// zonotope verification, complete branch-and-bound.
Verdict certify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y,
                const CertifyConfig& cfg, zono::AffineCache* cache = nullptr,
                std::uint64_t example_id = 0);

double accuracy(const nn::LayeredNetwork& net, const data::DatasetSplit& data);

std::vector<Verdict> certify_dataset(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                                     const CertifyConfig& cfg, int threads);

double certified_robustness(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                            const CertifyConfig& cfg, int threads,
                            std::vector<Verdict>* verdicts_out = nullptr);

// Fraction of correctly classified examples that a PGD attack breaks.
double verified_error(const nn::LayeredNetwork& net, const data::DatasetSplit& data, double eps,
                      const attack::AttackConfig& atk, std::uint64_t seed, int threads);

// Fraction of the whole set that is correct and survives a latent attack at
// the given block boundary.
double latent_robustness(const nn::LayeredNetwork& net, const data::DatasetSplit& data, double eps,
                         int latent_block, const attack::AttackConfig& atk, std::uint64_t seed,
                         int threads);

struct MetricsConfig {
    CertifyConfig certify;
    attack::AttackConfig ve_attack{0.01, 40, 1};
    int latent_block = 1;
    attack::AttackConfig latent_attack{0.01, 150, 1};
    int threads = 1;
};

struct MetricsReport {
    double acc = 0.0, cr = 0.0, ve = 0.0, lr = 0.0;
    int n = 0;
    int correct = 0;
    int certified = 0;
    int ve_attacked = 0;
    int lr_ok = 0;
};

MetricsReport evaluate_metrics(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                               const MetricsConfig& cfg,
                               std::vector<Verdict>* verdicts_out = nullptr);

} // namespace zonocert::cert
