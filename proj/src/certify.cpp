#include "zonocert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "zonocert/parallel.hpp"
#include "zonocert/rng.hpp"
#include "zonocert/simplex.hpp"

namespace zonocert::cert {

const char* outcome_name(Outcome o) {
    switch (o) {
    case Outcome::Misclassified: return "misclassified";
    case Outcome::Falsified: return "falsified";
    case Outcome::VerifiedZonotope: return "verified-zonotope";
    case Outcome::VerifiedComplete: return "verified-complete";
    case Outcome::Unknown: return "unknown";
    }
    return "?";
}

const char* stage_name(Stage s) {
    switch (s) {
    case Stage::Precheck: return "precheck";
    case Stage::PointExact: return "point";
    case Stage::Pgd: return "pgd";
    case Stage::Zonotope: return "zonotope";
    case Stage::Complete: return "complete";
    }
    return "?";
}

namespace {

constexpr double kStableWidth = 1e-9;
constexpr double kMarginTol = 0.0; // strict: ties are not certified

struct LogitRegion {
    Eigen::VectorXd center;
    Eigen::MatrixXd gens; // num_classes x m, dense
};

LogitRegion to_logit_region(const zono::Zonotope& z) {
    LogitRegion r;
    r.center = z.center();
    r.gens = Eigen::MatrixXd(z.generators());
    return r;
}

// upper bound of z_k - z_y over the region, per competitor k (k == y -> -inf).
Eigen::VectorXd margin_uppers(const LogitRegion& r, int y) {
    const int k = static_cast<int>(r.center.size());
    Eigen::VectorXd uppers(k);
    for (int c = 0; c < k; ++c) {
        if (c == y) {
            uppers[c] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double base = r.center[c] - r.center[y];
        uppers[c] = base + (r.gens.row(c) - r.gens.row(y)).cwiseAbs().sum();
    }
    return uppers;
}

nn::Tensor to_tensor(const Eigen::VectorXd& v) {
    return nn::Tensor::from_vector(std::vector<double>(v.data(), v.data() + v.size()));
}

} // namespace

bool zonotope_verify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y, double eps,
                     zono::AffineCache* cache, double* worst_margin) {
    if (net.predict(x) != y) throw DomainError("zonotope_verify requires a correctly classified input");
    zono::Zonotope z = zono::propagate_prefix(net, zono::input_region(x, eps), net.layer_count(), cache);
    const Eigen::VectorXd uppers = margin_uppers(to_logit_region(z), y);
    double worst = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < uppers.size(); ++c) {
        if (c == y) continue;
        worst = std::max(worst, uppers[c]);
    }
    if (worst_margin) *worst_margin = worst;
    return worst < kMarginTol;
}

namespace {

// ---- complete branch-and-bound -------------------------------------------

using PhaseKey = std::pair<int, int>; // (relu layer index, neuron)

struct Constraint {
    int sign = 1;    // +1: pre >= 0 (active), -1: pre <= 0 (inactive)
    double c0 = 0.0; // pre-activation center
    Eigen::VectorXd row; // generator coefficients at record time
};

struct CrossingNeuron {
    int layer = 0;
    int idx = 0;
    double width = 0.0;
    double center = 0.0;
};

struct FixtureProp {
    zono::Zonotope out;
    std::vector<Constraint> constraints;
    std::vector<CrossingNeuron> crossing;
    bool exact = true; // no relaxation generators introduced

    FixtureProp(zono::Zonotope z) : out(std::move(z)) {}
};

// ReLU transform honoring a phase fixture: assigned neurons become identity or
// zero rows and contribute a sign constraint on their pre-activation; crossing
// unassigned neurons get the usual relaxation.
zono::Zonotope relu_with_fixture(const zono::Zonotope& z, int relu_layer,
                                 const std::map<PhaseKey, int>& assignment,
                                 std::vector<Constraint>& constraints,
                                 std::vector<CrossingNeuron>& crossing, bool& exact) {
    const zono::IntervalBounds b = zono::bounds(z);
    const int d = z.dim();
    const int m = z.generator_count();

    std::vector<int> assigned_rows;
    for (int i = 0; i < d; ++i) {
        if (assignment.count({relu_layer, i})) assigned_rows.push_back(i);
    }
    // Gather dense generator rows for the assigned neurons in one sweep.
    std::map<int, Eigen::VectorXd> rows;
    for (int i : assigned_rows) rows[i] = Eigen::VectorXd::Zero(m);
    if (!assigned_rows.empty()) {
        const zono::SparseMat& g = z.generators();
        for (int j = 0; j < g.outerSize(); ++j) {
            for (zono::SparseMat::InnerIterator it(g, j); it; ++it) {
                auto f = rows.find(static_cast<int>(it.row()));
                if (f != rows.end()) f->second[j] = it.value();
            }
        }
    }

    Eigen::VectorXd factor(d);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
    std::vector<int> fresh;
    for (int i = 0; i < d; ++i) {
        const auto it = assignment.find({relu_layer, i});
        if (it != assignment.end()) {
            Constraint c;
            c.sign = it->second;
            c.c0 = z.center()[i];
            c.row = rows.at(i);
            constraints.push_back(std::move(c));
            factor[i] = it->second > 0 ? 1.0 : 0.0;
            continue;
        }
        const double l = b.lower[i], u = b.upper[i];
        if (l >= 0.0) {
            factor[i] = 1.0;
        } else if (u <= 0.0) {
            factor[i] = 0.0;
        } else if (u - l < kStableWidth) {
            factor[i] = z.center()[i] >= 0.0 ? 1.0 : 0.0;
        } else {
            const double lambda = u / (u - l);
            factor[i] = lambda;
            offset[i] = -u * l / (2.0 * (u - l));
            fresh.push_back(i);
            crossing.push_back({relu_layer, i, u - l, z.center()[i]});
            exact = false;
        }
    }

    Eigen::VectorXd center = z.center().cwiseProduct(factor) + offset;
    std::vector<Eigen::Triplet<double>> trips;
    const zono::SparseMat& g = z.generators();
    trips.reserve(static_cast<std::size_t>(g.nonZeros()) + fresh.size());
    for (int j = 0; j < g.outerSize(); ++j) {
        for (zono::SparseMat::InnerIterator it(g, j); it; ++it) {
            const double v = it.value() * factor[it.row()];
            if (v != 0.0) trips.emplace_back(static_cast<int>(it.row()), j, v);
        }
    }
    std::vector<int> provenance = z.provenance();
    const int tag = z.layer_tag() + 1;
    for (std::size_t c = 0; c < fresh.size(); ++c) {
        trips.emplace_back(fresh[c], m + static_cast<int>(c), offset[fresh[c]]);
        provenance.push_back(tag);
    }
    zono::SparseMat gens(d, m + static_cast<int>(fresh.size()));
    gens.setFromTriplets(trips.begin(), trips.end());
    return zono::Zonotope(std::move(center), std::move(gens), std::move(provenance), tag);
}

FixtureProp propagate_fixture(const nn::LayeredNetwork& net, const zono::Zonotope& z0,
                              const std::map<PhaseKey, int>& assignment,
                              zono::AffineCache* cache) {
    FixtureProp prop(z0);
    for (int i = 0; i < net.layer_count(); ++i) {
        const nn::Layer& layer = net.layer(i);
        if (layer.kind == nn::LayerKind::Relu) {
            prop.out = relu_with_fixture(prop.out, i, assignment, prop.constraints, prop.crossing,
                                         prop.exact);
        } else if (layer.kind == nn::LayerKind::Conv) {
            prop.out = zono::affine(prop.out, layer, cache ? &cache->conv_matrix(net, i) : nullptr);
        } else {
            prop.out = zono::affine(prop.out, layer);
        }
    }
    return prop;
}

struct BabContext {
    const nn::LayeredNetwork& net;
    const zono::Zonotope& z0;
    int y;
    int m0; // input generator count
    zono::AffineCache* cache;
    int max_splits;

    int splits = 0;
    int nodes = 0;
    bool budget_exhausted = false;
    bool undecided_leaf = false;
    std::optional<nn::Tensor> counterexample;
};

// Concrete check of a candidate coefficient vector (input-generator part).
bool try_counterexample(BabContext& ctx, const Eigen::VectorXd& e_input) {
    Eigen::VectorXd e = e_input.cwiseMax(-1.0).cwiseMin(1.0);
    const nn::Tensor cand = to_tensor(ctx.z0.sample(e));
    if (ctx.net.predict(cand) != ctx.y) {
        ctx.counterexample = cand;
        return true;
    }
    return false;
}

// Closed: subtree verified or empty. Open: an exact tie left a leaf
// undecided; keep searching siblings for counterexamples. Abort: a
// counterexample was found or the split budget ran out.
enum class NodeStatus { Closed, Open, Abort };

NodeStatus bab_node(BabContext& ctx, const std::map<PhaseKey, int>& assignment) {
    ++ctx.nodes;
    FixtureProp prop = propagate_fixture(ctx.net, ctx.z0, assignment, ctx.cache);

    // Empty-branch test: a phase constraint that cannot hold anywhere in the
    // cube closes the branch vacuously.
    for (const Constraint& c : prop.constraints) {
        const double best = c.sign * c.c0 + c.row.cwiseAbs().sum();
        if (best < -1e-12) return NodeStatus::Closed;
    }

    const LogitRegion region = to_logit_region(prop.out);
    const Eigen::VectorXd uppers = margin_uppers(region, ctx.y);
    std::vector<int> open;
    for (int k = 0; k < uppers.size(); ++k) {
        if (k != ctx.y && uppers[k] >= kMarginTol) open.push_back(k);
    }
    if (open.empty()) return NodeStatus::Closed;

    // Cheap falsification: evaluate the cube point that attains each open
    // competitor's upper bound.
    for (int k : open) {
        const Eigen::VectorXd row = region.gens.row(k) - region.gens.row(ctx.y);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(row.size());
        for (int j = 0; j < row.size(); ++j) e[j] = row[j] > 0.0 ? 1.0 : (row[j] < 0.0 ? -1.0 : 0.0);
        if (try_counterexample(ctx, e.head(ctx.m0))) return NodeStatus::Abort;
    }

    if (prop.crossing.empty()) {
        // Leaf: the network is affine over the cube and every recorded
        // constraint row lives in input-generator space. Decide exactly.
        const int m = ctx.m0;
        const int s = static_cast<int>(prop.constraints.size());
        Eigen::MatrixXd a(s, m);
        Eigen::VectorXd b(s);
        for (int i = 0; i < s; ++i) {
            const Constraint& c = prop.constraints[static_cast<std::size_t>(i)];
            if (c.row.size() != m) throw Error("internal: leaf constraint row not in input space");
            a.row(i) = -c.sign * c.row.transpose();
            b[i] = c.sign * c.c0;
        }
        const Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -1.0);
        const Eigen::VectorXd hi = Eigen::VectorXd::Constant(m, 1.0);
        bool undecided = false;
        for (int k : open) {
            Eigen::VectorXd obj = (region.gens.row(k) - region.gens.row(ctx.y)).transpose();
            const double base = region.center[k] - region.center[ctx.y];
            LpResult lp = solve_lp_box(obj, a, b, lo, hi);
            if (lp.status == LpResult::Status::Infeasible) return NodeStatus::Closed;
            if (lp.status == LpResult::Status::IterationLimit) {
                undecided = true;
                continue;
            }
            if (base + lp.value < kMarginTol) continue; // this competitor is safe
            if (try_counterexample(ctx, lp.x)) return NodeStatus::Abort;
            // Margin touches zero but the concrete point does not misclassify
            // (exact tie); leave undecided rather than mislabel it.
            undecided = true;
        }
        if (undecided) {
            ctx.undecided_leaf = true;
            return NodeStatus::Open;
        }
        return NodeStatus::Closed;
    }

    // Split the widest crossing neuron; ties by lowest (layer, idx).
    const CrossingNeuron* pick = &prop.crossing.front();
    for (const auto& c : prop.crossing) {
        if (c.width > pick->width + 1e-15 ||
            (std::abs(c.width - pick->width) <= 1e-15 &&
             std::make_pair(c.layer, c.idx) < std::make_pair(pick->layer, pick->idx))) {
            pick = &c;
        }
    }
    if (ctx.splits >= ctx.max_splits) {
        ctx.budget_exhausted = true;
        return NodeStatus::Abort;
    }
    ++ctx.splits;
    const int first_phase = pick->center >= 0.0 ? 1 : -1;
    NodeStatus agg = NodeStatus::Closed;
    for (int phase : {first_phase, -first_phase}) {
        std::map<PhaseKey, int> child = assignment;
        child[{pick->layer, pick->idx}] = phase;
        const NodeStatus st = bab_node(ctx, child);
        if (st == NodeStatus::Abort) return NodeStatus::Abort;
        if (st == NodeStatus::Open) agg = NodeStatus::Open;
    }
    return agg;
}

} // namespace

CompleteResult complete_verify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y,
                               double eps, int max_splits, zono::AffineCache* cache) {
    if (net.predict(x) != y) {
        throw DomainError("complete_verify requires a correctly classified input");
    }
    const zono::Zonotope z0 = zono::input_region(x, eps);
    BabContext ctx{net, z0, y, z0.generator_count(), cache, max_splits};
    const NodeStatus st = bab_node(ctx, {});
    CompleteResult res;
    res.nodes = ctx.nodes;
    res.budget_exhausted = ctx.budget_exhausted;
    if (ctx.counterexample) {
        res.outcome = Outcome::Falsified;
        res.counterexample = ctx.counterexample;
    } else if (st == NodeStatus::Closed) {
        res.outcome = Outcome::VerifiedComplete;
    } else {
        res.outcome = Outcome::Unknown;
    }
    return res;
}

Verdict certify(const nn::LayeredNetwork& net, const nn::Tensor& x, int y,
                const CertifyConfig& cfg, zono::AffineCache* cache, std::uint64_t example_id) {
    Verdict v;
    if (net.predict(x) != y) {
        v.outcome = Outcome::Misclassified;
        v.decided_by = Stage::Precheck;
        return v;
    }
    if (cfg.epsilon == 0.0) {
        // Degenerate ball: correctness of the point is the whole certificate.
        v.outcome = Outcome::VerifiedZonotope;
        v.decided_by = Stage::PointExact;
        v.zonotope_margin = 0.0;
        return v;
    }
    auto atk = attack::input_pgd(net, x, y, cfg.epsilon, cfg.pgd,
                                 derive_seed(cfg.seed, {0x9d, example_id}));
    if (atk.success) {
        v.outcome = Outcome::Falsified;
        v.decided_by = Stage::Pgd;
        v.counterexample = atk.x_adv;
        return v;
    }
    double margin = 0.0;
    const bool ok = zonotope_verify(net, x, y, cfg.epsilon, cache, &margin);
    v.zonotope_margin = margin;
    v.has_margin = true;
    if (ok) {
        v.outcome = Outcome::VerifiedZonotope;
        v.decided_by = Stage::Zonotope;
        return v;
    }
    CompleteResult cr = complete_verify(net, x, y, cfg.epsilon, cfg.bab_budget, cache);
    v.outcome = cr.outcome;
    v.decided_by = Stage::Complete;
    v.counterexample = cr.counterexample;
    v.work = cr.nodes;
    v.budget_exhausted = cr.budget_exhausted;
    return v;
}

double accuracy(const nn::LayeredNetwork& net, const data::DatasetSplit& data) {
    if (data.examples.empty()) throw MetricError("accuracy of an empty dataset is undefined");
    std::size_t correct = 0;
    for (const auto& ex : data.examples) {
        if (net.predict(ex.x) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.examples.size());
}

std::vector<Verdict> certify_dataset(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                                     const CertifyConfig& cfg, int threads) {
    std::vector<Verdict> verdicts(data.examples.size());
    zono::AffineCache cache;
    parallel_for(
        data.examples.size(),
        [&](std::size_t i) {
            const auto& ex = data.examples[i];
            verdicts[i] = certify(net, ex.x, ex.label, cfg, &cache, i);
        },
        resolve_threads(threads));
    return verdicts;
}

double certified_robustness(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                            const CertifyConfig& cfg, int threads,
                            std::vector<Verdict>* verdicts_out) {
    if (data.examples.empty()) throw MetricError("certified robustness of an empty dataset");
    std::vector<Verdict> verdicts = certify_dataset(net, data, cfg, threads);
    std::size_t certified = 0;
    for (const auto& v : verdicts) {
        if (is_verified(v.outcome)) ++certified;
    }
    if (verdicts_out) *verdicts_out = std::move(verdicts);
    return static_cast<double>(certified) / static_cast<double>(data.examples.size());
}

double verified_error(const nn::LayeredNetwork& net, const data::DatasetSplit& data, double eps,
                      const attack::AttackConfig& atk, std::uint64_t seed, int threads) {
    if (data.examples.empty()) throw MetricError("verified error of an empty dataset");
    std::vector<unsigned char> correct(data.examples.size(), 0), attacked(data.examples.size(), 0);
    parallel_for(
        data.examples.size(),
        [&](std::size_t i) {
            const auto& ex = data.examples[i];
            if (net.predict(ex.x) != ex.label) return;
            correct[i] = 1;
            auto res = attack::input_pgd(net, ex.x, ex.label, eps, atk, derive_seed(seed, {0x7e, i}));
            attacked[i] = res.success ? 1 : 0;
        },
        resolve_threads(threads));
    const std::size_t n_correct = static_cast<std::size_t>(
        std::count(correct.begin(), correct.end(), static_cast<unsigned char>(1)));
    if (n_correct == 0) throw MetricError("verified error undefined: no correctly classified examples");
    const std::size_t n_attacked = static_cast<std::size_t>(
        std::count(attacked.begin(), attacked.end(), static_cast<unsigned char>(1)));
    return static_cast<double>(n_attacked) / static_cast<double>(n_correct);
}

double latent_robustness(const nn::LayeredNetwork& net, const data::DatasetSplit& data, double eps,
                         int latent_block, const attack::AttackConfig& atk, std::uint64_t seed,
                         int threads) {
    if (data.examples.empty()) throw MetricError("latent robustness of an empty dataset");
    const int prefix = net.prefix_layers(latent_block); // throws on a bad block
    std::vector<unsigned char> ok(data.examples.size(), 0);
    zono::AffineCache cache;
    parallel_for(
        data.examples.size(),
        [&](std::size_t i) {
            const auto& ex = data.examples[i];
            if (net.predict(ex.x) != ex.label) return;
            zono::Zonotope z =
                zono::propagate_prefix(net, zono::input_region(ex.x, eps), prefix, &cache);
            auto res = attack::latent_pgd(z, net, ex.label, atk, derive_seed(seed, {0x1a, i}));
            ok[i] = res.misclassified ? 0 : 1;
        },
        resolve_threads(threads));
    const std::size_t n_ok = static_cast<std::size_t>(
        std::count(ok.begin(), ok.end(), static_cast<unsigned char>(1)));
    return static_cast<double>(n_ok) / static_cast<double>(data.examples.size());
}

MetricsReport evaluate_metrics(const nn::LayeredNetwork& net, const data::DatasetSplit& data,
                               const MetricsConfig& cfg, std::vector<Verdict>* verdicts_out) {
    MetricsReport rep;
    rep.n = static_cast<int>(data.examples.size());
    for (const auto& ex : data.examples) {
        if (net.predict(ex.x) == ex.label) ++rep.correct;
    }
    if (rep.n == 0) throw MetricError("metrics of an empty dataset");
    rep.acc = static_cast<double>(rep.correct) / static_cast<double>(rep.n);

    std::vector<Verdict> verdicts = certify_dataset(net, data, cfg.certify, cfg.threads);
    for (const auto& v : verdicts) {
        if (is_verified(v.outcome)) ++rep.certified;
    }
    rep.cr = static_cast<double>(rep.certified) / static_cast<double>(rep.n);

    if (rep.correct > 0) {
        std::vector<unsigned char> attacked(data.examples.size(), 0);
        parallel_for(
            data.examples.size(),
            [&](std::size_t i) {
                const auto& ex = data.examples[i];
                if (net.predict(ex.x) != ex.label) return;
                auto res = attack::input_pgd(net, ex.x, ex.label, cfg.certify.epsilon, cfg.ve_attack,
                                             derive_seed(cfg.certify.seed, {0x7e, i}));
                attacked[i] = res.success ? 1 : 0;
            },
            resolve_threads(cfg.threads));
        rep.ve_attacked = static_cast<int>(
            std::count(attacked.begin(), attacked.end(), static_cast<unsigned char>(1)));
        rep.ve = static_cast<double>(rep.ve_attacked) / static_cast<double>(rep.correct);
    }

    const int block = std::min(cfg.latent_block, net.block_count());
    std::vector<unsigned char> ok(data.examples.size(), 0);
    {
        const int prefix = net.prefix_layers(block);
        zono::AffineCache cache;
        parallel_for(
            data.examples.size(),
            [&](std::size_t i) {
                const auto& ex = data.examples[i];
                if (net.predict(ex.x) != ex.label) return;
                zono::Zonotope z = zono::propagate_prefix(
                    net, zono::input_region(ex.x, cfg.certify.epsilon), prefix, &cache);
                auto res = attack::latent_pgd(z, net, ex.label, cfg.latent_attack,
                                              derive_seed(cfg.certify.seed, {0x1a, i}));
                ok[i] = res.misclassified ? 0 : 1;
            },
            resolve_threads(cfg.threads));
    }
    rep.lr_ok =
        static_cast<int>(std::count(ok.begin(), ok.end(), static_cast<unsigned char>(1)));
    rep.lr = static_cast<double>(rep.lr_ok) / static_cast<double>(rep.n);

    if (verdicts_out) *verdicts_out = std::move(verdicts);
    return rep;
}

} // namespace zonocert::cert
