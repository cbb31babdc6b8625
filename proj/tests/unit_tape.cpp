#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "test_util.hpp"
#include "zonocert/losses.hpp"
#include "zonocert/tape.hpp"

using namespace zonocert;
using testsupport::random_dense_net;
using testsupport::random_unit_input;

namespace {

std::vector<double> flatten_params(const nn::LayeredNetwork& net) {
    std::vector<double> out;
    for (const auto& key : net.parameter_keys(true)) {
        const nn::Tensor& p = net.param(key);
        out.insert(out.end(), p.vec().begin(), p.vec().end());
    }
    return out;
}

void unflatten_params(nn::LayeredNetwork& net, const std::vector<double>& theta) {
    std::size_t off = 0;
    for (const auto& key : net.parameter_keys(true)) {
        nn::Tensor& p = net.param(key);
        for (std::int64_t i = 0; i < p.size(); ++i) p[i] = theta[off++];
    }
}

std::vector<double> flatten_grads(const nn::LayeredNetwork& net, const nn::GradientMap& grads) {
    std::vector<double> out;
    for (const auto& key : net.parameter_keys(true)) {
        const nn::Tensor& g = grads.at(key);
        out.insert(out.end(), g.vec().begin(), g.vec().end());
    }
    return out;
}

void check_grads_close(const std::vector<double>& got, const std::vector<double>& want, double rel,
                       double abs_floor) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double tol = rel * std::max(std::abs(got[i]), std::abs(want[i])) + abs_floor;
        CHECK(std::abs(got[i] - want[i]) <= tol);
    }
}

// Keeps finite differences valid: regenerate until no pre-activation sits on
// a ReLU kink.
bool has_near_kink(const nn::LayeredNetwork& net, const nn::Tensor& x, double tol) {
    nn::Tensor cur = x;
    for (int i = 0; i < net.layer_count(); ++i) {
        if (net.layer(i).kind == nn::LayerKind::Relu) {
            for (std::int64_t j = 0; j < cur.size(); ++j) {
                if (std::abs(cur[j]) < tol) return true;
            }
        }
        cur = nn::apply_layer(net.layer(i), cur);
    }
    return false;
}

} // namespace

TEST_CASE("closed form: gradient of 0.5*||Wx||^2 at W = I is x x^T") {
    nn::Tensor w({2, 2}, {1, 0, 0, 1});
    nn::Tensor b({2}, {0, 0});
    nn::LayeredNetwork net({2}, {nn::Layer::dense(std::move(w), std::move(b))});
    const nn::Tensor x({2}, {0.3, -0.7});

    nn::GradientMap grads = nn::grad_params(
        net,
        [&](nn::Tape& t, const nn::TapeNet& tn, int) {
            nn::NodeId xi = t.constant(x);
            nn::NodeId z = tn.forward(t, net, xi);
            return t.scale(t.dot(z, z), 0.5);
        },
        1);
    const nn::Tensor& gw = grads.at({0, nn::ParamKey::Weight});
    const double expect[4] = {0.3 * 0.3, 0.3 * -0.7, -0.7 * 0.3, -0.7 * -0.7};
    for (int i = 0; i < 4; ++i) CHECK(gw[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    const nn::Tensor& gb = grads.at({0, nn::ParamKey::Bias});
    CHECK(gb[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(gb[1] == doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("grad_params matches finite differences on random small nets") {
    int tested = 0;
    for (std::uint64_t seed = 1; tested < 8; ++seed) {
        nn::LayeredNetwork net = random_dense_net({4, 6, 5, 3}, seed, 0.8);
        Rng rng(seed * 13 + 1);
        const nn::Tensor x = random_unit_input(4, rng);
        const int y = static_cast<int>(rng.below(3));
        if (testsupport::has_near_kink ? false : false) {} // (placeholder removed below)
        if (has_near_kink(net, x, 1e-3)) continue;
        ++tested;

        auto loss_closure = [&](nn::Tape& t, const nn::TapeNet& tn, int) {
            nn::NodeId xi = t.constant(x);
            nn::NodeId z = tn.forward(t, net, xi);
            nn::NodeId p = t.softmax(z);
            return train::tape_cross_entropy(t, p, y);
        };
        nn::GradientMap grads = nn::grad_params(net, loss_closure, 1);
        const std::vector<double> got = flatten_grads(net, grads);

        nn::LayeredNetwork probe = net;
        auto f = [&](const std::vector<double>& theta) {
            unflatten_params(probe, theta);
            return nn::cross_entropy(nn::softmax(probe.forward(x)), y);
        };
        const std::vector<double> want = testsupport::finite_diff(f, flatten_params(net), 1e-4);
        check_grads_close(got, want, 1e-4, 1e-6);
    }
}

TEST_CASE("conv gradients match finite differences") {
    int tested = 0;
    for (std::uint64_t seed = 3; tested < 3; ++seed) {
        nn::LayeredNetwork net = testsupport::random_conv_net(6, 2, 3, 1, 5, 3, seed);
        Rng rng(seed * 17 + 5);
        nn::Tensor x({1, 6, 6});
        for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
        const int y = static_cast<int>(rng.below(3));
        if (has_near_kink(net, x, 1e-3)) continue;
        ++tested;

        auto loss_closure = [&](nn::Tape& t, const nn::TapeNet& tn, int) {
            nn::NodeId xi = t.constant(x);
            nn::NodeId z = tn.forward(t, net, xi);
            nn::NodeId p = t.softmax(z);
            return train::tape_cross_entropy(t, p, y);
        };
        nn::GradientMap grads = nn::grad_params(net, loss_closure, 1);
        const std::vector<double> got = flatten_grads(net, grads);

        nn::LayeredNetwork probe = net;
        auto f = [&](const std::vector<double>& theta) {
            unflatten_params(probe, theta);
            return nn::cross_entropy(nn::softmax(probe.forward(x)), y);
        };
        const std::vector<double> want = testsupport::finite_diff(f, flatten_params(net), 1e-4);
        check_grads_close(got, want, 1e-4, 1e-6);
    }
}

TEST_CASE("frozen layers receive no gradient entries") {
    nn::LayeredNetwork net = random_dense_net({3, 4, 2}, 9);
    net.freeze_through_block(1);
    Rng rng(42);
    const nn::Tensor x = random_unit_input(3, rng);
    nn::GradientMap grads = nn::grad_params(
        net,
        [&](nn::Tape& t, const nn::TapeNet& tn, int) {
            nn::NodeId z = tn.forward(t, net, t.constant(x));
            nn::NodeId p = t.softmax(z);
            return train::tape_cross_entropy(t, p, 0);
        },
        1);
    CHECK(grads.count({0, nn::ParamKey::Weight}) == 0);
    CHECK(grads.count({0, nn::ParamKey::Bias}) == 0);
    CHECK(grads.count({2, nn::ParamKey::Weight}) == 1);
}

TEST_CASE("grad_wrt_activation: identity suffix with squared loss gives the residual") {
    nn::Tensor w({2, 2}, {1, 0, 0, 1});
    nn::Tensor b({2}, {0, 0});
    nn::LayeredNetwork net({2}, {nn::Layer::dense(std::move(w), std::move(b))});
    const nn::Tensor target({2}, {0.1, 0.4});
    const nn::Tensor act({2}, {0.9, -0.2});
    const nn::Tensor g = nn::grad_wrt_activation(net, 0, act, [&](nn::Tape& t, nn::NodeId z) {
        nn::NodeId diff = t.sub(z, t.constant(target));
        return t.scale(t.dot(diff, diff), 0.5);
    });
    CHECK(g[0] == doctest::Approx(0.9 - 0.1).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(-0.2 - 0.4).epsilon(1e-12));
}

TEST_CASE("grad_wrt_activation matches finite differences on a random suffix") {
    int tested = 0;
    for (std::uint64_t seed = 11; tested < 5; ++seed) {
        nn::LayeredNetwork net = random_dense_net({4, 5, 3}, seed);
        Rng rng(seed + 2);
        nn::Tensor act({5});
        for (std::int64_t i = 0; i < act.size(); ++i) act[i] = rng.gaussian();
        const int y = static_cast<int>(rng.below(3));
        // Suffix starts after the first dense+relu block.
        const int first_suffix = 2;
        {
            nn::Tensor cur = act;
            bool kink = false;
            for (int i = first_suffix; i < net.layer_count(); ++i) {
                if (net.layer(i).kind == nn::LayerKind::Relu) {
                    for (std::int64_t j = 0; j < cur.size(); ++j) {
                        if (std::abs(cur[j]) < 1e-3) kink = true;
                    }
                }
                cur = nn::apply_layer(net.layer(i), cur);
            }
            if (kink) continue;
        }
        ++tested;
        const nn::Tensor g = nn::grad_wrt_activation(net, first_suffix, act,
                                                     [&](nn::Tape& t, nn::NodeId z) {
                                                         return train::tape_cross_entropy(
                                                             t, t.softmax(z), y);
                                                     });
        auto f = [&](const std::vector<double>& v) {
            const nn::Tensor probe({5}, std::vector<double>(v));
            return nn::cross_entropy(nn::softmax(net.forward_from(first_suffix, probe)), y);
        };
        const std::vector<double> want = testsupport::finite_diff(f, act.vec(), 1e-4);
        check_grads_close(std::vector<double>(g.vec()), want, 1e-4, 1e-6);
    }
}

TEST_CASE("gradient at a zero-loss stationary point is tiny") {
    // Suffix = identity, squared loss against the activation itself.
    nn::Tensor w({2, 2}, {1, 0, 0, 1});
    nn::Tensor b({2}, {0, 0});
    nn::LayeredNetwork net({2}, {nn::Layer::dense(std::move(w), std::move(b))});
    const nn::Tensor act({2}, {0.25, -0.5});
    const nn::Tensor g = nn::grad_wrt_activation(net, 0, act, [&](nn::Tape& t, nn::NodeId z) {
        nn::NodeId diff = t.sub(z, t.constant(act));
        return t.scale(t.dot(diff, diff), 0.5);
    });
    for (std::int64_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i]) < 1e-8);
}

TEST_CASE("batch gradients reduce deterministically") {
    nn::LayeredNetwork net = random_dense_net({3, 4, 2}, 77);
    Rng rng(7);
    std::vector<nn::Tensor> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(random_unit_input(3, rng));
    auto closure = [&](nn::Tape& t, const nn::TapeNet& tn, int i) {
        nn::NodeId z = tn.forward(t, net, t.constant(xs[static_cast<std::size_t>(i)]));
        return train::tape_cross_entropy(t, t.softmax(z), i % 2);
    };
    double loss_a = 0.0, loss_b = 0.0;
    nn::GradientMap a = nn::grad_params(net, closure, 5, &loss_a);
    nn::GradientMap b = nn::grad_params(net, closure, 5, &loss_b);
    CHECK(loss_a == loss_b);
    for (const auto& [key, ga] : a) {
        const nn::Tensor& gb = b.at(key);
        for (std::int64_t i = 0; i < ga.size(); ++i) CHECK(ga[i] == gb[i]);
    }
}
