#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "zonocert/checkpoint.hpp"
#include "zonocert/network.hpp"
#include "zonocert/ops.hpp"
#include "zonocert/optimizer.hpp"

using namespace zonocert;
using testsupport::random_dense_net;
using testsupport::random_conv_net;
using testsupport::random_unit_input;

namespace {

nn::LayeredNetwork identity2_net() {
    nn::Tensor w({2, 2}, {1, 0, 0, 1});
    nn::Tensor b({2}, {0, 0});
    return nn::LayeredNetwork({2}, {nn::Layer::dense(std::move(w), std::move(b))});
}

} // namespace

TEST_CASE("tensor shape/data invariants") {
    CHECK_THROWS_AS(nn::Tensor({2, 3}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(nn::Tensor({-1}), ShapeError);
    CHECK_THROWS_AS(nn::Tensor({1}, {std::nan("")}), DomainError);
    nn::Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
}

TEST_CASE("forward: identity dense") {
    auto net = identity2_net();
    nn::Tensor x({2}, {1.0, -1.0});
    const nn::Tensor z = net.forward(x);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(-1.0));
}

TEST_CASE("forward: dense then relu") {
    nn::Tensor w({2, 2}, {1, 0, 0, 1});
    nn::Tensor b({2}, {0, 0});
    nn::LayeredNetwork net({2}, {nn::Layer::dense(std::move(w), std::move(b)), nn::Layer::relu()});
    const nn::Tensor z = net.forward(nn::Tensor({2}, {1.0, -1.0}));
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(0.0));
}

TEST_CASE("forward: shape mismatch raises") {
    auto net = identity2_net();
    CHECK_THROWS_AS(net.forward(nn::Tensor({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("forward agrees with an independent reimplementation") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto net = random_dense_net({2, 4, 3}, seed);
        Rng rng(seed * 31 + 7);
        const nn::Tensor x = random_unit_input(2, rng);
        const nn::Tensor z = net.forward(x);
        const auto ref = testsupport::naive_forward(net, x.vec());
        REQUIRE(z.size() == static_cast<std::int64_t>(ref.size()));
        for (std::int64_t i = 0; i < z.size(); ++i) {
            CHECK(z[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv forward agrees with the independent loops") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto net = random_conv_net(8, 2, 3, 2, 6, 3, seed);
        Rng rng(seed + 100);
        nn::Tensor x({1, 8, 8});
        for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
        const nn::Tensor z = net.forward(x);
        const auto ref = testsupport::naive_forward(net, x.vec());
        for (std::int64_t i = 0; i < z.size(); ++i) {
            CHECK(z[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward determinism is bit exact") {
    auto a = random_dense_net({3, 5, 4}, 99);
    auto b = random_dense_net({3, 5, 4}, 99);
    Rng rng(5);
    const nn::Tensor x = random_unit_input(3, rng);
    const nn::Tensor za = a.forward(x);
    const nn::Tensor zb = b.forward(x);
    for (std::int64_t i = 0; i < za.size(); ++i) CHECK(za[i] == zb[i]);
}

TEST_CASE("softmax basics") {
    const nn::Tensor p = nn::softmax(nn::Tensor({2}, {0.0, 0.0}));
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    const nn::Tensor q = nn::softmax(nn::Tensor({3}, {1000.0, 1000.0, 1000.0}));
    for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(q.all_finite());
}

TEST_CASE("softmax against the extended-precision oracle") {
    const std::vector<double> z{1.0, 2.0, 3.0};
    const nn::Tensor p = nn::softmax(nn::Tensor({3}, std::vector<double>(z)));
    const auto ref = testsupport::softmax_ld(z);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        CHECK(p[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-14));
        sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("softmax sums to one and is shift invariant") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const int k = 2 + static_cast<int>(rng.below(6));
        nn::Tensor z({k});
        for (int i = 0; i < k; ++i) z[i] = 10.0 * rng.gaussian();
        const nn::Tensor p = nn::softmax(z);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) sum += p[i];
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        nn::Tensor zs = z;
        const double c = 50.0 * rng.gaussian();
        for (int i = 0; i < k; ++i) zs[i] += c;
        const nn::Tensor ps = nn::softmax(zs);
        for (int i = 0; i < k; ++i) CHECK(std::abs(ps[i] - p[i]) <= 1e-9);
    }
}

TEST_CASE("cross entropy") {
    CHECK(nn::cross_entropy(nn::Tensor({2}, {1.0, 0.0}), 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(nn::cross_entropy(nn::Tensor({2}, {0.5, 0.5}), 1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK_THROWS_AS(nn::cross_entropy(nn::Tensor({2}, {0.5, 0.5}), 2), IndexError);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        std::vector<double> p(4);
        double s = 0.0;
        for (auto& v : p) {
            v = rng.uniform01();
            s += v;
        }
        for (auto& v : p) v /= s;
        const int y = static_cast<int>(rng.below(4));
        CHECK(nn::cross_entropy(nn::Tensor({4}, std::vector<double>(p)), y) ==
              doctest::Approx(testsupport::cross_entropy_ld(p, y)).epsilon(1e-12));
    }
}

TEST_CASE("predict ties break to the lowest index") {
    auto net = identity2_net();
    CHECK(net.predict(nn::Tensor({2}, {0.1, 0.9})) == 1);
    CHECK(net.predict(nn::Tensor({2}, {0.5, 0.5})) == 0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto rnet = random_dense_net({3, 6, 4}, seed);
        Rng rng(seed);
        const nn::Tensor x = random_unit_input(3, rng);
        CHECK(rnet.predict(x) == nn::argmax_lowest(rnet.forward(x)));
    }
}

TEST_CASE("freeze flags are monotone and freeze blocks correctly") {
    auto net = random_dense_net({3, 5, 5, 2}, 17);
    CHECK(net.block_count() == 3);
    net.freeze_through_block(2);
    CHECK(net.frozen_blocks() == 2);
    CHECK(net.layer(0).frozen);
    CHECK(net.layer(2).frozen);
    CHECK(!net.layer(4).frozen);
    net.freeze_through_block(0);
    CHECK(net.frozen_blocks() == 0);
}

TEST_CASE("optimizer: plain sgd step") {
    auto net = random_dense_net({2, 2}, 3);
    auto opt = nn::OptimizerState::sgd_momentum(0.1, 0.0);
    nn::GradientMap grads;
    nn::Tensor gw(net.layer(0).weight.shape());
    gw.fill(1.0);
    nn::Tensor gb(net.layer(0).bias.shape());
    gb.fill(2.0);
    grads[{0, nn::ParamKey::Weight}] = gw;
    grads[{0, nn::ParamKey::Bias}] = gb;
    const nn::Tensor w0 = net.layer(0).weight;
    const nn::Tensor b0 = net.layer(0).bias;
    opt.step(net, grads, 0);
    for (std::int64_t i = 0; i < w0.size(); ++i) {
        CHECK(net.layer(0).weight[i] == doctest::Approx(w0[i] - 0.1).epsilon(1e-15));
    }
    for (std::int64_t i = 0; i < b0.size(); ++i) {
        CHECK(net.layer(0).bias[i] == doctest::Approx(b0[i] - 0.2).epsilon(1e-15));
    }
}

TEST_CASE("lr schedule arithmetic") {
    nn::LrSchedule s{60, 0.5, 10};
    CHECK(s.rate_at(1.0, 0) == doctest::Approx(1.0));
    CHECK(s.rate_at(1.0, 59) == doctest::Approx(1.0));
    CHECK(s.rate_at(1.0, 60) == doctest::Approx(0.5));
    CHECK(s.rate_at(1.0, 69) == doctest::Approx(0.5));
    CHECK(s.rate_at(1.0, 70) == doctest::Approx(0.25));
    CHECK(s.rate_at(1.0, 85) == doctest::Approx(0.125));
}

TEST_CASE("adam single scalar step matches the closed form") {
    nn::Tensor w({1, 1}, {0.7});
    nn::Tensor b({1}, {0.0});
    nn::LayeredNetwork net({1}, {nn::Layer::dense(std::move(w), std::move(b))});
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
    auto opt = nn::OptimizerState::adam(lr, b1, b2, eps);
    nn::GradientMap grads;
    grads[{0, nn::ParamKey::Weight}] = nn::Tensor({1, 1}, {g});
    opt.step(net, grads, 0);
    // First step: mhat = g, vhat = g^2, so p -= lr * g / (|g| + eps).
    const long double expect = 0.7L - lr * g / (std::sqrt((long double)g * g) + eps);
    CHECK(net.layer(0).weight[0] == doctest::Approx(static_cast<double>(expect)).epsilon(1e-14));
}

TEST_CASE("frozen parameters stay bit-identical under optimizer steps") {
    auto net = random_dense_net({3, 4, 2}, 5);
    net.freeze_through_block(1);
    const nn::Tensor frozen_w = net.layer(0).weight;
    auto opt = nn::OptimizerState::sgd_momentum(0.5, 0.9);
    for (int it = 0; it < 3; ++it) {
        nn::GradientMap grads;
        for (const auto& key : net.parameter_keys(true)) {
            nn::Tensor g(net.param(key).shape());
            g.fill(0.3);
            grads[key] = g;
        }
        opt.step(net, grads, it);
    }
    for (std::int64_t i = 0; i < frozen_w.size(); ++i) {
        CHECK(net.layer(0).weight[i] == frozen_w[i]);
    }
    // Gradients for frozen layers are rejected.
    nn::GradientMap bad;
    bad[{0, nn::ParamKey::Weight}] = nn::Tensor(net.layer(0).weight.shape());
    CHECK_THROWS_AS(opt.step(net, bad, 0), ConfigError);
}

TEST_CASE("checkpoint round-trips byte-exactly") {
    auto net = random_conv_net(6, 2, 3, 1, 5, 3, 21);
    net.freeze_through_block(1);
    std::ostringstream first;
    nn::write_checkpoint(first, net, 12345);
    std::istringstream in(first.str());
    const nn::Checkpoint ck = nn::read_checkpoint(in);
    CHECK(ck.seed == 12345);
    CHECK(ck.net.layer_count() == net.layer_count());
    CHECK(ck.net.frozen_blocks() == 1);
    std::ostringstream second;
    nn::write_checkpoint(second, ck.net, ck.seed);
    CHECK(first.str() == second.str());
}

TEST_CASE("checkpoint rejects malformed input") {
    std::istringstream bad("zonocert-checkpoint 2\n");
    CHECK_THROWS_AS(nn::read_checkpoint(bad), FormatError);
    std::istringstream truncated("zonocert-checkpoint 1\nseed 1\ninput 1 2\nlayers 1\n");
    CHECK_THROWS_AS(nn::read_checkpoint(truncated), FormatError);
}
