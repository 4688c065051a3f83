#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "checknet/numerics.hpp"

using namespace checknet;

TEST_CASE("affine identity, hand sum, zero weights") {
    DenseMatrix eye(2, 2);
    eye(0, 0) = 1.0;
    eye(1, 1) = 1.0;
    std::vector<double> b2 = {0.0, 0.0};
    std::vector<double> x = {3.0, 4.0};
    CHECK(affine(eye, b2, x) == std::vector<double>{3.0, 4.0});

    DenseMatrix ones(1, 2, 1.0);
    std::vector<double> b1 = {1.0};
    std::vector<double> x2 = {2.0, 3.0};
    CHECK(affine(ones, b1, x2) == std::vector<double>{6.0});

    DenseMatrix zero(1, 3, 0.0);
    std::vector<double> b5 = {5.0};
    std::vector<double> x3 = {7.0, -2.0, 0.5};
    CHECK(affine(zero, b5, x3) == std::vector<double>{5.0});

    CHECK_THROWS_AS(affine(eye, b1, x), ShapeError);
    CHECK_THROWS_AS(affine(eye, b2, x3), ShapeError);
}

TEST_CASE("softmax uniform, shift invariance, closed form") {
    std::vector<double> z = {0.0, 0.0, 0.0};
    auto p = softmax(z);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    std::vector<double> a = {0.3, -1.2, 2.0, 0.0};
    std::vector<double> shifted = a;
    for (double& v : shifted) v += 17.5;
    auto pa = softmax(a);
    auto ps = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(pa[i] == doctest::Approx(ps[i]).epsilon(1e-12));

    std::vector<double> two = {0.0, std::log(3.0)};
    auto pt = softmax(two);
    CHECK(pt[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pt[1] == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(std::vector<double>{}), ShapeError);
}

TEST_CASE("softmax normalization and argmax over random vectors") {
    RngStream rng(7, "softmax-prop");
    for (int iter = 0; iter < 1000; ++iter) {
        std::size_t n = 1 + rng.uniform_index(12);
        std::vector<double> v(n);
        for (double& x : v) x = 10.0 * (rng.uniform() - 0.5);
        double shift = 5.0 * (rng.uniform() - 0.5);
        auto p = softmax(v);
        double sum = 0.0;
        for (double x : p) sum += x;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        std::vector<double> vs = v;
        for (double& x : vs) x += shift;
        auto p2 = softmax(vs);
        std::size_t am1 = std::max_element(p.begin(), p.end()) - p.begin();
        std::size_t am2 = std::max_element(p2.begin(), p2.end()) - p2.begin();
        std::size_t amv = std::max_element(v.begin(), v.end()) - v.begin();
        CHECK(am1 == amv);
        CHECK(am2 == amv);
    }
}

TEST_CASE("sigmoid and losses") {
    std::vector<double> z = {0.0};
    CHECK(sigmoid(z)[0] == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<double> perfect = {1.0, 0.0, 1.0};
    CHECK(bce_loss(perfect, perfect) <= 2e-7);  // clamp-induced epsilon only

    std::vector<double> uniform(5, 0.2);
    CHECK(ce_loss(uniform, 3) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK_THROWS_AS(ce_loss(uniform, 5), IndexError);

    std::vector<double> p = {0.5};
    std::vector<double> t = {1.0, 0.0};
    CHECK_THROWS_AS(bce_loss(p, t), ShapeError);
}

TEST_CASE("hamming distance") {
    BitVector a(3), b(3);
    a.bits = {1, 0, 1};
    b.bits = {1, 1, 1};
    CHECK(hamming(a, a) == 0);
    CHECK(hamming(a, b) == 1);
    BitVector comp(3);
    for (std::size_t i = 0; i < 3; ++i) comp[i] = a[i] ^ 1;
    CHECK(hamming(a, comp) == 3);
    CHECK(hamming(b, a) == hamming(a, b));
    BitVector c(4);
    CHECK_THROWS_AS(hamming(a, c), ShapeError);
}

TEST_CASE("adam: zero gradient leaves params unchanged") {
    std::vector<double> params = {1.5, -2.0, 0.25};
    std::vector<double> before = params;
    std::vector<double> grads = {0.0, 0.0, 0.0};
    AdamState state;
    AdamHyper hyper;
    for (int i = 0; i < 3; ++i) adam_step(params, grads, state, hyper);
    CHECK(params == before);
}

TEST_CASE("adam: one step on w^2 moves toward zero") {
    std::vector<double> w = {1.0};
    std::vector<double> g = {2.0 * w[0]};
    AdamState state;
    AdamHyper hyper;
    adam_step(w, g, state, hyper);
    CHECK(w[0] < 1.0);
    CHECK(w[0] > 0.9);  // one lr-sized step
}

TEST_CASE("adam: identical calls with copied state give identical results") {
    std::vector<double> p1 = {0.3, -0.7};
    std::vector<double> g = {0.11, -0.05};
    AdamState s1;
    AdamHyper hyper;
    adam_step(p1, g, s1, hyper);
    std::vector<double> p2 = p1;
    AdamState s2 = s1;
    adam_step(p1, g, s1, hyper);
    adam_step(p2, g, s2, hyper);
    CHECK(p1 == p2);

    std::vector<double> bad = {std::nan(""), 0.0};
    CHECK_THROWS_AS(adam_step(p1, bad, s1, hyper), TrainingError);
}

TEST_CASE("rng streams: reproducible, label-separated") {
    RngStream a(123, "stream");
    RngStream b(123, "stream");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(123, "stream");
    RngStream d(123, "other");
    bool differ = false;
    for (int i = 0; i < 10; ++i) differ |= (c.next_u64() != d.next_u64());
    CHECK(differ);

    RngStream parent(9, "root");
    CHECK(parent.child("x").label() == "root/x");
    RngStream e1 = parent.child("x");
    RngStream e2 = parent.child("x");
    CHECK(e1.normal() == e2.normal());
}

TEST_CASE("rng: uniform_index bounds and sample_without_replacement") {
    RngStream rng(5, "idx");
    for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
    auto sample = rng.sample_without_replacement(10, 10);
    std::vector<bool> seen(10, false);
    for (auto v : sample) {
        CHECK(v < 10);
        CHECK(!seen[v]);
        seen[v] = true;
    }
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), ShapeError);
}

namespace {

// Central finite differences through the full loss for every parameter.
void check_gradients_against_fd(Mlp& net, std::span<const double> x,
                                const std::function<double(const Mlp&)>& loss,
                                const MlpGrads& analytic) {
    const double h = 1e-5;
    const double rel_tol = 1e-4;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto check_param = [&](double& param, double grad) {
            double saved = param;
            param = saved + h;
            double up = loss(net);
            param = saved - h;
            double down = loss(net);
            param = saved;
            double fd = (up - down) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(grad), 1e-3});
            CHECK(std::abs(fd - grad) / denom < rel_tol);
        };
        for (std::size_t k = 0; k < net.layers[li].w.a.size(); ++k)
            check_param(net.layers[li].w.a[k], analytic.dw[li].a[k]);
        for (std::size_t k = 0; k < net.layers[li].b.size(); ++k)
            check_param(net.layers[li].b[k], analytic.db[li][k]);
    }
    (void)x;
}

}  // namespace

TEST_CASE("backprop matches finite differences: cross entropy head") {
    RngStream rng(31, "fd-ce");
    Mlp net = init_mlp({3, 5, 4}, rng);
    std::vector<double> x = {0.4, -1.1, 0.9};
    std::size_t label = 2;

    Mlp::Trace trace;
    auto logits = net.forward_trace(x, trace);
    auto probs = softmax(logits);
    std::vector<double> dlogits = probs;
    dlogits[label] -= 1.0;
    MlpGrads grads;
    grads.init_like(net);
    mlp_backward(net, trace, dlogits, grads);

    auto loss = [&](const Mlp& m) { return ce_loss(softmax(m.forward(x)), label); };
    check_gradients_against_fd(net, x, loss, grads);
}

TEST_CASE("backprop matches finite differences: sigmoid BCE head") {
    RngStream rng(32, "fd-bce");
    Mlp net = init_mlp({4, 6, 3}, rng);
    std::vector<double> x = {1.2, 0.1, -0.6, 0.8};
    std::vector<double> targets = {1.0, 0.0, 1.0};

    Mlp::Trace trace;
    auto logits = net.forward_trace(x, trace);
    auto probs = sigmoid(logits);
    std::vector<double> dlogits(3);
    for (std::size_t i = 0; i < 3; ++i) dlogits[i] = (probs[i] - targets[i]) / 3.0;
    MlpGrads grads;
    grads.init_like(net);
    mlp_backward(net, trace, dlogits, grads);

    auto loss = [&](const Mlp& m) { return bce_loss(sigmoid(m.forward(x)), targets); };
    check_gradients_against_fd(net, x, loss, grads);
}

TEST_CASE("seeded computations reproduce bit-identically") {
    auto run = [] {
        RngStream rng(2024, "repro");
        Mlp net = init_mlp({4, 8, 2}, rng);
        std::vector<double> x = {0.1, 0.2, 0.3, 0.4};
        return net.forward(x);
    };
    CHECK(run() == run());
}

TEST_CASE("mlp_macs counts layer products") {
    RngStream rng(1, "macs");
    Mlp net = init_mlp({3, 5, 2}, rng);
    CHECK(mlp_macs(net) == 3 * 5 + 5 * 2);
}
