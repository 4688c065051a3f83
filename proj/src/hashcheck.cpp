#include "checknet/hashcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace checknet {

DenseMatrix sample_g(RngStream& rng, std::size_t l, std::size_t n_o) {
    if (l == 0 || n_o == 0) throw ConfigError("sample_g: l and n_o must be positive");
    DenseMatrix g(l, n_o);
    for (double& v : g.a) v = rng.normal();
    return g;
}

BitVector bithash_y(const DenseMatrix& g, std::span<const double> y) {
    if (y.size() != g.cols) throw ShapeError("bithash_y: output length mismatch");
    BitVector code(g.rows);
    for (std::size_t r = 0; r < g.rows; ++r) {
        const double* gr = g.a.data() + r * g.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < g.cols; ++c) acc += gr[c] * y[c];
        code[r] = acc >= 0.0 ? 1 : 0;
    }
    return code;
}

BitVector bithash_x(const Mlp& f, std::span<const double> x) {
    auto logits = f.forward(x);
    BitVector code(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) code[i] = logits[i] >= 0.0 ? 1 : 0;
    return code;
}

TrainedHash train_f(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& g,
                    const HashTrainHyper& hyper, RngStream& rng) {
    if (xs.rows != ys.rows || xs.rows == 0) throw ShapeError("train_f: dataset shape mismatch");
    if (ys.cols != g.cols) throw ShapeError("train_f: output dim differs from g");

    std::size_t n = xs.rows;
    std::size_t l = g.rows;

    // Codes are frozen up front; g never changes during training.
    DenseMatrix targets(n, l);
    for (std::size_t i = 0; i < n; ++i) {
        auto code = bithash_y(g, ys.row(i));
        for (std::size_t j = 0; j < l; ++j) targets(i, j) = code[j];
    }

    RngStream init_rng = rng.child("init");
    RngStream order_rng = rng.child("order");

    TrainedHash out;
    out.f = init_mlp({xs.cols, hyper.hidden, l}, init_rng);

    MlpGrads grads;
    grads.init_like(out.f);
    MlpAdam adam;
    adam.init_like(out.f);
    AdamHyper ah;
    ah.lr = hyper.lr;

    auto mean_bce = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto probs = sigmoid(out.f.forward(xs.row(i)));
            acc += bce_loss(probs, targets.row(i));
        }
        return acc / static_cast<double>(n);
    };
    out.metrics.initial_bce = mean_bce();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    Mlp::Trace trace;
    double inv_l = 1.0 / static_cast<double>(l);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            std::size_t end = std::min(order.size(), start + hyper.batch);
            grads.zero();
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                auto logits = out.f.forward_trace(xs.row(i), trace);
                auto probs = sigmoid(logits);
                epoch_loss += bce_loss(probs, targets.row(i));
                std::vector<double> dlogits(l);
                for (std::size_t j = 0; j < l; ++j) dlogits[j] = (probs[j] - targets(i, j)) * inv_l;
                mlp_backward(out.f, trace, dlogits, grads);
            }
            grads.scale(1.0 / static_cast<double>(end - start));
            adam.step(out.f, grads, ah);
        }
        if (!std::isfinite(epoch_loss)) throw TrainingError("train_f: loss diverged");
    }

    out.metrics.final_bce = mean_bce();
    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto hx = bithash_x(out.f, xs.row(i));
        BitVector hy(l);
        for (std::size_t j = 0; j < l; ++j) hy[j] = static_cast<std::uint8_t>(targets(i, j));
        dist += static_cast<double>(hamming(hx, hy));
    }
    out.metrics.mean_train_distance = dist / static_cast<double>(n);
    return out;
}

PairCheck check_pair(const HashPair& pair, std::span<const double> x,
                     std::span<const double> y, std::size_t t_h) {
    PairCheck res;
    res.distance = hamming(bithash_x(pair.f, x), bithash_y(pair.g, y));
    res.pass = res.distance <= t_h;
    return res;
}

double mean_pair_distance(const HashPair& pair, const DenseMatrix& xs, const DenseMatrix& ys) {
    if (xs.rows != ys.rows || xs.rows == 0)
        throw ShapeError("mean_pair_distance: dataset shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.rows; ++i)
        acc += static_cast<double>(check_pair(pair, xs.row(i), ys.row(i), 0).distance);
    return acc / static_cast<double>(xs.rows);
}

TrainedBank make_hash_bank(const DenseMatrix& xs, const DenseMatrix& ys, std::size_t l,
                           std::size_t n_h, std::size_t t_h, const HashTrainHyper& hyper,
                           RngStream& rng) {
    if (n_h == 0) throw ConfigError("make_hash_bank: n_h must be positive");
    if (t_h > l) throw ConfigError("make_hash_bank: t_h exceeds l");
    TrainedBank out;
    out.bank.l = l;
    out.bank.t_h = t_h;
    for (std::size_t i = 0; i < n_h; ++i) {
        RngStream pair_rng = rng.child("pair" + std::to_string(i));
        HashPair pair;
        RngStream g_rng = pair_rng.child("g");
        pair.g = sample_g(g_rng, l, ys.cols);
        RngStream f_rng = pair_rng.child("f");
        auto trained = train_f(xs, ys, pair.g, hyper, f_rng);
        pair.f = std::move(trained.f);
        out.pair_metrics.push_back(trained.metrics);
        out.bank.pairs.push_back(std::move(pair));
    }
    return out;
}

}  // namespace checknet
