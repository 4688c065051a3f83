#include "checknet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace checknet {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, std::string label)
    : root_seed_(root_seed), label_(std::move(label)) {
    state_ = root_seed_ ^ fnv1a64(label_);
    // Burn a few rounds so nearby seeds decorrelate.
    for (int i = 0; i < 4; ++i) splitmix64(state_);
}

RngStream RngStream::child(std::string_view label) const {
    std::string path = label_;
    path += '/';
    path += label;
    return RngStream(root_seed_, std::move(path));
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

std::size_t RngStream::uniform_index(std::size_t n) {
    if (n == 0) throw ShapeError("uniform_index: n must be positive");
    std::uint64_t threshold = (-static_cast<std::uint64_t>(n)) % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v < threshold);
    return static_cast<std::size_t>(v % n);
}

std::vector<std::uint32_t> RngStream::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw ShapeError("sample_without_replacement: k > n");
    std::vector<std::uint32_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(n - i);
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    return out;
}

std::vector<double> affine(const DenseMatrix& w, std::span<const double> b,
                           std::span<const double> x) {
    if (x.size() != w.cols || b.size() != w.rows)
        throw ShapeError("affine: dimension mismatch");
    std::vector<double> y(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.a.data() + r * w.cols;
        double acc = b[r];
        for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
    return y;
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw ShapeError("softmax: empty vector");
    double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& o : out) o /= sum;
    return out;
}

std::vector<double> sigmoid(std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
    return out;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

namespace {
double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
}  // namespace

double bce_loss(std::span<const double> p, std::span<const double> t) {
    if (p.size() != t.size() || p.empty()) throw ShapeError("bce_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pi = clamp_prob(p[i]);
        acc += -(t[i] * std::log(pi) + (1.0 - t[i]) * std::log(1.0 - pi));
    }
    return acc / static_cast<double>(p.size());
}

double ce_loss(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) throw IndexError("ce_loss: label out of range");
    return -std::log(clamp_prob(probs[label]));
}

std::size_t hamming(const BitVector& a, const BitVector& b) {
    if (a.size() != b.size()) throw ShapeError("hamming: length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
    return d;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamHyper& hyper) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: stale state");
    for (double g : grads)
        if (!std::isfinite(g)) throw TrainingError("adam_step: non-finite gradient");
    state.t += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        cur = affine(layers[li].w, layers[li].b, cur);
        if (li + 1 < layers.size())
            for (double& v : cur) v = relu(v);
    }
    return cur;
}

std::vector<double> Mlp::forward_trace(std::span<const double> x, Trace& trace) const {
    trace.pre.assign(layers.size(), {});
    trace.act.assign(layers.size() + 1, {});
    trace.act[0].assign(x.begin(), x.end());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        trace.pre[li] = affine(layers[li].w, layers[li].b, trace.act[li]);
        trace.act[li + 1] = trace.pre[li];
        if (li + 1 < layers.size())
            for (double& v : trace.act[li + 1]) v = relu(v);
    }
    return trace.act.back();
}

void MlpGrads::init_like(const Mlp& net) {
    dw.clear();
    db.clear();
    for (const auto& layer : net.layers) {
        dw.emplace_back(layer.w.rows, layer.w.cols, 0.0);
        db.emplace_back(layer.b.size(), 0.0);
    }
}

void MlpGrads::zero() {
    for (auto& m : dw) std::fill(m.a.begin(), m.a.end(), 0.0);
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
}

void MlpGrads::scale(double s) {
    for (auto& m : dw)
        for (double& v : m.a) v *= s;
    for (auto& v : db)
        for (double& e : v) e *= s;
}

void mlp_backward(const Mlp& net, const Mlp::Trace& trace,
                  std::span<const double> dlogits, MlpGrads& grads) {
    if (net.layers.empty()) throw ShapeError("mlp_backward: empty network");
    if (dlogits.size() != net.output_dim()) throw ShapeError("mlp_backward: dlogits size");
    std::vector<double> delta(dlogits.begin(), dlogits.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const MlpLayer& layer = net.layers[li];
        const std::vector<double>& in = trace.act[li];
        DenseMatrix& dw = grads.dw[li];
        std::vector<double>& db = grads.db[li];
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            double d = delta[r];
            db[r] += d;
            double* dwr = dw.a.data() + r * dw.cols;
            for (std::size_t c = 0; c < layer.w.cols; ++c) dwr[c] += d * in[c];
        }
        if (li == 0) break;
        std::vector<double> prev(layer.w.cols, 0.0);
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            double d = delta[r];
            const double* wr = layer.w.a.data() + r * layer.w.cols;
            for (std::size_t c = 0; c < layer.w.cols; ++c) prev[c] += wr[c] * d;
        }
        // ReLU mask from the previous layer's pre-activations.
        const std::vector<double>& pre = trace.pre[li - 1];
        for (std::size_t c = 0; c < prev.size(); ++c)
            if (pre[c] <= 0.0) prev[c] = 0.0;
        delta = std::move(prev);
    }
}

Mlp init_mlp(const std::vector<std::size_t>& dims, RngStream& rng) {
    if (dims.size() < 2) throw ConfigError("init_mlp: need at least input and output dims");
    Mlp net;
    for (std::size_t li = 0; li + 1 < dims.size(); ++li) {
        MlpLayer layer;
        layer.w = DenseMatrix(dims[li + 1], dims[li]);
        layer.b.assign(dims[li + 1], 0.0);
        double scale = std::sqrt(2.0 / static_cast<double>(dims[li]));
        for (double& v : layer.w.a) v = scale * rng.normal();
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void MlpAdam::init_like(const Mlp& net) {
    w_state.assign(net.layers.size(), {});
    b_state.assign(net.layers.size(), {});
}

void MlpAdam::step(Mlp& net, const MlpGrads& grads, const AdamHyper& hyper) {
    if (w_state.size() != net.layers.size()) init_like(net);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        adam_step(net.layers[li].w.a, grads.dw[li].a, w_state[li], hyper);
        adam_step(net.layers[li].b, grads.db[li], b_state[li], hyper);
    }
}

std::size_t mlp_macs(const Mlp& net) {
    std::size_t macs = 0;
    for (const auto& layer : net.layers) macs += layer.w.rows * layer.w.cols;
    return macs;
}

}  // namespace checknet
