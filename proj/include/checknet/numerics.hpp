#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "checknet/errors.hpp"

namespace checknet {

// Row-major dense matrix of doubles.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }

    bool operator==(const DenseMatrix&) const = default;
};

// Fixed-length bit sequence, one byte per bit (values 0 or 1).
struct BitVector {
    std::vector<std::uint8_t> bits;

    BitVector() = default;
    explicit BitVector(std::size_t l) : bits(l, 0) {}

    std::size_t size() const { return bits.size(); }
    std::uint8_t& operator[](std::size_t i) { return bits[i]; }
    std::uint8_t operator[](std::size_t i) const { return bits[i]; }

    bool operator==(const BitVector&) const = default;
};

// Deterministic random stream. A (root seed, label) pair fully determines the
// draw sequence; child streams derive independent sequences from the same root
// by extending the label path, so adding a consumer never perturbs siblings.
class RngStream {
  public:
    RngStream(std::uint64_t root_seed, std::string label);

    RngStream child(std::string_view label) const;

    std::uint64_t root_seed() const { return root_seed_; }
    const std::string& label() const { return label_; }

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Standard normal via Box-Muller (pair cached).
    double normal();
    // Uniform in [0, n). Unbiased by rejection.
    std::size_t uniform_index(std::size_t n);
    // First k of a Fisher-Yates shuffle of 0..n-1, in draw order.
    std::vector<std::uint32_t> sample_without_replacement(std::size_t n, std::size_t k);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t root_seed_ = 0;
    std::string label_;
    std::uint64_t state_ = 0;  // splitmix64 state
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// y = W x + b. Throws ShapeError on dimension mismatch.
std::vector<double> affine(const DenseMatrix& w, std::span<const double> b,
                           std::span<const double> x);

// Numerically stable softmax; preserves argmax, sums to 1.
std::vector<double> softmax(std::span<const double> v);

std::vector<double> sigmoid(std::span<const double> v);

double relu(double x);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before taking logs.
inline constexpr double kProbClamp = 1e-7;

// Mean binary cross entropy between predicted probabilities p and targets t in {0,1}.
double bce_loss(std::span<const double> p, std::span<const double> t);

// -log(probs[label]) with clamping. Throws IndexError if label out of range.
double ce_loss(std::span<const double> probs, std::size_t label);

// Number of positions where a and b differ. Throws ShapeError on length mismatch.
std::size_t hamming(const BitVector& a, const BitVector& b);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment state for one parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

// One Adam update in place. Throws TrainingError on non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamHyper& hyper);

// Small fully connected network: ReLU on hidden layers, linear final layer.
// The loss-side gradient w.r.t. the output is supplied by the caller, which
// keeps the two trained architectures (classifier, hash net) hand-derived.
struct MlpLayer {
    DenseMatrix w;  // out x in
    std::vector<double> b;

    bool operator==(const MlpLayer&) const = default;
};

struct Mlp {
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

    std::vector<double> forward(std::span<const double> x) const;

    // Activations retained for backprop: act[0] is the input, act[i] the
    // post-activation output of layer i-1; pre[i] is layer i's pre-activation.
    struct Trace {
        std::vector<std::vector<double>> pre;
        std::vector<std::vector<double>> act;
    };
    std::vector<double> forward_trace(std::span<const double> x, Trace& trace) const;

    bool operator==(const Mlp&) const = default;
};

struct MlpGrads {
    std::vector<DenseMatrix> dw;
    std::vector<std::vector<double>> db;

    void init_like(const Mlp& net);
    void zero();
    void scale(double s);
};

// Accumulates parameter gradients given dL/d(final pre-activation).
void mlp_backward(const Mlp& net, const Mlp::Trace& trace,
                  std::span<const double> dlogits, MlpGrads& grads);

// He-normal initialization for ReLU hidden stacks.
Mlp init_mlp(const std::vector<std::size_t>& dims, RngStream& rng);

// Adam over every layer of an Mlp.
struct MlpAdam {
    std::vector<AdamState> w_state;
    std::vector<AdamState> b_state;

    void init_like(const Mlp& net);
    void step(Mlp& net, const MlpGrads& grads, const AdamHyper& hyper);
};

// Multiply-accumulate count of one forward pass.
std::size_t mlp_macs(const Mlp& net);

}  // namespace checknet
