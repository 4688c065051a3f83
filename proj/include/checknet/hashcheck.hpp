#pragma once

#include <vector>

#include "checknet/numerics.hpp"

namespace checknet {

// One (f, g) pair. g is a frozen random projection of the n_o-dim output to l
// bits; f is a trained network predicting the same code from the raw input.
struct HashPair {
    DenseMatrix g;  // l x n_o, never modified after sampling
    Mlp f;          // d -> hidden -> l, sigmoid applied at the bit threshold

    std::size_t code_length() const { return g.rows; }
};

struct HashBank {
    std::vector<HashPair> pairs;
    std::size_t l = 0;
    std::size_t t_h = 0;  // default distance threshold, 0 <= t_h <= l

    std::size_t n_h() const { return pairs.size(); }
};

// Entries i.i.d. standard normal.
DenseMatrix sample_g(RngStream& rng, std::size_t l, std::size_t n_o);

// bit_i = 1 iff (G y)_i >= 0. The boundary is inclusive, so a zero projection
// maps to an all-ones code.
BitVector bithash_y(const DenseMatrix& g, std::span<const double> y);

// bit_i = 1 iff sigmoid(f(x))_i >= 0.5, i.e. the raw logit is >= 0.
BitVector bithash_x(const Mlp& f, std::span<const double> x);

struct HashTrainHyper {
    std::size_t hidden = 128;
    std::size_t epochs = 20;
    std::size_t batch = 32;
    double lr = 1e-3;
};

struct HashTrainMetrics {
    double initial_bce = 0.0;
    double final_bce = 0.0;
    double mean_train_distance = 0.0;
};

struct TrainedHash {
    Mlp f;
    HashTrainMetrics metrics;
};

// Trains f against the frozen codes bithash_y(g, y_i) with binary cross
// entropy. xs is N x d of inputs, ys is N x n_o of honest model outputs.
TrainedHash train_f(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& g,
                    const HashTrainHyper& hyper, RngStream& rng);

struct PairCheck {
    std::size_t distance = 0;
    bool pass = false;
};

// pass iff hamming(f(x), g(y)) <= t_h.
PairCheck check_pair(const HashPair& pair, std::span<const double> x,
                     std::span<const double> y, std::size_t t_h);

// Mean input/output code distance of a pair over a sample set.
double mean_pair_distance(const HashPair& pair, const DenseMatrix& xs, const DenseMatrix& ys);

// n_h independently seeded pairs trained on the same (x, y) corpus.
struct TrainedBank {
    HashBank bank;
    std::vector<HashTrainMetrics> pair_metrics;
};
TrainedBank make_hash_bank(const DenseMatrix& xs, const DenseMatrix& ys, std::size_t l,
                           std::size_t n_h, std::size_t t_h, const HashTrainHyper& hyper,
                           RngStream& rng);

}  // namespace checknet
