#pragma once

#include <cstdint>
#include <vector>

#include "checknet/basemodel.hpp"
#include "checknet/numerics.hpp"

namespace checknet {

// Secret redundancy layout: n_s ordered sets of n_c node indices into the
// expanded n_o-wide output. Position k within a set encodes class k. Sets may
// overlap; nodes in no set are decoys.
struct CrossCheckConfig {
    std::size_t n_o = 0;
    std::size_t n_c = 0;
    std::size_t n_s = 0;
    std::vector<std::vector<std::uint32_t>> sets;

    void validate() const;
    // Nodes that belong to no set.
    std::vector<std::uint32_t> decoy_nodes() const;
};

// Sets sampled without replacement within a set, independently across sets.
CrossCheckConfig sample_sets(RngStream& rng, std::size_t n_o, std::size_t n_s, std::size_t n_c);

// Replacement last layer: p -> n_o.
struct ExpandedHead {
    DenseMatrix w;          // n_o x p
    std::vector<double> b;  // n_o

    std::vector<double> outputs(std::span<const double> features) const {
        return affine(w, b, features);
    }
};

struct HeadHyper {
    std::size_t epochs = 30;
    std::size_t batch = 32;
    double lr = 1e-3;
};

struct HeadTrainMetrics {
    std::vector<double> per_set_test_acc;  // standalone accuracy of each set
    double majority_train_acc = 0.0;
    double majority_test_acc = 0.0;
    std::vector<double> epoch_loss;
};

struct TrainedHead {
    ExpandedHead head;
    HeadTrainMetrics metrics;
};

// Mean over sets of the per-set cross-entropy and its gradient w.r.t. the raw
// expanded outputs y. Decoy nodes receive zero gradient.
struct HeadLossGrad {
    double loss = 0.0;
    std::vector<double> dlogits;  // length n_o
};
HeadLossGrad head_loss_grad(std::span<const double> y, const CrossCheckConfig& cfg, int label);

// Retrains only the head on frozen penultimate features so every set
// classifies on its own. Decoys keep their random initialization.
TrainedHead retrain_head(const BaseModel& base, const DataSplit& data,
                         const CrossCheckConfig& cfg, const HeadHyper& hyper, RngStream& rng);

// One vote per set: argmax over the set's node values, lowest position wins
// ties. Softmax is omitted because it never changes the argmax.
std::vector<int> set_votes(std::span<const double> y, const CrossCheckConfig& cfg);

struct MajorityResult {
    int label = 0;
    std::size_t m = 0;  // cardinality of the winning vote
};

// Most frequent vote; ties break to the smallest label.
MajorityResult majority(const std::vector<int>& votes);

}  // namespace checknet
