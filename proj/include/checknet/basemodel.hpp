#pragma once

#include <string>
#include <vector>

#include "checknet/numerics.hpp"

namespace checknet {

struct Dataset {
    DenseMatrix inputs;       // N x d
    std::vector<int> labels;  // each in [0, num_classes)
    std::size_t num_classes = 0;
    std::string split;  // "train" or "test"

    std::size_t size() const { return inputs.rows; }
    std::size_t dim() const { return inputs.cols; }
};

struct DataSplit {
    Dataset train;
    Dataset test;
};

// Gaussian clusters with class means placed pairwise `separation` apart.
// `noise` is the per-coordinate standard deviation, so the default
// separation=6, noise=1 gives 6-sigma spacing.
struct SynthSpec {
    std::size_t classes = 10;
    std::size_t dim = 16;
    std::size_t train_n = 4000;
    std::size_t test_n = 1000;
    double noise = 1.0;
    double separation = 6.0;
};

DataSplit synth_dataset(const SynthSpec& spec, RngStream& rng);

// CSV format: header "f0,...,f{d-1},label", one sample per row.
Dataset load_csv_dataset(const std::string& path, const std::string& split_tag);
void save_csv_dataset(const std::string& path, const Dataset& ds);

// Feedforward classifier standing in for a large backbone. The last hidden
// layer is the penultimate layer feeding CrossCheck; the final layer is the
// ordinary (unprotected) classification head.
struct BaseModel {
    Mlp net;
    std::size_t num_classes = 0;

    std::size_t input_dim() const { return net.input_dim(); }
    // Width of the layer feeding the head.
    std::size_t penultimate_dim() const {
        return net.layers.size() >= 2 ? net.layers[net.layers.size() - 1].w.cols : net.input_dim();
    }

    std::vector<double> logits(std::span<const double> x) const { return net.forward(x); }
    int predict(std::span<const double> x) const;
};

struct BaseHyper {
    std::vector<std::size_t> hidden = {256, 128};
    std::size_t epochs = 15;
    std::size_t batch = 32;
    double lr = 1e-3;
};

struct TrainMetrics {
    std::vector<double> epoch_train_acc;
    std::vector<double> epoch_loss;
    double final_train_acc = 0.0;
    double final_test_acc = 0.0;
};

struct TrainedBase {
    BaseModel model;
    TrainMetrics metrics;
};

// Softmax cross-entropy training with Adam; deterministic given the stream.
// Throws TrainingError if the loss goes non-finite.
TrainedBase train_base(const DataSplit& data, const BaseHyper& hyper, RngStream& rng);

// Features at the penultimate layer (length p).
std::vector<double> penultimate(const BaseModel& m, std::span<const double> x);

double accuracy(const BaseModel& m, const Dataset& ds);

}  // namespace checknet
