#include "checknet/basemodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "checknet/serialize.hpp"

namespace checknet {

namespace {

// Axis-aligned means scaled so every pair of classes sits exactly
// `separation` apart. Needs dim >= classes.
std::vector<std::vector<double>> class_means(const SynthSpec& spec) {
    std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim, 0.0));
    double radius = spec.separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < spec.classes; ++c) means[c][c] = radius;
    return means;
}

Dataset draw_split(const SynthSpec& spec, const std::vector<std::vector<double>>& means,
                   std::size_t n, const std::string& tag, RngStream rng) {
    Dataset ds;
    ds.num_classes = spec.classes;
    ds.split = tag;
    ds.inputs = DenseMatrix(n, spec.dim);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int label = static_cast<int>(i % spec.classes);
        ds.labels[i] = label;
        auto row = ds.inputs.row(i);
        const auto& mean = means[static_cast<std::size_t>(label)];
        for (std::size_t j = 0; j < spec.dim; ++j) row[j] = mean[j] + spec.noise * rng.normal();
    }
    return ds;
}

}  // namespace

DataSplit synth_dataset(const SynthSpec& spec, RngStream& rng) {
    if (spec.classes < 2) throw ConfigError("synth_dataset: need at least 2 classes");
    if (spec.dim < spec.classes)
        throw ConfigError("synth_dataset: dim must be >= classes for mean placement");
    if (spec.train_n == 0 || spec.test_n == 0)
        throw ConfigError("synth_dataset: split sizes must be positive");
    if (spec.noise < 0.0 || spec.separation < 0.0)
        throw ConfigError("synth_dataset: noise and separation must be non-negative");
    auto means = class_means(spec);
    DataSplit out;
    out.train = draw_split(spec, means, spec.train_n, "train", rng.child("train"));
    out.test = draw_split(spec, means, spec.test_n, "test", rng.child("test"));
    return out;
}

Dataset load_csv_dataset(const std::string& path, const std::string& split_tag) {
    std::ifstream in(path);
    if (!in) throw IoError("load_csv_dataset: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw IoError("load_csv_dataset: empty file " + path);
    std::size_t dim = static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
    if (dim == 0 || header.substr(header.rfind(',') + 1) != "label")
        throw IoError("load_csv_dataset: header must be f0..f{d-1},label");

    Dataset ds;
    ds.split = split_tag;
    std::vector<double> flat;
    std::string line;
    int max_label = -1;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col < dim) {
                flat.push_back(std::stod(cell));
            } else {
                int label = std::stoi(cell);
                if (label < 0) throw IoError("load_csv_dataset: negative label");
                ds.labels.push_back(label);
                max_label = std::max(max_label, label);
            }
            ++col;
        }
        if (col != dim + 1) throw IoError("load_csv_dataset: ragged row in " + path);
        ++n;
    }
    if (n == 0) throw IoError("load_csv_dataset: no samples in " + path);
    ds.inputs = DenseMatrix(n, dim);
    ds.inputs.a = std::move(flat);
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

void save_csv_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw IoError("save_csv_dataset: cannot open " + path);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = ds.inputs.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) out << format_double(row[j]) << ',';
        out << ds.labels[i] << '\n';
    }
}

int BaseModel::predict(std::span<const double> x) const {
    auto out = logits(x);
    return static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
}

std::vector<double> penultimate(const BaseModel& m, std::span<const double> x) {
    if (x.size() != m.input_dim()) throw ShapeError("penultimate: input dim mismatch");
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t li = 0; li + 1 < m.net.layers.size(); ++li) {
        cur = affine(m.net.layers[li].w, m.net.layers[li].b, cur);
        for (double& v : cur) v = relu(v);
    }
    return cur;
}

double accuracy(const BaseModel& m, const Dataset& ds) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (m.predict(ds.inputs.row(i)) == ds.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainedBase train_base(const DataSplit& data, const BaseHyper& hyper, RngStream& rng) {
    const Dataset& train = data.train;
    if (train.size() == 0) throw ConfigError("train_base: empty training set");
    for (int label : train.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= train.num_classes)
            throw ConfigError("train_base: label out of range");

    std::vector<std::size_t> dims;
    dims.push_back(train.dim());
    for (std::size_t h : hyper.hidden) dims.push_back(h);
    dims.push_back(train.num_classes);

    RngStream init_rng = rng.child("init");
    RngStream order_rng = rng.child("order");

    TrainedBase out;
    out.model.net = init_mlp(dims, init_rng);
    out.model.num_classes = train.num_classes;

    MlpGrads grads;
    grads.init_like(out.model.net);
    MlpAdam adam;
    adam.init_like(out.model.net);
    AdamHyper ah;
    ah.lr = hyper.lr;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Mlp::Trace trace;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            std::size_t end = std::min(order.size(), start + hyper.batch);
            grads.zero();
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                auto logits = out.model.net.forward_trace(train.inputs.row(i), trace);
                auto probs = softmax(logits);
                std::size_t label = static_cast<std::size_t>(train.labels[i]);
                epoch_loss += ce_loss(probs, label);
                if (static_cast<std::size_t>(
                        std::max_element(logits.begin(), logits.end()) - logits.begin()) == label)
                    ++correct;
                std::vector<double> dlogits = probs;
                dlogits[label] -= 1.0;
                mlp_backward(out.model.net, trace, dlogits, grads);
            }
            grads.scale(1.0 / static_cast<double>(end - start));
            adam.step(out.model.net, grads, ah);
        }
        epoch_loss /= static_cast<double>(train.size());
        if (!std::isfinite(epoch_loss)) throw TrainingError("train_base: loss diverged");
        out.metrics.epoch_loss.push_back(epoch_loss);
        out.metrics.epoch_train_acc.push_back(static_cast<double>(correct) /
                                              static_cast<double>(train.size()));
    }

    out.metrics.final_train_acc = accuracy(out.model, train);
    out.metrics.final_test_acc = data.test.size() ? accuracy(out.model, data.test) : 0.0;
    return out;
}

}  // namespace checknet
