#pragma once

// Small trained pipeline shared by the worker and analysis tests: 3-class
// clusters, a compact base model, and a bundle with n_o=24, n_s=4, l=16.

#include "checknet/verifier.hpp"
#include "checknet/worker.hpp"

namespace checknet::testing {

struct Pipeline {
    DataSplit split;
    BaseModel base;
    ModelBundle bundle;
    OutputStats stats;  // fitted on honest training-split outputs
};

inline Pipeline make_pipeline(std::uint64_t seed) {
    Pipeline p;
    SynthSpec spec;
    spec.classes = 3;
    spec.dim = 8;
    spec.train_n = 600;
    spec.test_n = 300;
    RngStream data_rng(seed, "data");
    p.split = synth_dataset(spec, data_rng);

    BaseHyper bh;
    bh.hidden = {32, 16};
    bh.epochs = 8;
    RngStream base_rng(seed, "base");
    p.base = train_base(p.split, bh, base_rng).model;

    ProtectHyper ph;
    ph.n_o = 24;
    ph.n_s = 4;
    ph.l = 16;
    ph.n_h = 2;
    ph.head.epochs = 40;
    ph.hash.hidden = 32;
    ph.hash.epochs = 12;
    RngStream protect_rng(seed, "protect");
    p.bundle = protect(p.base, p.split, ph, protect_rng).bundle;

    DenseMatrix train_outputs(p.split.train.size(), p.bundle.crosscheck.n_o);
    for (std::size_t i = 0; i < p.split.train.size(); ++i) {
        auto y = p.bundle.public_model.forward(p.split.train.inputs.row(i));
        std::copy(y.begin(), y.end(), train_outputs.row(i).begin());
    }
    p.stats = fit_output_stats(train_outputs);
    return p;
}

}  // namespace checknet::testing
