#pragma once

#include <string>

#include "checknet/numerics.hpp"

namespace checknet {

// The worker-visible network: base hidden layers plus the expanded head. To
// the third party this is an ordinary model with an n_o-dimensional output;
// it carries no sets, hash weights, or threshold values.
struct PublicModel {
    Mlp net;

    std::size_t input_dim() const { return net.input_dim(); }
    std::size_t n_o() const { return net.output_dim(); }

    std::vector<double> forward(std::span<const double> x) const { return net.forward(x); }
};

PublicModel load_public(const std::string& path);

}  // namespace checknet
