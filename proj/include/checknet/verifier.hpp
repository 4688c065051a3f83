#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "checknet/basemodel.hpp"
#include "checknet/crosscheck.hpp"
#include "checknet/hashcheck.hpp"
#include "checknet/public_model.hpp"

namespace checknet {

struct Thresholds {
    std::size_t t_h = 0;  // max accepted bithash distance
    std::size_t t_c = 0;  // min accepted majority cardinality
};

// Owner-side bundle. The public model ships to the worker; everything else
// stays private.
struct ModelBundle {
    PublicModel public_model;
    CrossCheckConfig crosscheck;
    HashBank hashbank;
    Thresholds thresholds;
    std::uint64_t seed = 0;
    nlohmann::json creation_config;  // recorded protect() configuration
};

struct VerificationReport {
    int unverified_label = 0;  // majority label, computed whether or not accepted
    std::vector<int> votes;
    std::size_t m = 0;
    std::vector<std::size_t> distances;  // one per hash pair
    std::vector<bool> passes;            // distance <= t_h per pair
    bool crosscheck_pass = false;        // m >= t_c
    bool accepted = false;               // crosscheck_pass and every pair passes
};

struct ProtectHyper {
    std::size_t n_o = 40;
    std::size_t n_s = 10;
    std::size_t l = 32;
    std::size_t n_h = 3;
    HeadHyper head;
    HashTrainHyper hash;
    // Defaults when unset: t_h = l/4, t_c = ceil(0.6 * n_s).
    std::optional<std::size_t> t_h;
    std::optional<std::size_t> t_c;
};

struct ProtectMetrics {
    HeadTrainMetrics head;
    std::vector<HashTrainMetrics> hash_pairs;
};

struct ProtectedModel {
    ModelBundle bundle;
    ProtectMetrics metrics;
};

// Full protection pipeline: sample sets, retrain the head, generate honest
// outputs on the training split, train n_h hash pairs.
ProtectedModel protect(const BaseModel& base, const DataSplit& data, const ProtectHyper& hyper,
                       RngStream& rng);

// Verdict for one returned output. Thresholds default to the bundle's but may
// be overridden (threshold grids re-use one campaign).
VerificationReport verify(const ModelBundle& bundle, std::span<const double> x,
                          std::span<const double> y,
                          std::optional<Thresholds> override_thresholds = std::nullopt);

// Accept/reject from an already-computed report under different thresholds.
bool decide(const VerificationReport& report, const Thresholds& thr);

// File formats `.checknet.json` (full bundle) and `.checknet.pub.json`
// (public half only), both versioned.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);
void export_public(const ModelBundle& bundle, const std::string& path);

}  // namespace checknet
