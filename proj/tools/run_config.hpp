#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "checknet/basemodel.hpp"
#include "checknet/verifier.hpp"
#include "checknet/worker.hpp"

namespace checknet::cli {

// Minimal TOML subset: [sections], key = value with integers, floats,
// booleans, quoted strings, and flat integer arrays. '#' starts a comment.
using TomlValue = std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>>;
using TomlTable = std::map<std::string, TomlValue>;  // keys are "section.key"

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

struct DatasetSpec {
    std::string kind = "synthetic";  // or "csv"
    SynthSpec synth;
    std::string train_csv;
    std::string test_csv;
};

struct CampaignSpec {
    std::vector<BehaviorShare> mix = {{WorkerBehavior{}, 1.0}};
    std::size_t samples = 2000;
    std::size_t targeted_n = 3;
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string outdir = "out";
    DatasetSpec dataset;
    BaseHyper base;
    ProtectHyper checknet;
    CampaignSpec campaign;
};

// File values, validated; hyper ranges are checked before any compute.
RunConfig load_run_config(const std::string& path);

// Behavior mix string, e.g. "honest:0.5,random:0.5". Weights default to 1.
std::vector<BehaviorShare> parse_behavior_mix(const std::string& text, std::size_t targeted_n);

// Effective configuration echoed into manifests.
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Materializes the configured dataset (synthetic generation is seeded from
// the run seed, so every command sees the identical split).
DataSplit build_dataset(const RunConfig& cfg);

}  // namespace checknet::cli
