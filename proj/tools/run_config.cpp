#include "run_config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "checknet/errors.hpp"

namespace checknet::cli {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Removes an unquoted trailing comment.
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

TomlValue parse_scalar(const std::string& raw, int lineno) {
    std::string v = strip(raw);
    if (v.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ConfigError("config line " + std::to_string(lineno) + ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    bool looks_float = v.find_first_of(".eE") != std::string::npos;
    try {
        std::size_t used = 0;
        if (looks_float) {
            double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        }
        std::int64_t i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) + ": bad value '" + v + "'");
    }
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            section = strip(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (table.count(full))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " + full);
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": unterminated array");
            std::vector<std::int64_t> items;
            std::string body = value.substr(1, value.size() - 2);
            std::istringstream bs(body);
            std::string cell;
            while (std::getline(bs, cell, ',')) {
                cell = strip(cell);
                if (cell.empty()) continue;
                TomlValue sv = parse_scalar(cell, lineno);
                if (!std::holds_alternative<std::int64_t>(sv))
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": arrays may hold integers only");
                items.push_back(std::get<std::int64_t>(sv));
            }
            table[full] = std::move(items);
        } else {
            table[full] = parse_scalar(value, lineno);
        }
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

namespace {

class ConfigReader {
  public:
    explicit ConfigReader(const TomlTable& table) : table_(table) {}

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        auto it = table_.find(key);
        if (it == table_.end()) return fallback;
        if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
        throw ConfigError("config key " + key + " must be an integer");
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) const {
        std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError("config key " + key + " must be non-negative");
        return static_cast<std::size_t>(v);
    }

    double get_real(const std::string& key, double fallback) const {
        auto it = table_.find(key);
        if (it == table_.end()) return fallback;
        if (const auto* v = std::get_if<double>(&it->second)) return *v;
        if (const auto* v = std::get_if<std::int64_t>(&it->second))
            return static_cast<double>(*v);
        throw ConfigError("config key " + key + " must be a number");
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = table_.find(key);
        if (it == table_.end()) return fallback;
        if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
        throw ConfigError("config key " + key + " must be a string");
    }

    std::optional<std::size_t> get_opt_count(const std::string& key) const {
        if (!table_.count(key)) return std::nullopt;
        return get_count(key, 0);
    }

    std::vector<std::size_t> get_counts(const std::string& key,
                                        std::vector<std::size_t> fallback) const {
        auto it = table_.find(key);
        if (it == table_.end()) return fallback;
        if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) {
            std::vector<std::size_t> out;
            for (std::int64_t x : *v) {
                if (x <= 0) throw ConfigError("config key " + key + " entries must be positive");
                out.push_back(static_cast<std::size_t>(x));
            }
            return out;
        }
        throw ConfigError("config key " + key + " must be an integer array");
    }

  private:
    const TomlTable& table_;
};

}  // namespace

std::vector<BehaviorShare> parse_behavior_mix(const std::string& text, std::size_t targeted_n) {
    std::vector<BehaviorShare> mix;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = strip(item);
        if (item.empty()) continue;
        BehaviorShare share;
        auto colon = item.find(':');
        std::string name = colon == std::string::npos ? item : strip(item.substr(0, colon));
        share.behavior.kind = behavior_from_name(name);
        share.behavior.targeted_n = targeted_n;
        if (colon != std::string::npos) {
            try {
                share.weight = std::stod(item.substr(colon + 1));
            } catch (const std::exception&) {
                throw ConfigError("bad behavior weight in '" + item + "'");
            }
        }
        mix.push_back(share);
    }
    if (mix.empty()) throw ConfigError("behavior mix is empty");
    return mix;
}

RunConfig load_run_config(const std::string& path) {
    TomlTable table = parse_toml_file(path);
    ConfigReader r(table);
    RunConfig cfg;

    std::int64_t seed = r.get_int("seed", 42);
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.outdir = r.get_string("outdir", cfg.outdir);

    cfg.dataset.kind = r.get_string("dataset.kind", cfg.dataset.kind);
    if (cfg.dataset.kind == "synthetic") {
        cfg.dataset.synth.classes = r.get_count("dataset.classes", cfg.dataset.synth.classes);
        cfg.dataset.synth.dim = r.get_count("dataset.dim", cfg.dataset.synth.dim);
        cfg.dataset.synth.train_n = r.get_count("dataset.train_n", cfg.dataset.synth.train_n);
        cfg.dataset.synth.test_n = r.get_count("dataset.test_n", cfg.dataset.synth.test_n);
        cfg.dataset.synth.noise = r.get_real("dataset.noise", cfg.dataset.synth.noise);
        cfg.dataset.synth.separation =
            r.get_real("dataset.separation", cfg.dataset.synth.separation);
    } else if (cfg.dataset.kind == "csv") {
        cfg.dataset.train_csv = r.get_string("dataset.train_csv", "");
        cfg.dataset.test_csv = r.get_string("dataset.test_csv", "");
        if (cfg.dataset.train_csv.empty() || cfg.dataset.test_csv.empty())
            throw ConfigError("csv dataset needs dataset.train_csv and dataset.test_csv");
    } else {
        throw ConfigError("dataset.kind must be 'synthetic' or 'csv'");
    }

    cfg.base.hidden = r.get_counts("base.hidden", cfg.base.hidden);
    cfg.base.epochs = r.get_count("base.epochs", cfg.base.epochs);
    cfg.base.batch = r.get_count("base.batch", cfg.base.batch);
    cfg.base.lr = r.get_real("base.lr", cfg.base.lr);
    if (cfg.base.hidden.empty()) throw ConfigError("base.hidden must not be empty");
    if (cfg.base.batch == 0) throw ConfigError("base.batch must be positive");
    if (cfg.base.lr <= 0.0) throw ConfigError("base.lr must be positive");

    cfg.checknet.n_o = r.get_count("checknet.n_o", cfg.checknet.n_o);
    cfg.checknet.n_s = r.get_count("checknet.n_s", cfg.checknet.n_s);
    cfg.checknet.l = r.get_count("checknet.l", cfg.checknet.l);
    cfg.checknet.n_h = r.get_count("checknet.n_h", cfg.checknet.n_h);
    cfg.checknet.t_h = r.get_opt_count("checknet.t_h");
    cfg.checknet.t_c = r.get_opt_count("checknet.t_c");
    cfg.checknet.head.epochs = r.get_count("checknet.head_epochs", cfg.checknet.head.epochs);
    cfg.checknet.head.batch = r.get_count("checknet.head_batch", cfg.checknet.head.batch);
    cfg.checknet.head.lr = r.get_real("checknet.head_lr", cfg.checknet.head.lr);
    cfg.checknet.hash.hidden = r.get_count("checknet.hash_hidden", cfg.checknet.hash.hidden);
    cfg.checknet.hash.epochs = r.get_count("checknet.hash_epochs", cfg.checknet.hash.epochs);
    cfg.checknet.hash.batch = r.get_count("checknet.hash_batch", cfg.checknet.hash.batch);
    cfg.checknet.hash.lr = r.get_real("checknet.hash_lr", cfg.checknet.hash.lr);
    if (cfg.checknet.n_o == 0 || cfg.checknet.n_s == 0 || cfg.checknet.l == 0 ||
        cfg.checknet.n_h == 0)
        throw ConfigError("checknet.n_o, n_s, l, n_h must be positive");
    if (cfg.checknet.t_h && *cfg.checknet.t_h > cfg.checknet.l)
        throw ConfigError("checknet.t_h exceeds l");
    if (cfg.checknet.t_c && *cfg.checknet.t_c > cfg.checknet.n_s)
        throw ConfigError("checknet.t_c exceeds n_s");
    if (cfg.checknet.head.batch == 0 || cfg.checknet.hash.batch == 0)
        throw ConfigError("checknet batch sizes must be positive");
    if (cfg.checknet.head.lr <= 0.0 || cfg.checknet.hash.lr <= 0.0)
        throw ConfigError("checknet learning rates must be positive");

    cfg.campaign.samples = r.get_count("campaign.samples", cfg.campaign.samples);
    cfg.campaign.targeted_n = r.get_count("campaign.targeted_n", cfg.campaign.targeted_n);
    if (cfg.campaign.samples == 0) throw ConfigError("campaign.samples must be positive");
    std::string mix = r.get_string("campaign.behaviors", "honest:0.5,random:0.5");
    cfg.campaign.mix = parse_behavior_mix(mix, cfg.campaign.targeted_n);
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json dataset;
    if (cfg.dataset.kind == "synthetic") {
        dataset = {{"kind", "synthetic"},
                   {"classes", cfg.dataset.synth.classes},
                   {"dim", cfg.dataset.synth.dim},
                   {"train_n", cfg.dataset.synth.train_n},
                   {"test_n", cfg.dataset.synth.test_n},
                   {"noise", cfg.dataset.synth.noise},
                   {"separation", cfg.dataset.synth.separation}};
    } else {
        dataset = {{"kind", "csv"},
                   {"train_csv", cfg.dataset.train_csv},
                   {"test_csv", cfg.dataset.test_csv}};
    }
    nlohmann::json mix = nlohmann::json::array();
    for (const auto& share : cfg.campaign.mix)
        mix.push_back({{"behavior", behavior_name(share.behavior.kind)},
                       {"weight", share.weight},
                       {"targeted_n", share.behavior.targeted_n}});
    return {
        {"seed", cfg.seed},
        {"outdir", cfg.outdir},
        {"dataset", dataset},
        {"base",
         {{"hidden", cfg.base.hidden},
          {"epochs", cfg.base.epochs},
          {"batch", cfg.base.batch},
          {"lr", cfg.base.lr}}},
        {"checknet",
         {{"n_o", cfg.checknet.n_o},
          {"n_s", cfg.checknet.n_s},
          {"l", cfg.checknet.l},
          {"n_h", cfg.checknet.n_h},
          {"t_h", cfg.checknet.t_h ? nlohmann::json(*cfg.checknet.t_h) : nlohmann::json()},
          {"t_c", cfg.checknet.t_c ? nlohmann::json(*cfg.checknet.t_c) : nlohmann::json()},
          {"head",
           {{"epochs", cfg.checknet.head.epochs},
            {"batch", cfg.checknet.head.batch},
            {"lr", cfg.checknet.head.lr}}},
          {"hash",
           {{"hidden", cfg.checknet.hash.hidden},
            {"epochs", cfg.checknet.hash.epochs},
            {"batch", cfg.checknet.hash.batch},
            {"lr", cfg.checknet.hash.lr}}}}},
        {"campaign", {{"samples", cfg.campaign.samples}, {"mix", mix}}},
    };
}

DataSplit build_dataset(const RunConfig& cfg) {
    if (cfg.dataset.kind == "csv") {
        DataSplit split;
        split.train = load_csv_dataset(cfg.dataset.train_csv, "train");
        split.test = load_csv_dataset(cfg.dataset.test_csv, "test");
        std::size_t classes = std::max(split.train.num_classes, split.test.num_classes);
        split.train.num_classes = classes;
        split.test.num_classes = classes;
        if (split.train.dim() != split.test.dim())
            throw ConfigError("csv train/test dims differ");
        return split;
    }
    RngStream rng(cfg.seed, "dataset");
    return synth_dataset(cfg.dataset.synth, rng);
}

}  // namespace checknet::cli
