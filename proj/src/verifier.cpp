#include "checknet/verifier.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "checknet/serialize.hpp"

namespace checknet {

namespace {
constexpr int kFormatVersion = 1;
constexpr const char* kBundleKind = "checknet.bundle";
constexpr const char* kPublicKind = "checknet.public";
}  // namespace

ProtectedModel protect(const BaseModel& base, const DataSplit& data, const ProtectHyper& hyper,
                       RngStream& rng) {
    std::size_t n_c = data.train.num_classes;
    if (n_c > hyper.n_o) throw ConfigError("protect: n_c exceeds n_o");
    if (hyper.n_s == 0 || hyper.n_h == 0 || hyper.l == 0)
        throw ConfigError("protect: n_s, n_h, l must be positive");
    Thresholds thr;
    thr.t_h = hyper.t_h.value_or(hyper.l / 4);
    thr.t_c = hyper.t_c.value_or(
        static_cast<std::size_t>(std::ceil(0.6 * static_cast<double>(hyper.n_s))));
    if (thr.t_h > hyper.l) throw ConfigError("protect: t_h exceeds l");
    if (thr.t_c > hyper.n_s) throw ConfigError("protect: t_c exceeds n_s");

    ProtectedModel out;

    RngStream sets_rng = rng.child("sets");
    out.bundle.crosscheck = sample_sets(sets_rng, hyper.n_o, hyper.n_s, n_c);

    RngStream head_rng = rng.child("head");
    auto trained_head = retrain_head(base, data, out.bundle.crosscheck, hyper.head, head_rng);
    out.metrics.head = trained_head.metrics;

    // Public model = frozen hidden stack + expanded head as the new last layer.
    out.bundle.public_model.net.layers.assign(base.net.layers.begin(),
                                              base.net.layers.end() - 1);
    MlpLayer head_layer;
    head_layer.w = trained_head.head.w;
    head_layer.b = trained_head.head.b;
    out.bundle.public_model.net.layers.push_back(std::move(head_layer));

    // Hash pairs are trained on what the worker will actually return: the
    // expanded n_o-dimensional outputs.
    DenseMatrix xs = data.train.inputs;
    DenseMatrix ys(data.train.size(), hyper.n_o);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        auto y = out.bundle.public_model.forward(xs.row(i));
        std::copy(y.begin(), y.end(), ys.row(i).begin());
    }
    RngStream hash_rng = rng.child("hash");
    auto bank = make_hash_bank(xs, ys, hyper.l, hyper.n_h, thr.t_h, hyper.hash, hash_rng);
    out.bundle.hashbank = std::move(bank.bank);
    out.metrics.hash_pairs = std::move(bank.pair_metrics);

    out.bundle.thresholds = thr;
    out.bundle.seed = rng.root_seed();
    out.bundle.creation_config = {
        {"n_o", hyper.n_o},
        {"n_s", hyper.n_s},
        {"n_c", n_c},
        {"l", hyper.l},
        {"n_h", hyper.n_h},
        {"t_h", thr.t_h},
        {"t_c", thr.t_c},
        {"head", {{"epochs", hyper.head.epochs}, {"batch", hyper.head.batch}, {"lr", hyper.head.lr}}},
        {"hash",
         {{"hidden", hyper.hash.hidden},
          {"epochs", hyper.hash.epochs},
          {"batch", hyper.hash.batch},
          {"lr", hyper.hash.lr}}},
    };
    return out;
}

VerificationReport verify(const ModelBundle& bundle, std::span<const double> x,
                          std::span<const double> y,
                          std::optional<Thresholds> override_thresholds) {
    if (y.size() != bundle.crosscheck.n_o) throw ShapeError("verify: output length mismatch");
    Thresholds thr = override_thresholds.value_or(bundle.thresholds);
    VerificationReport rep;
    rep.votes = set_votes(y, bundle.crosscheck);
    auto mr = majority(rep.votes);
    rep.unverified_label = mr.label;
    rep.m = mr.m;
    rep.crosscheck_pass = rep.m >= thr.t_c;
    rep.accepted = rep.crosscheck_pass;
    for (const auto& pair : bundle.hashbank.pairs) {
        auto pc = check_pair(pair, x, y, thr.t_h);
        rep.distances.push_back(pc.distance);
        rep.passes.push_back(pc.pass);
        rep.accepted = rep.accepted && pc.pass;
    }
    return rep;
}

bool decide(const VerificationReport& report, const Thresholds& thr) {
    if (report.m < thr.t_c) return false;
    for (std::size_t d : report.distances)
        if (d > thr.t_h) return false;
    return true;
}

namespace {

nlohmann::json public_to_json(const PublicModel& pm) {
    return {{"kind", kPublicKind},
            {"format_version", kFormatVersion},
            {"model", mlp_to_json(pm.net)}};
}

PublicModel public_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != kPublicKind) throw IoError("public model: wrong kind field");
    if (j.value("format_version", -1) != kFormatVersion)
        throw IoError("public model: unsupported format version");
    PublicModel pm;
    pm.net = mlp_from_json(j.at("model"));
    if (pm.net.layers.empty()) throw IoError("public model: empty network");
    return pm;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& s : bundle.crosscheck.sets) sets.push_back(s);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : bundle.hashbank.pairs)
        pairs.push_back({{"g", matrix_to_json(pair.g)}, {"f", mlp_to_json(pair.f)}});
    nlohmann::json j = {
        {"kind", kBundleKind},
        {"format_version", kFormatVersion},
        {"metadata", {{"seed", bundle.seed}, {"config", bundle.creation_config}}},
        {"public", public_to_json(bundle.public_model)},
        {"private",
         {{"crosscheck",
           {{"n_o", bundle.crosscheck.n_o},
            {"n_c", bundle.crosscheck.n_c},
            {"n_s", bundle.crosscheck.n_s},
            {"sets", sets}}},
          {"hashbank", {{"l", bundle.hashbank.l}, {"t_h", bundle.hashbank.t_h}, {"pairs", pairs}}},
          {"thresholds", {{"t_h", bundle.thresholds.t_h}, {"t_c", bundle.thresholds.t_c}}}}},
    };
    save_json_file(path, j);
}

ModelBundle load_bundle(const std::string& path) {
    nlohmann::json j = load_json_file(path);
    try {
        if (j.value("kind", "") != kBundleKind) throw IoError("bundle: wrong kind field");
        if (j.value("format_version", -1) != kFormatVersion)
            throw IoError("bundle: unsupported format version");
        ModelBundle b;
        b.seed = j.at("metadata").at("seed").get<std::uint64_t>();
        b.creation_config = j.at("metadata").at("config");
        b.public_model = public_from_json(j.at("public"));
        const auto& priv = j.at("private");
        const auto& cc = priv.at("crosscheck");
        b.crosscheck.n_o = cc.at("n_o").get<std::size_t>();
        b.crosscheck.n_c = cc.at("n_c").get<std::size_t>();
        b.crosscheck.n_s = cc.at("n_s").get<std::size_t>();
        for (const auto& s : cc.at("sets"))
            b.crosscheck.sets.push_back(s.get<std::vector<std::uint32_t>>());
        b.crosscheck.validate();
        const auto& hb = priv.at("hashbank");
        b.hashbank.l = hb.at("l").get<std::size_t>();
        b.hashbank.t_h = hb.at("t_h").get<std::size_t>();
        for (const auto& pj : hb.at("pairs")) {
            HashPair pair;
            pair.g = matrix_from_json(pj.at("g"));
            pair.f = mlp_from_json(pj.at("f"));
            if (pair.g.rows != b.hashbank.l) throw IoError("bundle: pair code length mismatch");
            b.hashbank.pairs.push_back(std::move(pair));
        }
        const auto& thr = priv.at("thresholds");
        b.thresholds.t_h = thr.at("t_h").get<std::size_t>();
        b.thresholds.t_c = thr.at("t_c").get<std::size_t>();
        if (b.public_model.n_o() != b.crosscheck.n_o)
            throw IoError("bundle: public output width differs from crosscheck n_o");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt bundle " + path + ": " + e.what());
    }
}

void export_public(const ModelBundle& bundle, const std::string& path) {
    save_json_file(path, public_to_json(bundle.public_model));
}

PublicModel load_public(const std::string& path) {
    nlohmann::json j = load_json_file(path);
    try {
        return public_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt public model " + path + ": " + e.what());
    }
}

}  // namespace checknet
