#include "checknet/crosscheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace checknet {

void CrossCheckConfig::validate() const {
    if (n_c < 1 || n_s < 1) throw ConfigError("CrossCheckConfig: n_c and n_s must be positive");
    if (n_c > n_o) throw ConfigError("CrossCheckConfig: n_c exceeds n_o");
    if (sets.size() != n_s) throw ConfigError("CrossCheckConfig: set count mismatch");
    for (const auto& s : sets) {
        if (s.size() != n_c) throw ConfigError("CrossCheckConfig: set size mismatch");
        std::set<std::uint32_t> uniq(s.begin(), s.end());
        if (uniq.size() != s.size()) throw ConfigError("CrossCheckConfig: duplicate node in set");
        if (*uniq.rbegin() >= n_o) throw ConfigError("CrossCheckConfig: node index out of range");
    }
}

std::vector<std::uint32_t> CrossCheckConfig::decoy_nodes() const {
    std::vector<bool> used(n_o, false);
    for (const auto& s : sets)
        for (std::uint32_t idx : s) used[idx] = true;
    std::vector<std::uint32_t> decoys;
    for (std::size_t i = 0; i < n_o; ++i)
        if (!used[i]) decoys.push_back(static_cast<std::uint32_t>(i));
    return decoys;
}

CrossCheckConfig sample_sets(RngStream& rng, std::size_t n_o, std::size_t n_s, std::size_t n_c) {
    if (n_c > n_o) throw ConfigError("sample_sets: n_c exceeds n_o");
    CrossCheckConfig cfg;
    cfg.n_o = n_o;
    cfg.n_c = n_c;
    cfg.n_s = n_s;
    cfg.sets.reserve(n_s);
    for (std::size_t s = 0; s < n_s; ++s) cfg.sets.push_back(rng.sample_without_replacement(n_o, n_c));
    cfg.validate();
    return cfg;
}

HeadLossGrad head_loss_grad(std::span<const double> y, const CrossCheckConfig& cfg, int label) {
    if (y.size() != cfg.n_o) throw ShapeError("head_loss_grad: output length mismatch");
    if (label < 0 || static_cast<std::size_t>(label) >= cfg.n_c)
        throw IndexError("head_loss_grad: label out of range");
    HeadLossGrad out;
    out.dlogits.assign(cfg.n_o, 0.0);
    std::vector<double> vals(cfg.n_c);
    double inv_ns = 1.0 / static_cast<double>(cfg.n_s);
    for (const auto& s : cfg.sets) {
        for (std::size_t k = 0; k < cfg.n_c; ++k) vals[k] = y[s[k]];
        auto probs = softmax(vals);
        out.loss += ce_loss(probs, static_cast<std::size_t>(label)) * inv_ns;
        for (std::size_t k = 0; k < cfg.n_c; ++k) {
            double g = probs[k] - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0);
            out.dlogits[s[k]] += g * inv_ns;
        }
    }
    return out;
}

std::vector<int> set_votes(std::span<const double> y, const CrossCheckConfig& cfg) {
    if (y.size() != cfg.n_o) throw ShapeError("set_votes: output length mismatch");
    std::vector<int> votes;
    votes.reserve(cfg.n_s);
    for (const auto& s : cfg.sets) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < s.size(); ++k)
            if (y[s[k]] > y[s[best]]) best = k;
        votes.push_back(static_cast<int>(best));
    }
    return votes;
}

MajorityResult majority(const std::vector<int>& votes) {
    if (votes.empty()) throw ShapeError("majority: empty vote list");
    int max_label = *std::max_element(votes.begin(), votes.end());
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
    for (int v : votes) ++counts[static_cast<std::size_t>(v)];
    MajorityResult res;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] > res.m) {
            res.m = counts[c];
            res.label = static_cast<int>(c);
        }
    }
    return res;
}

namespace {

DenseMatrix feature_matrix(const BaseModel& base, const Dataset& ds) {
    DenseMatrix f(ds.size(), base.penultimate_dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto feats = penultimate(base, ds.inputs.row(i));
        std::copy(feats.begin(), feats.end(), f.row(i).begin());
    }
    return f;
}

double majority_accuracy(const ExpandedHead& head, const DenseMatrix& feats,
                         const std::vector<int>& labels, const CrossCheckConfig& cfg) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < feats.rows; ++i) {
        auto y = head.outputs(feats.row(i));
        auto mr = majority(set_votes(y, cfg));
        if (mr.label == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(feats.rows);
}

}  // namespace

TrainedHead retrain_head(const BaseModel& base, const DataSplit& data,
                         const CrossCheckConfig& cfg, const HeadHyper& hyper, RngStream& rng) {
    cfg.validate();
    if (data.train.num_classes != cfg.n_c)
        throw ConfigError("retrain_head: dataset classes differ from n_c");

    std::size_t p = base.penultimate_dim();
    RngStream init_rng = rng.child("init");
    RngStream order_rng = rng.child("order");

    TrainedHead out;
    out.head.w = DenseMatrix(cfg.n_o, p);
    double scale = std::sqrt(2.0 / static_cast<double>(p));
    for (double& v : out.head.w.a) v = scale * init_rng.normal();
    out.head.b.assign(cfg.n_o, 0.0);

    // Base is frozen, so features are computed once.
    DenseMatrix train_feats = feature_matrix(base, data.train);

    AdamHyper ah;
    ah.lr = hyper.lr;
    AdamState w_state, b_state;
    DenseMatrix dw(cfg.n_o, p);
    std::vector<double> db(cfg.n_o, 0.0);

    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            std::size_t end = std::min(order.size(), start + hyper.batch);
            std::fill(dw.a.begin(), dw.a.end(), 0.0);
            std::fill(db.begin(), db.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                auto feats = train_feats.row(i);
                auto y = out.head.outputs(feats);
                auto lg = head_loss_grad(y, cfg, data.train.labels[i]);
                epoch_loss += lg.loss;
                for (std::size_t r = 0; r < cfg.n_o; ++r) {
                    double d = lg.dlogits[r];
                    if (d == 0.0) continue;
                    db[r] += d;
                    double* dwr = dw.a.data() + r * p;
                    for (std::size_t c = 0; c < p; ++c) dwr[c] += d * feats[c];
                }
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (double& v : dw.a) v *= inv;
            for (double& v : db) v *= inv;
            adam_step(out.head.w.a, dw.a, w_state, ah);
            adam_step(out.head.b, db, b_state, ah);
        }
        epoch_loss /= static_cast<double>(data.train.size());
        if (!std::isfinite(epoch_loss)) throw TrainingError("retrain_head: loss diverged");
        out.metrics.epoch_loss.push_back(epoch_loss);
    }

    DenseMatrix test_feats = feature_matrix(base, data.test);
    out.metrics.majority_train_acc =
        majority_accuracy(out.head, train_feats, data.train.labels, cfg);
    out.metrics.majority_test_acc = majority_accuracy(out.head, test_feats, data.test.labels, cfg);
    out.metrics.per_set_test_acc.assign(cfg.n_s, 0.0);
    for (std::size_t i = 0; i < test_feats.rows; ++i) {
        auto y = out.head.outputs(test_feats.row(i));
        auto votes = set_votes(y, cfg);
        for (std::size_t s = 0; s < cfg.n_s; ++s)
            if (votes[s] == data.test.labels[i]) out.metrics.per_set_test_acc[s] += 1.0;
    }
    for (double& acc : out.metrics.per_set_test_acc)
        acc /= static_cast<double>(test_feats.rows);
    return out;
}

}  // namespace checknet
