#include "checknet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "checknet/serialize.hpp"

namespace checknet {

double binomial_cdf(long long k, std::size_t n, double p) {
    if (p < 0.0 || p > 1.0) throw ConfigError("binomial_cdf: p out of [0,1]");
    if (k < 0) return 0.0;
    if (static_cast<std::size_t>(k) >= n) return 1.0;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;  // k < n, all mass at n
    double log_p = std::log(p);
    double log_q = std::log1p(-p);
    double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
    double acc = 0.0;
    for (long long i = 0; i <= k; ++i) {
        double di = static_cast<double>(i);
        double log_term = lg_n - std::lgamma(di + 1.0) -
                          std::lgamma(static_cast<double>(n) - di + 1.0) + di * log_p +
                          (static_cast<double>(n) - di) * log_q;
        acc += std::exp(log_term);
    }
    return std::clamp(acc, 0.0, 1.0);
}

double hashcheck_bound(std::size_t l, std::size_t t_h) {
    if (l == 0) throw ConfigError("hashcheck_bound: l must be positive");
    if (t_h > l) throw ConfigError("hashcheck_bound: t_h exceeds l");
    return 1.0 - binomial_cdf(static_cast<long long>(l - t_h), l, 0.5);
}

double hashcheck_bound_inclusive(std::size_t l, std::size_t t_h) {
    if (l == 0) throw ConfigError("hashcheck_bound: l must be positive");
    if (t_h > l) throw ConfigError("hashcheck_bound: t_h exceeds l");
    return 1.0 - binomial_cdf(static_cast<long long>(l - t_h) - 1, l, 0.5);
}

double crosscheck_bound(std::size_t n_s, std::size_t n_c, std::size_t t_c) {
    if (n_s == 0) throw ConfigError("crosscheck_bound: n_s must be positive");
    if (n_c < 2) throw ConfigError("crosscheck_bound: n_c must be at least 2");
    if (t_c > n_s) throw ConfigError("crosscheck_bound: t_c exceeds n_s");
    return 1.0 - binomial_cdf(static_cast<long long>(t_c), n_s, 1.0 / static_cast<double>(n_c));
}

namespace {
MonteCarloEstimate finish_estimate(std::size_t successes, std::size_t trials) {
    MonteCarloEstimate est;
    est.trials = trials;
    est.successes = successes;
    est.rate = static_cast<double>(successes) / static_cast<double>(trials);
    est.se = std::sqrt(est.rate * (1.0 - est.rate) / static_cast<double>(trials));
    return est;
}
}  // namespace

MonteCarloEstimate hashcheck_guess_sim(std::size_t l, std::size_t t_h, std::size_t trials,
                                       RngStream& rng) {
    if (l == 0 || trials == 0) throw ConfigError("hashcheck_guess_sim: l and trials must be positive");
    if (t_h > l) throw ConfigError("hashcheck_guess_sim: t_h exceeds l");
    std::size_t successes = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t distance = 0;
        std::size_t remaining = l;
        while (remaining > 0) {
            std::size_t chunk = std::min<std::size_t>(remaining, 64);
            std::uint64_t diff = rng.next_u64();
            if (chunk < 64) diff &= (1ull << chunk) - 1;
            distance += static_cast<std::size_t>(std::popcount(diff));
            remaining -= chunk;
        }
        if (distance <= t_h) ++successes;
    }
    return finish_estimate(successes, trials);
}

MonteCarloEstimate lemma_ordering_sim(std::size_t n_o, std::size_t n_s, std::size_t n_c,
                                      std::size_t g_nodes, std::size_t t_c, bool knowledge,
                                      bool overlap, std::size_t trials, RngStream& rng) {
    if (n_c < 2 || n_s == 0 || trials == 0)
        throw ConfigError("lemma_ordering_sim: need n_c >= 2, n_s >= 1, trials >= 1");
    if (n_c > n_o) throw ConfigError("lemma_ordering_sim: n_c exceeds n_o");
    if (t_c > n_s) throw ConfigError("lemma_ordering_sim: t_c exceeds n_s");
    if (!overlap && n_s * n_c > n_o)
        throw ConfigError("lemma_ordering_sim: no-overlap needs n_s * n_c <= n_o");
    if (g_nodes == 0 || g_nodes > n_o)
        throw ConfigError("lemma_ordering_sim: g_nodes out of range");
    if (knowledge && g_nodes > n_s * n_c)
        throw ConfigError("lemma_ordering_sim: g_nodes exceeds set node budget");

    // True class is position 0; the adversary's goal is the fixed wrong class 1.
    constexpr std::size_t kTarget = 1;

    std::vector<std::vector<std::uint32_t>> sets(n_s);
    std::vector<std::uint8_t> maximized(n_o, 0);
    std::vector<std::size_t> set_order(n_s);
    std::size_t successes = 0;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        if (overlap) {
            for (auto& s : sets) s = rng.sample_without_replacement(n_o, n_c);
        } else {
            auto perm = rng.sample_without_replacement(n_o, n_s * n_c);
            for (std::size_t s = 0; s < n_s; ++s)
                sets[s].assign(perm.begin() + static_cast<long>(s * n_c),
                               perm.begin() + static_cast<long>((s + 1) * n_c));
        }

        std::fill(maximized.begin(), maximized.end(), 0);
        if (knowledge) {
            // One pick per set while budget lasts, extra picks as additional
            // distinct nodes within already-picked sets. Under overlap two
            // sets can select the same node; the node is simply maximized once.
            for (std::size_t s = 0; s < n_s; ++s) set_order[s] = s;
            rng.shuffle(set_order);
            std::size_t remaining = g_nodes;
            std::size_t per_set = g_nodes / n_s;
            std::size_t extra = g_nodes % n_s;
            for (std::size_t rank = 0; rank < n_s && remaining > 0; ++rank) {
                std::size_t want = std::min(n_c, per_set + (rank < extra ? 1 : 0));
                if (want == 0) continue;
                const auto& s = sets[set_order[rank]];
                auto positions = rng.sample_without_replacement(n_c, want);
                for (std::uint32_t k : positions) maximized[s[k]] = 1;
                remaining -= want;
            }
        } else {
            auto picks = rng.sample_without_replacement(n_o, g_nodes);
            for (std::uint32_t node : picks) maximized[node] = 1;
        }

        // Every maximized node shares the same raised value, above all honest
        // values, so within a set the lowest maximized position wins; a set
        // with no maximized node keeps voting the true class 0.
        std::size_t target_votes = 0;
        for (const auto& s : sets) {
            std::size_t vote = 0;
            for (std::size_t k = 0; k < n_c; ++k) {
                if (maximized[s[k]]) {
                    vote = k;
                    break;
                }
            }
            if (vote == kTarget) ++target_votes;
        }
        if (target_votes > t_c) ++successes;
    }
    return finish_estimate(successes, trials);
}

std::vector<std::size_t> threshold_grid(std::size_t max_value) {
    std::vector<std::size_t> grid(7);
    for (std::size_t i = 0; i < 7; ++i)
        grid[i] = static_cast<std::size_t>(
            std::lround(static_cast<double>(i) * static_cast<double>(max_value) / 6.0));
    return grid;
}

namespace {

struct RecordDigest {
    std::size_t m = 0;
    std::size_t max_distance = 0;
    bool is_attack = false;
    bool correct = false;
};

std::vector<RecordDigest> digest_records(const std::vector<CampaignRecord>& records) {
    std::vector<RecordDigest> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        RecordDigest d;
        d.m = rec.report.m;
        for (std::size_t dist : rec.report.distances) d.max_distance = std::max(d.max_distance, dist);
        d.is_attack = rec.behavior.kind != BehaviorKind::honest;
        d.correct = rec.report.unverified_label == rec.true_label;
        out.push_back(d);
    }
    return out;
}

bool rejected_at(const RecordDigest& d, std::size_t t_h, std::size_t t_c) {
    return d.m < t_c || d.max_distance > t_h;
}

}  // namespace

std::vector<RocPoint> roc_grid_eval(const std::vector<CampaignRecord>& records, std::size_t l,
                                    std::size_t n_s) {
    auto digests = digest_records(records);
    std::size_t attacks = 0, honest_n = 0;
    for (const auto& d : digests) (d.is_attack ? attacks : honest_n) += 1;
    if (attacks == 0 || honest_n == 0)
        throw ConfigError("roc: records must contain both honest and attack entries");

    auto th_grid = threshold_grid(l);
    auto tc_grid = threshold_grid(n_s);
    std::vector<RocPoint> points;
    points.reserve(49);
    for (std::size_t t_h : th_grid) {
        for (std::size_t t_c : tc_grid) {
            std::size_t detected = 0, false_alarms = 0;
            for (const auto& d : digests) {
                if (!rejected_at(d, t_h, t_c)) continue;
                (d.is_attack ? detected : false_alarms) += 1;
            }
            RocPoint pt;
            pt.t_h = t_h;
            pt.t_c = t_c;
            pt.tpr = static_cast<double>(detected) / static_cast<double>(attacks);
            pt.fpr = static_cast<double>(false_alarms) / static_cast<double>(honest_n);
            points.push_back(pt);
        }
    }
    return points;
}

std::vector<RocPoint> pareto_filter(std::vector<RocPoint> points) {
    std::vector<RocPoint> kept;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool drop = false;
        for (std::size_t j = 0; j < points.size() && !drop; ++j) {
            if (i == j) continue;
            bool no_worse = points[j].fpr <= points[i].fpr && points[j].tpr >= points[i].tpr;
            bool better = points[j].fpr < points[i].fpr || points[j].tpr > points[i].tpr;
            if (no_worse && better) drop = true;
            // Exact ties keep only the earliest grid entry.
            if (!drop && j < i && points[j].fpr == points[i].fpr && points[j].tpr == points[i].tpr)
                drop = true;
        }
        if (!drop) kept.push_back(points[i]);
    }
    std::sort(kept.begin(), kept.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr;
    });
    return kept;
}

double roc_auc(const std::vector<RocPoint>& points) {
    std::vector<std::pair<double, double>> pts;  // (fpr, tpr)
    pts.reserve(points.size() + 2);
    for (const auto& p : points) pts.push_back({p.fpr, p.tpr});
    pts.push_back({0.0, 0.0});
    pts.push_back({1.0, 1.0});
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        area += (pts[i + 1].first - pts[i].first) * (pts[i].second + pts[i + 1].second) * 0.5;
    return area;
}

RocResult roc(const std::vector<CampaignRecord>& records, std::size_t l, std::size_t n_s) {
    RocResult res;
    res.grid = roc_grid_eval(records, l, n_s);
    res.frontier = pareto_filter(res.grid);
    res.auc = roc_auc(res.frontier);
    return res;
}

std::vector<EffAccPoint> effective_accuracy(const std::vector<CampaignRecord>& records,
                                            std::size_t l, std::size_t n_s) {
    if (records.empty()) throw ConfigError("effective_accuracy: no records");
    auto digests = digest_records(records);
    bool has_attacks = std::any_of(digests.begin(), digests.end(),
                                   [](const RecordDigest& d) { return d.is_attack; });

    auto th_grid = threshold_grid(l);
    auto tc_grid = threshold_grid(n_s);
    std::vector<EffAccPoint> out;
    out.reserve(49);
    for (std::size_t t_h : th_grid) {
        for (std::size_t t_c : tc_grid) {
            EffAccPoint pt;
            pt.t_h = t_h;
            pt.t_c = t_c;
            std::size_t rejected = 0;
            for (const auto& d : digests) {
                if (has_attacks && !d.is_attack) continue;
                pt.population += 1;
                if (rejected_at(d, t_h, t_c)) {
                    rejected += 1;
                } else {
                    pt.accepted += 1;
                    if (d.correct) pt.accepted_correct += 1;
                }
            }
            pt.detected_defined = has_attacks;
            if (has_attacks)
                pt.detected_pct =
                    100.0 * static_cast<double>(rejected) / static_cast<double>(pt.population);
            pt.accuracy_defined = pt.accepted > 0;
            if (pt.accuracy_defined)
                pt.effective_accuracy =
                    static_cast<double>(pt.accepted_correct) / static_cast<double>(pt.accepted);
            out.push_back(pt);
        }
    }
    return out;
}

OverheadReport overhead_report(const ModelBundle& bundle) {
    OverheadReport r;
    const auto& layers = bundle.public_model.net.layers;
    if (layers.empty()) throw ConfigError("overhead_report: empty public model");
    r.d = bundle.public_model.input_dim();
    r.p = layers.back().w.cols;
    r.n_o = bundle.crosscheck.n_o;
    r.n_c = bundle.crosscheck.n_c;
    r.n_s = bundle.crosscheck.n_s;
    r.l = bundle.hashbank.l;
    r.n_h = bundle.hashbank.n_h();
    for (std::size_t li = 0; li + 1 < layers.size(); ++li)
        r.base_hidden_macs += layers[li].w.rows * layers[li].w.cols;
    r.unprotected_head_macs = r.n_c * r.p;
    r.expanded_head_macs = r.n_o * r.p;
    for (const auto& pair : bundle.hashbank.pairs) {
        r.hash_g_macs += pair.g.rows * pair.g.cols;
        r.hash_f_macs += mlp_macs(pair.f);
    }
    r.comm_bytes_protected = r.n_o * sizeof(double);
    r.comm_bytes_unprotected = r.n_c * sizeof(double);
    r.head_ratio = static_cast<double>(r.n_o) / static_cast<double>(r.n_c);
    r.comm_ratio = static_cast<double>(r.n_o) / static_cast<double>(r.n_c);
    double model_macs = static_cast<double>(r.base_hidden_macs + r.expanded_head_macs);
    r.hashcheck_to_model_ratio =
        static_cast<double>(r.hash_g_macs + r.hash_f_macs) / model_macs;
    return r;
}

std::string render_overhead(const OverheadReport& r) {
    std::ostringstream os;
    os << "model: d=" << r.d << " p=" << r.p << " n_o=" << r.n_o << " n_c=" << r.n_c
       << " n_s=" << r.n_s << " l=" << r.l << " n_h=" << r.n_h << "\n";
    os << "base hidden MACs:        " << r.base_hidden_macs << "\n";
    os << "unprotected head MACs:   " << r.unprotected_head_macs << " (n_c * p)\n";
    os << "expanded head MACs:      " << r.expanded_head_macs << " (n_o * p, ratio "
       << format_double(r.head_ratio) << "x)\n";
    os << "hashcheck g MACs:        " << r.hash_g_macs << " (n_h * l * n_o)\n";
    os << "hashcheck f MACs:        " << r.hash_f_macs << "\n";
    os << "hashcheck-to-model MAC ratio: " << format_double(r.hashcheck_to_model_ratio) << "\n";
    os << "communication bytes:     " << r.comm_bytes_protected << " vs "
       << r.comm_bytes_unprotected << " unprotected (ratio " << format_double(r.comm_ratio)
       << "x)\n";
    return os.str();
}

std::string render_bounds(std::size_t l, std::size_t t_h, std::size_t n_s, std::size_t n_c,
                          std::size_t t_c) {
    std::ostringstream os;
    os << "hashcheck bound, printed form  1-F(l-T_h; l, 1/2)   = "
       << format_double(hashcheck_bound(l, t_h)) << "  (l=" << l << ", T_h=" << t_h << ")\n";
    os << "hashcheck bound, inclusive     1-F(l-T_h-1; l, 1/2) = "
       << format_double(hashcheck_bound_inclusive(l, t_h)) << "  (l=" << l << ", T_h=" << t_h
       << ")\n";
    os << "crosscheck bound               1-F(T_c; N_s, 1/N_c) = "
       << format_double(crosscheck_bound(n_s, n_c, t_c)) << "  (N_s=" << n_s << ", N_c=" << n_c
       << ", T_c=" << t_c << ")\n";
    os << "note: the printed hashcheck summation limit covers distances strictly below\n"
          "T_h, while the accept rule also passes distances equal to T_h; the inclusive\n"
          "variant covers the accept rule's event. The crosscheck bound's success event\n"
          "is votes > T_c, whereas acceptance uses m >= T_c.\n";
    return os.str();
}

std::string roc_points_csv(const std::vector<RocPoint>& points) {
    std::string out = "T_h,T_c,TPR,FPR\n";
    for (const auto& p : points) {
        out += std::to_string(p.t_h) + ',' + std::to_string(p.t_c) + ',' + format_double(p.tpr) +
               ',' + format_double(p.fpr) + '\n';
    }
    return out;
}

std::string effacc_csv(const std::vector<EffAccPoint>& points) {
    std::string out =
        "T_h,T_c,population,accepted,detected_pct,effective_accuracy,accuracy_defined\n";
    for (const auto& p : points) {
        out += std::to_string(p.t_h) + ',' + std::to_string(p.t_c) + ',' +
               std::to_string(p.population) + ',' + std::to_string(p.accepted) + ',' +
               format_double(p.detected_pct) + ',' +
               (p.accuracy_defined ? format_double(p.effective_accuracy) : std::string("nan")) +
               ',' + (p.accuracy_defined ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace checknet
