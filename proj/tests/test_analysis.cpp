#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "checknet/analysis.hpp"
#include "oracles.hpp"

using namespace checknet;

namespace {

// Hand-built records: honest entries score (m, max distance) = clean, attack
// entries dirty, so grid decisions are fully predictable.
CampaignRecord make_record(bool attack, std::size_t m, std::vector<std::size_t> distances,
                           int true_label, int unverified_label) {
    CampaignRecord rec;
    rec.behavior.kind = attack ? BehaviorKind::random : BehaviorKind::honest;
    rec.true_label = true_label;
    rec.report.m = m;
    rec.report.distances = std::move(distances);
    rec.report.unverified_label = unverified_label;
    return rec;
}

}  // namespace

TEST_CASE("binomial_cdf: boundary conventions and exact small cases") {
    CHECK(binomial_cdf(4, 4, 0.3) == 1.0);
    CHECK(binomial_cdf(7, 4, 0.3) == 1.0);
    CHECK(binomial_cdf(-1, 4, 0.3) == 0.0);
    CHECK(binomial_cdf(0, 4, 0.5) == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
    CHECK(binomial_cdf(2, 4, 1.0 / 3.0) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(binomial_cdf(2, 5, 0.0) == 1.0);
    CHECK(binomial_cdf(2, 5, 1.0) == 0.0);
    CHECK_THROWS_AS(binomial_cdf(2, 5, 1.5), ConfigError);
}

TEST_CASE("binomial_cdf matches the exact-rational oracle to 1e-12") {
    // Unit-scale sweep; the acceptance suite runs the full l, n_s <= 64 grid.
    for (std::size_t n : {1, 2, 7, 16, 33, 64}) {
        for (unsigned den : {2u, 3u, 7u, 10u}) {
            for (long long k = 0; k <= static_cast<long long>(n); ++k) {
                double got = binomial_cdf(k, n, 1.0 / static_cast<double>(den));
                double want = testing::oracle_binomial_cdf(k, n, 1, den).convert_to<double>();
                CHECK(std::abs(got - want) <= 1e-12);
            }
        }
    }
}

TEST_CASE("hashcheck_bound: printed formula cases") {
    CHECK(hashcheck_bound(4, 1) == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
    // T_h = l: the literal formula leaves only the zero-matches term.
    CHECK(hashcheck_bound(8, 8) == doctest::Approx(1.0 - std::pow(2.0, -8.0)).epsilon(1e-12));
    CHECK(hashcheck_bound(64, 16) <= 1e-4);
    CHECK_THROWS_AS(hashcheck_bound(4, 5), ConfigError);

    // Inclusive variant equals the symmetric CDF at T_h and dominates printed.
    for (std::size_t l : {4u, 16u, 32u}) {
        for (std::size_t t_h = 0; t_h <= l; ++t_h) {
            double printed = hashcheck_bound(l, t_h);
            double inclusive = hashcheck_bound_inclusive(l, t_h);
            CHECK(inclusive >= printed);
            CHECK(inclusive ==
                  doctest::Approx(binomial_cdf(static_cast<long long>(t_h), l, 0.5))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("crosscheck_bound: exact case, endpoint, monotonicity") {
    CHECK(crosscheck_bound(4, 3, 2) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(crosscheck_bound(10, 4, 10) == 0.0);
    for (std::size_t t_c = 0; t_c < 10; ++t_c)
        CHECK(crosscheck_bound(10, 4, t_c + 1) <= crosscheck_bound(10, 4, t_c));
    CHECK_THROWS_AS(crosscheck_bound(4, 1, 2), ConfigError);
    CHECK_THROWS_AS(crosscheck_bound(4, 3, 5), ConfigError);
}

TEST_CASE("bounds against the oracle across a parameter sweep") {
    for (std::size_t l = 1; l <= 64; l += 7) {
        for (std::size_t t_h = 0; t_h <= l; t_h += 3) {
            CHECK(std::abs(hashcheck_bound(l, t_h) - testing::oracle_hashcheck_bound(l, t_h)) <=
                  1e-12);
            CHECK(std::abs(hashcheck_bound_inclusive(l, t_h) -
                           testing::oracle_hashcheck_bound_inclusive(l, t_h)) <= 1e-12);
        }
    }
    for (std::size_t n_s = 1; n_s <= 64; n_s += 9) {
        for (std::size_t n_c : {2u, 3u, 10u}) {
            for (std::size_t t_c = 0; t_c <= n_s; t_c += 2) {
                CHECK(std::abs(crosscheck_bound(n_s, n_c, t_c) -
                               testing::oracle_crosscheck_bound(n_s, n_c, t_c)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("hashcheck_guess_sim tracks the inclusive bound") {
    RngStream rng(501, "guess");
    auto est = hashcheck_guess_sim(16, 4, 50000, rng);
    double expect = hashcheck_bound_inclusive(16, 4);  // P(distance <= 4) under fair bits
    CHECK(std::abs(est.rate - expect) <= 4.0 * est.se + 1e-9);
    // The printed formula covers the strict event and undercounts this one.
    CHECK(est.rate > hashcheck_bound(16, 4) + 3.0 * est.se);
}

TEST_CASE("lemma sim: no-overlap knowledge matches the closed form") {
    const std::size_t trials = 40000;
    RngStream rng(503, "lemma");
    auto est = lemma_ordering_sim(12, 4, 3, 4, 2, true, false, trials, rng);
    double bound = crosscheck_bound(4, 3, 2);
    CHECK(std::abs(est.rate - bound) <= 3.0 * est.se);
}

TEST_CASE("lemma sim: knowledge and overlap orderings") {
    const std::size_t trials = 40000;
    auto run = [&](bool knowledge, bool overlap, const char* tag) {
        RngStream rng(505, std::string("lemma/") + tag);
        return lemma_ordering_sim(12, 4, 3, 4, 1, knowledge, overlap, trials, rng);
    };
    auto overlap_no_knowledge = run(false, true, "onk");
    auto overlap_knowledge = run(true, true, "ok");
    auto no_overlap_knowledge = run(true, false, "nok");

    double se3 = 3.0 * std::max({overlap_no_knowledge.se, overlap_knowledge.se,
                                 no_overlap_knowledge.se});
    CHECK(overlap_no_knowledge.rate <= overlap_knowledge.rate + se3);
    CHECK(overlap_knowledge.rate <= no_overlap_knowledge.rate + se3);
}

TEST_CASE("lemma sim rejects infeasible configurations") {
    RngStream rng(507, "lemma");
    CHECK_THROWS_AS(lemma_ordering_sim(10, 4, 3, 4, 2, true, false, 10, rng), ConfigError);
    CHECK_THROWS_AS(lemma_ordering_sim(12, 4, 3, 0, 2, true, true, 10, rng), ConfigError);
    CHECK_THROWS_AS(lemma_ordering_sim(12, 4, 1, 4, 0, true, true, 10, rng), ConfigError);
}

TEST_CASE("threshold grid: seven evenly spaced integers") {
    CHECK(threshold_grid(64) == std::vector<std::size_t>{0, 11, 21, 32, 43, 53, 64});
    CHECK(threshold_grid(32) == std::vector<std::size_t>{0, 5, 11, 16, 21, 27, 32});
    CHECK(threshold_grid(10) == std::vector<std::size_t>{0, 2, 3, 5, 7, 8, 10});
}

TEST_CASE("roc grid: 49 pairs, perfect separation, error without both classes") {
    std::vector<CampaignRecord> records;
    for (int i = 0; i < 40; ++i) records.push_back(make_record(false, 10, {0, 0}, 0, 0));
    for (int i = 0; i < 40; ++i) records.push_back(make_record(true, 0, {32, 32}, 0, 1));

    auto result = roc(records, 32, 10);
    CHECK(result.grid.size() == 49);
    CHECK(result.auc == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<CampaignRecord> honest_only(records.begin(), records.begin() + 40);
    CHECK_THROWS_AS(roc(honest_only, 32, 10), ConfigError);
}

TEST_CASE("hand-computed three-point AUC is 0.9") {
    std::vector<RocPoint> pts(3);
    pts[0] = {0, 0, 0.0, 0.0};
    pts[1] = {0, 0, 0.9, 0.1};
    pts[2] = {0, 0, 1.0, 1.0};
    CHECK(std::abs(roc_auc(pts) - 0.9) <= 1e-12);
    // Anchors are appended when missing.
    std::vector<RocPoint> middle = {pts[1]};
    CHECK(std::abs(roc_auc(middle) - 0.9) <= 1e-12);
}

TEST_CASE("pareto filter keeps only the frontier, strictly monotone") {
    RngStream rng(509, "pareto");
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<RocPoint> pts;
        std::size_t n = 5 + rng.uniform_index(60);
        for (std::size_t i = 0; i < n; ++i) {
            RocPoint p;
            p.tpr = rng.uniform();
            p.fpr = rng.uniform();
            pts.push_back(p);
        }
        auto kept = pareto_filter(pts);
        REQUIRE(!kept.empty());
        for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
            CHECK(kept[i].fpr < kept[i + 1].fpr);
            CHECK(kept[i].tpr < kept[i + 1].tpr);
        }
        // No survivor is dominated by any original point.
        for (const auto& k : kept) {
            for (const auto& p : pts) {
                bool dominates = p.fpr <= k.fpr && p.tpr >= k.tpr &&
                                 (p.fpr < k.fpr || p.tpr > k.tpr);
                CHECK_FALSE(dominates);
            }
        }
    }
}

TEST_CASE("label-shuffled records score near 0.5 AUC") {
    RngStream rng(511, "shuffle");
    std::vector<CampaignRecord> records;
    for (int i = 0; i < 2000; ++i) {
        // scores drawn independently of the label: the shuffled null
        bool attack = rng.uniform() < 0.5;
        std::size_t m = rng.uniform_index(11);
        std::size_t d = rng.uniform_index(33);
        records.push_back(make_record(attack, m, {d}, 0, 0));
    }
    auto result = roc(records, 32, 10);
    CHECK(result.auc >= 0.45);
    CHECK(result.auc <= 0.55);
}

TEST_CASE("effective accuracy: all-rejected flag and honest-only fallback") {
    // Attacks with terrible scores: everything rejected at strict points.
    std::vector<CampaignRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(make_record(true, 0, {32}, 1, 0));
    for (int i = 0; i < 10; ++i) records.push_back(make_record(false, 10, {0}, 1, 1));
    auto points = effective_accuracy(records, 32, 10);
    REQUIRE(points.size() == 49);
    for (const auto& pt : points) {
        CHECK(pt.population == 10);  // attacks only
        if (pt.t_c > 0 || pt.t_h < 32) {
            CHECK(pt.accepted == 0);
            CHECK_FALSE(pt.accuracy_defined);
            CHECK(pt.detected_pct == 100.0);
        } else {
            // laxest corner accepts everything; these attacks all misclassify
            CHECK(pt.accepted == 10);
            CHECK(pt.accuracy_defined);
            CHECK(pt.effective_accuracy == 0.0);
        }
    }

    // Honest-only records: population falls back to all records and the
    // laxest point reproduces plain test accuracy.
    std::vector<CampaignRecord> honest;
    for (int i = 0; i < 8; ++i) honest.push_back(make_record(false, 10, {0}, 1, i % 2));
    auto hp = effective_accuracy(honest, 32, 10);
    const EffAccPoint* laxest = nullptr;
    for (const auto& pt : hp)
        if (pt.t_h == 32 && pt.t_c == 0) laxest = &pt;
    REQUIRE(laxest != nullptr);
    CHECK_FALSE(laxest->detected_defined);
    CHECK(laxest->accuracy_defined);
    CHECK(laxest->effective_accuracy == doctest::Approx(0.5));
}

TEST_CASE("overhead report: head and communication ratios") {
    ModelBundle bundle;
    // base 8 -> 16 -> 12(p) -> head 40
    RngStream rng(513, "overhead");
    bundle.public_model.net = init_mlp({8, 16, 12, 40}, rng);
    bundle.crosscheck.n_o = 40;
    bundle.crosscheck.n_c = 10;
    bundle.crosscheck.n_s = 10;
    bundle.crosscheck.sets.assign(10, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    bundle.hashbank.l = 32;
    RngStream grng(513, "g");
    for (int i = 0; i < 3; ++i) {
        HashPair pair;
        pair.g = sample_g(grng, 32, 40);
        pair.f = init_mlp({8, 16, 32}, grng);
        bundle.hashbank.pairs.push_back(std::move(pair));
    }

    auto r = overhead_report(bundle);
    CHECK(r.base_hidden_macs == 8 * 16 + 16 * 12);
    CHECK(r.unprotected_head_macs == 10 * 12);
    CHECK(r.expanded_head_macs == 40 * 12);
    CHECK(r.head_ratio == doctest::Approx(4.0));
    CHECK(r.comm_ratio == doctest::Approx(4.0));
    CHECK(r.comm_bytes_protected == 40 * 8);
    CHECK(r.comm_bytes_unprotected == 10 * 8);
    CHECK(r.hash_g_macs == 3 * 32 * 40);
    CHECK(r.hash_f_macs == 3 * (8 * 16 + 16 * 32));
    // Forward-pass MAC accounting agrees with the analytic layer-size sum.
    CHECK(mlp_macs(bundle.public_model.net) == r.base_hidden_macs + r.expanded_head_macs);

    auto text = render_overhead(r);
    CHECK(text.find("ratio 4x") != std::string::npos);
    auto bounds_text = render_bounds(32, 8, 10, 10, 6);
    CHECK(bounds_text.find("note:") != std::string::npos);
}

TEST_CASE("monte carlo estimate bookkeeping") {
    RngStream rng(517, "mc");
    auto est = hashcheck_guess_sim(8, 8, 1000, rng);
    CHECK(est.rate == 1.0);  // T_h = l always passes
    CHECK(est.se == 0.0);
    CHECK(est.successes == 1000);
}
