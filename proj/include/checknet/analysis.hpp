#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "checknet/verifier.hpp"
#include "checknet/worker.hpp"

namespace checknet {

// P(X <= k) for X ~ Binomial(n, p). Exact summation of log-domain terms.
// Conventions: k < 0 -> 0, k >= n -> 1.
double binomial_cdf(long long k, std::size_t n, double p);

// Probability a random bithash guess subverts one HashCheck pair, as printed:
// 1 - F(l - T_h; l, 1/2). The printed summation limit covers distances
// strictly below T_h; see hashcheck_bound_inclusive for the <=-T_h event.
double hashcheck_bound(std::size_t l, std::size_t t_h);

// Variant consistent with the accept rule distance <= T_h ("at least l - T_h
// bits match"): 1 - F(l - T_h - 1; l, 1/2).
double hashcheck_bound_inclusive(std::size_t l, std::size_t t_h);

// Upper bound on subverting CrossCheck: 1 - F(T_c; N_s, 1/N_c).
double crosscheck_bound(std::size_t n_s, std::size_t n_c, std::size_t t_c);

struct MonteCarloEstimate {
    std::size_t trials = 0;
    std::size_t successes = 0;
    double rate = 0.0;
    double se = 0.0;  // sqrt(rate * (1 - rate) / trials)
};

// Random-guess attack against one hash pair: both codes drawn uniformly,
// success when hamming <= t_h (the accept rule's event).
MonteCarloEstimate hashcheck_guess_sim(std::size_t l, std::size_t t_h, std::size_t trials,
                                       RngStream& rng);

// CrossCheck attacker simulation for the lemma orderings. The adversary
// maximizes g_nodes nodes trying to move the vote to a fixed wrong class.
// knowledge=true models the adversary who knows the set memberships and
// spreads picks one per set; knowledge=false picks blindly among all n_o
// nodes. overlap=false partitions nodes into disjoint sets (requires
// n_s * n_c <= n_o). Success: votes for the target class strictly exceed t_c.
MonteCarloEstimate lemma_ordering_sim(std::size_t n_o, std::size_t n_s, std::size_t n_c,
                                      std::size_t g_nodes, std::size_t t_c, bool knowledge,
                                      bool overlap, std::size_t trials, RngStream& rng);

struct RocPoint {
    std::size_t t_h = 0;
    std::size_t t_c = 0;
    double tpr = 0.0;  // attacks rejected / attacks
    double fpr = 0.0;  // honest rejected / honest
};

// Seven evenly spaced integers over [0, max], endpoints included.
std::vector<std::size_t> threshold_grid(std::size_t max_value);

// All 7x7 grid points evaluated from the stored per-record distances and m —
// no re-inference.
std::vector<RocPoint> roc_grid_eval(const std::vector<CampaignRecord>& records, std::size_t l,
                                    std::size_t n_s);

// Drops points with a strictly worse TPR/FPR trade-off; result is sorted by
// FPR with strictly increasing TPR.
std::vector<RocPoint> pareto_filter(std::vector<RocPoint> points);

// Trapezoidal area with (0,0) and (1,1) anchors appended.
double roc_auc(const std::vector<RocPoint>& points);

struct RocResult {
    std::vector<RocPoint> grid;      // all 49 evaluated pairs
    std::vector<RocPoint> frontier;  // Pareto-filtered curve
    double auc = 0.0;
};

RocResult roc(const std::vector<CampaignRecord>& records, std::size_t l, std::size_t n_s);

struct EffAccPoint {
    std::size_t t_h = 0;
    std::size_t t_c = 0;
    std::size_t population = 0;  // attack records, or all records if no attacks
    std::size_t accepted = 0;
    std::size_t accepted_correct = 0;
    bool detected_defined = false;
    double detected_pct = 0.0;  // rejected / population, in percent
    bool accuracy_defined = false;
    double effective_accuracy = 0.0;  // accuracy of unverified label on accepted
};

// Effective accuracy per grid point: accuracy on the attack samples that are
// not rejected. With honest-only records the population falls back to all
// records (accuracy at the laxest point is then plain test accuracy).
std::vector<EffAccPoint> effective_accuracy(const std::vector<CampaignRecord>& records,
                                            std::size_t l, std::size_t n_s);

struct OverheadReport {
    std::size_t d = 0, p = 0, n_o = 0, n_c = 0, n_s = 0, l = 0, n_h = 0;
    std::size_t base_hidden_macs = 0;      // shared trunk, head excluded
    std::size_t unprotected_head_macs = 0;  // n_c * p
    std::size_t expanded_head_macs = 0;     // n_o * p
    std::size_t hash_g_macs = 0;            // n_h * l * n_o
    std::size_t hash_f_macs = 0;            // n_h * (d*hidden + hidden*l)
    std::size_t comm_bytes_protected = 0;   // n_o * 8
    std::size_t comm_bytes_unprotected = 0; // n_c * 8
    double head_ratio = 0.0;                // n_o / n_c
    double comm_ratio = 0.0;                // n_o / n_c
    double hashcheck_to_model_ratio = 0.0;  // hash MACs / full protected model MACs
};

OverheadReport overhead_report(const ModelBundle& bundle);

std::string render_overhead(const OverheadReport& report);

// Bound table for both Theorem-1 variants plus the CrossCheck bound, with the
// footnote about the printed summation limit.
std::string render_bounds(std::size_t l, std::size_t t_h, std::size_t n_s, std::size_t n_c,
                          std::size_t t_c);

// CSV serialization (header row included).
std::string roc_points_csv(const std::vector<RocPoint>& points);
std::string effacc_csv(const std::vector<EffAccPoint>& points);

}  // namespace checknet
