#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "checknet/public_model.hpp"
#include "checknet/verifier.hpp"

namespace checknet {

// ---------------------------------------------------------------------------
// Simulated third party. Everything in this section sees only the public
// model (or cached outputs of it) — never the bundle's private half.
// ---------------------------------------------------------------------------

enum class BehaviorKind { honest, random, targeted, replay };

const char* behavior_name(BehaviorKind kind);
BehaviorKind behavior_from_name(const std::string& name);

struct WorkerBehavior {
    BehaviorKind kind = BehaviorKind::honest;
    std::size_t targeted_n = 1;  // nodes raised by the targeted attack
};

// Per-node Gaussian fit of honest outputs, used by the random attack.
struct OutputStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool fitted = false;
};

OutputStats fit_output_stats(const DenseMatrix& honest_outputs);

// The worker running the inference normally.
std::vector<double> honest(const PublicModel& model, std::span<const double> x);

// Each node drawn independently from the fitted per-node Gaussian; the input
// is ignored entirely.
std::vector<double> random_attack(const OutputStats& stats, RngStream& rng);

// Raises n uniformly chosen nodes to max(y) plus a 5% margin of the honest
// output range. n = 0 degenerates to the honest output.
std::vector<double> targeted_attack(const PublicModel& model, std::span<const double> x,
                                    std::size_t n, RngStream& rng);

struct ReplayResult {
    std::vector<double> y;
    std::size_t source_index = 0;
};

// A valid output computed for a uniformly chosen different sample.
ReplayResult replay_attack(const DenseMatrix& honest_cache, std::size_t exclude_index,
                           RngStream& rng);

// ---------------------------------------------------------------------------
// Campaign orchestration (verifier side; needs the full bundle to verify).
// ---------------------------------------------------------------------------

struct CampaignRecord {
    std::size_t id = 0;
    std::size_t sample_index = 0;
    int true_label = 0;
    WorkerBehavior behavior;
    std::vector<double> y;
    VerificationReport report;
    long replay_source = -1;
    bool replay_label_differs = false;
};

struct BehaviorShare {
    WorkerBehavior behavior;
    double weight = 1.0;
};

struct CampaignConfig {
    std::vector<BehaviorShare> mix = {{WorkerBehavior{}, 1.0}};
    std::size_t samples = 1000;
    std::optional<Thresholds> thresholds;  // defaults to the bundle's
};

// One record per scheduled query. The behavior schedule honors the mix with
// exact largest-remainder counts, then shuffles. Samples cycle through the
// evaluation split in order; records are ordered by id.
std::vector<CampaignRecord> run_campaign(const ModelBundle& bundle, const Dataset& eval_split,
                                         const OutputStats& stats, const CampaignConfig& config,
                                         RngStream& rng);

// Records file: first line is a metadata object, then one record per line.
void write_records(const std::string& path, const std::vector<CampaignRecord>& records,
                   const ModelBundle& bundle);

struct RecordsFile {
    std::vector<CampaignRecord> records;
    std::size_t l = 0;
    std::size_t n_s = 0;
    std::size_t n_h = 0;
    Thresholds bundle_thresholds;
};

RecordsFile read_records(const std::string& path);

// ---------------------------------------------------------------------------
// Wire mode: newline-delimited JSON over a local TCP stream.
// Request {"id": n, "x": [...]}, response {"id": n, "y": [...]}.
// ---------------------------------------------------------------------------

class WireWorkerServer {
  public:
    // Binds immediately; port 0 picks an ephemeral port.
    WireWorkerServer(PublicModel model, WorkerBehavior behavior, std::uint64_t seed,
                     std::uint16_t port);
    ~WireWorkerServer();

    WireWorkerServer(const WireWorkerServer&) = delete;
    WireWorkerServer& operator=(const WireWorkerServer&) = delete;

    std::uint16_t port() const { return port_; }
    // Serves exactly one client connection until it disconnects.
    void serve_one_client();

  private:
    std::string handle_line(const std::string& line);

    PublicModel model_;
    WorkerBehavior behavior_;
    RngStream rng_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    // Running cache of honest outputs; feeds replay and the random-attack fit.
    std::vector<std::vector<double>> seen_outputs_;
};

class WireWorkerClient {
  public:
    WireWorkerClient(const std::string& host, std::uint16_t port);
    ~WireWorkerClient();

    WireWorkerClient(const WireWorkerClient&) = delete;
    WireWorkerClient& operator=(const WireWorkerClient&) = delete;

    std::vector<double> query(std::size_t id, std::span<const double> x);

  private:
    int fd_ = -1;
    std::string buffer_;
};

// Campaign over the wire. All records carry `served_behavior` as ground
// truth — the label the remote worker was launched with.
std::vector<CampaignRecord> run_wire_campaign(const ModelBundle& bundle,
                                              const Dataset& eval_split,
                                              const std::string& host, std::uint16_t port,
                                              const WorkerBehavior& served_behavior,
                                              std::size_t samples,
                                              std::optional<Thresholds> thresholds);

}  // namespace checknet
