#include "checknet/worker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "checknet/serialize.hpp"

namespace checknet {

const char* behavior_name(BehaviorKind kind) {
    switch (kind) {
        case BehaviorKind::honest: return "honest";
        case BehaviorKind::random: return "random";
        case BehaviorKind::targeted: return "targeted";
        case BehaviorKind::replay: return "replay";
    }
    return "unknown";
}

BehaviorKind behavior_from_name(const std::string& name) {
    if (name == "honest") return BehaviorKind::honest;
    if (name == "random") return BehaviorKind::random;
    if (name == "targeted") return BehaviorKind::targeted;
    if (name == "replay") return BehaviorKind::replay;
    throw ConfigError("unknown behavior: " + name);
}

OutputStats fit_output_stats(const DenseMatrix& honest_outputs) {
    if (honest_outputs.rows == 0) throw ConfigError("fit_output_stats: no outputs");
    OutputStats stats;
    std::size_t n = honest_outputs.rows, d = honest_outputs.cols;
    stats.mean.assign(d, 0.0);
    stats.stddev.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = honest_outputs.row(i);
        for (std::size_t j = 0; j < d; ++j) stats.mean[j] += row[j];
    }
    for (double& m : stats.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = honest_outputs.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            double diff = row[j] - stats.mean[j];
            stats.stddev[j] += diff * diff;
        }
    }
    for (double& s : stats.stddev) s = std::sqrt(s / static_cast<double>(n));
    stats.fitted = true;
    return stats;
}

std::vector<double> honest(const PublicModel& model, std::span<const double> x) {
    return model.forward(x);
}

std::vector<double> random_attack(const OutputStats& stats, RngStream& rng) {
    if (!stats.fitted) throw ConfigError("random_attack: stats not fitted");
    std::vector<double> y(stats.mean.size());
    for (std::size_t j = 0; j < y.size(); ++j)
        y[j] = stats.mean[j] + stats.stddev[j] * rng.normal();
    return y;
}

std::vector<double> targeted_attack(const PublicModel& model, std::span<const double> x,
                                    std::size_t n, RngStream& rng) {
    auto y = model.forward(x);
    if (n > y.size()) throw ConfigError("targeted_attack: n exceeds output width");
    if (n == 0) return y;
    auto [mn_it, mx_it] = std::minmax_element(y.begin(), y.end());
    double raised = *mx_it + 0.05 * (*mx_it - *mn_it);
    auto picks = rng.sample_without_replacement(y.size(), n);
    for (std::uint32_t idx : picks) y[idx] = raised;
    return y;
}

ReplayResult replay_attack(const DenseMatrix& honest_cache, std::size_t exclude_index,
                           RngStream& rng) {
    if (honest_cache.rows < 2) throw ConfigError("replay_attack: cache too small");
    std::size_t pick = rng.uniform_index(honest_cache.rows - 1);
    if (pick >= exclude_index) ++pick;
    ReplayResult res;
    res.source_index = pick;
    auto row = honest_cache.row(pick);
    res.y.assign(row.begin(), row.end());
    return res;
}

namespace {

// Largest-remainder apportionment so mix counts are exact.
std::vector<std::size_t> mix_counts(const std::vector<BehaviorShare>& mix, std::size_t total) {
    double weight_sum = 0.0;
    for (const auto& share : mix) {
        if (share.weight < 0.0) throw ConfigError("campaign: negative mix weight");
        weight_sum += share.weight;
    }
    if (weight_sum <= 0.0) throw ConfigError("campaign: mix weights sum to zero");
    std::vector<std::size_t> counts(mix.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        double exact = static_cast<double>(total) * mix[i].weight / weight_sum;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) counts[remainders[k].second] += 1;
    return counts;
}

}  // namespace

std::vector<CampaignRecord> run_campaign(const ModelBundle& bundle, const Dataset& eval_split,
                                         const OutputStats& stats, const CampaignConfig& config,
                                         RngStream& rng) {
    if (eval_split.size() == 0) throw ConfigError("campaign: empty evaluation split");
    if (config.samples == 0) throw ConfigError("campaign: zero samples");
    bool wants_random = false, wants_replay = false;
    for (const auto& share : config.mix) {
        wants_random |= share.behavior.kind == BehaviorKind::random;
        wants_replay |= share.behavior.kind == BehaviorKind::replay;
        if (share.behavior.kind == BehaviorKind::targeted &&
            (share.behavior.targeted_n < 1 || share.behavior.targeted_n > bundle.crosscheck.n_o))
            throw ConfigError("campaign: targeted n out of range");
    }
    if (wants_random && !stats.fitted) throw ConfigError("campaign: random attack needs fitted stats");

    // Behavior schedule: exact counts, then a seeded shuffle.
    auto counts = mix_counts(config.mix, config.samples);
    std::vector<WorkerBehavior> schedule;
    schedule.reserve(config.samples);
    for (std::size_t i = 0; i < config.mix.size(); ++i)
        schedule.insert(schedule.end(), counts[i], config.mix[i].behavior);
    RngStream schedule_rng = rng.child("schedule");
    schedule_rng.shuffle(schedule);

    // Honest outputs for the split, cached once: they are the replay source
    // and the baseline for every behavior.
    DenseMatrix honest_cache(eval_split.size(), bundle.crosscheck.n_o);
    for (std::size_t i = 0; i < eval_split.size(); ++i) {
        auto y = honest(bundle.public_model, eval_split.inputs.row(i));
        std::copy(y.begin(), y.end(), honest_cache.row(i).begin());
    }
    if (wants_replay && eval_split.size() < 2)
        throw ConfigError("campaign: replay needs at least two samples");

    RngStream attack_rng = rng.child("attack");
    std::vector<CampaignRecord> records;
    records.reserve(config.samples);
    for (std::size_t id = 0; id < config.samples; ++id) {
        std::size_t i = id % eval_split.size();
        CampaignRecord rec;
        rec.id = id;
        rec.sample_index = i;
        rec.true_label = eval_split.labels[i];
        rec.behavior = schedule[id];
        switch (rec.behavior.kind) {
            case BehaviorKind::honest: {
                auto row = honest_cache.row(i);
                rec.y.assign(row.begin(), row.end());
                break;
            }
            case BehaviorKind::random:
                rec.y = random_attack(stats, attack_rng);
                break;
            case BehaviorKind::targeted:
                rec.y = targeted_attack(bundle.public_model, eval_split.inputs.row(i),
                                        rec.behavior.targeted_n, attack_rng);
                break;
            case BehaviorKind::replay: {
                auto rr = replay_attack(honest_cache, i, attack_rng);
                rec.y = std::move(rr.y);
                rec.replay_source = static_cast<long>(rr.source_index);
                rec.replay_label_differs =
                    eval_split.labels[rr.source_index] != eval_split.labels[i];
                break;
            }
        }
        rec.report = verify(bundle, eval_split.inputs.row(i), rec.y, config.thresholds);
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

nlohmann::json record_to_json(const CampaignRecord& rec) {
    nlohmann::json rj = {
        {"id", rec.id},
        {"sample_index", rec.sample_index},
        {"true_label", rec.true_label},
        {"behavior", behavior_name(rec.behavior.kind)},
        {"y", vector_to_json(rec.y)},
        {"report",
         {{"unverified_label", rec.report.unverified_label},
          {"votes", rec.report.votes},
          {"m", rec.report.m},
          {"distances", rec.report.distances},
          {"passes", rec.report.passes},
          {"crosscheck_pass", rec.report.crosscheck_pass},
          {"accepted", rec.report.accepted}}},
    };
    if (rec.behavior.kind == BehaviorKind::targeted) rj["targeted_n"] = rec.behavior.targeted_n;
    if (rec.behavior.kind == BehaviorKind::replay) {
        rj["replay_source"] = rec.replay_source;
        rj["replay_label_differs"] = rec.replay_label_differs;
    }
    return rj;
}

CampaignRecord record_from_json(const nlohmann::json& rj) {
    CampaignRecord rec;
    rec.id = rj.at("id").get<std::size_t>();
    rec.sample_index = rj.at("sample_index").get<std::size_t>();
    rec.true_label = rj.at("true_label").get<int>();
    rec.behavior.kind = behavior_from_name(rj.at("behavior").get<std::string>());
    if (rj.contains("targeted_n")) rec.behavior.targeted_n = rj.at("targeted_n").get<std::size_t>();
    rec.y = vector_from_json(rj.at("y"));
    const auto& rep = rj.at("report");
    rec.report.unverified_label = rep.at("unverified_label").get<int>();
    rec.report.votes = rep.at("votes").get<std::vector<int>>();
    rec.report.m = rep.at("m").get<std::size_t>();
    rec.report.distances = rep.at("distances").get<std::vector<std::size_t>>();
    rec.report.passes = rep.at("passes").get<std::vector<bool>>();
    rec.report.crosscheck_pass = rep.at("crosscheck_pass").get<bool>();
    rec.report.accepted = rep.at("accepted").get<bool>();
    if (rj.contains("replay_source")) {
        rec.replay_source = rj.at("replay_source").get<long>();
        rec.replay_label_differs = rj.at("replay_label_differs").get<bool>();
    }
    return rec;
}

}  // namespace

void write_records(const std::string& path, const std::vector<CampaignRecord>& records,
                   const ModelBundle& bundle) {
    std::ofstream out(path);
    if (!out) throw IoError("write_records: cannot open " + path);
    nlohmann::json meta = {
        {"kind", "checknet.records"},
        {"format_version", 1},
        {"l", bundle.hashbank.l},
        {"n_s", bundle.crosscheck.n_s},
        {"n_h", bundle.hashbank.n_h()},
        {"thresholds", {{"t_h", bundle.thresholds.t_h}, {"t_c", bundle.thresholds.t_c}}},
        {"count", records.size()},
    };
    out << meta.dump() << '\n';
    for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
    if (!out) throw IoError("write_records: write failed for " + path);
}

RecordsFile read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_records: cannot open " + path);
    RecordsFile rf;
    std::string line;
    if (!std::getline(in, line)) throw IoError("read_records: empty file " + path);
    try {
        nlohmann::json meta = nlohmann::json::parse(line);
        if (meta.value("kind", "") != "checknet.records")
            throw IoError("read_records: wrong kind field");
        if (meta.value("format_version", -1) != 1)
            throw IoError("read_records: unsupported format version");
        rf.l = meta.at("l").get<std::size_t>();
        rf.n_s = meta.at("n_s").get<std::size_t>();
        rf.n_h = meta.at("n_h").get<std::size_t>();
        rf.bundle_thresholds.t_h = meta.at("thresholds").at("t_h").get<std::size_t>();
        rf.bundle_thresholds.t_c = meta.at("thresholds").at("t_c").get<std::size_t>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            rf.records.push_back(record_from_json(nlohmann::json::parse(line)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt records file " + path + ": " + e.what());
    }
    return rf;
}

// ---------------------------------------------------------------------------
// Wire mode
// ---------------------------------------------------------------------------

namespace {

void close_quietly(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

void send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, 0);
        if (n <= 0) throw IoError("wire: send failed");
        sent += static_cast<std::size_t>(n);
    }
}

// Reads one newline-terminated line; false on orderly disconnect.
bool recv_line(int fd, std::string& buffer, std::string& line) {
    for (;;) {
        auto pos = buffer.find('\n');
        if (pos != std::string::npos) {
            line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            return true;
        }
        char chunk[4096];
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n == 0) return false;
        if (n < 0) throw IoError("wire: recv failed");
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace

WireWorkerServer::WireWorkerServer(PublicModel model, WorkerBehavior behavior, std::uint64_t seed,
                                   std::uint16_t port)
    : model_(std::move(model)), behavior_(behavior), rng_(seed, "wire-worker") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("wire: cannot create socket");
    int opt = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        close_quietly(listen_fd_);
        throw IoError("wire: bind failed");
    }
    if (::listen(listen_fd_, 1) < 0) {
        close_quietly(listen_fd_);
        throw IoError("wire: listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

WireWorkerServer::~WireWorkerServer() { close_quietly(listen_fd_); }

std::string WireWorkerServer::handle_line(const std::string& line) {
    nlohmann::json req = nlohmann::json::parse(line);
    std::size_t id = req.at("id").get<std::size_t>();
    std::vector<double> x = req.at("x").get<std::vector<double>>();
    std::vector<double> y_honest = model_.forward(x);
    std::vector<double> y;
    switch (behavior_.kind) {
        case BehaviorKind::honest:
            y = y_honest;
            break;
        case BehaviorKind::random: {
            // Fit on everything this worker has computed so far.
            DenseMatrix cache(seen_outputs_.size() + 1, y_honest.size());
            for (std::size_t i = 0; i < seen_outputs_.size(); ++i)
                std::copy(seen_outputs_[i].begin(), seen_outputs_[i].end(), cache.row(i).begin());
            std::copy(y_honest.begin(), y_honest.end(), cache.row(seen_outputs_.size()).begin());
            y = random_attack(fit_output_stats(cache), rng_);
            break;
        }
        case BehaviorKind::targeted: {
            auto yv = y_honest;
            auto [mn_it, mx_it] = std::minmax_element(yv.begin(), yv.end());
            double raised = *mx_it + 0.05 * (*mx_it - *mn_it);
            auto picks = rng_.sample_without_replacement(yv.size(), behavior_.targeted_n);
            for (std::uint32_t idx : picks) yv[idx] = raised;
            y = std::move(yv);
            break;
        }
        case BehaviorKind::replay: {
            if (seen_outputs_.empty()) throw IoError("wire: replay cache too small");
            y = seen_outputs_[rng_.uniform_index(seen_outputs_.size())];
            break;
        }
    }
    seen_outputs_.push_back(std::move(y_honest));
    nlohmann::json resp = {{"id", id}, {"y", y}};
    return resp.dump() + "\n";
}

void WireWorkerServer::serve_one_client() {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) throw IoError("wire: accept failed");
    std::string buffer, line;
    try {
        while (recv_line(fd, buffer, line)) {
            if (line.empty()) continue;
            send_all(fd, handle_line(line));
        }
    } catch (...) {
        close_quietly(fd);
        throw;
    }
    close_quietly(fd);
}

WireWorkerClient::WireWorkerClient(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw IoError("wire: cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        close_quietly(fd_);
        throw ConfigError("wire: invalid host address " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        close_quietly(fd_);
        throw IoError("wire: connect failed");
    }
}

WireWorkerClient::~WireWorkerClient() { close_quietly(fd_); }

std::vector<double> WireWorkerClient::query(std::size_t id, std::span<const double> x) {
    nlohmann::json req = {{"id", id}, {"x", std::vector<double>(x.begin(), x.end())}};
    send_all(fd_, req.dump() + "\n");
    std::string line;
    if (!recv_line(fd_, buffer_, line)) throw IoError("wire: worker disconnected");
    try {
        nlohmann::json resp = nlohmann::json::parse(line);
        if (resp.at("id").get<std::size_t>() != id) throw IoError("wire: response id mismatch");
        return resp.at("y").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("wire: malformed response: ") + e.what());
    }
}

std::vector<CampaignRecord> run_wire_campaign(const ModelBundle& bundle,
                                              const Dataset& eval_split,
                                              const std::string& host, std::uint16_t port,
                                              const WorkerBehavior& served_behavior,
                                              std::size_t samples,
                                              std::optional<Thresholds> thresholds) {
    if (eval_split.size() == 0) throw ConfigError("campaign: empty evaluation split");
    if (samples == 0) throw ConfigError("campaign: zero samples");
    WireWorkerClient client(host, port);
    std::vector<CampaignRecord> records;
    records.reserve(samples);
    for (std::size_t id = 0; id < samples; ++id) {
        std::size_t i = id % eval_split.size();
        CampaignRecord rec;
        rec.id = id;
        rec.sample_index = i;
        rec.true_label = eval_split.labels[i];
        rec.behavior = served_behavior;
        rec.y = client.query(id, eval_split.inputs.row(i));
        if (rec.y.size() != bundle.crosscheck.n_o)
            throw IoError("wire: worker returned wrong output width");
        rec.report = verify(bundle, eval_split.inputs.row(i), rec.y, thresholds);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace checknet
