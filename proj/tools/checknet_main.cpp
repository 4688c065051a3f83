#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "checknet/analysis.hpp"
#include "checknet/serialize.hpp"
#include "checknet/verifier.hpp"
#include "checknet/worker.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace checknet;
using checknet::cli::RunConfig;

namespace {

constexpr const char* kToolVersion = "checknet 1.0.0";

// Base model file format (kept out of the bundle so protect() can be rerun
// with different CheckNet hyperparameters on one trained base).
void save_base_model(const std::string& path, const BaseModel& model) {
    nlohmann::json j = {{"kind", "checknet.base"},
                        {"format_version", 1},
                        {"num_classes", model.num_classes},
                        {"model", mlp_to_json(model.net)}};
    save_json_file(path, j);
}

BaseModel load_base_model(const std::string& path) {
    nlohmann::json j = load_json_file(path);
    try {
        if (j.value("kind", "") != "checknet.base") throw IoError("base model: wrong kind field");
        if (j.value("format_version", -1) != 1)
            throw IoError("base model: unsupported format version");
        BaseModel model;
        model.num_classes = j.at("num_classes").get<std::size_t>();
        model.net = mlp_from_json(j.at("model"));
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt base model " + path + ": " + e.what());
    }
}

std::string resolve_outdir(const RunConfig& cfg, const std::string& flag_outdir) {
    if (!flag_outdir.empty()) return flag_outdir;
    if (const char* env = std::getenv("CHECKNET_OUT"); env && *env) return env;
    return cfg.outdir;
}

void write_manifest(const fs::path& outdir, const std::string& command,
                    const nlohmann::json& config, std::uint64_t seed,
                    const nlohmann::json& outputs) {
    nlohmann::json j = {{"command", command},
                        {"tool_version", kToolVersion},
                        {"seed", seed},
                        {"config", config},
                        {"outputs", outputs}};
    save_json_file((outdir / ("manifest-" + command + ".json")).string(), j);
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

int cmd_train_base(const std::string& config_path, const std::string& flag_outdir) {
    RunConfig cfg = cli::load_run_config(config_path);
    fs::path outdir = resolve_outdir(cfg, flag_outdir);
    fs::create_directories(outdir);

    DataSplit data = cli::build_dataset(cfg);
    RngStream rng(cfg.seed, "base");
    TrainedBase trained = train_base(data, cfg.base, rng);

    std::string model_path = (outdir / "base_model.json").string();
    save_base_model(model_path, trained.model);
    nlohmann::json metrics = {{"final_train_acc", trained.metrics.final_train_acc},
                              {"final_test_acc", trained.metrics.final_test_acc},
                              {"epoch_train_acc", trained.metrics.epoch_train_acc},
                              {"epoch_loss", trained.metrics.epoch_loss}};
    save_json_file((outdir / "base_metrics.json").string(), metrics);
    write_manifest(outdir, "train-base", cli::run_config_to_json(cfg), cfg.seed,
                   {{"model", "base_model.json"}, {"metrics", "base_metrics.json"}});
    std::cout << "train-base: train_acc=" << trained.metrics.final_train_acc
              << " test_acc=" << trained.metrics.final_test_acc << " -> " << model_path << "\n";
    return 0;
}

int cmd_protect(const std::string& config_path, const std::string& base_path,
                const std::string& flag_outdir) {
    RunConfig cfg = cli::load_run_config(config_path);
    fs::path outdir = resolve_outdir(cfg, flag_outdir);
    fs::create_directories(outdir);

    BaseModel base = load_base_model(base_path);
    DataSplit data = cli::build_dataset(cfg);
    RngStream rng(cfg.seed, "protect");
    ProtectedModel result = protect(base, data, cfg.checknet, rng);

    std::string bundle_path = (outdir / "bundle.checknet.json").string();
    std::string public_path = (outdir / "bundle.checknet.pub.json").string();
    save_bundle(result.bundle, bundle_path);
    export_public(result.bundle, public_path);

    nlohmann::json pair_metrics = nlohmann::json::array();
    for (const auto& pm : result.metrics.hash_pairs)
        pair_metrics.push_back({{"initial_bce", pm.initial_bce},
                                {"final_bce", pm.final_bce},
                                {"mean_train_distance", pm.mean_train_distance}});
    nlohmann::json metrics = {
        {"majority_train_acc", result.metrics.head.majority_train_acc},
        {"majority_test_acc", result.metrics.head.majority_test_acc},
        {"per_set_test_acc", result.metrics.head.per_set_test_acc},
        {"hash_pairs", pair_metrics}};
    save_json_file((outdir / "protect_metrics.json").string(), metrics);
    write_manifest(outdir, "protect", cli::run_config_to_json(cfg), cfg.seed,
                   {{"bundle", "bundle.checknet.json"},
                    {"public", "bundle.checknet.pub.json"},
                    {"metrics", "protect_metrics.json"}});
    std::cout << "protect: majority_test_acc=" << result.metrics.head.majority_test_acc << " -> "
              << bundle_path << "\n";
    return 0;
}

int cmd_campaign(const std::string& config_path, const std::string& bundle_path,
                 const std::string& flag_outdir, const std::string& wire,
                 const std::string& wire_behavior) {
    RunConfig cfg = cli::load_run_config(config_path);
    fs::path outdir = resolve_outdir(cfg, flag_outdir);
    fs::create_directories(outdir);

    ModelBundle bundle = load_bundle(bundle_path);
    DataSplit data = cli::build_dataset(cfg);
    RngStream rng(cfg.seed, "campaign");

    std::vector<CampaignRecord> records;
    if (wire.empty()) {
        // Random-attack statistics come from honest outputs on the training split.
        DenseMatrix train_outputs(data.train.size(), bundle.crosscheck.n_o);
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            auto y = bundle.public_model.forward(data.train.inputs.row(i));
            std::copy(y.begin(), y.end(), train_outputs.row(i).begin());
        }
        OutputStats stats = fit_output_stats(train_outputs);
        CampaignConfig cc;
        cc.mix = cfg.campaign.mix;
        cc.samples = cfg.campaign.samples;
        records = run_campaign(bundle, data.test, stats, cc, rng);
    } else {
        auto colon = wire.rfind(':');
        if (colon == std::string::npos) throw ConfigError("--wire expects host:port");
        std::string host = wire.substr(0, colon);
        int port = std::stoi(wire.substr(colon + 1));
        if (port <= 0 || port > 65535) throw ConfigError("--wire port out of range");
        WorkerBehavior behavior;
        behavior.kind = behavior_from_name(wire_behavior.empty() ? "honest" : wire_behavior);
        behavior.targeted_n = cfg.campaign.targeted_n;
        records = run_wire_campaign(bundle, data.test, host, static_cast<std::uint16_t>(port),
                                    behavior, cfg.campaign.samples, std::nullopt);
    }

    std::string records_path = (outdir / "records.jsonl").string();
    write_records(records_path, records, bundle);
    nlohmann::json config = cli::run_config_to_json(cfg);
    if (!wire.empty()) config["wire"] = {{"address", wire}, {"behavior", wire_behavior}};
    write_manifest(outdir, "campaign", config, cfg.seed, {{"records", "records.jsonl"}});
    std::size_t accepted = 0;
    for (const auto& rec : records) accepted += rec.report.accepted ? 1 : 0;
    std::cout << "campaign: " << records.size() << " records, " << accepted << " accepted -> "
              << records_path << "\n";
    return 0;
}

int cmd_roc(const std::string& records_path, const std::string& flag_outdir,
            std::uint64_t seed) {
    fs::path outdir = flag_outdir.empty() ? fs::path(".") : fs::path(flag_outdir);
    if (const char* env = std::getenv("CHECKNET_OUT"); flag_outdir.empty() && env && *env)
        outdir = env;
    fs::create_directories(outdir);

    RecordsFile rf = read_records(records_path);
    RocResult result = roc(rf.records, rf.l, rf.n_s);
    auto effacc = effective_accuracy(rf.records, rf.l, rf.n_s);

    write_text_file(outdir / "roc.csv", roc_points_csv(result.frontier));
    write_text_file(outdir / "roc_grid.csv", roc_points_csv(result.grid));
    write_text_file(outdir / "effacc.csv", effacc_csv(effacc));

    nlohmann::json summary = {
        {"auc", result.auc},
        {"grid_points", result.grid.size()},
        {"frontier_points", result.frontier.size()},
        {"l", rf.l},
        {"n_s", rf.n_s},
        {"bounds",
         {{"hashcheck_printed", hashcheck_bound(rf.l, rf.bundle_thresholds.t_h)},
          {"hashcheck_inclusive", hashcheck_bound_inclusive(rf.l, rf.bundle_thresholds.t_h)},
          {"note",
           "printed Theorem-1 limit covers distances strictly below T_h; the inclusive "
           "variant covers the accept rule's <= T_h event"}}},
    };
    save_json_file((outdir / "summary.json").string(), summary);
    write_manifest(outdir, "roc", {{"records", records_path}}, seed,
                   {{"roc", "roc.csv"},
                    {"roc_grid", "roc_grid.csv"},
                    {"effacc", "effacc.csv"},
                    {"summary", "summary.json"}});
    std::cout << "roc: AUC=" << result.auc << " over " << result.grid.size() << " grid points ("
              << result.frontier.size() << " on the frontier)\n";
    return 0;
}

int cmd_bounds(std::size_t l, std::size_t t_h, std::size_t n_s, std::size_t n_c, std::size_t t_c,
               const std::string& flag_outdir) {
    std::string table = render_bounds(l, t_h, n_s, n_c, t_c);
    std::cout << table;
    if (!flag_outdir.empty()) {
        fs::path outdir = flag_outdir;
        fs::create_directories(outdir);
        nlohmann::json j = {{"l", l},
                            {"t_h", t_h},
                            {"n_s", n_s},
                            {"n_c", n_c},
                            {"t_c", t_c},
                            {"hashcheck_printed", hashcheck_bound(l, t_h)},
                            {"hashcheck_inclusive", hashcheck_bound_inclusive(l, t_h)},
                            {"crosscheck", crosscheck_bound(n_s, n_c, t_c)}};
        save_json_file((outdir / "bounds.json").string(), j);
        write_manifest(outdir, "bounds", j, 0, {{"bounds", "bounds.json"}});
    }
    return 0;
}

int cmd_lemma_sim(std::size_t n_o, std::size_t n_s, std::size_t n_c, std::size_t g_nodes,
                  std::size_t t_c, std::size_t trials, std::uint64_t seed,
                  const std::string& flag_outdir) {
    struct Variant {
        const char* name;
        bool knowledge;
        bool overlap;
    };
    const Variant variants[] = {
        {"overlap,no-knowledge", false, true},
        {"overlap,knowledge", true, true},
        {"no-overlap,knowledge", true, false},
        {"no-overlap,no-knowledge", false, false},
    };
    double bound = crosscheck_bound(n_s, n_c, t_c);
    std::string csv = "variant,rate,se,successes,trials\n";
    std::cout << "crosscheck bound 1-F(T_c; N_s, 1/N_c) = " << format_double(bound) << "\n";
    for (const auto& v : variants) {
        if (!v.overlap && n_s * n_c > n_o) {
            std::cout << v.name << ": skipped (needs n_s * n_c <= n_o)\n";
            continue;
        }
        RngStream rng(seed, std::string("lemma-sim/") + v.name);
        auto est = lemma_ordering_sim(n_o, n_s, n_c, g_nodes, t_c, v.knowledge, v.overlap, trials,
                                      rng);
        std::cout << v.name << ": rate=" << format_double(est.rate)
                  << " se=" << format_double(est.se) << " (" << est.successes << "/" << est.trials
                  << ")\n";
        csv += std::string(v.name) + ',' + format_double(est.rate) + ',' + format_double(est.se) +
               ',' + std::to_string(est.successes) + ',' + std::to_string(est.trials) + '\n';
    }
    if (!flag_outdir.empty()) {
        fs::path outdir = flag_outdir;
        fs::create_directories(outdir);
        write_text_file(outdir / "lemma_sim.csv", csv);
        nlohmann::json config = {{"n_o", n_o},     {"n_s", n_s},       {"n_c", n_c},
                                 {"g_nodes", g_nodes}, {"t_c", t_c},   {"trials", trials},
                                 {"bound", bound}};
        write_manifest(outdir, "lemma-sim", config, seed, {{"table", "lemma_sim.csv"}});
    }
    return 0;
}

int cmd_overhead(const std::string& bundle_path, const std::string& flag_outdir) {
    ModelBundle bundle = load_bundle(bundle_path);
    OverheadReport report = overhead_report(bundle);
    std::cout << render_overhead(report);
    if (!flag_outdir.empty()) {
        fs::path outdir = flag_outdir;
        fs::create_directories(outdir);
        nlohmann::json j = {{"base_hidden_macs", report.base_hidden_macs},
                            {"unprotected_head_macs", report.unprotected_head_macs},
                            {"expanded_head_macs", report.expanded_head_macs},
                            {"hash_g_macs", report.hash_g_macs},
                            {"hash_f_macs", report.hash_f_macs},
                            {"comm_bytes_protected", report.comm_bytes_protected},
                            {"comm_bytes_unprotected", report.comm_bytes_unprotected},
                            {"head_ratio", report.head_ratio},
                            {"comm_ratio", report.comm_ratio},
                            {"hashcheck_to_model_ratio", report.hashcheck_to_model_ratio}};
        save_json_file((outdir / "overhead.json").string(), j);
        write_manifest(outdir, "overhead", {{"bundle", bundle_path}}, 0,
                       {{"overhead", "overhead.json"}});
    }
    return 0;
}

int cmd_serve(const std::string& public_path, int port, const std::string& behavior_name_arg,
              std::size_t targeted_n, std::uint64_t seed, bool forever) {
    PublicModel model = load_public(public_path);
    WorkerBehavior behavior;
    behavior.kind = behavior_from_name(behavior_name_arg);
    behavior.targeted_n = targeted_n;
    if (behavior.kind == BehaviorKind::targeted &&
        (targeted_n < 1 || targeted_n > model.n_o()))
        throw ConfigError("serve: targeted n out of range");
    WireWorkerServer server(std::move(model), behavior, seed,
                            static_cast<std::uint16_t>(port));
    std::cout << "worker listening on 127.0.0.1:" << server.port() << " behavior="
              << behavior_name_arg << std::endl;
    do {
        server.serve_one_client();
    } while (forever);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CheckNet: integrity verification for outsourced neural network inference"};
    app.require_subcommand(1);

    std::string config_path, outdir, base_path, bundle_path, records_path, wire, wire_behavior;
    std::uint64_t seed = 42;
    std::size_t l = 32, t_h = 8, n_s = 10, n_c = 10, t_c = 6;
    std::size_t sim_n_o = 12, sim_g = 4, trials = 100000;
    int port = 0;
    std::string behavior = "honest";
    std::size_t targeted_n = 3;
    bool forever = false;

    auto* train = app.add_subcommand("train-base", "train the base classifier");
    train->add_option("--config", config_path, "run configuration file")->required();
    train->add_option("--out", outdir, "output directory (overrides config/outdir)");

    auto* prot = app.add_subcommand("protect", "build a CheckNet bundle from a base model");
    prot->add_option("--config", config_path)->required();
    prot->add_option("--base", base_path, "base model file")->required();
    prot->add_option("--out", outdir);

    auto* camp = app.add_subcommand("campaign", "run a verification campaign");
    camp->add_option("--config", config_path)->required();
    camp->add_option("--bundle", bundle_path, "bundle file")->required();
    camp->add_option("--out", outdir);
    camp->add_option("--wire", wire, "worker address host:port (wire mode)");
    camp->add_option("--wire-behavior", wire_behavior,
                     "ground-truth behavior label of the remote worker");

    auto* roc_cmd = app.add_subcommand("roc", "ROC grid, Pareto frontier, AUC, effective accuracy");
    roc_cmd->add_option("--records", records_path, "records file from a campaign")->required();
    roc_cmd->add_option("--out", outdir);
    roc_cmd->add_option("--seed", seed, "seed recorded in the manifest");

    auto* bounds_cmd = app.add_subcommand("bounds", "theoretical attack-success bounds");
    bounds_cmd->add_option("--l", l, "bithash length");
    bounds_cmd->add_option("--th", t_h, "hashcheck threshold");
    bounds_cmd->add_option("--ns", n_s, "number of crosscheck sets");
    bounds_cmd->add_option("--nc", n_c, "classes per set");
    bounds_cmd->add_option("--tc", t_c, "crosscheck threshold");
    bounds_cmd->add_option("--out", outdir);

    auto* lemma = app.add_subcommand("lemma-sim", "Monte Carlo lemma ordering experiments");
    lemma->add_option("--no", sim_n_o, "output nodes");
    lemma->add_option("--ns", n_s, "number of sets");
    lemma->add_option("--nc", n_c, "classes per set");
    lemma->add_option("--g", sim_g, "nodes the adversary maximizes");
    lemma->add_option("--tc", t_c, "crosscheck threshold");
    lemma->add_option("--trials", trials, "Monte Carlo trials");
    lemma->add_option("--seed", seed);
    lemma->add_option("--out", outdir);

    auto* over = app.add_subcommand("overhead", "MAC and communication overhead report");
    over->add_option("--bundle", bundle_path)->required();
    over->add_option("--out", outdir);

    auto* serve = app.add_subcommand("serve", "run the simulated worker behind the wire protocol");
    serve->add_option("--public", base_path, "public model file")->required();
    serve->add_option("--port", port, "TCP port (0 picks one)");
    serve->add_option("--behavior", behavior, "honest|random|targeted|replay");
    serve->add_option("--n", targeted_n, "targeted attack node count");
    serve->add_option("--seed", seed);
    serve->add_flag("--forever", forever, "keep serving new clients");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << R"({"error":"config","message":")" << e.what() << "\"}\n";
        return 2;
    }

    try {
        if (*train) return cmd_train_base(config_path, outdir);
        if (*prot) return cmd_protect(config_path, base_path, outdir);
        if (*camp) return cmd_campaign(config_path, bundle_path, outdir, wire, wire_behavior);
        if (*roc_cmd) return cmd_roc(records_path, outdir, seed);
        if (*bounds_cmd) return cmd_bounds(l, t_h, n_s, n_c, t_c, outdir);
        if (*lemma) return cmd_lemma_sim(sim_n_o, n_s, n_c, sim_g, t_c, trials, seed, outdir);
        if (*over) return cmd_overhead(bundle_path, outdir);
        if (*serve) return cmd_serve(base_path, port, behavior, targeted_n, seed, forever);
    } catch (const ConfigError& e) {
        std::cerr << R"({"error":"config","message":")" << e.what() << "\"}\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << R"({"error":"runtime","message":")" << e.what() << "\"}\n";
        return 3;
    }
    return 0;
}
