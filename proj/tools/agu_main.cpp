// agu: graph unlearning toolkit command-line interface.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "agu/agu.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

std::string resolve_graph_path(const std::string& arg) {
    if (fs::is_directory(arg)) return (fs::path(arg) / "graph.tsv").string();
    return arg;
}

std::string resolve_masks_path(const std::string& graph_arg, const std::string& masks_arg) {
    if (!masks_arg.empty()) return masks_arg;
    if (fs::is_directory(graph_arg)) return (fs::path(graph_arg) / "masks.tsv").string();
    return (fs::path(graph_arg).parent_path() / "masks.tsv").string();
}

agu::Graph load_graph(const std::string& graph_arg, const std::string& masks_arg) {
    agu::Graph g = agu::load_graph_tsv(resolve_graph_path(graph_arg));
    const std::string masks = resolve_masks_path(graph_arg, masks_arg);
    if (fs::exists(masks)) agu::load_masks_tsv(masks, g);
    return g;
}

void validate_request(const agu::Graph& g, const agu::UnlearnRequest& req) {
    req.validate(g);
    if (req.kind == agu::RequestKind::Edge)
        for (const auto& [u, v] : req.edge_list)
            if (!g.has_edge(u, v))
                throw agu::ReferenceError("request references unknown edge " + std::to_string(u) +
                                          "-" + std::to_string(v));
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

json node_set_json(const agu::NodeSet& s) {
    json arr = json::array();
    for (int v : s) arr.push_back(v);
    return arr;
}

json report_json(const agu::NeighborReport& report) {
    json j;
    j["n_aff"] = node_set_json(report.n_aff);
    j["n_ac"] = node_set_json(report.n_ac);
    j["n_fmn"] = node_set_json(report.n_fmn);
    j["n_han"] = node_set_json(report.n_han);
    json scores = json::object();
    for (const auto& [v, s] : report.diff_scores) scores[std::to_string(v)] = s;
    j["diff_scores"] = scores;
    json hops = json::object();
    for (const auto& [hop, count] : report.hop_histogram) hops[std::to_string(hop)] = count;
    j["hop_histogram"] = hops;
    j["probe_ambiguous"] = report.probe_ambiguous;
    return j;
}

// --sbm n=60,c=2,pin=0.3,pout=0.02,d=8,s=5
agu::SbmSpec parse_sbm_arg(const std::string& arg) {
    agu::SbmSpec spec;
    std::istringstream in(arg);
    std::string kv;
    while (std::getline(in, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--sbm expects key=value pairs");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        try {
            if (key == "n") spec.n = std::stoi(val);
            else if (key == "c") spec.blocks = std::stoi(val);
            else if (key == "pin") spec.p_in = std::stod(val);
            else if (key == "pout") spec.p_out = std::stod(val);
            else if (key == "d") spec.d = std::stoi(val);
            else if (key == "s") spec.signal = std::stod(val);
            else throw CLI::ValidationError("--sbm: unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw CLI::ValidationError("--sbm: bad value for " + key);
        }
    }
    return spec;
}

agu::ExperimentSpec parse_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spec " + path);
    json j = json::parse(in);
    agu::ExperimentSpec spec;
    if (j.contains("sbm")) {
        const json& s = j["sbm"];
        if (s.contains("n")) spec.sbm.n = s["n"];
        if (s.contains("blocks")) spec.sbm.blocks = s["blocks"];
        if (s.contains("p_in")) spec.sbm.p_in = s["p_in"];
        if (s.contains("p_out")) spec.sbm.p_out = s["p_out"];
        if (s.contains("d")) spec.sbm.d = s["d"];
        if (s.contains("signal")) spec.sbm.signal = s["signal"];
    }
    if (j.contains("graph")) spec.graph_path = j["graph"];
    if (j.contains("archs")) {
        spec.archs.clear();
        for (const auto& a : j["archs"]) spec.archs.push_back(agu::arch_from_name(a));
    }
    if (j.contains("task")) {
        const std::string t = j["task"];
        if (t == "node") spec.task = agu::RequestKind::Node;
        else if (t == "edge") spec.task = agu::RequestKind::Edge;
        else if (t == "feature") spec.task = agu::RequestKind::Feature;
        else throw std::runtime_error("spec: unknown task " + t);
    }
    if (j.contains("unlearn_ratio")) spec.unlearn_ratio = j["unlearn_ratio"];
    if (j.contains("attack_ratio")) spec.attack_ratio = j["attack_ratio"];
    if (j.contains("trials")) spec.trials = j["trials"];
    if (j.contains("seed")) spec.seed = j["seed"];
    if (j.contains("methods")) {
        spec.methods.clear();
        for (const auto& m : j["methods"]) spec.methods.push_back(m);
    }
    if (j.contains("hidden")) spec.hidden = j["hidden"];
    if (j.contains("layers")) spec.layers = j["layers"];
    if (j.contains("train")) {
        const json& t = j["train"];
        if (t.contains("lr")) spec.train_cfg.lr = t["lr"];
        if (t.contains("epochs")) spec.train_cfg.epochs = t["epochs"];
        if (t.contains("weight_decay")) spec.train_cfg.weight_decay = t["weight_decay"];
        if (t.contains("dropout")) spec.train_cfg.dropout_rate = t["dropout"];
    }
    if (j.contains("unlearn")) {
        const json& u = j["unlearn"];
        if (u.contains("alpha")) spec.unlearn_cfg.alpha = u["alpha"];
        if (u.contains("epochs")) spec.unlearn_cfg.epochs = u["epochs"];
        if (u.contains("lr")) spec.unlearn_cfg.lr = u["lr"];
        if (u.contains("kl_cap")) spec.unlearn_cfg.kl_cap = u["kl_cap"];
        if (u.contains("theta")) spec.unlearn_cfg.filter.theta = u["theta"];
        if (u.contains("k_ans")) spec.unlearn_cfg.filter.k_ans_fraction = u["k_ans"];
    }
    return spec;
}

json experiment_spec_json(const agu::ExperimentSpec& spec) {
    json j;
    j["sbm"] = {{"n", spec.sbm.n},       {"blocks", spec.sbm.blocks}, {"p_in", spec.sbm.p_in},
                {"p_out", spec.sbm.p_out}, {"d", spec.sbm.d},           {"signal", spec.sbm.signal}};
    if (!spec.graph_path.empty()) j["graph"] = spec.graph_path;
    json archs = json::array();
    for (agu::Arch a : spec.archs) archs.push_back(agu::arch_name(a));
    j["archs"] = archs;
    j["task"] = spec.task == agu::RequestKind::Node     ? "node"
                : spec.task == agu::RequestKind::Edge   ? "edge"
                                                        : "feature";
    j["unlearn_ratio"] = spec.unlearn_ratio;
    j["attack_ratio"] = spec.attack_ratio;
    j["trials"] = spec.trials;
    j["seed"] = spec.seed;
    j["methods"] = spec.methods;
    j["hidden"] = spec.hidden;
    j["layers"] = spec.layers;
    j["train"] = {{"lr", spec.train_cfg.lr},
                  {"epochs", spec.train_cfg.epochs},
                  {"weight_decay", spec.train_cfg.weight_decay},
                  {"dropout", spec.train_cfg.dropout_rate}};
    j["unlearn"] = {{"alpha", spec.unlearn_cfg.alpha},
                    {"epochs", spec.unlearn_cfg.epochs},
                    {"lr", spec.unlearn_cfg.lr},
                    {"kl_cap", spec.unlearn_cfg.kl_cap},
                    {"theta", spec.unlearn_cfg.filter.theta},
                    {"k_ans", spec.unlearn_cfg.filter.k_ans_fraction}};
    return j;
}

std::vector<int> model_dims(const agu::Graph& g, int hidden, int layers) {
    std::vector<int> dims{g.d};
    for (int l = 1; l < layers; ++l) dims.push_back(hidden);
    dims.push_back(g.num_classes);
    return dims;
}

int run(int argc, char** argv) {
    CLI::App app{"agu: adaptive graph unlearning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--seed", seed, "root seed for all randomness");
    app.add_flag("--verbose", verbose, "chatty progress output");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic SBM dataset");
    std::string gen_sbm, gen_out;
    gen->add_option("--sbm", gen_sbm, "n=..,c=..,pin=..,pout=..,d=..,s=..")->required();
    gen->add_option("--out", gen_out, "output directory")->required();

    // train / retrain
    std::string graph_arg, masks_arg, arch_arg = "gcn", model_out, request_arg, report_arg;
    int hidden = 64, layers = 2, epochs = 200;
    double lr = 0.01, weight_decay = 5e-4, dropout = 0.5;
    auto add_train_opts = [&](CLI::App* cmd) {
        cmd->add_option("--graph", graph_arg, "graph.tsv or dataset directory")->required();
        cmd->add_option("--masks", masks_arg, "masks.tsv (default: next to graph)");
        cmd->add_option("--arch", arch_arg, "gcn|sgc|gat|gin|sage");
        cmd->add_option("--hidden", hidden, "hidden dimension");
        cmd->add_option("--layers", layers, "layer count");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--weight-decay", weight_decay, "L2 weight decay");
        cmd->add_option("--dropout", dropout, "dropout rate during training");
        cmd->add_option("--out", model_out, "model checkpoint output")->required();
        cmd->add_option("--report", report_arg, "JSON training report");
    };
    auto* train_cmd = app.add_subcommand("train", "train a GNN on a dataset");
    add_train_opts(train_cmd);
    auto* retrain_cmd = app.add_subcommand("retrain", "train from scratch on the remaining graph");
    add_train_opts(retrain_cmd);
    retrain_cmd->add_option("--request", request_arg, "request.tsv")->required();

    // unlearn
    auto* unlearn_cmd = app.add_subcommand("unlearn", "unlearn elements from a trained model");
    std::string model_in;
    double alpha = 0.1, theta = 1e-4, k_ans = 0.4;
    int unlearn_epochs = 25;
    unlearn_cmd->add_option("--graph", graph_arg, "graph.tsv or dataset directory")->required();
    unlearn_cmd->add_option("--masks", masks_arg, "masks.tsv");
    unlearn_cmd->add_option("--request", request_arg, "request.tsv")->required();
    unlearn_cmd->add_option("--model-in", model_in, "trained checkpoint")->required();
    unlearn_cmd->add_option("--model-out", model_out, "unlearned checkpoint")->required();
    unlearn_cmd->add_option("--arch", arch_arg, "architecture cross-check");
    unlearn_cmd->add_option("--alpha", alpha, "node-unlearning edge-term weight");
    unlearn_cmd->add_option("--theta", theta, "marginal-neighbor threshold");
    unlearn_cmd->add_option("--k-ans", k_ans, "highly-affected-neighbor fraction");
    unlearn_cmd->add_option("--epochs", unlearn_epochs, "unlearning epochs");
    unlearn_cmd->add_option("--report", report_arg, "JSON unlearning report");

    // neighbors
    auto* neighbors_cmd = app.add_subcommand("neighbors", "affected-neighbor report");
    neighbors_cmd->add_option("--graph", graph_arg, "graph.tsv or dataset directory")->required();
    neighbors_cmd->add_option("--masks", masks_arg, "masks.tsv");
    neighbors_cmd->add_option("--arch", arch_arg, "gcn|sgc|gat|gin|sage");
    neighbors_cmd->add_option("--request", request_arg, "request.tsv")->required();
    neighbors_cmd->add_option("--model-in", model_in, "trained checkpoint (optional)");
    neighbors_cmd->add_option("--hidden", hidden, "hidden dimension");
    neighbors_cmd->add_option("--layers", layers, "layer count");
    neighbors_cmd->add_option("--theta", theta, "marginal-neighbor threshold");
    neighbors_cmd->add_option("--k-ans", k_ans, "highly-affected-neighbor fraction");
    neighbors_cmd->add_option("--report", report_arg, "JSON report output")->required();

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "inject adversarial cross-class edges");
    double attack_ratio = 0.2;
    std::string attack_out, request_out;
    attack_cmd->add_option("--graph", graph_arg, "graph.tsv or dataset directory")->required();
    attack_cmd->add_option("--masks", masks_arg, "masks.tsv");
    attack_cmd->add_option("--ratio", attack_ratio, "injected edges as a fraction of |E|");
    attack_cmd->add_option("--out", attack_out, "output directory for the noisy graph")->required();
    attack_cmd->add_option("--request-out", request_out, "request.tsv listing injected edges")
        ->required();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "run a comparison experiment");
    std::string spec_path, bench_out, csv_out;
    int jobs = 1;
    bench_cmd->add_option("--spec", spec_path, "experiment spec JSON")->required();
    bench_cmd->add_option("--out", bench_out, "report JSON output")->required();
    bench_cmd->add_option("--csv", csv_out, "flat CSV output (method,trial,f1,time_ms)");
    bench_cmd->add_option("--jobs", jobs, "parallel trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors collapse to 1
    }

    if (gen->parsed()) {
        agu::SbmSpec spec = parse_sbm_arg(gen_sbm);
        spec.seed = seed;
        agu::Graph g = agu::generate_sbm(spec);
        fs::create_directories(gen_out);
        agu::save_graph_tsv(g, (fs::path(gen_out) / "graph.tsv").string());
        agu::save_masks_tsv(g, (fs::path(gen_out) / "masks.tsv").string());
        if (verbose)
            std::cerr << "wrote " << gen_out << ": n=" << g.n << " edges=" << g.edges.size()
                      << "\n";
        return 0;
    }

    if (train_cmd->parsed() || retrain_cmd->parsed()) {
        agu::Graph g = load_graph(graph_arg, masks_arg);
        if (retrain_cmd->parsed()) {
            agu::UnlearnRequest req = agu::load_request_tsv(request_arg);
            validate_request(g, req);
            g = agu::apply_request(g, req).remaining;
        }
        agu::Arch arch = agu::arch_from_name(arch_arg);
        agu::TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.weight_decay = weight_decay;
        cfg.dropout_rate = dropout;
        cfg.seed = agu::derive_seed(seed, "train");
        agu::Model m = agu::init_model(arch, model_dims(g, hidden, layers), cfg.seed);
        agu::TrainResult tr = agu::train(m, g, cfg);
        agu::save_model(m, model_out);
        if (!report_arg.empty()) {
            json j;
            j["schema_version"] = kSchemaVersion;
            j["timestamp"] = timestamp_now();
            j["config"] = {{"arch", arch_arg},       {"hidden", hidden},
                           {"layers", layers},       {"epochs", epochs},
                           {"lr", lr},               {"weight_decay", weight_decay},
                           {"dropout", dropout},     {"seed", seed}};
            j["loss_trace"] = tr.loss_trace;
            j["final_train_accuracy"] = tr.final_train_accuracy;
            write_json(j, report_arg);
        }
        if (verbose)
            std::cerr << "trained " << arch_arg << ", final train acc "
                      << tr.final_train_accuracy << "\n";
        return 0;
    }

    if (unlearn_cmd->parsed()) {
        agu::Graph g = load_graph(graph_arg, masks_arg);
        agu::UnlearnRequest req = agu::load_request_tsv(request_arg);
        validate_request(g, req);
        agu::Model f_g = agu::load_model(model_in);
        if (unlearn_cmd->count("--arch") && agu::arch_from_name(arch_arg) != f_g.arch)
            throw agu::ContractError("--arch disagrees with the checkpoint architecture");
        agu::UnlearnConfig cfg;
        cfg.alpha = alpha;
        cfg.epochs = unlearn_epochs;
        cfg.seed = agu::derive_seed(seed, "unlearn");
        cfg.filter.theta = theta;
        cfg.filter.k_ans_fraction = k_ans;
        cfg.filter.probe_seed = agu::derive_seed(seed, "probe");
        agu::UnlearnOutcome outcome = agu::unlearn(f_g, g, req, cfg);
        agu::save_model(outcome.model, model_out);
        if (!report_arg.empty()) {
            json j;
            j["schema_version"] = kSchemaVersion;
            j["timestamp"] = timestamp_now();
            j["config"] = {{"arch", agu::arch_name(f_g.arch)},
                           {"alpha", alpha},
                           {"theta", theta},
                           {"k_ans", k_ans},
                           {"epochs", unlearn_epochs},
                           {"seed", seed}};
            j["loss_ef_trace"] = outcome.loss_ef_trace;
            j["loss_an_trace"] = outcome.loss_an_trace;
            j["neighbor_report"] = report_json(outcome.report);
            j["wall_time_ms"] = outcome.wall_time_ms;
            write_json(j, report_arg);
        }
        return 0;
    }

    if (neighbors_cmd->parsed()) {
        agu::Graph g = load_graph(graph_arg, masks_arg);
        agu::UnlearnRequest req = agu::load_request_tsv(request_arg);
        validate_request(g, req);
        agu::Model f_g = model_in.empty()
                             ? agu::Model{}
                             : agu::load_model(model_in);
        if (model_in.empty()) {
            // No checkpoint given: train a default model so diff scores exist.
            agu::TrainConfig cfg;
            cfg.seed = agu::derive_seed(seed, "train");
            f_g = agu::init_model(agu::arch_from_name(arch_arg),
                                  model_dims(g, hidden, layers), cfg.seed);
            agu::train(f_g, g, cfg);
        }
        agu::GraphDelta delta = agu::apply_request(g, req);
        agu::FilterConfig cfg;
        cfg.theta = theta;
        cfg.k_ans_fraction = k_ans;
        cfg.probe_seed = agu::derive_seed(seed, "probe");
        agu::NeighborReport report = agu::build_neighbor_report(f_g, g, delta, req, cfg);
        json j;
        j["schema_version"] = kSchemaVersion;
        j["timestamp"] = timestamp_now();
        j["config"] = {{"arch", agu::arch_name(f_g.arch)}, {"theta", theta},
                       {"k_ans", k_ans},                   {"seed", seed}};
        j.update(report_json(report));
        write_json(j, report_arg);
        return 0;
    }

    if (attack_cmd->parsed()) {
        agu::Graph g = load_graph(graph_arg, masks_arg);
        agu::EdgeAttackResult atk =
            agu::edge_attack(g, attack_ratio, agu::derive_seed(seed, "attack"));
        fs::create_directories(attack_out);
        agu::save_graph_tsv(atk.noisy, (fs::path(attack_out) / "graph.tsv").string());
        agu::save_masks_tsv(atk.noisy, (fs::path(attack_out) / "masks.tsv").string());
        agu::save_request_tsv(atk.injected, request_out);
        if (verbose)
            std::cerr << "injected " << atk.injected.edge_list.size() << " noisy edges\n";
        return 0;
    }

    if (bench_cmd->parsed()) {
        agu::ExperimentSpec spec = parse_experiment_spec(spec_path);
        if (app.count("--seed")) spec.seed = seed;
        spec.jobs = jobs;
        agu::Graph loaded;
        const agu::Graph* base = nullptr;
        if (!spec.graph_path.empty()) {
            loaded = load_graph(spec.graph_path, "");
            base = &loaded;
        }
        agu::EvalReport report = agu::run_experiment(spec, base);
        json j;
        j["schema_version"] = kSchemaVersion;
        j["timestamp"] = timestamp_now();
        j["spec"] = experiment_spec_json(spec);
        json trials = json::array();
        for (const auto& r : report.trials)
            trials.push_back({{"method", r.method},
                              {"arch", r.arch},
                              {"trial", r.trial},
                              {"f1", r.f1},
                              {"time_ms", r.time_ms},
                              {"epochs", r.epochs}});
        j["trials"] = trials;
        json aggs = json::object();
        for (const auto& [key, agg] : report.aggregates)
            aggs[key] = {{"mean_f1", agg.mean_f1},
                         {"std_f1", agg.std_f1},
                         {"mean_time_ms", agg.mean_time_ms}};
        j["aggregates"] = aggs;
        write_json(j, bench_out);
        if (!csv_out.empty()) {
            std::ofstream csv(csv_out);
            if (!csv) throw std::runtime_error("cannot write " + csv_out);
            csv << "arch,method,trial,f1,time_ms\n";
            csv.precision(17);
            for (const auto& r : report.trials)
                csv << r.arch << ',' << r.method << ',' << r.trial << ',' << r.f1 << ','
                    << r.time_ms << '\n';
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error&) {
        return 1;  // CLI11_PARSE already printed the message
    } catch (const agu::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
