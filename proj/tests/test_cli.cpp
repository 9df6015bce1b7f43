#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "agu/graph_io.hpp"
#include "agu/models.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = AGU_CLI_PATH;

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("agu_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("gen, train, unlearn round-trip") {
    Workspace ws;
    REQUIRE(run("--seed 11 gen --sbm n=60,c=2,pin=0.3,pout=0.02,d=8,s=5 --out " + ws.path("data")) ==
            0);
    agu::Graph g = agu::load_graph_tsv(ws.path("data/graph.tsv"));
    CHECK(g.n == 60);
    CHECK(g.num_classes == 2);

    REQUIRE(run("--seed 11 train --graph " + ws.path("data") + " --arch gcn --hidden 16" +
                " --epochs 60 --out " + ws.path("model.bin") + " --report " +
                ws.path("train.json")) == 0);
    json train_report = load_json(ws.path("train.json"));
    CHECK(train_report["schema_version"] == 1);
    CHECK(train_report["config"]["arch"] == "gcn");
    CHECK(train_report["loss_trace"].size() == 60);
    CHECK(train_report["final_train_accuracy"].get<double>() > 0.9);

    {
        std::ofstream req(ws.path("req.tsv"));
        req << "node\n3\n11\n";
    }
    REQUIRE(run("--seed 11 unlearn --graph " + ws.path("data") + " --request " + ws.path("req.tsv") +
                " --model-in " + ws.path("model.bin") + " --model-out " + ws.path("unlearned.bin") +
                " --epochs 10 --report " + ws.path("unlearn.json")) == 0);
    json report = load_json(ws.path("unlearn.json"));
    CHECK(report["schema_version"] == 1);
    CHECK(report["loss_ef_trace"].size() == 10);
    CHECK(report["loss_an_trace"].size() == 10);
    CHECK(report["neighbor_report"].contains("n_aff"));
    CHECK(report["neighbor_report"].contains("n_han"));
    CHECK(report["wall_time_ms"].get<double>() > 0.0);

    agu::Model m = agu::load_model(ws.path("unlearned.bin"));
    CHECK(m.arch == agu::Arch::GCN);
    CHECK(m.dims.front() == g.d);
    CHECK(m.dims.back() == g.num_classes);

    // Same inputs, same checkpoint bytes.
    REQUIRE(run("--seed 11 unlearn --graph " + ws.path("data") + " --request " + ws.path("req.tsv") +
                " --model-in " + ws.path("model.bin") + " --model-out " + ws.path("unlearned2.bin") +
                " --epochs 10") == 0);
    CHECK(slurp(ws.path("unlearned.bin")) == slurp(ws.path("unlearned2.bin")));

    // Retrain on the remaining graph produces a loadable model too.
    REQUIRE(run("--seed 11 retrain --graph " + ws.path("data") + " --request " + ws.path("req.tsv") +
                " --arch gcn --hidden 16 --epochs 60 --out " + ws.path("retrained.bin")) == 0);
    agu::Model rt = agu::load_model(ws.path("retrained.bin"));
    CHECK(rt.dims == m.dims);
}

TEST_CASE("neighbors report respects the architecture range") {
    Workspace ws;
    REQUIRE(run("--seed 3 gen --sbm n=60,c=2,pin=0.3,pout=0.02,d=8,s=5 --out " + ws.path("data")) ==
            0);
    agu::Graph g = agu::load_graph_tsv(ws.path("data/graph.tsv"));
    {
        std::ofstream req(ws.path("req.tsv"));
        req << "edge\n" << g.edges[0].first << "\t" << g.edges[0].second << "\n";
    }
    // Mean aggregator, two layers: edge deletion reaches at most one hop.
    REQUIRE(run("--seed 3 neighbors --graph " + ws.path("data") + " --arch sage --hidden 16" +
                " --request " + ws.path("req.tsv") + " --report " + ws.path("nb.json")) == 0);
    json nb = load_json(ws.path("nb.json"));
    CHECK(nb["config"]["arch"] == "sage");
    for (auto& [hop, count] : nb["hop_histogram"].items()) {
        CHECK(std::stoi(hop) <= 1);
        CHECK(count.get<int>() > 0);
    }
    // Degree-based aggregator on the same request reaches two hops.
    REQUIRE(run("--seed 3 neighbors --graph " + ws.path("data") + " --arch gcn --hidden 16" +
                " --request " + ws.path("req.tsv") + " --report " + ws.path("nb2.json")) == 0);
    json nb2 = load_json(ws.path("nb2.json"));
    int max_hop = 0;
    for (auto& [hop, count] : nb2["hop_histogram"].items()) max_hop = std::max(max_hop, std::stoi(hop));
    CHECK(max_hop == 2);
    CHECK(nb2["n_aff"] == nb2["n_ac"]);
}

TEST_CASE("attack emits a request that undoes the injection") {
    Workspace ws;
    REQUIRE(run("--seed 5 gen --sbm n=60,c=2,pin=0.3,pout=0.02,d=8,s=5 --out " + ws.path("data")) ==
            0);
    REQUIRE(run("--seed 5 attack --graph " + ws.path("data") + " --ratio 0.2 --out " +
                ws.path("noisy") + " --request-out " + ws.path("atk.tsv")) == 0);
    agu::Graph clean = agu::load_graph_tsv(ws.path("data/graph.tsv"));
    agu::Graph noisy = agu::load_graph_tsv(ws.path("noisy/graph.tsv"));
    agu::UnlearnRequest req = agu::load_request_tsv(ws.path("atk.tsv"));
    CHECK(noisy.edges.size() == clean.edges.size() + req.edge_list.size());
    for (const auto& [u, v] : req.edge_list) {
        CHECK(clean.y[u] != clean.y[v]);
        CHECK(noisy.has_edge(u, v));
        CHECK_FALSE(clean.has_edge(u, v));
    }
}

TEST_CASE("bench reports are byte-identical modulo the timestamp") {
    Workspace ws;
    {
        std::ofstream spec(ws.path("spec.json"));
        spec << R"({
  "sbm": {"n": 40, "blocks": 2, "p_in": 0.3, "p_out": 0.02, "d": 6, "signal": 4.0},
  "archs": ["gcn"], "task": "node", "unlearn_ratio": 0.05, "trials": 2, "seed": 7,
  "methods": ["agu", "retrain"], "hidden": 8,
  "train": {"epochs": 40}, "unlearn": {"epochs": 8}
})";
    }
    REQUIRE(run("bench --spec " + ws.path("spec.json") + " --out " + ws.path("a.json") + " --csv " +
                ws.path("a.csv") + " --jobs 2") == 0);
    REQUIRE(run("bench --spec " + ws.path("spec.json") + " --out " + ws.path("b.json")) == 0);
    auto strip = [](const std::string& path) {
        json j = json::parse(slurp(path));
        j.erase("timestamp");
        for (auto& t : j["trials"]) t.erase("time_ms");
        for (auto& [k, v] : j["aggregates"].items()) v.erase("mean_time_ms");
        return j.dump();
    };
    CHECK(strip(ws.path("a.json")) == strip(ws.path("b.json")));

    json a = json::parse(slurp(ws.path("a.json")));
    CHECK(a["trials"].size() == 4);
    std::ifstream csv(ws.path("a.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "arch,method,trial,f1,time_ms");
    int lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    CHECK(lines == 4);
}

TEST_CASE("cli exit codes") {
    Workspace ws;
    CHECK(run("definitely-not-a-subcommand") == 1);
    CHECK(run("train --graph missing.tsv") == 1);  // missing required --out
    CHECK(run("train --graph " + ws.path("nope.tsv") + " --out " + ws.path("m.bin")) == 2);
    {
        std::ofstream bad(ws.path("bad.tsv"));
        bad << "not a header\n";
    }
    CHECK(run("train --graph " + ws.path("bad.tsv") + " --out " + ws.path("m.bin")) == 2);

    REQUIRE(run("--seed 2 gen --sbm n=20,c=2,pin=0.4,pout=0.05,d=4,s=5 --out " + ws.path("d")) == 0);
    {
        std::ofstream req(ws.path("stale.tsv"));
        req << "edge\n0\t1000\n";
    }
    REQUIRE(run("--seed 2 train --graph " + ws.path("d") + " --epochs 10 --out " +
                ws.path("m.bin")) == 0);
    CHECK(run("--seed 2 unlearn --graph " + ws.path("d") + " --request " + ws.path("stale.tsv") +
              " --model-in " + ws.path("m.bin") + " --model-out " + ws.path("u.bin")) == 2);
}
