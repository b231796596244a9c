#include "helpers.hpp"

#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <sstream>
#include <sys/wait.h>

using namespace testutil;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

// Runs the CLI through the shell; stderr is discarded.
RunResult run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + std::string(RELGAT_CLI) + "' " + args + " 2>/dev/null";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string kinship() { return std::string(RELGAT_DATA_DIR) + "/kinship"; }

// Small dataset plus a config that trains in well under a second.
void write_toy(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "data");
    std::ostringstream train, valid, test;
    for (int i = 0; i < 12; ++i) {
        train << "e" << i << "\tnext\te" << (i + 1) % 12 << '\n';
        train << "e" << i << "\tskip\te" << (i + 2) % 12 << '\n';
    }
    valid << "e0\tnext\te2\n";
    test << "e3\tskip\te4\ne5\tnext\te7\n";
    write_file(dir / "data" / "train.txt", train.str());
    write_file(dir / "data" / "valid.txt", valid.str());
    write_file(dir / "data" / "test.txt", test.str());
    write_file(dir / "toy.cfg",
               "transe.dim = 8\ntranse.epochs = 5\nenc.layers = 1\nenc.heads = 1\nenc.hidden_dim = 4\n"
               "enc.final_dim = 8\nenc.epochs = 4\ndec.filters = 3\ndec.epochs = 3\ndec.eval_every = 0\n");
}

}

TEST_SUITE("cli") {

TEST_CASE("stats table and JSON agree") {
    const auto table = run_cli("stats --data '" + kinship() + "'");
    CHECK(table.code == 0);
    CHECK(table.out.find("entities          104") != std::string::npos);
    CHECK(table.out.find("mean in-degree    82.15") != std::string::npos);
    const auto js = run_cli("stats --data '" + kinship() + "' --json");
    REQUIRE(js.code == 0);
    const auto j = nlohmann::json::parse(js.out);
    CHECK(j["entities"] == 104);
    CHECK(j["relations"] == 25);
    CHECK(j["train"] == 8544);
    CHECK(j["mean_in_degree"].get<double>() == doctest::Approx(82.15).epsilon(1e-4));
}

TEST_CASE("error exit codes") {
    CHECK(run_cli("stats --data /nonexistent/dir").code == 2);
    CHECK(run_cli("no-such-command").code == 2);
    CHECK(run_cli("pipeline --data '" + kinship() + "' --out /tmp/x --set bogus=1").code == 2);
    CHECK(run_cli("evaluate --data '" + kinship() + "' --out /tmp/x").code == 2);
}

TEST_CASE("pipeline runs end to end and is reproducible") {
    TempDir dir;
    write_toy(dir.path);
    const std::string common = "pipeline --data '" + (dir.path / "data").string() + "' --config '" +
                               (dir.path / "toy.cfg").string() + "' -q --json";
    const auto a = run_cli(common + " --out '" + (dir.path / "a").string() + "'", "KG_SEED=5");
    const auto b = run_cli(common + " --out '" + (dir.path / "b").string() + "' --seed 5");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(a.out == b.out);
    const auto m = nlohmann::json::parse(a.out);
    CHECK(m["n_queries"] == 4);

    for (const auto* f : {"decoder/W.mat", "decoder/filters.mat", "encoder/H_out.mat", "transe/H.mat"})
        CHECK(read_file(dir.path / "a" / f) == read_file(dir.path / "b" / f));
    const auto manifest = nlohmann::json::parse(read_file(dir.path / "a" / "run_manifest.json"));
    CHECK(manifest["config"]["seed"] == "5");
    CHECK(manifest["input_hashes"]["train.txt"].get<std::string>().size() == 40);

    const auto c = run_cli(common + " --out '" + (dir.path / "c").string() + "' --seed 6");
    REQUIRE(c.code == 0);
    CHECK(read_file(dir.path / "a" / "transe/H.mat") != read_file(dir.path / "c" / "transe/H.mat"));

    // Re-running from the manifest reproduces the run.
    const auto d = run_cli("pipeline -q --json --from-manifest '" + (dir.path / "a" / "run_manifest.json").string() +
                           "' --out '" + (dir.path / "d").string() + "'");
    REQUIRE(d.code == 0);
    CHECK(d.out == a.out);
}

TEST_CASE("stage commands chain") {
    TempDir dir;
    write_toy(dir.path);
    const std::string base = "--data '" + (dir.path / "data").string() + "' --config '" +
                             (dir.path / "toy.cfg").string() + "' -q --out '" + (dir.path / "o").string() + "'";
    CHECK(run_cli("build-aux " + base).code == 0);
    CHECK(std::filesystem::exists(dir.path / "o" / "aux_paths.tsv"));
    CHECK(run_cli("init-transe " + base).code == 0);
    CHECK(run_cli("train-encoder " + base + " --init '" + (dir.path / "o" / "transe").string() + "'").code == 0);
    CHECK(run_cli("train-decoder " + base + " --encoder '" + (dir.path / "o" / "encoder").string() + "'").code == 0);
    const auto ev = run_cli("evaluate " + base + " --decoder '" + (dir.path / "o" / "decoder").string() +
                            "' --json --per-triple");
    REQUIRE(ev.code == 0);
    CHECK(nlohmann::json::parse(ev.out)["n_queries"] == 4);
    CHECK(read_file(dir.path / "o" / "per_triple.csv").rfind("head,relation,tail,side,rank\n", 0) == 0);
    const auto pr = run_cli("analyze pagerank --data '" + kinship() + "' --json");
    REQUIRE(pr.code == 0);
    CHECK(nlohmann::json::parse(pr.out)["mean_pagerank_e5"].get<double>() == doctest::Approx(961.54).epsilon(1e-4));
}

}
