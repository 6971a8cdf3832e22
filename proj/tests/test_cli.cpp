#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "fsrl/cli.hpp"
#include "fsrl/flowsheet.hpp"

using namespace fsrl;

namespace {

const std::string kFlowsheets = std::string(FSRL_SOURCE_DIR) + "/flowsheets/";

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fsrl_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir / name;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "fsrl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate prints the economics of a completed flowsheet") {
    std::ostringstream out, err;
    CHECK(cli::cmd_simulate(kFlowsheets + "two_column_recycle.json", std::nullopt, out, err) == cli::kOk);
    const std::string text = out.str();
    CHECK(text.find("outcome completed") != std::string::npos);
    CHECK(text.find("reward 63304848.97 EUR/y") != std::string::npos);
    CHECK(text.find("(recycle)") != std::string::npos);
    CHECK(err.str().empty());
}

TEST_CASE("simulate reports a trivial sale") {
    std::ostringstream out, err;
    CHECK(cli::cmd_simulate(kFlowsheets + "feed_only.json", std::nullopt, out, err) == cli::kOk);
    CHECK(out.str().find("outcome trivial-sale\nreward -10000000.00") != std::string::npos);
}

TEST_CASE("simulate input errors") {
    std::ostringstream out, err;
    CHECK(cli::cmd_simulate("/nonexistent.json", std::nullopt, out, err) == cli::kFailure);
    CHECK(err.str().find("cannot open") != std::string::npos);

    const auto bad = scratch("bad.json");
    std::ofstream(bad) << "{\"nodes\": [";
    err.str("");
    CHECK(cli::cmd_simulate(bad, std::nullopt, out, err) == cli::kFailure);
    CHECK_FALSE(err.str().empty());

    // A flowsheet with an open stream cannot be costed.
    const auto open = scratch("open.json");
    std::ofstream(open) << new_flowsheet({}).to_json();
    err.str("");
    CHECK(cli::cmd_simulate(open, std::nullopt, out, err) == cli::kFailure);
    CHECK(err.str().find("open stream") != std::string::npos);
}

TEST_CASE("export-dot writes one node line per unit") {
    const auto dot = scratch("flowsheet.dot");
    CHECK(run({"export-dot", kFlowsheets + "two_column_recycle.json", dot.string()}) == cli::kOk);
    const std::string text = slurp(dot);
    const auto g = FlowsheetGraph::from_json(slurp(kFlowsheets + "two_column_recycle.json"));
    std::size_t nodes = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.find("[label=") != std::string::npos && line.find("->") == std::string::npos) ++nodes;
    }
    CHECK(nodes == g.nodes().size());
    CHECK(text.rfind("digraph", 0) == 0);
    CHECK(run({"export-dot", "/nonexistent.json", dot.string()}) == cli::kFailure);
}

TEST_CASE("train writes a run directory") {
    const auto dir = scratch("run");
    std::ostringstream out, err;
    cli::TrainArgs args;
    args.mode = "discrete";
    args.episodes = 3;
    args.seed = 5;
    args.out = dir;
    CHECK(cli::cmd_train(args, out, err) == cli::kOk);
    CHECK(std::filesystem::exists(dir / "learning_curve.csv"));
    CHECK(out.str().find("mode discrete, 3 episodes, seed 5") != std::string::npos);

    args.mode = "quantum";
    CHECK(cli::cmd_train(args, out, err) == cli::kUsage);
}

TEST_CASE("argument errors exit with the usage code") {
    CHECK(run({}) == cli::kUsage);
    CHECK(run({"train", "--mode", "bogus"}) == cli::kUsage);
    CHECK(run({"train", "--episodes", "0"}) == cli::kUsage);
    CHECK(run({"simulate"}) == cli::kUsage);
    CHECK(run({"simulate", kFlowsheets + "feed_only.json", "--config", "/nonexistent.json"}) == cli::kUsage);
    CHECK(run({"frobnicate"}) == cli::kUsage);
    CHECK(run({"--version"}) == cli::kOk);
    std::filesystem::remove_all(scratch("").parent_path());
}

}  // TEST_SUITE
