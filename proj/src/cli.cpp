#include "fsrl/cli.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fsrl/env.hpp"
#include "fsrl/ppo.hpp"

namespace fsrl::cli {

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Config resolve_config(const std::optional<std::filesystem::path>& path) {
    if (path) return load_config(*path);
    const auto shipped = default_config_path();
    if (std::filesystem::exists(shipped)) return load_config(shipped);
    return Config{};
}

std::string fmt_line(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

void print_streams(const FlowsheetGraph& g, std::ostream& out) {
    const auto labels = node_labels(g);
    out << fmt_line("%-6s %-6s %-5s %10s %8s %8s %8s %8s %8s\n", "from", "to", "port", "flow", "T", "MeOAc", "MeOH",
                    "HOAc", "H2O");
    for (const Edge& e : g.edges()) {
        const Stream& s = e.stream;
        out << fmt_line("%-6s %-6s %-5d %10.4f %8.3f %8.5f %8.5f %8.5f %8.5f%s\n", labels[e.source].c_str(),
                        labels[e.target].c_str(), e.port, s.flow, s.temperature_c, s.x[0], s.x[1], s.x[2], s.x[3],
                        e.recycle ? "  (recycle)" : "");
    }
}

void print_report(const FlowsheetGraph& g, const EconReport& r, std::ostream& out) {
    const auto labels = node_labels(g);
    out << fmt_line("revenue        %16.2f EUR/y\n", r.revenue);
    out << fmt_line("feed cost      %16.2f EUR/y\n", r.feed_cost);
    out << fmt_line("unit cost      %16.2f EUR/y\n", r.unit_cost);
    for (const UnitCost& u : r.units) {
        out << fmt_line("  %-6s utility %14.2f EUR/y  capital %14.2f EUR\n", labels[u.node].c_str(), u.utility,
                        u.capital);
    }
    out << fmt_line("net cash flow  %16.2f EUR/y\n", r.net_cash_flow);
}

}  // namespace

void configure_logging() {
    const char* level = std::getenv("FSRL_LOG_LEVEL");
    if (level == nullptr || *level == '\0') return;
    const auto parsed = spdlog::level::from_str(level);
    // from_str maps unknown names to off; only accept that for "off" itself.
    if (parsed == spdlog::level::off && std::string(level) != "off") {
        spdlog::warn("ignoring unknown FSRL_LOG_LEVEL '{}'", level);
        return;
    }
    spdlog::set_level(parsed);
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    TrainOptions opts;
    try {
        opts.mode = parse_mode(args.mode);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << " (expected discrete, continuous or hybrid)\n";
        return kUsage;
    }
    if (args.episodes < 1 || args.workers < 1 || args.checkpoint_every < 0) {
        err << "error: episodes and workers must be positive, checkpoint interval non-negative\n";
        return kUsage;
    }
    Config cfg;
    try {
        cfg = resolve_config(args.config);
    } catch (const std::exception& e) {
        err << "error: bad config: " << e.what() << "\n";
        return kFailure;
    }
    opts.episodes = args.episodes;
    opts.seed = args.seed;
    opts.workers = args.workers;
    opts.checkpoint_every = args.checkpoint_every;
    opts.out_dir = args.out;
    try {
        Agent agent(cfg, args.seed);
        const TrainResult r = train(cfg, agent, [&] { return std::make_unique<FlowsheetEnv>(cfg); }, opts);
        const double last = r.avg50.empty() ? 0.0 : r.avg50.back();
        out << fmt_line("mode %s, %d episodes, seed %llu\n", to_string(opts.mode), opts.episodes,
                        static_cast<unsigned long long>(opts.seed));
        out << fmt_line("final avg50 %.4f Mio EUR/y, best %.4f Mio EUR/y (episode %d)\n", last * 1e-6,
                        r.best_score * 1e-6, r.best_episode + 1);
        out << "run directory: " << args.out.string() << "\n";
    } catch (const std::exception& e) {
        err << "error: training failed: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}

int cmd_simulate(const std::filesystem::path& flowsheet, const std::optional<std::filesystem::path>& config,
                 std::ostream& out, std::ostream& err) {
    Config cfg;
    FlowsheetGraph g;
    try {
        cfg = resolve_config(config);
        g = FlowsheetGraph::from_json(read_text(flowsheet));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    const Economics econ(cfg);
    FlowsheetGraph solved;
    try {
        solved = FlowsheetSimulator(cfg).simulate(g);
    } catch (const SimulationFailure& e) {
        err << "simulation failed: " << e.what() << "\n";
        out << fmt_line("outcome simulation-failure\nreward %.2f EUR/y\n", econ.reward(Outcome::failure()));
        return kFailure;
    }
    print_streams(solved, out);
    if (!solved.open_streams().empty()) {
        err << "error: flowsheet has " << solved.open_streams().size()
            << " open stream(s); close them with products before costing\n";
        return kFailure;
    }
    if (solved.unit_count() == 0) {
        out << fmt_line("outcome trivial-sale\nreward %.2f EUR/y\n", econ.reward(Outcome::trivial_sale()));
        return kOk;
    }
    const Outcome o = Outcome::completed(econ.net_cash_flow(solved));
    print_report(solved, o.report, out);
    out << fmt_line("outcome completed\nreward %.2f EUR/y\n", econ.reward(o));
    return kOk;
}

int cmd_export_dot(const std::filesystem::path& flowsheet, const std::filesystem::path& out_path, std::ostream& err) {
    try {
        const FlowsheetGraph g = FlowsheetGraph::from_json(read_text(flowsheet));
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path.string());
        out << g.to_dot();
        if (!out) throw std::runtime_error("write failed: " + out_path.string());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}

int run(int argc, const char* const* argv) {
    configure_logging();
    CLI::App app{"Flowsheet synthesis with hierarchical PPO"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    TrainArgs train_args;
    std::string config_path;
    auto* train_cmd = app.add_subcommand("train", "Train an agent and write a run directory");
    train_cmd->add_option("--mode", train_args.mode, "discrete | continuous | hybrid")
        ->check(CLI::IsMember({"discrete", "continuous", "hybrid"}));
    train_cmd->add_option("--episodes", train_args.episodes, "Number of episodes")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_args.seed, "Random seed");
    train_cmd->add_option("--config", config_path, "Config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_args.out, "Run directory");
    train_cmd->add_option("--workers", train_args.workers, "Parallel episodes per round")->check(CLI::PositiveNumber);
    train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every, "Episodes between checkpoints (0: end only)")
        ->check(CLI::NonNegativeNumber);

    std::string sim_path;
    std::string sim_config;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a flowsheet JSON and print its economics");
    sim_cmd->add_option("flowsheet", sim_path, "Flowsheet JSON")->required();
    sim_cmd->add_option("--config", sim_config, "Config JSON")->check(CLI::ExistingFile);

    std::string dot_in, dot_out;
    auto* dot_cmd = app.add_subcommand("export-dot", "Write a flowsheet JSON as Graphviz DOT");
    dot_cmd->add_option("flowsheet", dot_in, "Flowsheet JSON")->required();
    dot_cmd->add_option("out", dot_out, "DOT output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (*train_cmd) {
        if (!config_path.empty()) train_args.config = config_path;
        return cmd_train(train_args, std::cout, std::cerr);
    }
    if (*sim_cmd) {
        std::optional<std::filesystem::path> cfg;
        if (!sim_config.empty()) cfg = sim_config;
        return cmd_simulate(sim_path, cfg, std::cout, std::cerr);
    }
    return cmd_export_dot(dot_in, dot_out, std::cerr);
}

}  // namespace fsrl::cli
