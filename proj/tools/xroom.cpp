// xroom: session server, headless simulation, calibration tables and bundle export.

#include "xroom/calibration.hpp"
#include "xroom/dataset.hpp"
#include "xroom/gateway.hpp"
#include "xroom/simulation.hpp"
#include "xroom/tcp_server.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace {

void configure_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("XROOM_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only honour it when asked for
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
}

int serve(std::uint16_t port, const std::string& config_path, const std::string& bind) {
    xroom::GatewayConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw xroom::Error(xroom::ErrorCode::IoFailure, "cannot read " + config_path);
        cfg = xroom::gateway_config_from_json(xroom::json::parse(in));
    }
    // Block termination signals before any thread starts so sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    xroom::SteadyClock clock;
    xroom::Gateway gateway(cfg, clock);
    xroom::TcpServer server(gateway, port, bind);
    server.start();
    std::printf("xroom serving protocol %s on %s:%u\n", xroom::kProtocolVersion, bind.c_str(), server.port());
    std::fflush(stdout);
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server.stop();
    return 0;
}

int simulate(const xroom::SimulationOptions& opts) {
    const auto result = xroom::run_simulation(opts);
    std::printf("%-5s %-5s %-8s %-9s %-9s %-8s %-6s %-6s\n", "trial", "probe", "target", "requested", "challenge", "zone",
                "score", "skill");
    for (const auto& r : result.records) {
        std::printf("%-5d %-5s %-8s %-9.3f %-9.3f %-8s %-6.3f %-6.3f\n", r.trial_index, r.probe ? "yes" : "no",
                    xroom::zone_name(r.target), r.requested_challenge, r.task.challenge, xroom::zone_name(r.predicted_zone),
                    r.score, r.skill_after.value);
    }
    const auto window = std::min<std::size_t>(10, result.records.size());
    const double rate = xroom::steady_state_hit_rate(result.records, window);
    std::printf("zone hit rate over the last %zu trials: %.2f\n", window, rate);
    for (const auto& [id, n] : result.samples_sent) std::printf("stream %s: %zu samples\n", id.c_str(), n);
    if (opts.out) std::printf("dataset written to %s\n", opts.out->string().c_str());
    return 0;
}

int calibrate(int disks) {
    std::fputs(xroom::format_calibration(xroom::calibrate(disks)).c_str(), stdout);
    return 0;
}

int export_bundle(const std::string& in, bool wide, const std::string& out) {
    std::vector<xroom::Finding> findings;
    const auto dataset = xroom::load_dataset(in, findings);
    if (!findings.empty()) {
        for (const auto& f : findings) std::fprintf(stderr, "%s\n", xroom::to_string(f).c_str());
        std::fprintf(stderr, "%zu finding(s)\n", findings.size());
        return 1;
    }
    if (wide) {
        const auto csv = xroom::wide_csv(dataset);
        if (out.empty()) {
            std::fputs(csv.c_str(), stdout);
        } else {
            xroom::write_text(out, csv);
        }
        return 0;
    }
    if (!out.empty()) xroom::write_dataset(dataset, out);
    std::printf("%s: valid bundle, %zu trials, %zu labels, %zu streams\n", in.c_str(), dataset.trials.size(),
                dataset.labels.size(), dataset.streams.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"xroom: adaptive emotion-elicitation engine"};
    app.require_subcommand(1);

    auto* serve_cmd = app.add_subcommand("serve", "run the session server");
    int port = 7420;
    std::string config_path, bind = "127.0.0.1";
    serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--bind", bind, "listen address");

    auto* sim_cmd = app.add_subcommand("simulate", "run a closed-loop session against a simulated participant");
    xroom::SimulationOptions sim;
    std::string target = "flow", out, disconnect;
    sim_cmd->add_option("--skill", sim.skill, "true skill of the simulated participant")->check(CLI::Range(0.0, 1.0));
    sim_cmd->add_option("--target-emotion", target, "anxiety, flow or boredom")
        ->check(CLI::IsMember({"anxiety", "flow", "boredom"}));
    sim_cmd->add_option("--trials", sim.trials, "number of trials")->check(CLI::Range(1, 1000));
    sim_cmd->add_option("--seed", sim.seed, "random seed");
    sim_cmd->add_option("--disks", sim.disks, "disk count")->check(CLI::Range(1, xroom::kMaxDisks));
    sim_cmd->add_option("--out", out, "directory for the exported dataset");
    sim_cmd->add_option("--disconnect-stream", disconnect, "stream to drop mid-session (ppg, gsr or eye)");
    sim_cmd->add_option("--disconnect-at-trial", sim.disconnect_at_trial, "trial at which the stream drops");

    auto* cal_cmd = app.add_subcommand("calibrate", "print difficulty tables for a disk count");
    int disks = xroom::kDefaultDisks;
    cal_cmd->add_option("--disks", disks, "disk count (at most 7)");

    auto* export_cmd = app.add_subcommand("export", "validate and re-emit a dataset bundle");
    std::string in, export_out;
    bool wide = false;
    export_cmd->add_option("--in", in, "bundle directory")->required();
    export_cmd->add_flag("--wide", wide, "merge all streams into one wide CSV");
    export_cmd->add_option("--out", export_out, "output directory (identity) or file (wide)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(static_cast<std::uint16_t>(port), config_path, bind);
        if (*sim_cmd) {
            sim.target = *xroom::parse_zone(target);
            if (!out.empty()) sim.out = out;
            if (!disconnect.empty()) sim.disconnect_stream = disconnect;
            return simulate(sim);
        }
        if (*cal_cmd) return calibrate(disks);
        if (*export_cmd) return export_bundle(in, wide, export_out);
    } catch (const xroom::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
