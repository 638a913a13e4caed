// aura: headless front end for live sessions, scripted scenarios and logs.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aura/api_server.hpp"
#include "aura/arousal.hpp"
#include "aura/config.hpp"
#include "aura/host.hpp"
#include "aura/scenario.hpp"
#include "aura/session.hpp"
#include "aura/udp_ingest.hpp"

namespace fs = std::filesystem;
using aura::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEngine = 3;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

/// Overrides from --config, with --seed on top.
json load_overrides(const Common& c) {
    json overrides = json::object();
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) throw aura::Error(aura::ErrorCode::BadConfig, "cannot open " + c.config_path);
        try {
            overrides = json::parse(in);
        } catch (const json::exception& e) {
            throw aura::Error(aura::ErrorCode::BadConfig, e.what());
        }
        if (!overrides.is_object()) throw aura::Error(aura::ErrorCode::BadConfig, "config file must hold an object");
    }
    if (c.seed) overrides["seed"] = *c.seed;
    return overrides;
}

bool is_input_error(aura::ErrorCode code) {
    switch (code) {
        case aura::ErrorCode::BadConfig:
        case aura::ErrorCode::BadScenario:
        case aura::ErrorCode::BadFormat:
            return true;
        default:
            return false;
    }
}

int fail(const aura::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInput : kExitEngine;
}

void print_summary_table(const json& summary) {
    std::printf("scenario      %s\n", summary.at("name").get<std::string>().c_str());
    std::printf("final mode    %s\n", summary.at("final_mode").get<std::string>().c_str());
    std::printf("digest        %s\n", summary.at("digest").get<std::string>().c_str());
    std::printf("events        %zu\n", summary.at("events").get<std::size_t>());
    std::printf("robot writes  %llu\n",
                static_cast<unsigned long long>(summary.at("robot_pixel_writes").get<std::uint64_t>()));
    std::printf("violations    %llu\n",
                static_cast<unsigned long long>(summary.at("zone_violations").get<std::uint64_t>()));
    std::printf("\n%8s  %10s  %-12s  %-12s  %12s\n", "seq", "at_ms", "from", "to", "robot_pixels");
    for (const auto& t : summary.at("transitions")) {
        std::printf("%8llu  %10llu  %-12s  %-12s  %12llu\n",
                    static_cast<unsigned long long>(t.at("seq").get<std::uint64_t>()),
                    static_cast<unsigned long long>(t.at("at_ms").get<std::uint64_t>()),
                    t.at("from").get<std::string>().c_str(), t.at("to").get<std::string>().c_str(),
                    static_cast<unsigned long long>(t.at("robot_pixels").get<std::uint64_t>()));
    }
    std::printf("\nrobot pixels by quadrant (col,row)\n");
    for (const auto& [q, n] : summary.at("robot_pixels_by_quadrant").items()) {
        std::printf("  %s  %llu\n", q.c_str(), static_cast<unsigned long long>(n.get<std::uint64_t>()));
    }
}

int cmd_scenario(const Common& common, const std::string& path, const std::string& out_dir, bool fast) {
    aura::Scenario sc;
    try {
        sc = aura::load_scenario(path);
        json overrides = load_overrides(common);
        overrides.merge_patch(sc.config_overrides);
        if (common.seed) overrides["seed"] = *common.seed;
        sc.config_overrides = overrides;
        sc = aura::parse_scenario(aura::to_json(sc));
    } catch (const aura::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    try {
        aura::RunOptions opts;
        opts.fast = fast;
        const auto run = aura::run_scenario(sc, opts);
        const auto summary = aura::scenario_summary(run);
        if (!out_dir.empty()) aura::write_scenario_outputs(run, out_dir);
        print_summary_table(summary);
        return kExitOk;
    } catch (const aura::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitEngine;
    }
}

aura::SessionLog load_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw aura::Error(aura::ErrorCode::BadFormat, "cannot open " + path);
    return aura::read_log(in);
}

/// Replays with the header's config unless --config names another, in which
/// case the hashes must agree.
aura::Session replay_file(const Common& common, const std::string& path) {
    const auto log = load_log(path);
    auto config = log.config();
    if (!common.config_path.empty() || common.seed) config = aura::config_from_json(load_overrides(common));
    return aura::replay_log(log, config);
}

int cmd_replay(const Common& common, const std::string& path) {
    try {
        const auto s = replay_file(common, path);
        std::printf("replayed     %llu events\n", static_cast<unsigned long long>(s.last_seq));
        std::printf("final mode   %s\n", std::string(aura::to_string(s.mode)).c_str());
        std::printf("digest       %s\n", aura::canvas_digest(s.canvas).c_str());
        std::printf("robot writes %llu\n", static_cast<unsigned long long>(s.robot_pixel_writes));
        return kExitOk;
    } catch (const aura::Error& e) {
        return fail(e);
    }
}

int cmd_export(const Common& common, const std::string& path, const std::string& ppm_path) {
    try {
        const auto s = replay_file(common, path);
        std::ofstream out(ppm_path, std::ios::binary);
        if (!out) throw aura::Error(aura::ErrorCode::BadFormat, "cannot write " + ppm_path);
        const auto bytes = aura::export_ppm(s.canvas);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        std::printf("%s  %s\n", ppm_path.c_str(), aura::canvas_digest(s.canvas).c_str());
        return kExitOk;
    } catch (const aura::Error& e) {
        return fail(e);
    }
}

void print_baseline(const aura::Session& s) {
    const auto& b = s.baseline;
    std::printf("estimates    %d\n", b.n_samples);
    std::printf("mu_bpm       %.3f\n", b.mu_bpm);
    std::printf("sigma_bpm    %.3f\n", b.sigma_bpm);
    std::printf("calibrated   %s\n", b.calibrated ? "yes" : "no");
    if (b.calibrated) std::printf("threshold    %.3f\n", aura::arousal_threshold(b, s.config.arousal));
}

int cmd_calibrate(const Common& common, const std::string& input, int udp_port, double seconds) {
    try {
        if (!input.empty()) {
            if (fs::path(input).extension() == ".jsonl") {
                print_baseline(replay_file(common, input));
                return kExitOk;
            }
            auto sc = aura::load_scenario(input);
            json overrides = load_overrides(common);
            overrides.merge_patch(sc.config_overrides);
            sc.config_overrides = overrides;
            print_baseline(aura::run_scenario(sc).runner.session());
            return kExitOk;
        }
        const auto config = aura::config_from_json(load_overrides(common));
        aura::SessionHost host;
        host.start(config);
        boost::asio::io_context io;
        aura::UdpIngest udp(io, host, config.server.bind, static_cast<unsigned short>(udp_port));
        std::printf("listening on udp %u for %.0f s\n", udp.port(), seconds);
        std::fflush(stdout);
        io.run_for(std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0)));
        host.with_session([](const aura::Session& s, const auto&) {
            print_baseline(s);
            return 0;
        });
        return kExitOk;
    } catch (const aura::Error& e) {
        return fail(e);
    }
}

std::atomic<bool> g_stop{false};

int cmd_run(const Common& common, int port, int udp_port, const std::string& out_dir, double duration_s) {
    aura::SessionConfig config;
    json overrides;
    try {
        overrides = load_overrides(common);
        config = aura::config_from_json(overrides);
    } catch (const aura::Error& e) {
        return fail(e);
    }
    if (port >= 0) config.server.port = port;
    if (udp_port >= 0) config.server.udp_port = udp_port;

    aura::SessionHost host;
    host.start(config);

    aura::ApiOptions api;
    api.bind = config.server.bind;
    api.port = static_cast<unsigned short>(config.server.port);
    api.client_buffer = config.server.client_buffer;
    api.max_stroke_points = config.server.max_stroke_points;
    api.base_overrides = overrides;
    aura::ApiServer server(host, api);
    std::optional<aura::UdpIngest> udp;
    try {
        udp.emplace(server.io(), host, config.server.bind, static_cast<unsigned short>(config.server.udp_port));
        server.start();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitEngine;
    }
    std::printf("http  http://%s:%u  (websocket /ws)\n", api.bind.c_str(), server.port());
    std::printf("udp   %s:%u\n", config.server.bind.c_str(), udp->port());
    std::fflush(stdout);

    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    const auto started = std::chrono::steady_clock::now();
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (duration_s > 0.0 &&
            std::chrono::steady_clock::now() - started >= std::chrono::duration<double>(duration_s)) {
            break;
        }
    }
    udp->close();
    server.stop();

    if (!out_dir.empty() && host.started()) {
        fs::create_directories(out_dir);
        const auto log = host.log();
        const auto cfg = host.config();
        std::ofstream out(fs::path(out_dir) / "session.jsonl", std::ios::binary);
        aura::write_log(out, cfg, log);
        std::ofstream ppm(fs::path(out_dir) / "canvas.ppm", std::ios::binary);
        ppm << host.canvas_ppm();
        std::printf("wrote %zu events to %s\n", log.size(), (fs::path(out_dir) / "session.jsonl").c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aura: biofeedback co-painting session engine"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--config", common.config_path, "JSON file of config overrides");
    app.add_option("--seed", common.seed, "Planner seed");

    std::string path;
    std::string out_dir;
    bool fast = false;
    int port = -1;
    int udp_port = -1;
    double duration_s = 0.0;
    std::string ppm_path;
    double seconds = 60.0;

    auto* run = app.add_subcommand("run", "Live session with HTTP/WebSocket API and UDP ingest");
    run->add_option("--port", port, "HTTP port");
    run->add_option("--udp-port", udp_port, "UDP sensor port");
    run->add_option("--out", out_dir, "Write session.jsonl and canvas.ppm here on exit");
    run->add_option("--duration", duration_s, "Stop after this many seconds");

    auto* scenario = app.add_subcommand("scenario", "Run a scripted scenario on simulated time");
    scenario->add_option("file", path, "Scenario JSON")->required();
    scenario->add_option("--out", out_dir, "Output directory for session.jsonl, canvas.ppm, summary.json");
    scenario->add_flag("--fast", fast, "Do not sleep between ticks");

    auto* replay = app.add_subcommand("replay", "Replay a session log and verify it");
    replay->add_option("log", path, "Session log (.jsonl)")->required();

    auto* exp = app.add_subcommand("export", "Replay a log and write the final canvas");
    exp->add_option("log", path, "Session log (.jsonl)")->required();
    exp->add_option("--ppm", ppm_path, "Output PPM path")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Print the baseline from a log, a scenario, or live UDP");
    calibrate->add_option("input", path, "Session log (.jsonl) or scenario (.json); omit to listen on UDP");
    calibrate->add_option("--udp-port", udp_port, "UDP port when listening");
    calibrate->add_option("--seconds", seconds, "How long to listen");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    if (*run) return cmd_run(common, port, udp_port, out_dir, duration_s);
    if (*scenario) return cmd_scenario(common, path, out_dir, fast);
    if (*replay) return cmd_replay(common, path);
    if (*exp) return cmd_export(common, path, ppm_path);
    if (*calibrate) return cmd_calibrate(common, path, udp_port < 0 ? 12345 : udp_port, seconds);
    return kExitInput;
}
