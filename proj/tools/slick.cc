// slick: run instances, generate load, benchmark, host CAS and LAS.

#include <atomic>
#include <bit>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <slick/attest.hh>
#include <slick/bench.hh>
#include <slick/chain.hh>
#include <slick/config.hh>
#include <slick/elements.hh>
#include <slick/log.hh>
#include <slick/pcap.hh>
#include <slick/persist.hh>
#include <slick/pktgen.hh>
#include <slick/runtime.hh>

namespace fs = std::filesystem;
using namespace slick;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2, kRejected = 3 };

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string read_text(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<std::string> env(const char *name) {
    const char *v = std::getenv(name);
    if (!v || !*v)
        return std::nullopt;
    return std::string(v);
}

struct RunArgs {
    std::vector<std::string> configs;
    std::string role = "primary";
    std::string stats_json;
    std::string state_file;
    std::string cas, las;
    std::vector<std::string> inject;
    double duration = 0;
    std::string instance_id = "slick0";
};

std::unique_ptr<Instance> load(const std::string &text, const InstanceSettings &s) {
    auto g = config::parse_config(text);
    auto checked = config::validate_graph(g, elements::default_registry());
    return instantiate(checked, s);
}

int cmd_run(const RunArgs &a) {
    auto platform = std::make_shared<Platform>();
    std::vector<std::string> texts;
    for (const auto &p : a.configs)
        texts.push_back(read_text(p));

    InstanceSettings base;
    base.platform = platform;
    base.id = a.instance_id;
    base.role = a.role == "secondary" ? Role::Secondary : Role::Primary;
    base.clock = clock_from_env(ClockKind::Host);
    if (!a.state_file.empty())
        base.state_file_override = a.state_file;

    auto hw = attest::platform_key();
    std::string cas = a.cas.empty() ? env("SLICK_CAS_ADDR").value_or("") : a.cas;
    std::string las = a.las.empty() ? env("SLICK_LAS_ADDR").value_or("") : a.las;
    std::string primary_text = texts.front();
    if (!cas.empty()) {
        if (las.empty())
            throw std::invalid_argument("--cas needs --las (or SLICK_LAS_ADDR)");
        attest::BootstrapOptions opt;
        opt.instance_id = a.instance_id;
        auto r = attest::enclave_bootstrap(attest::parse_address(cas), attest::parse_address(las),
                                           primary_text, opt);
        log::info("attested as {}; phases {}", crypto::to_hex(r.measurement),
                  r.phases.to_json());
        if (!r.config.config_text.empty())
            texts.front() = r.config.config_text;
        base.secrets = r.config.secrets;
    } else {
        log::warn("no CAS configured: running the local configuration in development mode");
    }

    std::vector<std::unique_ptr<Instance>> insts;
    for (size_t i = 0; i < texts.size(); ++i) {
        InstanceSettings s = base;
        if (i > 0) {
            s.id = fmt::format("{}-{}", a.instance_id, i);
            s.role = Role::Secondary;
        }
        s.base_dir = fs::absolute(a.configs[i]).parent_path().string();
        auto m = attest::measure(attest::kBinaryIdentity, i == 0 ? primary_text : texts[i]);
        s.derive_key = [hw, m](std::string_view purpose) {
            return attest::derive_seal_key(hw, m, purpose);
        };
        insts.push_back(load(texts[i], s));
    }

    for (const auto &spec : a.inject) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--inject expects DEV=PCAP");
        TestDevice &dev = platform->devices.get(spec.substr(0, eq));
        for (auto &rec : pcap::read_file(spec.substr(eq + 1)))
            dev.inject(std::move(rec.data));
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    StopCondition sc;
    sc.stop_flag = &g_stop;
    if (a.duration > 0)
        sc.wall_ns = uint64_t(a.duration * 1e9);
    else
        sc.drain = true;

    std::vector<std::thread> peers;
    std::atomic<bool> peers_stop{false};
    for (size_t i = 1; i < insts.size(); ++i) {
        peers.emplace_back([&, i] {
            StopCondition p;
            p.stop_flag = &peers_stop;
            insts[i]->run(p);
        });
    }
    RunStats st;
    try {
        if (insts.size() > 1 && a.duration <= 0) {
            // Secondaries never drain on their own; stop once the primary is
            // idle and every ring is empty.
            sc.drain = false;
            sc.until = [&] {
                if (!insts[0]->drained())
                    return false;
                for (size_t i = 1; i < insts.size(); ++i)
                    if (!insts[i]->drained())
                        return false;
                return insts[0]->drained();
            };
        }
        st = insts[0]->run(sc);
    } catch (...) {
        peers_stop = true;
        for (auto &t : peers)
            t.join();
        throw;
    }
    peers_stop = true;
    for (auto &t : peers)
        t.join();

    for (size_t i = 1; i < insts.size(); ++i) {
        RunStats p = insts[i]->stats();
        st.rx += p.rx;
        st.tx += p.tx;
        st.drops += p.drops;
        st.errors += p.errors;
        for (auto &[k, v] : p.counters)
            st.counters[insts[i]->id() + "/" + k] = v;
    }
    std::string json = st.to_json();
    if (!a.stats_json.empty()) {
        std::ofstream out(a.stats_json);
        out << json << "\n";
    } else {
        std::cout << json << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"slick: secure middlebox framework"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug|info|warn|error")->configurable();
    app.fallthrough();

    RunArgs ra;
    auto *run = app.add_subcommand("run", "run an instance from a configuration");
    run->add_option("--config", ra.configs,
                    "configuration file; extra files run as secondary instances")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--role", ra.role)->check(CLI::IsMember({"primary", "secondary"}));
    run->add_option("--stats-json", ra.stats_json, "write RunStats here instead of stdout");
    run->add_option("--state-file", ra.state_file, "override StateFile paths");
    run->add_option("--cas", ra.cas, "CAS address (or SLICK_CAS_ADDR)");
    run->add_option("--las", ra.las, "LAS address (or SLICK_LAS_ADDR)");
    run->add_option("--inject", ra.inject, "DEV=PCAP: preload a test device");
    run->add_option("--duration", ra.duration, "seconds; default runs until drained");
    run->add_option("--id", ra.instance_id, "instance id");

    bench::Options bo;
    std::string bench_app = "wire", bench_sizes = "64", bench_mode = "throughput", bench_json;
    bool no_opt = false;
    std::string bench_clock;
    auto *bench = app.add_subcommand("bench", "benchmark an app");
    bench->add_option("--app", bench_app)->check(CLI::IsMember(bench::app_names()));
    bench->add_option("--sizes", bench_sizes, "comma-separated frame sizes");
    bench->add_option("--duration", bo.duration_s, "seconds per size");
    bench->add_option("--mode", bench_mode)->check(CLI::IsMember({"throughput", "latency"}));
    bench->add_flag("--no-timer-opt", no_opt, "disable the timer optimization");
    bench->add_option("--clock", bench_clock, "host|nicptp");
    bench->add_option("--trials", bo.trials, "best of N runs");
    bench->add_option("--samples", bo.latency_samples, "latency round trips (0: duration)");
    bench->add_option("--json", bench_json, "append JSON lines here");

    uint32_t pg_size = 64, pg_count = 1000;
    double pg_rate = 0;
    uint64_t pg_seed = 1;
    std::string pg_out;
    auto *pktgen_cmd = app.add_subcommand("pktgen", "generate synthetic traffic");
    pktgen_cmd->add_option("--size", pg_size)->check(CLI::Range(42u, 1518u));
    pktgen_cmd->add_option("--count", pg_count);
    pktgen_cmd->add_option("--rate", pg_rate, "packets per second (0: unlimited)");
    pktgen_cmd->add_option("--seed", pg_seed);
    pktgen_cmd->add_option("--out", pg_out, "PATH.pcap or ring:NAME")->required();

    std::string cas_listen = "127.0.0.1:7700", cas_store, cas_admin;
    auto *cas = app.add_subcommand("cas", "run the configuration and attestation service");
    cas->add_option("--listen", cas_listen);
    cas->add_option("--store", cas_store, "JSON-lines policy store");
    cas->add_option("--admin", cas_admin, "HTTP admin address");

    std::string las_listen = "127.0.0.1:7701", las_cas = "127.0.0.1:7700";
    auto *las = app.add_subcommand("las", "run the local attestation service");
    las->add_option("--listen", las_listen);
    las->add_option("--cas", las_cas);

    std::string measure_config;
    auto *measure = app.add_subcommand("measure", "print the measurement of a configuration");
    measure->add_option("--config", measure_config)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    if (log_level == "debug")
        log::set_level(log::Level::Debug);
    else if (log_level == "warn")
        log::set_level(log::Level::Warn);
    else if (log_level == "error")
        log::set_level(log::Level::Error);

    try {
        if (*run)
            return cmd_run(ra);

        if (*bench) {
            bo.app = bench_app;
            bo.sizes.clear();
            std::stringstream ss(bench_sizes);
            for (std::string tok; std::getline(ss, tok, ',');)
                bo.sizes.push_back(uint32_t(std::stoul(tok)));
            bo.mode = bench_mode == "latency" ? bench::Mode::Latency : bench::Mode::Throughput;
            bo.timer_optimization = !no_opt;
            if (!bench_clock.empty()) {
                bo.clock = parse_clock_kind(bench_clock);
                if (!bo.clock)
                    throw std::invalid_argument("unknown clock '" + bench_clock + "'");
            }
            auto reports = bench::run(bo);
            std::ofstream jf;
            if (!bench_json.empty())
                jf.open(bench_json, std::ios::app);
            for (const auto &r : reports) {
                (jf.is_open() ? static_cast<std::ostream &>(jf) : std::cout) << r.to_json() << "\n";
            }
            std::cout << bench::format_table(reports);
            return kOk;
        }

        if (*pktgen_cmd) {
            pktgen::FrameSpec spec;
            spec.size = pg_size;
            spec.seed = pg_seed;
            pktgen::Generator gen(spec);
            uint64_t start = wall_ns();
            auto pace = [&](uint32_t i) {
                if (pg_rate <= 0)
                    return;
                uint64_t due = start + uint64_t(double(i) * 1e9 / pg_rate);
                while (wall_ns() < due)
                    std::this_thread::sleep_for(std::chrono::microseconds(50));
            };
            if (pg_out.rfind("ring:", 0) == 0) {
                Platform platform;
                auto pool = pool_create(platform.memory, std::max<uint32_t>(pg_count, 1));
                auto ring = platform.rings.create(pg_out.substr(5),
                                                  std::bit_ceil(std::max<uint32_t>(pg_count, 2)));
                uint32_t queued = 0;
                for (uint32_t i = 0; i < pg_count; ++i) {
                    pace(i);
                    PacketHandle h;
                    if (pool->alloc(pg_size, h) != PoolStatus::Ok)
                        break;
                    gen.next_into({reinterpret_cast<uint8_t *>(h.addr), pg_size});
                    if (ring->enqueue(h) == chain::EnqueueStatus::Ok)
                        ++queued;
                }
                std::cout << fmt::format("{} frames of {} bytes queued on ring {}\n", queued,
                                         pg_size, ring->name());
            } else {
                pcap::Writer w(pg_out);
                std::vector<uint8_t> frame(pg_size);
                for (uint32_t i = 0; i < pg_count; ++i) {
                    pace(i);
                    gen.next_into(frame);
                    w.write(frame, wall_ns() - start);
                }
                w.close();
                std::cout << fmt::format("{} frames of {} bytes written to {}\n", w.records(),
                                         pg_size, pg_out);
            }
            return kOk;
        }

        if (*cas) {
            auto store = std::make_shared<attest::PolicyStore>(cas_store);
            attest::CasServer server(attest::platform_key(), store);
            auto bound = server.start(attest::parse_address(cas_listen));
            log::info("CAS listening on {}", bound.str());
            if (!cas_admin.empty())
                log::info("CAS admin on {}", server.start_admin(attest::parse_address(cas_admin)).str());
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return kOk;
        }

        if (*las) {
            attest::LasServer server(attest::platform_key(), attest::parse_address(las_cas));
            auto bound = server.start(attest::parse_address(las_listen));
            log::info("LAS listening on {}", bound.str());
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return kOk;
        }

        if (*measure) {
            std::cout << crypto::to_hex(
                             attest::measure(attest::kBinaryIdentity, read_text(measure_config)))
                      << "\n";
            return kOk;
        }
    } catch (const config::ParseError &e) {
        std::cerr << fmt::format("config error: {}\n", e.what());
        return kConfigError;
    } catch (const config::GraphError &e) {
        std::cerr << fmt::format("config error: {}\n", e.what());
        return kConfigError;
    } catch (const ElementInitError &e) {
        std::cerr << fmt::format("config error: {}\n", e.what());
        return kConfigError;
    } catch (const attest::Rejected &e) {
        std::cerr << fmt::format("attestation rejected ({}): {}\n",
                                 attest::reject_reason_name(e.reason()), e.what());
        return kRejected;
    } catch (const std::exception &e) {
        std::cerr << fmt::format("error: {}\n", e.what());
        return kRuntimeError;
    }
    return kOk;
}
