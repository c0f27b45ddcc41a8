#include <slick/bench.hh>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include <slick/config.hh>
#include <slick/crypto.hh>
#include <slick/elements.hh>
#include <slick/pktgen.hh>
#include <slick/runtime.hh>

namespace slick::bench {

namespace fs = std::filesystem;

namespace {

// Ten rules, none of which matches the generated traffic, so every packet
// is checked against all of them.
constexpr const char *kFirewallRules = R"(# benchmark rule set
drop tcp * * * 22
drop tcp * * * 23
drop udp * * * 53
drop udp * * * 161-162
drop icmp * * * *
drop * 192.168.0.0/16 * * *
drop * * 172.16.0.0/12 * *
drop tcp 10.0.0.0/8 * 1024-2048 80
drop udp 10.2.0.0/16 10.1.0.0/16 * *
allow tcp * 10.1.0.0/16 * 443
)";

constexpr const char *kIdsRules = R"(drop tcp * * * 23
drop udp * * * 53
)";

constexpr const char *kIdsPatterns = R"(attack
evil[0-9]+
/etc/passwd
cmd\.exe
SELECT .* FROM
)";

const std::vector<std::string> kApps = {"wire",     "ethermirror", "firewall", "toenclave",
                                        "seal",     "chain",       "iprouter", "ids"};

void write_file(const fs::path &p, const char *text) {
    std::ofstream out(p);
    out << text;
    if (!out)
        throw std::runtime_error("cannot write " + p.string());
}

std::string temp_dir() {
    static const std::string dir = [] {
        fs::path p = fs::temp_directory_path() /
                     fmt::format("slick-bench-{}", crypto::to_hex([] {
                                     std::array<uint8_t, 4> r;
                                     crypto::random_bytes(r);
                                     return r;
                                 }()));
        fs::create_directories(p);
        return p.string();
    }();
    return dir;
}

std::unique_ptr<Instance> build(const std::string &text, InstanceSettings s) {
    auto g = config::parse_config(text);
    auto checked = config::validate_graph(g, elements::default_registry());
    return instantiate(checked, std::move(s));
}

InstanceSettings base_settings(const Options &opt, const std::shared_ptr<Platform> &platform,
                               ClockKind default_clock) {
    InstanceSettings s;
    s.id = "bench";
    s.platform = platform;
    s.clock = opt.clock.value_or(default_clock);
    s.clock_read_cost_ns = opt.clock_read_cost_ns;
    s.timer_optimization = opt.timer_optimization;
    s.yield_when_idle = false;
    crypto::Bytes key(32);
    crypto::random_bytes(key);
    s.secrets["sa0"] = key;
    return s;
}

const char *mode_name(Mode m) { return m == Mode::Throughput ? "throughput" : "latency"; }

} // namespace

const std::vector<std::string> &app_names() { return kApps; }

bool known_app(const std::string &app) {
    return std::find(kApps.begin(), kApps.end(), app) != kApps.end();
}

std::string app_config(const std::string &app, const std::string &in, const std::string &out,
                       const std::string &dir, bool timestamp) {
    std::string ts = timestamp ? ", TIMESTAMP true" : "";
    std::string head = fmt::format("src :: FromTestDevice({}{});\nsink :: ToTestDevice({}{});\n",
                                   in, ts, out, ts);
    if (app == "wire")
        return head + "w :: Wire;\nsrc -> w -> sink;\n";
    if (app == "ethermirror")
        return head + "m :: EtherMirror;\nsrc -> m -> sink;\n";
    if (app == "firewall") {
        fs::path rules = fs::path(dir) / "bench_firewall.rules";
        write_file(rules, kFirewallRules);
        return head + fmt::format("fw :: Firewall(\"{}\", DEFAULT allow);\ndrop :: Discard;\n"
                                  "src -> fw -> sink;\nfw [1] -> drop;\n",
                                  rules.string());
    }
    if (app == "toenclave")
        return head + "te :: ToEnclave;\nw :: Wire;\nsrc -> te -> w -> sink;\n";
    if (app == "seal")
        return head + "te :: ToEnclave;\ns :: Seal($sa0, sa0);\nsrc -> te -> s -> sink;\n";
    if (app == "iprouter")
        return head + "c :: Classifier(12/0806 20/0001, 12/0806 20/0002, -);\n"
                      "arp :: ARPResponder(10.0.0.254 02:00:00:00:00:fe);\n"
                      "rt :: RouteTable(10.0.0.0/8 0, 10.1.0.0/16 0, 192.168.0.0/16 1);\n"
                      "drop :: Discard;\n"
                      "src -> c;\nc [0] -> arp -> [1] sink;\nc [1] -> [0] drop;\nc [2] -> rt;\n"
                      "rt [0] -> [0] sink;\nrt [1] -> [1] drop;\n";
    if (app == "ids") {
        fs::path rules = fs::path(dir) / "bench_ids.rules";
        fs::path pats = fs::path(dir) / "bench_ids.patterns";
        write_file(rules, kIdsRules);
        write_file(pats, kIdsPatterns);
        return head + fmt::format("fw :: Firewall(\"{}\");\npm :: PatternMatch(\"{}\");\n"
                                  "cnt :: Counter;\ndrop :: Discard;\n"
                                  "src -> fw -> pm -> sink;\nfw [1] -> [0] drop;\n"
                                  "pm [1] -> cnt -> [1] drop;\n",
                                  rules.string(), pats.string());
    }
    throw std::invalid_argument("unknown app '" + app + "'");
}

namespace {

// Replaces the device source with a synthetic flood of `size`-byte frames.
std::string flood_config(const std::string &app, uint32_t size, const std::string &dir) {
    std::string text = app_config(app, "bench_in", "bench_out", dir);
    std::string from = "FromTestDevice(bench_in)";
    text.replace(text.find(from), from.size(),
                 fmt::format("FromTestDevice(bench_in, SIZE {}, COUNT 0)", size));
    return text;
}

Report throughput_chain(uint32_t size, const Options &opt) {
    auto platform = std::make_shared<Platform>();
    std::string a = fmt::format("src :: FromTestDevice(bench_in, SIZE {}, COUNT 0);\n"
                                "to_b :: DPDKRing(r_ab, MODE create, SIZE 1024);\n"
                                "from_b :: DPDKRing(r_ba, MODE create, SIZE 1024);\n"
                                "sink :: ToTestDevice(bench_out);\n"
                                "src -> to_b;\nfrom_b -> sink;\n",
                                size);
    std::string b = "ab :: DPDKRing(r_ab, MODE lookup);\nba :: DPDKRing(r_ba, MODE lookup);\n"
                    "ab -> ba;\n";
    InstanceSettings sa = base_settings(opt, platform, ClockKind::Host);
    sa.id = "chain-a";
    auto ia = build(a, sa);
    InstanceSettings sb = base_settings(opt, platform, ClockKind::Host);
    sb.id = "chain-b";
    sb.role = Role::Secondary;
    auto ib = build(b, sb);

    TestDevice &out = platform->devices.get("bench_out");
    std::atomic<bool> stop{false};
    std::thread peer([&] {
        StopCondition sc;
        sc.stop_flag = &stop;
        ib->run(sc);
    });
    uint64_t w0 = wall_ns();
    StopCondition sc;
    sc.wall_ns = uint64_t(opt.duration_s * 1e9);
    RunStats st = ia->run(sc);
    uint64_t w1 = wall_ns();
    stop = true;
    peer.join();

    Report r;
    r.app = "chain";
    r.packet_size = size;
    r.duration_ns = w1 - w0;
    r.rx = st.rx;
    r.tx = out.tx_packets();
    r.drops = st.drops + ib->stats().drops;
    r.clock_reads = st.clock_reads + ib->stats().clock_reads;
    return r;
}

void finish(Report &r, const Options &opt, ClockKind clock) {
    r.mode = mode_name(opt.mode);
    r.timer_optimization = opt.timer_optimization;
    r.clock = clock_kind_name(clock);
    if (r.duration_ns) {
        r.pps = double(r.tx) * 1e9 / double(r.duration_ns);
        r.gbps = r.pps * r.packet_size * 8 / 1e9;
    }
}

} // namespace

Report run_throughput(const std::string &app, uint32_t size, const Options &opt) {
    if (!known_app(app))
        throw std::invalid_argument("unknown app '" + app + "'");
    Report best;
    for (int trial = 0; trial < std::max(1, opt.trials); ++trial) {
        Report r;
        if (app == "chain") {
            r = throughput_chain(size, opt);
        } else {
            auto platform = std::make_shared<Platform>();
            auto inst = build(flood_config(app, size, temp_dir()),
                              base_settings(opt, platform, ClockKind::Host));
            TestDevice &out = platform->devices.get("bench_out");

            StopCondition warm;
            warm.wall_ns = 20'000'000;
            inst->run(warm);

            RunStats before = inst->stats();
            uint64_t tx0 = out.tx_packets();
            uint64_t c0 = thread_cpu_ns();
            StopCondition sc;
            sc.wall_ns = uint64_t(opt.duration_s * 1e9);
            RunStats after = inst->run(sc);
            uint64_t c1 = thread_cpu_ns();

            r.app = app;
            r.packet_size = size;
            // The worker is single-threaded; its CPU time is immune to
            // preemption by unrelated load.
            r.duration_ns = c1 - c0;
            r.rx = after.rx - before.rx;
            r.tx = out.tx_packets() - tx0;
            r.drops = after.drops - before.drops;
            r.clock_reads = after.clock_reads - before.clock_reads;
        }
        finish(r, opt, opt.clock.value_or(ClockKind::Host));
        if (trial == 0 || r.pps > best.pps)
            best = r;
    }
    return best;
}

Report run_latency(const std::string &app, uint32_t size, const Options &opt) {
    if (!known_app(app) || app == "chain")
        throw std::invalid_argument("latency mode does not support app '" + app + "'");
    auto platform = std::make_shared<Platform>();
    ClockKind clock = opt.clock.value_or(ClockKind::NicPtp);
    auto inst = build(app_config(app, "bench_in", "bench_out", temp_dir(), true),
                      base_settings(opt, platform, ClockKind::NicPtp));
    TestDevice &in = platform->devices.get("bench_in");
    TestDevice &out = platform->devices.get("bench_out");

    pktgen::FrameSpec spec;
    spec.size = size;
    pktgen::Generator gen(spec);
    std::vector<uint8_t> frame = gen.next();

    std::vector<uint64_t> samples;
    uint64_t clock_cost = 0;
    const uint64_t deadline = wall_ns() + uint64_t(opt.duration_s * 1e9);
    RunStats before = inst->stats();
    uint64_t reads0 = inst->clock().read_count();
    for (uint32_t i = 0;; ++i) {
        if (opt.latency_samples ? i >= opt.latency_samples : wall_ns() >= deadline)
            break;
        uint64_t sent = out.tx_packets();
        uint64_t v0 = inst->clock().virtual_cost_ns();
        uint64_t w0 = wall_ns();
        in.inject(frame);
        uint64_t spins = 0;
        while (out.tx_packets() == sent) {
            inst->run_once();
            if (++spins > 1'000'000)
                throw std::runtime_error("latency probe packet never returned");
        }
        uint64_t w1 = wall_ns();
        uint64_t dv = inst->clock().virtual_cost_ns() - v0;
        clock_cost += dv;
        samples.push_back(w1 - w0 + dv);
    }
    RunStats after = inst->stats();

    Report r;
    r.app = app;
    r.packet_size = size;
    r.rx = after.rx - before.rx;
    r.tx = after.tx - before.tx;
    r.drops = after.drops - before.drops;
    r.clock_reads = inst->clock().read_count() - reads0;
    for (uint64_t s : samples)
        r.duration_ns += s;
    if (!samples.empty()) {
        r.clock_cost_per_packet_ns = double(clock_cost) / double(samples.size());
        r.latency_p50_ns = percentile(samples, 50);
        r.latency_p99_ns = percentile(samples, 99);
    }
    Options o = opt;
    o.mode = Mode::Latency;
    finish(r, o, clock);
    return r;
}

std::vector<Report> run(const Options &opt) {
    std::vector<Report> out;
    for (uint32_t size : opt.sizes) {
        if (size < pktgen::kMinFrameSize || size > PacketPool::kMaxFrameSize)
            throw std::invalid_argument(fmt::format("packet size {} outside [42, 1518]", size));
        out.push_back(opt.mode == Mode::Throughput ? run_throughput(opt.app, size, opt)
                                                   : run_latency(opt.app, size, opt));
    }
    return out;
}

uint64_t percentile(std::vector<uint64_t> &v, double p) {
    if (v.empty())
        return 0;
    std::sort(v.begin(), v.end());
    size_t rank = size_t(std::ceil(p / 100.0 * double(v.size())));
    return v[std::clamp<size_t>(rank, 1, v.size()) - 1];
}

std::string Report::to_json() const {
    nlohmann::ordered_json j;
    j["app"] = app;
    j["packet_size"] = packet_size;
    j["mode"] = mode;
    j["timer_optimization"] = timer_optimization;
    j["clock"] = clock;
    j["duration_ns"] = duration_ns;
    j["rx"] = rx;
    j["tx"] = tx;
    j["drops"] = drops;
    j["pps"] = pps;
    j["gbps"] = gbps;
    j["latency_p50_ns"] = latency_p50_ns ? nlohmann::ordered_json(*latency_p50_ns) : nullptr;
    j["latency_p99_ns"] = latency_p99_ns ? nlohmann::ordered_json(*latency_p99_ns) : nullptr;
    j["clock_cost_per_packet_ns"] =
        clock_cost_per_packet_ns ? nlohmann::ordered_json(*clock_cost_per_packet_ns) : nullptr;
    j["clock_reads"] = clock_reads;
    return j.dump();
}

Report Report::from_json(const std::string &s) {
    auto j = nlohmann::json::parse(s);
    Report r;
    r.app = j.at("app");
    r.packet_size = j.at("packet_size");
    r.mode = j.at("mode");
    r.timer_optimization = j.at("timer_optimization");
    r.clock = j.at("clock");
    r.duration_ns = j.at("duration_ns");
    r.rx = j.at("rx");
    r.tx = j.at("tx");
    r.drops = j.at("drops");
    r.pps = j.at("pps");
    r.gbps = j.at("gbps");
    if (!j.at("latency_p50_ns").is_null())
        r.latency_p50_ns = j["latency_p50_ns"].get<uint64_t>();
    if (!j.at("latency_p99_ns").is_null())
        r.latency_p99_ns = j["latency_p99_ns"].get<uint64_t>();
    if (!j.at("clock_cost_per_packet_ns").is_null())
        r.clock_cost_per_packet_ns = j["clock_cost_per_packet_ns"].get<double>();
    r.clock_reads = j.at("clock_reads");
    return r;
}

std::string format_table(const std::vector<Report> &reports) {
    std::string out = fmt::format("{:<12} {:>6} {:>12} {:>14} {:>9} {:>10} {:>10}\n", "app",
                                  "size", "tx", "pkts/s", "Gbit/s", "p50 ns", "p99 ns");
    for (const auto &r : reports) {
        out += fmt::format("{:<12} {:>6} {:>12} {:>14.0f} {:>9.3f} {:>10} {:>10}\n", r.app,
                           r.packet_size, r.tx, r.pps, r.gbps,
                           r.latency_p50_ns ? std::to_string(*r.latency_p50_ns) : "-",
                           r.latency_p99_ns ? std::to_string(*r.latency_p99_ns) : "-");
    }
    return out;
}

} // namespace slick::bench
