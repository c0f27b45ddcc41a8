#ifndef SLICK_TESTS_SHIPPED_HH
#define SLICK_TESTS_SHIPPED_HH

// Loading and running the configurations under configs/.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <slick/attest.hh>

#include "testutil.hh"

#ifndef SLICK_CONFIG_DIR
#error "SLICK_CONFIG_DIR must point at the shipped configurations"
#endif

namespace testutil {

inline std::filesystem::path config_path(const std::string &name) {
    return std::filesystem::path(SLICK_CONFIG_DIR) / name;
}

inline std::string read_config(const std::string &name) {
    std::ifstream in(config_path(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline slick::InstanceSettings shipped_settings(const std::string &name,
                                                std::shared_ptr<slick::Platform> platform) {
    slick::InstanceSettings s;
    s.platform = std::move(platform);
    s.base_dir = SLICK_CONFIG_DIR;
    s.yield_when_idle = true;
    slick::attest::HardwareKey hw{};
    auto m = slick::attest::measure(slick::attest::kBinaryIdentity, read_config(name));
    s.derive_key = [hw, m](std::string_view purpose) {
        return slick::attest::derive_seal_key(hw, m, purpose);
    };
    return s;
}

inline std::unique_ptr<slick::Instance> load_shipped(const std::string &name,
                                                     std::shared_ptr<slick::Platform> platform,
                                                     slick::InstanceSettings *tweak = nullptr) {
    auto s = shipped_settings(name, std::move(platform));
    if (tweak) {
        s.role = tweak->role;
        s.id = tweak->id;
    }
    return build(read_config(name), s);
}

struct ShippedRun {
    slick::RunStats stats;
    bool balanced = false;
    uint64_t injected = 0;
    uint64_t delivered = 0; // frames leaving on any test device
};

// Single-instance configs: injects `extra` random frames on eth0, runs
// until drained.
inline ShippedRun run_single(const std::string &name, uint64_t extra, uint64_t seed = 1) {
    auto platform = std::make_shared<slick::Platform>();
    auto inst = load_shipped(name, platform);
    std::mt19937_64 rng(seed);
    auto &in = platform->devices.get("eth0");
    static const char *payloads[] = {"hello", "an attack here", "evil42", "GET /etc/passwd",
                                     "cmd.exe /c", "SELECT x FROM y", "benign data"};
    for (uint64_t i = 0; i < extra; ++i) {
        if (rng() % 10 == 0) {
            in.inject(arp_frame(uint16_t(1 + rng() % 2), random_addr(rng),
                                rng() % 2 ? 0x0a0000fe : random_addr(rng)));
            continue;
        }
        auto f = random_flow(rng);
        f.payload = payloads[rng() % std::size(payloads)];
        in.inject(ipv4_frame(f));
    }
    ShippedRun r;
    r.injected = extra;
    r.stats = drain(*inst);
    r.balanced = pools_balanced(*inst);
    return r;
}

// The chain pair: chain_a.slick as primary, chain_b.slick as its peer.
inline ShippedRun run_chain() {
    auto platform = std::make_shared<slick::Platform>();
    auto a = load_shipped("chain_a.slick", platform);
    slick::InstanceSettings t;
    t.role = slick::Role::Secondary;
    t.id = "peer";
    auto b = load_shipped("chain_b.slick", platform, &t);
    std::atomic<bool> stop{false};
    std::thread peer([&] {
        slick::StopCondition sc;
        sc.stop_flag = &stop;
        b->run(sc);
    });
    slick::StopCondition sc;
    sc.wall_ns = 60'000'000'000ull;
    sc.until = [&] { return a->drained() && b->drained(); };
    a->run(sc);
    // Let the peer finish the pass it is in.
    while (!b->drained())
        std::this_thread::yield();
    stop = true;
    peer.join();
    auto sa = a->stats(), sb = b->stats();
    ShippedRun r;
    r.stats = sa;
    r.stats.rx += sb.rx;
    r.stats.tx += sb.tx;
    r.stats.drops += sb.drops;
    r.balanced = pools_balanced(*a) && pools_balanced(*b);
    r.delivered = platform->devices.get("eth1").tx_packets();
    return r;
}

inline const std::vector<std::string> &single_configs() {
    static const std::vector<std::string> v = {"wire.slick",      "ethermirror.slick",
                                               "firewall.slick",  "toenclave.slick",
                                               "seal.slick",      "iprouter.slick",
                                               "ids.slick"};
    return v;
}

} // namespace testutil

#endif
