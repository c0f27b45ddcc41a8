#ifndef SLICK_TESTS_TESTUTIL_HH
#define SLICK_TESTS_TESTUTIL_HH

// Frame builders, brute-force oracles and graph helpers shared by the unit
// tests and the acceptance binary. The oracles deliberately avoid the
// library's own matching code.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <slick/config.hh>
#include <slick/elements.hh>
#include <slick/net.hh>
#include <slick/runtime.hh>

namespace testutil {

using Frame = std::vector<uint8_t>;

struct FlowSpec {
    uint32_t src = 0x0a000001;
    uint32_t dst = 0x0a010001;
    uint8_t proto = slick::net::kProtoUdp;
    uint16_t sport = 1024;
    uint16_t dport = 80;
    uint8_t ttl = 64;
    std::string payload;
};

inline void put16(uint8_t *p, uint16_t v) {
    p[0] = uint8_t(v >> 8);
    p[1] = uint8_t(v);
}
inline void put32(uint8_t *p, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        p[i] = uint8_t(v >> (24 - 8 * i));
}

inline uint16_t ones_sum(const uint8_t *p, size_t n) {
    uint32_t s = 0;
    for (size_t i = 0; i + 1 < n; i += 2)
        s += uint32_t(p[i]) << 8 | p[i + 1];
    if (n & 1)
        s += uint32_t(p[n - 1]) << 8;
    while (s >> 16)
        s = (s & 0xffff) + (s >> 16);
    return uint16_t(~s);
}

// Ethernet + IPv4 + TCP/UDP/ICMP header + payload.
inline Frame ipv4_frame(const FlowSpec &f) {
    size_t l4 = f.proto == slick::net::kProtoTcp ? 20 : 8;
    Frame b(14 + 20 + l4 + f.payload.size());
    const uint8_t dmac[6] = {2, 0, 0, 0, 0, 2}, smac[6] = {2, 0, 0, 0, 0, 1};
    std::memcpy(&b[0], dmac, 6);
    std::memcpy(&b[6], smac, 6);
    put16(&b[12], 0x0800);
    uint8_t *ip = &b[14];
    ip[0] = 0x45;
    put16(ip + 2, uint16_t(b.size() - 14));
    put16(ip + 4, 0x1234);
    ip[8] = f.ttl;
    ip[9] = f.proto;
    put32(ip + 12, f.src);
    put32(ip + 16, f.dst);
    put16(ip + 10, ones_sum(ip, 20));
    uint8_t *t = ip + 20;
    if (f.proto == slick::net::kProtoTcp) {
        put16(t, f.sport);
        put16(t + 2, f.dport);
        t[12] = 5 << 4;
    } else if (f.proto == slick::net::kProtoUdp) {
        put16(t, f.sport);
        put16(t + 2, f.dport);
        put16(t + 4, uint16_t(8 + f.payload.size()));
    } else {
        t[0] = 8; // echo request
    }
    std::memcpy(t + l4, f.payload.data(), f.payload.size());
    return b;
}

// ARP packet; op 1 request, 2 reply.
inline Frame arp_frame(uint16_t op, uint32_t sender_ip, uint32_t target_ip) {
    Frame b(42);
    std::memset(&b[0], 0xff, 6);
    const uint8_t smac[6] = {2, 0, 0, 0, 0, 0x33};
    std::memcpy(&b[6], smac, 6);
    put16(&b[12], 0x0806);
    uint8_t *a = &b[14];
    put16(a, 1);
    put16(a + 2, 0x0800);
    a[4] = 6;
    a[5] = 4;
    put16(a + 6, op);
    std::memcpy(a + 8, smac, 6);
    put32(a + 14, sender_ip);
    put32(a + 24, target_ip);
    return b;
}

// --- oracles -------------------------------------------------------------

// Byte-by-byte: does any byte of [addr, addr+len) fall inside the enclave?
inline bool address_rejected_oracle(uint64_t addr, uint32_t len, uint64_t base, uint64_t size) {
    for (uint64_t i = 0; i < len; ++i) {
        uint64_t b = addr + i;
        if (b < addr)
            return true; // wrapped past the top
        if (b >= base && b - base < size)
            return true;
    }
    return false;
}

inline bool prefix_oracle(uint32_t addr, uint32_t net, int len) {
    for (int bit = 31; bit > 31 - len; --bit)
        if (((addr >> bit) & 1) != ((net >> bit) & 1))
            return false;
    return true;
}

struct OracleRule {
    bool drop = false;
    int proto = -1; // -1 any
    uint32_t src = 0, dst = 0;
    int src_len = 0, dst_len = 0;
    int sport_lo = -1, sport_hi = -1; // -1 any
    int dport_lo = -1, dport_hi = -1;

    std::string text() const {
        auto pfx = [](uint32_t a, int l) {
            return l == 0 ? std::string("*")
                          : slick::net::format_ipv4(a) + "/" + std::to_string(l);
        };
        auto ports = [](int lo, int hi) {
            if (lo < 0)
                return std::string("*");
            return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
        };
        std::string p = proto < 0 ? "*" : proto == 6 ? "tcp" : proto == 17 ? "udp" : "icmp";
        return std::string(drop ? "drop" : "allow") + " " + p + " " + pfx(src, src_len) + " " +
               pfx(dst, dst_len) + " " + ports(sport_lo, sport_hi) + " " +
               ports(dport_lo, dport_hi);
    }
};

// True when the flow is dropped: first matching rule wins, else `default_drop`.
inline bool firewall_oracle(const std::vector<OracleRule> &rules, const FlowSpec &f,
                            bool default_drop) {
    bool ports = f.proto == 6 || f.proto == 17;
    for (const auto &r : rules) {
        if (r.proto >= 0 && r.proto != f.proto)
            continue;
        if (!prefix_oracle(f.src, r.src, r.src_len) || !prefix_oracle(f.dst, r.dst, r.dst_len))
            continue;
        if (r.sport_lo >= 0 && !(ports && f.sport >= r.sport_lo && f.sport <= r.sport_hi))
            continue;
        if (r.dport_lo >= 0 && !(ports && f.dport >= r.dport_lo && f.dport <= r.dport_hi))
            continue;
        return r.drop;
    }
    return default_drop;
}

// Independent reader for the rule-file format, used to feed the oracle
// from shipped rule files.
inline std::vector<OracleRule> parse_oracle_rules(const std::string &text) {
    std::vector<OracleRule> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        line = line.substr(0, line.find('#'));
        std::istringstream ls(line);
        std::string act, proto, src, dst, sp, dp;
        if (!(ls >> act))
            continue;
        ls >> proto >> src >> dst >> sp >> dp;
        OracleRule r;
        r.drop = act == "drop";
        r.proto = proto == "tcp" ? 6 : proto == "udp" ? 17 : proto == "icmp" ? 1 : -1;
        auto pfx = [](const std::string &t, uint32_t &a, int &l) {
            if (t == "*")
                return;
            auto slash = t.find('/');
            unsigned b0, b1, b2, b3;
            std::sscanf(t.c_str(), "%u.%u.%u.%u", &b0, &b1, &b2, &b3);
            a = b0 << 24 | b1 << 16 | b2 << 8 | b3;
            l = slash == std::string::npos ? 32 : std::stoi(t.substr(slash + 1));
        };
        pfx(src, r.src, r.src_len);
        pfx(dst, r.dst, r.dst_len);
        auto ports = [](const std::string &t, int &lo, int &hi) {
            if (t == "*")
                return;
            auto dash = t.find('-');
            lo = std::stoi(t.substr(0, dash));
            hi = dash == std::string::npos ? lo : std::stoi(t.substr(dash + 1));
        };
        ports(sp, r.sport_lo, r.sport_hi);
        ports(dp, r.dport_lo, r.dport_hi);
        out.push_back(r);
    }
    return out;
}

struct OracleRoute {
    uint32_t net = 0;
    int len = 0;
    int port = 0;
};

// Output port of the longest matching route, or -1.
inline int lpm_oracle(const std::vector<OracleRoute> &routes, uint32_t addr) {
    int best_len = -1, port = -1;
    for (const auto &r : routes)
        if (prefix_oracle(addr, r.net, r.len) && r.len > best_len) {
            best_len = r.len;
            port = r.port;
        }
    return port;
}

// Pattern i matches when the regex finds it anywhere in the payload; no
// literal prefilter.
inline std::vector<uint32_t> pattern_oracle(const std::vector<std::string> &patterns,
                                            const std::string &payload) {
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < patterns.size(); ++i)
        if (std::regex_search(payload, std::regex(patterns[i], std::regex::ECMAScript)))
            out.push_back(i);
    return out;
}

// --- random generation ---------------------------------------------------

// Addresses drawn near a small set of networks so rules and routes hit.
inline uint32_t random_addr(std::mt19937_64 &rng) {
    static const uint32_t nets[] = {0x0a000000, 0x0a010000, 0x0a018000, 0xac100000,
                                    0xc0a80000, 0x08080800};
    uint32_t base = nets[rng() % std::size(nets)];
    int keep = int(rng() % 25) + 8;
    uint32_t mask = keep >= 32 ? ~0u : ~0u << (32 - keep);
    return (base & mask) | (uint32_t(rng()) & ~mask);
}

inline OracleRule random_rule(std::mt19937_64 &rng) {
    OracleRule r;
    r.drop = rng() % 2;
    static const int protos[] = {-1, 6, 17, 1};
    r.proto = protos[rng() % 4];
    auto pfx = [&](uint32_t &a, int &l) {
        l = rng() % 3 == 0 ? 0 : int(rng() % 33);
        uint32_t m = l == 0 ? 0 : ~0u << (32 - l);
        a = random_addr(rng) & m;
    };
    pfx(r.src, r.src_len);
    pfx(r.dst, r.dst_len);
    auto range = [&](int &lo, int &hi) {
        if (rng() % 2 || r.proto == 1) {
            lo = hi = -1;
            return;
        }
        lo = int(rng() % 2048);
        hi = rng() % 3 == 0 ? lo : std::min(65535, lo + int(rng() % 1024));
    };
    range(r.sport_lo, r.sport_hi);
    range(r.dport_lo, r.dport_hi);
    return r;
}

inline FlowSpec random_flow(std::mt19937_64 &rng) {
    FlowSpec f;
    static const uint8_t protos[] = {6, 17, 1};
    f.proto = protos[rng() % 3];
    f.src = random_addr(rng);
    f.dst = random_addr(rng);
    f.sport = uint16_t(rng() % 3072);
    f.dport = uint16_t(rng() % 3072);
    return f;
}

// --- graph helpers -------------------------------------------------------

inline std::unique_ptr<slick::Instance> build(const std::string &text,
                                              slick::InstanceSettings s = {}) {
    auto g = slick::config::parse_config(text);
    auto checked = slick::config::validate_graph(g, slick::elements::default_registry());
    return slick::instantiate(checked, std::move(s));
}

inline slick::RunStats drain(slick::Instance &inst) {
    slick::StopCondition sc;
    sc.drain = true;
    sc.wall_ns = 60'000'000'000ull;
    return inst.run(sc);
}

inline std::filesystem::path temp_dir(const std::string &tag) {
    std::random_device rd;
    auto p = std::filesystem::temp_directory_path() /
             ("slick-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path &p, const std::string &text) {
    std::ofstream(p) << text;
}

// Bytes after the transport header of a frame built by ipv4_frame.
inline std::string payload_of(const Frame &f) {
    if (f.size() < 34 || f[12] != 0x08 || f[13] != 0x00)
        return {};
    size_t ihl = size_t(f[14] & 0x0f) * 4;
    size_t l4 = f[23] == 6 ? 20 : 8;
    size_t off = 14 + ihl + l4;
    return off <= f.size() ? std::string(f.begin() + long(off), f.end()) : std::string();
}

// Pool balance: every buffer allocated was freed.
inline bool pools_balanced(slick::Instance &inst) {
    auto &u = inst.untrusted_pool();
    auto &t = inst.trusted_pool();
    return u.allocations() == u.frees() && t.allocations() == t.frees() &&
           u.free_count() == u.capacity() && t.free_count() == t.capacity();
}

} // namespace testutil

#endif
