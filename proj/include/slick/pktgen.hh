#ifndef SLICK_PKTGEN_HH
#define SLICK_PKTGEN_HH

// Deterministic synthetic Ethernet/IPv4/UDP traffic.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <slick/net.hh>

namespace slick::pktgen {

constexpr uint32_t kMinFrameSize = 42; // Ethernet + IPv4 + UDP headers

struct FrameSpec {
    uint32_t size = 64;
    uint64_t seed = 1;
    net::MacAddr src_mac{0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
    net::MacAddr dst_mac{0x02, 0x00, 0x00, 0x00, 0x00, 0x02};
    uint32_t src_ip = 0x0a000001; // 10.0.0.1
    uint32_t dst_ip = 0x0a010001; // 10.1.0.1
    uint16_t sport = 1024;
    uint16_t dport = 5001;
    uint8_t ttl = 64;
};

// Writes one UDP frame of frame.size() bytes (>= kMinFrameSize) with a valid
// IPv4 header checksum; the payload is left untouched.
void write_udp_headers(std::span<uint8_t> frame, const FrameSpec &spec, uint16_t ip_id);

class Generator {
  public:
    explicit Generator(FrameSpec spec);

    // Next frame in the sequence; payload bytes come from the seeded PRNG.
    std::vector<uint8_t> next();
    void next_into(std::span<uint8_t> out);
    uint64_t produced() const { return _n; }
    const FrameSpec &spec() const { return _spec; }

  private:
    FrameSpec _spec;
    std::mt19937_64 _rng;
    uint64_t _n = 0;
};

} // namespace slick::pktgen

#endif
