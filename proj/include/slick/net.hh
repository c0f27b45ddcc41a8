#ifndef SLICK_NET_HH
#define SLICK_NET_HH

// Ethernet / ARP / IPv4 / UDP / TCP header helpers. Addresses are kept in
// host byte order once parsed; frame bytes are always network order.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace slick::net {

constexpr size_t kEtherHeaderLen = 14;
constexpr size_t kArpPacketLen = 28;
constexpr size_t kMinIPv4HeaderLen = 20;
constexpr uint16_t kEtherTypeIPv4 = 0x0800;
constexpr uint16_t kEtherTypeArp = 0x0806;
constexpr uint8_t kProtoIcmp = 1;
constexpr uint8_t kProtoTcp = 6;
constexpr uint8_t kProtoUdp = 17;

using MacAddr = std::array<uint8_t, 6>;

inline uint16_t load_be16(const uint8_t *p) { return uint16_t(p[0] << 8 | p[1]); }
inline uint32_t load_be32(const uint8_t *p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | p[3];
}
inline void store_be16(uint8_t *p, uint16_t v) {
    p[0] = uint8_t(v >> 8);
    p[1] = uint8_t(v);
}
inline void store_be32(uint8_t *p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
}

struct IPv4Prefix {
    uint32_t addr = 0; // host order, already masked
    uint8_t len = 0;

    uint32_t mask() const { return len == 0 ? 0 : ~uint32_t(0) << (32 - len); }
    bool contains(uint32_t a) const { return (a & mask()) == addr; }
    bool operator==(const IPv4Prefix &) const = default;
};

std::optional<uint32_t> parse_ipv4(std::string_view s);
// "a.b.c.d/len" or a bare address (taken as /32). Host bits are cleared.
std::optional<IPv4Prefix> parse_prefix(std::string_view s);
std::optional<MacAddr> parse_mac(std::string_view s);
std::string format_ipv4(uint32_t addr);
std::string format_mac(const MacAddr &mac);

// Internet checksum over `data` (RFC 1071), returned in host order.
uint16_t internet_checksum(std::span<const uint8_t> data);

enum class FrameKind { NotIPv4, Malformed, IPv4 };

struct IPv4Info {
    uint32_t src = 0;
    uint32_t dst = 0;
    uint8_t proto = 0;
    uint8_t ttl = 0;
    uint16_t header_len = 0;
    uint16_t total_len = 0;
    size_t l3_offset = kEtherHeaderLen;
    size_t l4_offset = 0;
    bool first_fragment = true;
    bool has_ports = false;
    uint16_t sport = 0;
    uint16_t dport = 0;
    // Payload after the transport header (TCP/UDP) or after the IP header.
    size_t payload_offset = 0;
    size_t payload_len = 0;
};

// Parses an Ethernet frame carrying IPv4. NotIPv4 for other EtherTypes or
// runts shorter than the Ethernet header; Malformed when the IP header is
// inconsistent with the frame.
FrameKind parse_ipv4_frame(std::span<const uint8_t> frame, IPv4Info &info);

} // namespace slick::net

#endif
