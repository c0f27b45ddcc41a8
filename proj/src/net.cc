#include <slick/net.hh>

#include <charconv>
#include <cstdio>

namespace slick::net {

namespace {

bool parse_uint(std::string_view s, unsigned &out, int base = 10) {
    if (s.empty())
        return false;
    auto r = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

} // namespace

std::optional<uint32_t> parse_ipv4(std::string_view s) {
    uint32_t addr = 0;
    for (int i = 0; i < 4; ++i) {
        size_t dot = i < 3 ? s.find('.') : s.size();
        if (dot == std::string_view::npos)
            return std::nullopt;
        unsigned v;
        if (dot > 3 || !parse_uint(s.substr(0, dot), v) || v > 255)
            return std::nullopt;
        addr = addr << 8 | v;
        s.remove_prefix(i < 3 ? dot + 1 : dot);
    }
    return addr;
}

std::optional<IPv4Prefix> parse_prefix(std::string_view s) {
    IPv4Prefix p;
    size_t slash = s.find('/');
    auto a = parse_ipv4(s.substr(0, slash));
    if (!a)
        return std::nullopt;
    unsigned len = 32;
    if (slash != std::string_view::npos && (!parse_uint(s.substr(slash + 1), len) || len > 32))
        return std::nullopt;
    p.len = uint8_t(len);
    p.addr = *a & p.mask();
    return p;
}

std::optional<MacAddr> parse_mac(std::string_view s) {
    MacAddr mac;
    for (int i = 0; i < 6; ++i) {
        if (s.size() < 2)
            return std::nullopt;
        unsigned v;
        if (!parse_uint(s.substr(0, 2), v, 16))
            return std::nullopt;
        mac[i] = uint8_t(v);
        s.remove_prefix(2);
        if (i < 5) {
            if (s.empty() || (s[0] != ':' && s[0] != '-'))
                return std::nullopt;
            s.remove_prefix(1);
        }
    }
    if (!s.empty())
        return std::nullopt;
    return mac;
}

std::string format_ipv4(uint32_t a) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", a >> 24, (a >> 16) & 255, (a >> 8) & 255,
                  a & 255);
    return buf;
}

std::string format_mac(const MacAddr &m) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", m[0], m[1], m[2], m[3],
                  m[4], m[5]);
    return buf;
}

uint16_t internet_checksum(std::span<const uint8_t> data) {
    uint32_t sum = 0;
    size_t i = 0;
    for (; i + 1 < data.size(); i += 2)
        sum += load_be16(&data[i]);
    if (i < data.size())
        sum += uint32_t(data[i]) << 8;
    while (sum >> 16)
        sum = (sum & 0xffff) + (sum >> 16);
    return uint16_t(~sum);
}

FrameKind parse_ipv4_frame(std::span<const uint8_t> f, IPv4Info &info) {
    if (f.size() < kEtherHeaderLen || load_be16(&f[12]) != kEtherTypeIPv4)
        return FrameKind::NotIPv4;
    const size_t l3 = kEtherHeaderLen;
    if (f.size() < l3 + kMinIPv4HeaderLen)
        return FrameKind::Malformed;
    const uint8_t *ip = &f[l3];
    if ((ip[0] >> 4) != 4)
        return FrameKind::Malformed;
    size_t hlen = size_t(ip[0] & 15) * 4;
    size_t total = load_be16(ip + 2);
    if (hlen < kMinIPv4HeaderLen || total < hlen || l3 + total > f.size())
        return FrameKind::Malformed;

    info = IPv4Info{};
    info.l3_offset = l3;
    info.header_len = uint16_t(hlen);
    info.total_len = uint16_t(total);
    info.ttl = ip[8];
    info.proto = ip[9];
    info.src = load_be32(ip + 12);
    info.dst = load_be32(ip + 16);
    info.l4_offset = l3 + hlen;
    info.first_fragment = (load_be16(ip + 6) & 0x1fff) == 0;

    size_t end = l3 + total;
    size_t l4len = total - hlen;
    info.payload_offset = info.l4_offset;
    if (info.first_fragment && info.proto == kProtoUdp && l4len >= 8) {
        info.has_ports = true;
        info.payload_offset = info.l4_offset + 8;
    } else if (info.first_fragment && info.proto == kProtoTcp && l4len >= 20) {
        size_t doff = size_t(f[info.l4_offset + 12] >> 4) * 4;
        if (doff < 20 || doff > l4len)
            return FrameKind::Malformed;
        info.has_ports = true;
        info.payload_offset = info.l4_offset + doff;
    }
    if (info.has_ports) {
        info.sport = load_be16(&f[info.l4_offset]);
        info.dport = load_be16(&f[info.l4_offset + 2]);
    }
    info.payload_len = end - info.payload_offset;
    return FrameKind::IPv4;
}

} // namespace slick::net
