#include <slick/pktgen.hh>

#include <stdexcept>

namespace slick::pktgen {

using namespace net;

void write_udp_headers(std::span<uint8_t> f, const FrameSpec &s, uint16_t ip_id) {
    if (f.size() < kMinFrameSize)
        throw std::invalid_argument("frame size below 42 bytes");
    std::copy(s.dst_mac.begin(), s.dst_mac.end(), f.begin());
    std::copy(s.src_mac.begin(), s.src_mac.end(), f.begin() + 6);
    store_be16(&f[12], kEtherTypeIPv4);
    uint8_t *ip = &f[14];
    uint16_t total = uint16_t(f.size() - kEtherHeaderLen);
    ip[0] = 0x45;
    ip[1] = 0;
    store_be16(ip + 2, total);
    store_be16(ip + 4, ip_id);
    store_be16(ip + 6, 0x4000);
    ip[8] = s.ttl;
    ip[9] = kProtoUdp;
    store_be16(ip + 10, 0);
    store_be32(ip + 12, s.src_ip);
    store_be32(ip + 16, s.dst_ip);
    store_be16(ip + 10, internet_checksum({ip, 20}));
    uint8_t *udp = ip + 20;
    store_be16(udp, s.sport);
    store_be16(udp + 2, s.dport);
    store_be16(udp + 4, uint16_t(total - 20));
    store_be16(udp + 6, 0);
}

Generator::Generator(FrameSpec spec) : _spec(spec), _rng(spec.seed) {
    if (spec.size < kMinFrameSize)
        throw std::invalid_argument("frame size below 42 bytes");
}

std::vector<uint8_t> Generator::next() {
    std::vector<uint8_t> f(_spec.size);
    next_into(f);
    return f;
}

void Generator::next_into(std::span<uint8_t> out) {
    write_udp_headers(out, _spec, uint16_t(_n));
    for (size_t i = kMinFrameSize; i < out.size(); i += 8) {
        uint64_t r = _rng();
        for (size_t k = 0; k < 8 && i + k < out.size(); ++k)
            out[i + k] = uint8_t(r >> (8 * k));
    }
    ++_n;
}

} // namespace slick::pktgen
