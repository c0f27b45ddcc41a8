#include "internal.hh"

#include <algorithm>

namespace slick::elements {

RouteEntry parse_route(std::string_view s) {
    std::vector<std::string> w;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
            ++j;
        if (j > i)
            w.emplace_back(s.substr(i, j - i));
        i = j;
    }
    if (w.size() != 2 && w.size() != 3)
        throw std::invalid_argument("route must be PREFIX [GATEWAY] PORT: '" + std::string(s) +
                                    "'");
    RouteEntry e;
    auto p = net::parse_prefix(w[0]);
    if (!p)
        throw std::invalid_argument("bad route prefix '" + w[0] + "'");
    e.prefix = *p;
    if (w.size() == 3) {
        auto gw = net::parse_ipv4(w[1]);
        if (!gw)
            throw std::invalid_argument("bad gateway '" + w[1] + "'");
        e.gateway = *gw;
    }
    auto port = parse_uint(w.back());
    if (!port || *port > 1023)
        throw std::invalid_argument("bad output port '" + w.back() + "'");
    e.port = uint16_t(*port);
    return e;
}

void Lpm::add(const RouteEntry &e) {
    auto &t = _by_len[e.prefix.len];
    if (!t.emplace(e.prefix.addr, e).second)
        throw std::invalid_argument("duplicate route " + net::format_ipv4(e.prefix.addr) + "/" +
                                    std::to_string(e.prefix.len));
    ++_size;
    if (std::find(_lens.begin(), _lens.end(), e.prefix.len) == _lens.end()) {
        _lens.push_back(e.prefix.len);
        std::sort(_lens.begin(), _lens.end(), std::greater<>());
    }
}

const RouteEntry *Lpm::lookup(uint32_t addr) const {
    for (uint8_t len : _lens) {
        uint32_t key = len == 0 ? 0 : addr & (~uint32_t(0) << (32 - len));
        const auto &t = _by_len[len];
        auto it = t.find(key);
        if (it != t.end())
            return &it->second;
    }
    return nullptr;
}

namespace {

// RouteTable(ROUTE, ...), each ROUTE "A.B.C.D/len [GATEWAY] PORT".
class RouteTable final : public Element {
  public:
    const char *class_name() const override { return "RouteTable"; }

    static uint16_t output_count(const std::vector<std::string> &args) {
        if (args.empty())
            throw std::invalid_argument("RouteTable needs at least one route");
        uint16_t n = 0;
        for (const auto &a : args)
            n = std::max<uint16_t>(n, uint16_t(parse_route(a).port + 1));
        return n;
    }

    void configure(const std::vector<std::string> &args) override {
        for (const auto &a : args)
            _table.add(parse_route(a));
    }

    void initialize() override {
        _no_route = &counter("no_route");
        _ttl = &counter("ttl_expired");
        _malformed = &counter("malformed");
    }

    void push(int, Packet p) override {
        net::IPv4Info ip;
        if (net::parse_ipv4_frame(p.bytes(), ip) != net::FrameKind::IPv4) {
            ++*_malformed;
            kill(p);
            return;
        }
        const RouteEntry *e = _table.lookup(ip.dst);
        if (!e) {
            ++*_no_route;
            kill(p);
            return;
        }
        uint8_t *iph = p.data() + ip.l3_offset;
        if (iph[8] <= 1) {
            ++*_ttl;
            kill(p);
            return;
        }
        // RFC 1624: HC' = ~(~HC + ~m + m') on the TTL/protocol word.
        uint16_t old_word = net::load_be16(iph + 8);
        --iph[8];
        uint16_t new_word = net::load_be16(iph + 8);
        uint32_t sum = uint16_t(~net::load_be16(iph + 10)) + uint16_t(~old_word) + new_word;
        sum = (sum & 0xffff) + (sum >> 16);
        sum = (sum & 0xffff) + (sum >> 16);
        net::store_be16(iph + 10, uint16_t(~sum));
        p.network_offset = uint16_t(ip.l3_offset);
        output(e->port, p);
    }

  private:
    Lpm _table;
    uint64_t *_no_route = nullptr;
    uint64_t *_ttl = nullptr;
    uint64_t *_malformed = nullptr;
};

} // namespace

void register_routetable(config::ElementRegistry &r) {
    config::ElementClass c = make_class<RouteTable>("RouteTable", fixed_ports(1, 1));
    c.ports = [](const std::vector<std::string> &args) {
        return fixed_ports(1, RouteTable::output_count(args));
    };
    r.add(std::move(c));
}

} // namespace slick::elements
