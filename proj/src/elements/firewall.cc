#include "internal.hh"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace slick::elements {

namespace {

std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
            ++j;
        if (j > i)
            out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

net::IPv4Prefix parse_addr(std::string_view w) {
    if (w == "*" || w == "any")
        return {};
    if (w.find('/') == std::string_view::npos) {
        auto a = net::parse_ipv4(w);
        if (!a)
            throw std::invalid_argument("bad address '" + std::string(w) + "'");
        return {*a, 32};
    }
    auto p = net::parse_prefix(w);
    if (!p)
        throw std::invalid_argument("bad prefix '" + std::string(w) + "'");
    return *p;
}

PortRange parse_ports(std::string_view w) {
    if (w == "*" || w == "any")
        return {};
    size_t dash = w.find('-');
    auto lo = parse_uint(w.substr(0, dash));
    auto hi = dash == std::string_view::npos ? lo : parse_uint(w.substr(dash + 1));
    if (!lo || !hi || *lo > 65535 || *hi > 65535 || *lo > *hi)
        throw std::invalid_argument("bad port range '" + std::string(w) + "'");
    return {uint16_t(*lo), uint16_t(*hi)};
}

std::string format_prefix(const net::IPv4Prefix &p) {
    if (p.len == 0)
        return "*";
    return net::format_ipv4(p.addr) + "/" + std::to_string(p.len);
}

std::string format_ports(const PortRange &r) {
    if (r.any())
        return "*";
    if (r.lo == r.hi)
        return std::to_string(r.lo);
    return std::to_string(r.lo) + "-" + std::to_string(r.hi);
}

} // namespace

FirewallRule parse_rule(std::string_view line) {
    auto w = words(line);
    if (w.size() != 6)
        throw std::invalid_argument("rule needs 6 fields: action proto src dst sport dport");
    FirewallRule r;
    if (w[0] == "allow")
        r.action = Action::Allow;
    else if (w[0] == "drop")
        r.action = Action::Drop;
    else
        throw std::invalid_argument("bad action '" + std::string(w[0]) + "'");

    if (w[1] == "*" || w[1] == "any")
        r.proto = 0;
    else if (w[1] == "tcp")
        r.proto = net::kProtoTcp;
    else if (w[1] == "udp")
        r.proto = net::kProtoUdp;
    else if (w[1] == "icmp")
        r.proto = net::kProtoIcmp;
    else
        throw std::invalid_argument("bad protocol '" + std::string(w[1]) + "'");

    r.src = parse_addr(w[2]);
    r.dst = parse_addr(w[3]);
    r.sport = parse_ports(w[4]);
    r.dport = parse_ports(w[5]);
    if (r.proto == net::kProtoIcmp && !(r.sport.any() && r.dport.any()))
        throw std::invalid_argument("icmp rules cannot constrain ports");
    return r;
}

std::vector<FirewallRule> parse_rules(std::string_view text) {
    std::vector<FirewallRule> rules;
    size_t lineno = 0;
    while (!text.empty()) {
        ++lineno;
        size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        if (words(line).empty())
            continue;
        try {
            rules.push_back(parse_rule(line));
        } catch (const std::invalid_argument &e) {
            throw std::invalid_argument(fmt::format("rule line {}: {}", lineno, e.what()));
        }
    }
    return rules;
}

std::string format_rule(const FirewallRule &r) {
    const char *proto = r.proto == net::kProtoTcp    ? "tcp"
                        : r.proto == net::kProtoUdp  ? "udp"
                        : r.proto == net::kProtoIcmp ? "icmp"
                                                     : "*";
    return fmt::format("{} {} {} {} {} {}", r.action == Action::Allow ? "allow" : "drop",
                       proto, format_prefix(r.src), format_prefix(r.dst),
                       format_ports(r.sport), format_ports(r.dport));
}

bool rule_matches(const FirewallRule &r, const net::IPv4Info &ip) {
    if (r.proto && r.proto != ip.proto)
        return false;
    if (!r.src.contains(ip.src) || !r.dst.contains(ip.dst))
        return false;
    if (r.sport.any() && r.dport.any())
        return true;
    if (!ip.has_ports)
        return false;
    return r.sport.contains(ip.sport) && r.dport.contains(ip.dport);
}

std::optional<size_t> first_match(std::span<const FirewallRule> rules,
                                  const net::IPv4Info &ip) {
    for (size_t i = 0; i < rules.size(); ++i)
        if (rule_matches(rules[i], ip))
            return i;
    return std::nullopt;
}

namespace {

// Firewall(RULEFILE [, DEFAULT allow|drop])
// Allowed packets leave on port 0, non-IPv4 frames on port 1.
class Firewall final : public Element {
  public:
    const char *class_name() const override { return "Firewall"; }

    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        auto def = a.keyword("DEFAULT");
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() != 1)
            throw std::invalid_argument("expected Firewall(RULEFILE [, DEFAULT allow|drop])");
        if (def && *def != "allow" && *def != "drop")
            throw std::invalid_argument("DEFAULT must be allow or drop");
        _default = def && *def == "drop" ? Action::Drop : Action::Allow;

        std::string path = instance().resolve_path(config::unquote(pos[0]));
        std::ifstream in(path);
        if (!in)
            throw std::invalid_argument("cannot read rule file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        _rules = parse_rules(ss.str());
    }

    void initialize() override {
        _dropped = &counter("dropped");
        _malformed = &counter("malformed");
        _non_ip = &counter("non_ip");
        add_read_handler("rules", [this] { return std::to_string(_rules.size()); });
    }

    void push(int, Packet p) override {
        net::IPv4Info ip;
        switch (net::parse_ipv4_frame(p.bytes(), ip)) {
        case net::FrameKind::NotIPv4:
            ++*_non_ip;
            output(1, p);
            return;
        case net::FrameKind::Malformed:
            ++*_malformed;
            kill(p);
            return;
        case net::FrameKind::IPv4:
            break;
        }
        auto m = first_match(_rules, ip);
        Action a = m ? _rules[*m].action : _default;
        if (a == Action::Drop) {
            ++*_dropped;
            kill(p);
            return;
        }
        p.network_offset = uint16_t(ip.l3_offset);
        p.transport_offset = uint16_t(ip.l4_offset);
        output(0, p);
    }

  private:
    std::vector<FirewallRule> _rules;
    Action _default = Action::Allow;
    uint64_t *_dropped = nullptr;
    uint64_t *_malformed = nullptr;
    uint64_t *_non_ip = nullptr;
};

} // namespace

void register_firewall(config::ElementRegistry &r) {
    r.add(make_class<Firewall>("Firewall", fixed_ports(1, 2, {false, true})));
}

} // namespace slick::elements
