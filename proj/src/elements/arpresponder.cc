#include "internal.hh"

#include <cstring>
#include <unordered_map>

namespace slick::elements {
namespace {

// ARPResponder(IP MAC, ...): answers who-has requests for configured
// addresses with a reply built in place.
class ARPResponder final : public Element {
  public:
    static constexpr uint32_t kReplyLen = net::kEtherHeaderLen + net::kArpPacketLen;

    const char *class_name() const override { return "ARPResponder"; }

    void configure(const std::vector<std::string> &args) override {
        if (args.empty())
            throw std::invalid_argument("ARPResponder needs IP MAC entries");
        for (const auto &a : args) {
            std::string_view s = a;
            size_t sp = s.find_first_of(" \t");
            if (sp == std::string_view::npos)
                throw std::invalid_argument("expected 'IP MAC', got '" + a + "'");
            std::string_view ip = s.substr(0, sp);
            std::string_view mac = s.substr(sp);
            while (!mac.empty() && std::isspace(static_cast<unsigned char>(mac.front())))
                mac.remove_prefix(1);
            auto addr = net::parse_ipv4(ip);
            auto hw = net::parse_mac(mac);
            if (!addr || !hw)
                throw std::invalid_argument("expected 'IP MAC', got '" + a + "'");
            _table[*addr] = *hw;
        }
    }

    void initialize() override {
        _unknown = &counter("unknown_target");
        _bad = &counter("malformed");
        _replies = &counter("replies");
    }

    void push(int, Packet p) override {
        uint8_t *d = p.data();
        if (p.length() < kReplyLen || net::load_be16(d + 12) != net::kEtherTypeArp) {
            ++*_bad;
            kill(p);
            return;
        }
        uint8_t *arp = d + net::kEtherHeaderLen;
        // Ethernet/IPv4 request: htype 1, ptype 0x0800, hlen 6, plen 4, op 1.
        if (net::load_be16(arp) != 1 || net::load_be16(arp + 2) != net::kEtherTypeIPv4 ||
            arp[4] != 6 || arp[5] != 4 || net::load_be16(arp + 6) != 1) {
            ++*_bad;
            kill(p);
            return;
        }
        uint32_t target = net::load_be32(arp + 24);
        auto it = _table.find(target);
        if (it == _table.end()) {
            ++*_unknown;
            kill(p);
            return;
        }
        const net::MacAddr &mine = it->second;
        uint8_t sha[6], spa[4];
        std::memcpy(sha, arp + 8, 6);
        std::memcpy(spa, arp + 14, 4);

        std::memcpy(d, sha, 6);
        std::memcpy(d + 6, mine.data(), 6);
        net::store_be16(arp + 6, 2);
        std::memcpy(arp + 8, mine.data(), 6);
        net::store_be32(arp + 14, target);
        std::memcpy(arp + 18, sha, 6);
        std::memcpy(arp + 24, spa, 4);
        p.set_length(kReplyLen);
        ++*_replies;
        output(0, p);
    }

  private:
    std::unordered_map<uint32_t, net::MacAddr> _table;
    uint64_t *_unknown = nullptr;
    uint64_t *_bad = nullptr;
    uint64_t *_replies = nullptr;
};

} // namespace

void register_arpresponder(config::ElementRegistry &r) {
    r.add(make_class<ARPResponder>("ARPResponder", fixed_ports(1, 1)));
}

} // namespace slick::elements
