#ifndef SLICK_ELEMENTS_HH
#define SLICK_ELEMENTS_HH

// The element library, plus the matching engines behind the classifying
// elements so they can be exercised without a graph.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <slick/config.hh>
#include <slick/crypto.hh>
#include <slick/net.hh>

namespace slick {

class Instance;

namespace elements {

// Every element class of the library.
const config::ElementRegistry &default_registry();

// --- Firewall ------------------------------------------------------------

enum class Action : uint8_t { Allow, Drop };

struct PortRange {
    uint16_t lo = 0;
    uint16_t hi = 65535;
    bool any() const { return lo == 0 && hi == 65535; }
    bool contains(uint16_t p) const { return lo <= p && p <= hi; }
};

struct FirewallRule {
    Action action = Action::Allow;
    uint8_t proto = 0; // 0 = any
    net::IPv4Prefix src;
    net::IPv4Prefix dst;
    PortRange sport;
    PortRange dport;
};

// "allow|drop proto src dst sport dport"; proto is any|tcp|udp|icmp or *,
// addresses are A.B.C.D[/len] or *, ports are N, LO-HI or *.
FirewallRule parse_rule(std::string_view line);
// One rule per line; blank lines and '#' comments are skipped. Errors name
// the offending line.
std::vector<FirewallRule> parse_rules(std::string_view text);
std::string format_rule(const FirewallRule &r);

// A rule that constrains ports only matches packets that carry ports.
bool rule_matches(const FirewallRule &r, const net::IPv4Info &ip);
// Index of the first matching rule.
std::optional<size_t> first_match(std::span<const FirewallRule> rules,
                                  const net::IPv4Info &ip);

// --- RouteTable ----------------------------------------------------------

struct RouteEntry {
    net::IPv4Prefix prefix;
    std::optional<uint32_t> gateway;
    uint16_t port = 0;
};

// "A.B.C.D/len [GATEWAY] PORT"
RouteEntry parse_route(std::string_view s);

// Longest-prefix match using one exact-match table per prefix length.
class Lpm {
  public:
    // Throws std::invalid_argument for a duplicate (prefix, length).
    void add(const RouteEntry &e);
    const RouteEntry *lookup(uint32_t addr) const;
    size_t size() const { return _size; }

  private:
    std::array<std::unordered_map<uint32_t, RouteEntry>, 33> _by_len;
    std::vector<uint8_t> _lens; // non-empty lengths, longest first
    size_t _size = 0;
};

// --- Classifier ----------------------------------------------------------

struct ClassifierTerm {
    uint32_t offset = 0;
    std::vector<uint8_t> value;
    std::vector<uint8_t> mask;
};

// Space-separated "offset/hex[%mask]" terms, all of which must match; "-"
// matches everything.
struct ClassifierPattern {
    std::vector<ClassifierTerm> terms;
    bool matches(std::span<const uint8_t> frame) const;
};

ClassifierPattern parse_classifier_pattern(std::string_view s);

// --- PatternMatch --------------------------------------------------------

// Simultaneous scan for a set of byte-oriented, case-sensitive regular
// expressions. A required literal is extracted from each pattern where
// possible; one Aho-Corasick pass over the payload selects the candidates
// and only those are confirmed with the regex engine. Plain literals need
// no confirmation.
class PatternSet {
  public:
    // Throws std::invalid_argument naming the first invalid pattern.
    explicit PatternSet(std::vector<std::string> patterns);

    size_t size() const { return _patterns.size(); }
    const std::string &pattern(size_t i) const { return _patterns[i]; }
    const std::string &literal(size_t i) const { return _literals[i]; }

    // Indices of every matching pattern, ascending.
    void match(std::span<const uint8_t> data, std::vector<uint32_t> &out) const;
    bool any(std::span<const uint8_t> data) const;

  private:
    struct Node {
        std::array<int32_t, 256> next;
        int32_t fail = 0;
        std::vector<uint32_t> out; // patterns whose literal ends here
    };

    void build();
    bool confirm(size_t i, std::span<const uint8_t> data) const;

    std::vector<std::string> _patterns;
    std::vector<std::string> _literals;
    std::vector<bool> _plain;
    std::vector<std::regex> _regex;
    std::vector<uint32_t> _always; // patterns without a usable literal
    std::vector<Node> _nodes;
};

// The literal every match of `pattern` must contain, or "" if none can be
// derived. Exposed for testing.
std::string required_literal(std::string_view pattern);
// True when the pattern contains no regex metacharacters.
bool is_plain_literal(std::string_view pattern);
// Reads one pattern per line, skipping blank lines.
std::vector<std::string> read_pattern_file(const std::string &path);

// --- Seal / Unseal -------------------------------------------------------

// Sealed frame: header (SA id u32 BE, seq u64 BE) || ciphertext || tag.
// The nonce is four zero bytes followed by seq (BE); the AAD is the header.
constexpr size_t kSealHeaderLen = 12;
constexpr size_t kSealOverhead = kSealHeaderLen + crypto::kGcmTagLen;

uint32_t sa_id_for(std::string_view sa_name);
std::array<uint8_t, 12> seal_nonce(uint64_t seq);

// 64-entry anti-replay window.
class ReplayWindow {
  public:
    bool check(uint64_t seq) const;
    void update(uint64_t seq);

  private:
    bool _any = false;
    uint64_t _highest = 0;
    uint64_t _bits = 0; // bit i set: highest - i was accepted
};

struct SecurityAssociation {
    std::string name;
    uint32_t id = 0;
    crypto::Key256 key{};
    uint64_t next_seq = 0;
    ReplayWindow window;
};

// Seals `frame` into `out` (size frame.size() + kSealOverhead). In-place use
// is allowed with out.data() == frame.data() - kSealHeaderLen.
void seal_frame(crypto::AesGcm256 &gcm, uint32_t sa_id, uint64_t seq,
                std::span<const uint8_t> frame, std::span<uint8_t> out);

enum class OpenStatus : uint8_t { Ok, Malformed, WrongSa, Replay, AuthFail };

// Verifies and decrypts `sealed` into `out` (size sealed.size() -
// kSealOverhead); updates the replay window only on success.
OpenStatus open_frame(crypto::AesGcm256 &gcm, uint32_t sa_id, ReplayWindow &window,
                      std::span<const uint8_t> sealed, std::span<uint8_t> out);

// Key arguments: 64 hex digits, "$name" for a provisioned secret, or
// "derive" for a key derived from the instance identity and `purpose`.
crypto::Key256 resolve_key(Instance &inst, std::string_view arg, std::string_view purpose);

} // namespace elements
} // namespace slick

#endif
