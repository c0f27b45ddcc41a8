#include "internal.hh"

#include <cstring>
#include <limits>

#include <slick/log.hh>

namespace slick::elements {

uint32_t sa_id_for(std::string_view sa_name) {
    // FNV-1a
    uint32_t h = 2166136261u;
    for (unsigned char c : sa_name) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

std::array<uint8_t, 12> seal_nonce(uint64_t seq) {
    std::array<uint8_t, 12> n{};
    for (int i = 0; i < 8; ++i)
        n[size_t(4 + i)] = uint8_t(seq >> (56 - 8 * i));
    return n;
}

bool ReplayWindow::check(uint64_t seq) const {
    if (!_any || seq > _highest)
        return true;
    uint64_t diff = _highest - seq;
    if (diff >= 64)
        return false;
    return !((_bits >> diff) & 1);
}

void ReplayWindow::update(uint64_t seq) {
    if (!_any) {
        _any = true;
        _highest = seq;
        _bits = 1;
    } else if (seq > _highest) {
        uint64_t shift = seq - _highest;
        _bits = shift >= 64 ? 0 : _bits << shift;
        _bits |= 1;
        _highest = seq;
    } else {
        _bits |= uint64_t(1) << (_highest - seq);
    }
}

void seal_frame(crypto::AesGcm256 &gcm, uint32_t sa_id, uint64_t seq,
                std::span<const uint8_t> frame, std::span<uint8_t> out) {
    if (out.size() != frame.size() + kSealOverhead)
        throw std::invalid_argument("seal_frame: output size mismatch");
    uint8_t header[kSealHeaderLen];
    net::store_be32(header, sa_id);
    net::store_be32(header + 4, uint32_t(seq >> 32));
    net::store_be32(header + 8, uint32_t(seq));
    auto nonce = seal_nonce(seq);
    std::memcpy(out.data(), header, kSealHeaderLen);
    gcm.seal(nonce, header, frame, out.subspan(kSealHeaderLen, frame.size()),
             out.subspan(kSealHeaderLen + frame.size()).first<16>());
}

OpenStatus open_frame(crypto::AesGcm256 &gcm, uint32_t sa_id, ReplayWindow &window,
                      std::span<const uint8_t> sealed, std::span<uint8_t> out) {
    if (sealed.size() < kSealOverhead)
        return OpenStatus::Malformed;
    size_t ct_len = sealed.size() - kSealOverhead;
    if (out.size() != ct_len)
        throw std::invalid_argument("open_frame: output size mismatch");
    if (net::load_be32(sealed.data()) != sa_id)
        return OpenStatus::WrongSa;
    uint64_t seq = uint64_t(net::load_be32(sealed.data() + 4)) << 32 |
                   net::load_be32(sealed.data() + 8);
    if (!window.check(seq))
        return OpenStatus::Replay;
    auto nonce = seal_nonce(seq);
    // The header is copied out because `out` may alias the ciphertext.
    uint8_t header[kSealHeaderLen];
    std::memcpy(header, sealed.data(), kSealHeaderLen);
    if (!gcm.open(nonce, header, sealed.subspan(kSealHeaderLen, ct_len),
                  sealed.subspan(kSealHeaderLen + ct_len).first<16>(), out))
        return OpenStatus::AuthFail;
    window.update(seq);
    return OpenStatus::Ok;
}

crypto::Key256 resolve_key(Instance &inst, std::string_view arg, std::string_view purpose) {
    crypto::Key256 key{};
    if (!arg.empty() && arg[0] == '$') {
        const auto *s = inst.secret(arg.substr(1));
        if (!s)
            throw std::invalid_argument("secret '" + std::string(arg.substr(1)) +
                                        "' was not provisioned");
        if (s->size() != key.size())
            throw std::invalid_argument("secret '" + std::string(arg.substr(1)) +
                                        "' is not 32 bytes");
        std::memcpy(key.data(), s->data(), key.size());
        return key;
    }
    if (arg == "derive") {
        if (!inst.settings().derive_key)
            throw std::invalid_argument("no sealing-key derivation available for 'derive'");
        return inst.settings().derive_key(purpose);
    }
    if (arg.size() != 64)
        throw std::invalid_argument("key must be 64 hex digits, $secret or derive");
    crypto::Bytes b;
    try {
        b = crypto::from_hex(arg);
    } catch (const crypto::CryptoError &) {
        throw std::invalid_argument("key must be 64 hex digits, $secret or derive");
    }
    std::memcpy(key.data(), b.data(), key.size());
    crypto::cleanse(b);
    log::warn("{}: key given in plaintext in the configuration", inst.id());
    return key;
}

namespace {

// ToEnclave: copies untrusted packets into the enclave's pool.
class ToEnclave final : public Element {
  public:
    const char *class_name() const override { return "ToEnclave"; }

    void initialize() override {
        _exhausted = &counter("exhausted");
        _already = &counter("already_trusted");
        _pool = &instance().trusted_pool();
    }

    void push(int, Packet p) override {
        if (p.region() == RegionTag::Trusted) {
            ++*_already;
            output(0, p);
            return;
        }
        Packet out;
        switch (copy_to_trusted(p, *_pool, out)) {
        case CopyStatus::Ok:
            output(0, out);
            return;
        case CopyStatus::Exhausted:
            ++*_exhausted;
            instance().count_drop();
            return;
        case CopyStatus::RegionViolation:
            kill(p);
            return;
        }
    }

  private:
    PacketPool *_pool = nullptr;
    uint64_t *_exhausted = nullptr;
    uint64_t *_already = nullptr;
};

// Shared argument handling: (KEY, SA_NAME [, SPI n]).
class SaElement : public Element {
  public:
    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        auto spi = a.keyword_uint("SPI");
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() != 2)
            throw std::invalid_argument(std::string("expected ") + class_name() +
                                        "(KEY, SA_NAME [, SPI n])");
        _sa.name = config::unquote(pos[1]);
        if (_sa.name.empty())
            throw std::invalid_argument("empty SA name");
        if (spi && *spi > std::numeric_limits<uint32_t>::max())
            throw std::invalid_argument("SPI must fit in 32 bits");
        _sa.id = spi ? uint32_t(*spi) : sa_id_for(_sa.name);
        _sa.key = resolve_key(instance(), config::unquote(pos[0]), _sa.name);
        _gcm = std::make_unique<crypto::AesGcm256>(_sa.key);
        crypto::cleanse(_sa.key);
    }

    void initialize() override { _region = &counter("region_violations"); }

  protected:
    SecurityAssociation _sa;
    std::unique_ptr<crypto::AesGcm256> _gcm;
    uint64_t *_region = nullptr;
};

class Seal final : public SaElement {
  public:
    const char *class_name() const override { return "Seal"; }

    void initialize() override {
        SaElement::initialize();
        _no_room = &counter("no_room");
        add_read_handler("next_seq", [this] { return std::to_string(_sa.next_seq); });
        add_write_handler("next_seq", [this](std::string_view v) {
            auto n = parse_uint(v);
            if (!n)
                throw std::invalid_argument("next_seq expects an integer");
            _sa.next_seq = *n;
        });
    }

    void push(int, Packet p) override {
        if (p.region() != RegionTag::Trusted) [[unlikely]] {
            ++*_region;
            kill(p);
            return;
        }
        if (_sa.next_seq == std::numeric_limits<uint64_t>::max()) [[unlikely]] {
            kill(p);
            throw FatalError("SAExhausted: sequence space of SA '" + _sa.name + "' is used up");
        }
        uint32_t len = p.length();
        if (!p.push_front(kSealHeaderLen)) {
            ++*_no_room;
            kill(p);
            return;
        }
        if (!p.put_back(crypto::kGcmTagLen)) {
            ++*_no_room;
            kill(p);
            return;
        }
        seal_frame(*_gcm, _sa.id, _sa.next_seq++, {p.data() + kSealHeaderLen, len}, p.bytes());
        p.network_offset = p.transport_offset = kNoOffset;
        output(0, p);
    }

  private:
    uint64_t *_no_room = nullptr;
};

class Unseal final : public SaElement {
  public:
    const char *class_name() const override { return "Unseal"; }

    void initialize() override {
        SaElement::initialize();
        _malformed = &counter("malformed");
        _wrong_sa = &counter("wrong_sa");
        _replay = &counter("replays");
        _auth = &counter("auth_failures");
    }

    void push(int, Packet p) override {
        if (p.region() != RegionTag::Trusted) [[unlikely]] {
            ++*_region;
            kill(p);
            return;
        }
        auto in = p.bytes();
        std::span<uint8_t> out;
        if (in.size() >= kSealOverhead)
            out = in.subspan(kSealHeaderLen, in.size() - kSealOverhead);
        switch (open_frame(*_gcm, _sa.id, _sa.window, in, out)) {
        case OpenStatus::Ok:
            p.pull_front(kSealHeaderLen);
            p.take_back(crypto::kGcmTagLen);
            output(0, p);
            return;
        case OpenStatus::Malformed: ++*_malformed; break;
        case OpenStatus::WrongSa: ++*_wrong_sa; break;
        case OpenStatus::Replay: ++*_replay; break;
        case OpenStatus::AuthFail: ++*_auth; break;
        }
        kill(p);
    }

  private:
    uint64_t *_malformed = nullptr;
    uint64_t *_wrong_sa = nullptr;
    uint64_t *_replay = nullptr;
    uint64_t *_auth = nullptr;
};

} // namespace

void register_secure(config::ElementRegistry &r) {
    r.add(make_class<ToEnclave>("ToEnclave", fixed_ports(1, 1)));
    r.add(make_class<Seal>("Seal", fixed_ports(1, 1)));
    r.add(make_class<Unseal>("Unseal", fixed_ports(1, 1)));
}

} // namespace slick::elements
