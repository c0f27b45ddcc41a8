#include <slick/attest.hh>

#include <cstdlib>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include <slick/clock.hh>
#include <slick/config.hh>
#include <slick/log.hh>

namespace slick::attest {

using nlohmann::json;

const char *const kBinaryIdentity = "slick-1.0";
const char *const kLasIdentity = "slick-las-1.0";

HardwareKey platform_key() {
    HardwareKey k{};
    if (const char *v = std::getenv("SLICK_HW_KEY"); v && *v) {
        crypto::Bytes b = crypto::from_hex(v);
        if (b.size() != k.size())
            throw crypto::CryptoError("SLICK_HW_KEY must be 64 hex digits");
        std::memcpy(k.data(), b.data(), k.size());
        return k;
    }
    return crypto::sha256(crypto::as_bytes("slick simulated platform key (development)"));
}

std::string canonical_config(std::string_view config_text) {
    return config::print_config(config::parse_config(config_text));
}

Measurement measure(std::string_view identity, std::string_view config_text) {
    std::string canon = canonical_config(config_text);
    return crypto::sha256({crypto::as_bytes(identity), crypto::as_bytes(canon)});
}

Measurement measure_las() { return crypto::sha256(crypto::as_bytes(kLasIdentity)); }

crypto::Digest quote_mac(const HardwareKey &hw, const Measurement &m, const Nonce &n, bool sgx) {
    uint8_t buf[32 + kNonceLen + 1];
    std::memcpy(buf, m.data(), 32);
    std::memcpy(buf + 32, n.data(), kNonceLen);
    buf[32 + kNonceLen] = sgx ? 1 : 0;
    return crypto::hmac_sha256(hw, buf);
}

Quote make_quote(const HardwareKey &hw, const Measurement &m, const Nonce &n, bool sgx) {
    return Quote{m, n, sgx, quote_mac(hw, m, n, sgx)};
}

crypto::Key256 derive_seal_key(const HardwareKey &hw, const Measurement &m,
                               std::string_view purpose) {
    crypto::Key256 k{};
    std::string info = "slick seal key:" + std::string(purpose);
    crypto::hkdf_sha256(hw, m, crypto::as_bytes(info), k);
    return k;
}

const char *reject_reason_name(RejectReason r) {
    switch (r) {
    case RejectReason::BadMac: return "BadMac";
    case RejectReason::StaleNonce: return "StaleNonce";
    case RejectReason::SgxFlagFalse: return "SgxFlagFalse";
    case RejectReason::UnknownMeasurement: return "UnknownMeasurement";
    case RejectReason::Protocol: return "ProtocolError";
    }
    return "?";
}

// --- provisioned configuration ----------------------------------------------

namespace {

constexpr uint8_t kCfgType = 0x70;
constexpr uint8_t kPairType = 0x71;

crypto::Bytes pair(std::string_view k, crypto::ByteView v) {
    wire::Message m;
    m.type = kPairType;
    m.str(1, k).bytes(2, v);
    return wire::encode(m);
}

} // namespace

crypto::Bytes encode_config(const ProvisionedConfig &c) {
    wire::Message m;
    m.type = kCfgType;
    m.str(1, c.config_text);
    for (const auto &[k, v] : c.env)
        m.bytes(2, pair(k, crypto::as_bytes(v)));
    for (const auto &a : c.args)
        m.str(3, a);
    for (const auto &[k, v] : c.secrets) {
        crypto::Bytes p = pair(k, v);
        m.bytes(4, p);
        crypto::cleanse(p);
    }
    return wire::encode(m);
}

ProvisionedConfig decode_config(crypto::ByteView b) {
    wire::Message m = wire::decode(b);
    if (m.type != kCfgType)
        throw wire::ProtocolError("not a provisioned configuration");
    ProvisionedConfig c;
    c.config_text = m.get_str(1);
    for (const auto *e : m.get_all(2)) {
        wire::Message p = wire::decode(*e);
        c.env[p.get_str(1)] = p.get_str(2);
    }
    for (const auto *a : m.get_all(3))
        c.args.emplace_back(a->begin(), a->end());
    for (const auto *e : m.get_all(4)) {
        wire::Message p = wire::decode(*e);
        c.secrets[p.get_str(1)] = p.get_bytes(2);
    }
    return c;
}

namespace {

json config_json(const ProvisionedConfig &c) {
    json j;
    j["config_text"] = c.config_text;
    j["env"] = json::object();
    for (const auto &[k, v] : c.env)
        j["env"][k] = v;
    j["args"] = c.args;
    j["secrets"] = json::object();
    for (const auto &[k, v] : c.secrets)
        j["secrets"][k] = crypto::to_hex(v);
    return j;
}

ProvisionedConfig config_of(const json &j) {
    if (!j.is_object())
        throw std::invalid_argument("policy must be a JSON object");
    ProvisionedConfig c;
    c.config_text = j.value("config_text", "");
    if (j.contains("env"))
        for (auto it = j["env"].begin(); it != j["env"].end(); ++it)
            c.env[it.key()] = it.value().get<std::string>();
    if (j.contains("args"))
        for (const auto &a : j["args"])
            c.args.push_back(a.get<std::string>());
    if (j.contains("secrets"))
        for (auto it = j["secrets"].begin(); it != j["secrets"].end(); ++it) {
            try {
                c.secrets[it.key()] = crypto::from_hex(it.value().get<std::string>());
            } catch (const crypto::CryptoError &) {
                throw std::invalid_argument("secret '" + it.key() + "' is not hex");
            }
        }
    return c;
}

} // namespace

std::string config_to_json(const ProvisionedConfig &c) { return config_json(c).dump(); }

ProvisionedConfig config_from_json(std::string_view text) {
    try {
        return config_of(json::parse(text));
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string("bad policy JSON: ") + e.what());
    }
}

// --- verifier -----------------------------------------------------------------

Nonce Verifier::issue_nonce() {
    Nonce n;
    crypto::random_bytes(n);
    std::lock_guard g(_lock);
    _outstanding.insert(n);
    return n;
}

bool Verifier::outstanding(const Nonce &n) const {
    std::lock_guard g(_lock);
    return _outstanding.count(n) != 0;
}

std::optional<RejectReason>
Verifier::verify(const Quote &q, const std::function<bool(const Measurement &)> &known) {
    crypto::Digest expect = quote_mac(_hw, q.measurement, q.nonce, q.sgx_flag);
    if (!crypto::constant_time_equal(expect, q.mac))
        return RejectReason::BadMac;
    {
        std::lock_guard g(_lock);
        if (_outstanding.erase(q.nonce) == 0)
            return RejectReason::StaleNonce;
    }
    if (!q.sgx_flag)
        return RejectReason::SgxFlagFalse;
    if (!known(q.measurement))
        return RejectReason::UnknownMeasurement;
    return std::nullopt;
}

// --- policy store -------------------------------------------------------------

namespace {

Measurement measurement_from_hex(const std::string &s) {
    crypto::Bytes b = crypto::from_hex(s);
    if (b.size() != 32)
        throw std::invalid_argument("measurement must be 64 hex digits");
    Measurement m;
    std::memcpy(m.data(), b.data(), 32);
    return m;
}

} // namespace

PolicyStore::PolicyStore(std::string path) : _path(std::move(path)) {
    if (_path.empty())
        return;
    std::ifstream in(_path);
    std::string line;
    size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        try {
            json j = json::parse(line);
            std::string type = j.at("type");
            if (type == "policy")
                _policy[measurement_from_hex(j.at("measurement"))] = config_of(j.at("config"));
            else if (type == "instance")
                _instances.push_back(line);
        } catch (const std::exception &e) {
            log::warn("store {}: skipping line {}: {}", _path, n, e.what());
        }
    }
}

void PolicyStore::append(const std::string &line) {
    if (_path.empty())
        return;
    std::ofstream out(_path, std::ios::app);
    out << line << '\n';
    if (!out)
        log::error("store {}: append failed", _path);
}

void PolicyStore::put(const Measurement &m, const ProvisionedConfig &c) {
    json j;
    j["type"] = "policy";
    j["measurement"] = crypto::to_hex(m);
    j["config"] = config_json(c);
    std::lock_guard g(_lock);
    _policy[m] = c;
    append(j.dump());
}

std::optional<ProvisionedConfig> PolicyStore::get(const Measurement &m) const {
    std::lock_guard g(_lock);
    auto it = _policy.find(m);
    if (it == _policy.end())
        return std::nullopt;
    return it->second;
}

bool PolicyStore::contains(const Measurement &m) const {
    std::lock_guard g(_lock);
    return _policy.count(m) != 0;
}

void PolicyStore::record_instance(const std::string &id, const Measurement &m, bool accepted,
                                  const std::string &reason) {
    json j;
    j["type"] = "instance";
    j["id"] = id;
    j["measurement"] = crypto::to_hex(m);
    j["accepted"] = accepted;
    j["reason"] = reason;
    j["time_ns"] = wall_ns();
    std::string line = j.dump();
    std::lock_guard g(_lock);
    _instances.push_back(line);
    append(line);
}

std::string PolicyStore::instances_json() const {
    json arr = json::array();
    std::lock_guard g(_lock);
    for (const auto &l : _instances) {
        json j = json::parse(l);
        j.erase("type");
        arr.push_back(std::move(j));
    }
    return arr.dump();
}

std::string PhaseReport::to_json() const {
    nlohmann::ordered_json j;
    j["attestation_ns"] = attestation_ns;
    j["cas_communication_ns"] = cas_ns;
    j["las_communication_ns"] = las_ns;
    j["configuration_ns"] = configuration_ns;
    j["total_ns"] = total_ns;
    return j.dump();
}

Address parse_address(std::string_view s) {
    size_t colon = s.rfind(':');
    if (colon == std::string_view::npos)
        throw std::invalid_argument("address must be host:port, got '" + std::string(s) + "'");
    Address a;
    a.host = std::string(s.substr(0, colon));
    if (a.host.empty() || a.host == "localhost")
        a.host = "127.0.0.1";
    std::string port(s.substr(colon + 1));
    char *end = nullptr;
    unsigned long p = std::strtoul(port.c_str(), &end, 10);
    if (port.empty() || *end || p > 65535)
        throw std::invalid_argument("bad port in '" + std::string(s) + "'");
    a.port = uint16_t(p);
    return a;
}

wire::Message quote_message(MsgType type, const Quote &q) {
    wire::Message m;
    m.type = uint8_t(type);
    m.bytes(1, q.measurement).bytes(2, q.nonce).u64(3, q.sgx_flag ? 1 : 0).bytes(4, q.mac);
    return m;
}

Quote quote_from(const wire::Message &m) {
    Quote q;
    const auto &meas = m.get_bytes(1);
    const auto &nonce = m.get_bytes(2);
    const auto &mac = m.get_bytes(4);
    if (meas.size() != 32 || nonce.size() != kNonceLen || mac.size() != 32)
        throw wire::ProtocolError("malformed quote");
    std::memcpy(q.measurement.data(), meas.data(), 32);
    std::memcpy(q.nonce.data(), nonce.data(), kNonceLen);
    std::memcpy(q.mac.data(), mac.data(), 32);
    uint64_t flag = m.get_u64(3);
    if (flag > 1)
        throw wire::ProtocolError("malformed quote flag");
    q.sgx_flag = flag == 1;
    return q;
}

} // namespace slick::attest
