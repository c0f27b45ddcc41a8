#ifndef SLICK_ATTEST_HH
#define SLICK_ATTEST_HH

// Configuration and attestation.
//
// The verifier role of Intel's attestation service is played by CAS, which
// holds the simulated hardware key. LAS issues quotes with the same key and
// attests itself to CAS on the first quote request it serves.
//
// Instance bootstrap, message by message (I instance, C CAS, L LAS):
//   I->C Hello      instance id, X25519 share
//   C->I Challenge  nonce, X25519 share
//   I->L QuoteReq   measurement, nonce, sgx flag
//     L->C LasAttest  LAS quote over the same nonce     (first request only)
//     C->L LasAccept                                    (first request only)
//   L->I QuoteResp  quote
//   I->C Quote      quote
//   C->I Accept | Reject(reason)
//   C->I Config     AEAD(session key, provisioned config)
// The session keys come from HKDF over the X25519 secret, salted with the
// hash of Hello, Challenge and Quote.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <slick/crypto.hh>
#include <slick/error.hh>
#include <slick/wire.hh>

namespace slick::attest {

using Measurement = crypto::Digest;
using HardwareKey = crypto::Key256;
constexpr size_t kNonceLen = 16;
using Nonce = std::array<uint8_t, kNonceLen>;

// Identity string of this binary; the first half of every measurement.
extern const char *const kBinaryIdentity;
extern const char *const kLasIdentity;

// The simulated platform secret: SLICK_HW_KEY (64 hex digits) if set,
// otherwise a fixed development key.
HardwareKey platform_key();

// Canonical form of a configuration: the printed form of its parse.
std::string canonical_config(std::string_view config_text);
// SHA-256(identity || canonical config). Throws config::ParseError.
Measurement measure(std::string_view identity, std::string_view config_text);
Measurement measure_las();

struct Quote {
    Measurement measurement{};
    Nonce nonce{};
    bool sgx_flag = true;
    crypto::Digest mac{};
};

crypto::Digest quote_mac(const HardwareKey &hw, const Measurement &m, const Nonce &n, bool sgx);
Quote make_quote(const HardwareKey &hw, const Measurement &m, const Nonce &n, bool sgx);

// Deterministic sealing key bound to the platform, the measurement and the
// purpose.
crypto::Key256 derive_seal_key(const HardwareKey &hw, const Measurement &m,
                               std::string_view purpose);

enum class RejectReason : uint8_t {
    BadMac = 1,
    StaleNonce,
    SgxFlagFalse,
    UnknownMeasurement,
    Protocol,
};
const char *reject_reason_name(RejectReason r);

struct ProvisionedConfig {
    std::string config_text;
    std::map<std::string, std::string> env;
    std::vector<std::string> args;
    std::map<std::string, crypto::Bytes> secrets;

    bool operator==(const ProvisionedConfig &) const = default;
};

crypto::Bytes encode_config(const ProvisionedConfig &c);
ProvisionedConfig decode_config(crypto::ByteView b);
// {"config_text": s, "env": {k: v}, "args": [s], "secrets": {name: hex}}
std::string config_to_json(const ProvisionedConfig &c);
// Throws std::invalid_argument.
ProvisionedConfig config_from_json(std::string_view json);

// Quote verification with single-use nonces. Thread-safe.
class Verifier {
  public:
    explicit Verifier(HardwareKey hw) : _hw(hw) {}

    Nonce issue_nonce();
    // Checks, in order: MAC, nonce freshness (consuming it), sgx flag,
    // measurement membership.
    std::optional<RejectReason> verify(const Quote &q,
                                       const std::function<bool(const Measurement &)> &known);
    // Freshness check that leaves the nonce outstanding.
    bool outstanding(const Nonce &n) const;

  private:
    HardwareKey _hw;
    mutable std::mutex _lock;
    std::set<Nonce> _outstanding;
};

// Policy and instance records, persisted as JSON lines.
class PolicyStore {
  public:
    // Empty path keeps everything in memory.
    explicit PolicyStore(std::string path = {});

    void put(const Measurement &m, const ProvisionedConfig &c);
    std::optional<ProvisionedConfig> get(const Measurement &m) const;
    bool contains(const Measurement &m) const;
    void record_instance(const std::string &id, const Measurement &m, bool accepted,
                         const std::string &reason);
    // JSON array of instance records.
    std::string instances_json() const;

  private:
    void append(const std::string &line);

    std::string _path;
    mutable std::mutex _lock;
    std::map<Measurement, ProvisionedConfig> _policy;
    std::vector<std::string> _instances; // one JSON object each
};

class ConnectFailure : public Error {
  public:
    using Error::Error;
};
class Rejected : public Error {
  public:
    Rejected(RejectReason r, const std::string &msg) : Error(msg), _reason(r) {}
    RejectReason reason() const { return _reason; }

  private:
    RejectReason _reason;
};
class SessionIntegrity : public Error {
  public:
    using Error::Error;
};

// "host:port"; port 0 picks a free port on listen.
struct Address {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    std::string str() const { return host + ":" + std::to_string(port); }
};
Address parse_address(std::string_view s);

// RAII TCP socket.
class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) : _fd(fd) {}
    ~Socket();
    Socket(Socket &&o) noexcept : _fd(o._fd) { o._fd = -1; }
    Socket &operator=(Socket &&o) noexcept;

    int fd() const { return _fd; }
    explicit operator bool() const { return _fd >= 0; }
    void shutdown();

    void send(const wire::Message &m);
    wire::Message recv();

  private:
    int _fd = -1;
};

// One attempt; throws ConnectFailure.
Socket connect_tcp(const Address &a);

enum class MsgType : uint8_t {
    Hello = 1,
    Challenge,
    Quote,
    Accept,
    Reject,
    Config,
    QuoteRequest,
    QuoteResponse,
    LasAttest,
    LasAccept,
};

wire::Message quote_message(MsgType type, const Quote &q);
Quote quote_from(const wire::Message &m);

// Observes every frame body the bootstrap sends or receives, in order.
using Tap = std::function<void(bool outgoing, crypto::ByteView body)>;

class CasServer {
  public:
    CasServer(HardwareKey hw, std::shared_ptr<PolicyStore> store);
    ~CasServer();

    // Binds and starts serving; returns the bound address.
    Address start(const Address &listen);
    // HTTP admin endpoint: PUT /policy/{measurement}, GET /instances.
    Address start_admin(const Address &listen);
    void stop();

    PolicyStore &store() { return *_store; }
    Verifier &verifier() { return _verifier; }
    uint64_t las_attestations() const { return _las_attestations.load(); }
    uint64_t sessions() const { return _sessions.load(); }

  private:
    void accept_loop();
    void serve(Socket s);
    void serve_instance(Socket &s, const wire::Message &hello);
    void serve_las(Socket &s, const wire::Message &first);

    HardwareKey _hw;
    std::shared_ptr<PolicyStore> _store;
    Verifier _verifier;
    Socket _listen;
    std::thread _acceptor;
    std::atomic<bool> _running{false};
    std::mutex _workers_lock;
    std::vector<std::thread> _workers;
    std::atomic<uint64_t> _las_attestations{0};
    std::atomic<uint64_t> _sessions{0};
    struct Admin;
    std::unique_ptr<Admin> _admin;
};

class LasServer {
  public:
    LasServer(HardwareKey hw, Address cas);
    ~LasServer();

    Address start(const Address &listen);
    void stop();

    bool attested() const { return _attested.load(); }

  private:
    void accept_loop();
    void serve(Socket s);
    void ensure_attested(const Nonce &n);

    HardwareKey _hw;
    Address _cas;
    Socket _listen;
    std::thread _acceptor;
    std::atomic<bool> _running{false};
    std::mutex _workers_lock;
    std::vector<std::thread> _workers;
    std::mutex _attest_lock;
    std::atomic<bool> _attested{false};
};

struct PhaseReport {
    uint64_t attestation_ns = 0;
    uint64_t cas_ns = 0;
    uint64_t las_ns = 0;
    uint64_t configuration_ns = 0;
    uint64_t total_ns = 0;

    std::string to_json() const;
};

struct BootstrapOptions {
    std::string instance_id = "slick0";
    std::string identity = kBinaryIdentity;
    bool sgx = true;
    int retries = 3;
    std::chrono::milliseconds backoff{100};
    Tap tap;
    // Test hook: may rewrite every received frame body before it is used.
    std::function<void(crypto::Bytes &body)> inbound_filter;
};

struct BootstrapResult {
    ProvisionedConfig config;
    Measurement measurement{};
    PhaseReport phases;
};

// Attests the instance whose launch configuration is `config_text` and
// returns what CAS provisions for it. Throws ConnectFailure after the
// retries, Rejected, SessionIntegrity or wire::ProtocolError.
BootstrapResult enclave_bootstrap(const Address &cas, const Address &las,
                                  std::string_view config_text, const BootstrapOptions &opt);

} // namespace slick::attest

#endif
