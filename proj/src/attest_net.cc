#include <slick/attest.hh>

#include <cerrno>
#include <cstring>
#include <regex>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include <slick/clock.hh>
#include <slick/elements.hh>
#include <slick/log.hh>

namespace slick::attest {

// --- sockets ------------------------------------------------------------------

namespace {

constexpr int kIoTimeoutSec = 10;

void set_timeouts(int fd) {
    timeval tv{kIoTimeoutSec, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

sockaddr_in to_sockaddr(const Address &a) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(a.port);
    if (::inet_pton(AF_INET, a.host.c_str(), &sa.sin_addr) != 1)
        throw ConnectFailure("bad IPv4 address '" + a.host + "'");
    return sa;
}

Socket listen_tcp(const Address &a, Address &bound) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0)
        throw Error(std::string("socket: ") + std::strerror(errno));
    Socket s(fd);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa = to_sockaddr(a);
    if (::bind(fd, reinterpret_cast<sockaddr *>(&sa), sizeof sa) != 0)
        throw Error("bind " + a.str() + ": " + std::strerror(errno));
    if (::listen(fd, 64) != 0)
        throw Error("listen " + a.str() + ": " + std::strerror(errno));
    socklen_t len = sizeof sa;
    ::getsockname(fd, reinterpret_cast<sockaddr *>(&sa), &len);
    bound = a;
    bound.port = ntohs(sa.sin_port);
    return s;
}

std::array<uint8_t, 12> counter_nonce(uint64_t seq) { return elements::seal_nonce(seq); }

struct SessionKeys {
    crypto::Key256 to_instance{};
    crypto::Key256 to_cas{};
    ~SessionKeys() {
        crypto::cleanse(to_instance);
        crypto::cleanse(to_cas);
    }
};

void derive_session(std::span<const uint8_t, 32> priv, crypto::ByteView peer_pub,
                    const crypto::Digest &transcript, SessionKeys &out) {
    if (peer_pub.size() != 32)
        throw wire::ProtocolError("key share must be 32 bytes");
    auto shared = crypto::x25519(priv, std::span<const uint8_t, 32>(peer_pub.data(), 32));
    std::array<uint8_t, 64> okm;
    crypto::hkdf_sha256(shared, transcript, crypto::as_bytes("slick session v1"), okm);
    std::memcpy(out.to_instance.data(), okm.data(), 32);
    std::memcpy(out.to_cas.data(), okm.data() + 32, 32);
    crypto::cleanse(okm);
    crypto::cleanse(shared);
}

wire::Message seal_message(MsgType type, const crypto::Key256 &key, uint64_t seq,
                           crypto::ByteView plaintext) {
    crypto::AesGcm256 gcm(key);
    crypto::Bytes ct(plaintext.size() + crypto::kGcmTagLen);
    uint8_t aad[9] = {uint8_t(type)};
    for (int i = 0; i < 8; ++i)
        aad[1 + i] = uint8_t(seq >> (8 * i));
    gcm.seal(counter_nonce(seq), aad, plaintext, {ct.data(), plaintext.size()},
             std::span<uint8_t, 16>(ct.data() + plaintext.size(), 16));
    wire::Message m;
    m.type = uint8_t(type);
    m.u64(1, seq).bytes(2, ct);
    return m;
}

crypto::Bytes open_message(const wire::Message &m, const crypto::Key256 &key) {
    uint64_t seq = m.get_u64(1);
    const auto &ct = m.get_bytes(2);
    if (ct.size() < crypto::kGcmTagLen)
        throw SessionIntegrity("sealed message truncated");
    size_t n = ct.size() - crypto::kGcmTagLen;
    uint8_t aad[9] = {m.type};
    for (int i = 0; i < 8; ++i)
        aad[1 + i] = uint8_t(seq >> (8 * i));
    crypto::AesGcm256 gcm(key);
    crypto::Bytes pt(n);
    if (!gcm.open(counter_nonce(seq), aad, {ct.data(), n},
                  std::span<const uint8_t, 16>(ct.data() + n, 16), pt))
        throw SessionIntegrity("secure channel message failed authentication");
    return pt;
}

wire::Message reject_message(RejectReason r, const std::string &why) {
    wire::Message m;
    m.type = uint8_t(MsgType::Reject);
    m.u64(1, uint64_t(r)).str(2, why);
    return m;
}

[[noreturn]] void throw_reject(const wire::Message &m, const std::string &who) {
    uint64_t r = m.get_u64(1);
    if (r < uint64_t(RejectReason::BadMac) || r > uint64_t(RejectReason::Protocol))
        r = uint64_t(RejectReason::Protocol);
    auto reason = RejectReason(r);
    throw Rejected(reason, who + " rejected attestation: " + reject_reason_name(reason) +
                               (m.has(2) ? " (" + m.get_str(2) + ")" : ""));
}

void expect_type(const wire::Message &m, MsgType t) {
    if (m.type != uint8_t(t))
        throw wire::ProtocolError("unexpected message type " + std::to_string(m.type) +
                                  ", expected " + std::to_string(uint8_t(t)));
}

} // namespace

Socket::~Socket() {
    if (_fd >= 0)
        ::close(_fd);
}

Socket &Socket::operator=(Socket &&o) noexcept {
    if (this != &o) {
        if (_fd >= 0)
            ::close(_fd);
        _fd = o._fd;
        o._fd = -1;
    }
    return *this;
}

void Socket::shutdown() {
    if (_fd >= 0)
        ::shutdown(_fd, SHUT_RDWR);
}

void Socket::send(const wire::Message &m) { wire::send_frame(_fd, wire::encode(m)); }

wire::Message Socket::recv() { return wire::decode(wire::recv_frame(_fd)); }

Socket connect_tcp(const Address &a) {
    sockaddr_in sa = to_sockaddr(a);
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0)
        throw ConnectFailure(std::string("socket: ") + std::strerror(errno));
    Socket s(fd);
    if (::connect(fd, reinterpret_cast<sockaddr *>(&sa), sizeof sa) != 0)
        throw ConnectFailure("connect " + a.str() + ": " + std::strerror(errno));
    set_timeouts(fd);
    return s;
}

// --- CAS ----------------------------------------------------------------------

struct CasServer::Admin {
    httplib::Server http;
    std::thread thread;
};

CasServer::CasServer(HardwareKey hw, std::shared_ptr<PolicyStore> store)
    : _hw(hw), _store(std::move(store)), _verifier(hw) {}

CasServer::~CasServer() { stop(); }

Address CasServer::start(const Address &listen) {
    Address bound;
    _listen = listen_tcp(listen, bound);
    _running = true;
    _acceptor = std::thread([this] { accept_loop(); });
    log::info("cas: listening on {}", bound.str());
    return bound;
}

Address CasServer::start_admin(const Address &listen) {
    _admin = std::make_unique<Admin>();
    auto &http = _admin->http;
    http.Put(R"(/policy/([0-9a-fA-F]{64}))", [this](const httplib::Request &req,
                                                    httplib::Response &res) {
        try {
            crypto::Bytes b = crypto::from_hex(req.matches[1].str());
            Measurement m;
            std::memcpy(m.data(), b.data(), 32);
            _store->put(m, config_from_json(req.body));
            res.status = 204;
        } catch (const std::exception &e) {
            res.status = 400;
            res.set_content(std::string("{\"error\":\"") + e.what() + "\"}", "application/json");
        }
    });
    http.Get("/instances", [this](const httplib::Request &, httplib::Response &res) {
        res.set_content(_store->instances_json(), "application/json");
    });
    int port = listen.port == 0 ? http.bind_to_any_port(listen.host)
                                : (http.bind_to_port(listen.host, listen.port) ? listen.port : -1);
    if (port < 0)
        throw Error("cannot bind admin endpoint " + listen.str());
    _admin->thread = std::thread([this] { _admin->http.listen_after_bind(); });
    Address bound = listen;
    bound.port = uint16_t(port);
    log::info("cas: admin endpoint on http://{}", bound.str());
    return bound;
}

void CasServer::stop() {
    if (_admin) {
        _admin->http.stop();
        if (_admin->thread.joinable())
            _admin->thread.join();
        _admin.reset();
    }
    if (!_running.exchange(false))
        return;
    _listen.shutdown();
    if (_acceptor.joinable())
        _acceptor.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard g(_workers_lock);
        workers.swap(_workers);
    }
    for (auto &t : workers)
        t.join();
}

void CasServer::accept_loop() {
    while (_running) {
        int fd = ::accept4(_listen.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        set_timeouts(fd);
        std::lock_guard g(_workers_lock);
        _workers.emplace_back([this, fd] { serve(Socket(fd)); });
    }
}

void CasServer::serve(Socket s) {
    try {
        crypto::Bytes first = wire::recv_frame(s.fd());
        wire::Message m = wire::decode(first);
        if (m.type == uint8_t(MsgType::Hello))
            serve_instance(s, m);
        else if (m.type == uint8_t(MsgType::LasAttest))
            serve_las(s, m);
        else
            throw wire::ProtocolError("unexpected first message " + std::to_string(m.type));
    } catch (const std::exception &e) {
        log::warn("cas: session aborted: {}", e.what());
        try {
            s.send(reject_message(RejectReason::Protocol, e.what()));
        } catch (...) {
        }
    }
}

void CasServer::serve_las(Socket &s, const wire::Message &first) {
    Quote q = quote_from(first);
    std::optional<RejectReason> why;
    crypto::Digest expect = quote_mac(_hw, q.measurement, q.nonce, q.sgx_flag);
    if (!crypto::constant_time_equal(expect, q.mac))
        why = RejectReason::BadMac;
    else if (!_verifier.outstanding(q.nonce))
        why = RejectReason::StaleNonce;
    else if (!q.sgx_flag)
        why = RejectReason::SgxFlagFalse;
    else if (q.measurement != measure_las())
        why = RejectReason::UnknownMeasurement;
    if (why) {
        log::warn("cas: rejected LAS attestation: {}", reject_reason_name(*why));
        s.send(reject_message(*why, "LAS attestation failed"));
        return;
    }
    ++_las_attestations;
    wire::Message ok;
    ok.type = uint8_t(MsgType::LasAccept);
    s.send(ok);
}

void CasServer::serve_instance(Socket &s, const wire::Message &hello) {
    ++_sessions;
    std::string id = hello.get_str(1);
    const crypto::Bytes &peer = hello.get_bytes(2);
    crypto::Bytes hello_body = wire::encode(hello);

    auto kp = crypto::X25519KeyPair::generate();
    Nonce nonce = _verifier.issue_nonce();
    wire::Message challenge;
    challenge.type = uint8_t(MsgType::Challenge);
    challenge.bytes(1, nonce).bytes(2, kp.pub);
    crypto::Bytes challenge_body = wire::encode(challenge);
    wire::send_frame(s.fd(), challenge_body);

    crypto::Bytes quote_body = wire::recv_frame(s.fd());
    wire::Message qm = wire::decode(quote_body);
    expect_type(qm, MsgType::Quote);
    Quote q = quote_from(qm);

    auto why = _verifier.verify(q, [this](const Measurement &m) { return _store->contains(m); });
    if (why) {
        log::warn("cas: rejected instance '{}' ({}): {}", id, crypto::to_hex(q.measurement),
                  reject_reason_name(*why));
        _store->record_instance(id, q.measurement, false, reject_reason_name(*why));
        s.send(reject_message(*why, "instance attestation failed"));
        return;
    }
    auto cfg = _store->get(q.measurement);
    crypto::Digest th = crypto::sha256({hello_body, challenge_body, quote_body});
    SessionKeys keys;
    derive_session(kp.priv, peer, th, keys);
    crypto::cleanse(kp.priv);

    wire::Message accept;
    accept.type = uint8_t(MsgType::Accept);
    s.send(accept);
    crypto::Bytes pt = encode_config(*cfg);
    s.send(seal_message(MsgType::Config, keys.to_instance, 0, pt));
    crypto::cleanse(pt);
    _store->record_instance(id, q.measurement, true, "");
    log::info("cas: provisioned instance '{}'", id);
}

// --- LAS ----------------------------------------------------------------------

LasServer::LasServer(HardwareKey hw, Address cas) : _hw(hw), _cas(std::move(cas)) {}

LasServer::~LasServer() { stop(); }

Address LasServer::start(const Address &listen) {
    Address bound;
    _listen = listen_tcp(listen, bound);
    _running = true;
    _acceptor = std::thread([this] { accept_loop(); });
    log::info("las: listening on {}", bound.str());
    return bound;
}

void LasServer::stop() {
    if (!_running.exchange(false))
        return;
    _listen.shutdown();
    if (_acceptor.joinable())
        _acceptor.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard g(_workers_lock);
        workers.swap(_workers);
    }
    for (auto &t : workers)
        t.join();
}

void LasServer::accept_loop() {
    while (_running) {
        int fd = ::accept4(_listen.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        set_timeouts(fd);
        std::lock_guard g(_workers_lock);
        _workers.emplace_back([this, fd] { serve(Socket(fd)); });
    }
}

void LasServer::ensure_attested(const Nonce &n) {
    std::lock_guard g(_attest_lock);
    if (_attested)
        return;
    Socket cas = connect_tcp(_cas);
    cas.send(quote_message(MsgType::LasAttest, make_quote(_hw, measure_las(), n, true)));
    wire::Message r = cas.recv();
    if (r.type == uint8_t(MsgType::Reject))
        throw_reject(r, "CAS");
    expect_type(r, MsgType::LasAccept);
    _attested = true;
    log::info("las: attested to CAS at {}", _cas.str());
}

void LasServer::serve(Socket s) {
    try {
        wire::Message req = s.recv();
        expect_type(req, MsgType::QuoteRequest);
        const auto &m = req.get_bytes(1);
        const auto &n = req.get_bytes(2);
        if (m.size() != 32 || n.size() != kNonceLen)
            throw wire::ProtocolError("malformed quote request");
        Measurement meas;
        Nonce nonce;
        std::memcpy(meas.data(), m.data(), 32);
        std::memcpy(nonce.data(), n.data(), kNonceLen);
        bool sgx = req.get_u64(3) != 0;
        ensure_attested(nonce);
        s.send(quote_message(MsgType::QuoteResponse, make_quote(_hw, meas, nonce, sgx)));
    } catch (const Rejected &e) {
        log::warn("las: {}", e.what());
        try {
            s.send(reject_message(e.reason(), e.what()));
        } catch (...) {
        }
    } catch (const std::exception &e) {
        log::warn("las: session aborted: {}", e.what());
        try {
            s.send(reject_message(RejectReason::Protocol, e.what()));
        } catch (...) {
        }
    }
}

// --- enclave library ----------------------------------------------------------

namespace {

Socket connect_with_retry(const Address &a, const BootstrapOptions &opt, const char *what) {
    auto delay = opt.backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return connect_tcp(a);
        } catch (const ConnectFailure &e) {
            if (attempt >= opt.retries)
                throw ConnectFailure(std::string(what) + " unreachable after " +
                                     std::to_string(opt.retries) + " retries: " + e.what());
            log::warn("{} at {} unreachable, retrying in {} ms", what, a.str(), delay.count());
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
}

struct Channel {
    Socket &s;
    const BootstrapOptions &opt;

    void send(const wire::Message &m, crypto::Bytes *raw = nullptr) {
        crypto::Bytes body = wire::encode(m);
        if (opt.tap)
            opt.tap(true, body);
        wire::send_frame(s.fd(), body);
        if (raw)
            *raw = std::move(body);
    }

    wire::Message recv(crypto::Bytes *raw = nullptr) {
        crypto::Bytes body = wire::recv_frame(s.fd());
        if (opt.inbound_filter)
            opt.inbound_filter(body);
        if (opt.tap)
            opt.tap(false, body);
        wire::Message m = wire::decode(body);
        if (raw)
            *raw = std::move(body);
        return m;
    }
};

} // namespace

BootstrapResult enclave_bootstrap(const Address &cas_addr, const Address &las_addr,
                                  std::string_view config_text, const BootstrapOptions &opt) {
    BootstrapResult res;
    const uint64_t t0 = wall_ns();
    res.measurement = measure(opt.identity, config_text);

    uint64_t t = wall_ns();
    Socket cas_sock = connect_with_retry(cas_addr, opt, "CAS");
    Channel cas{cas_sock, opt};
    auto kp = crypto::X25519KeyPair::generate();
    wire::Message hello;
    hello.type = uint8_t(MsgType::Hello);
    hello.str(1, opt.instance_id).bytes(2, kp.pub);
    crypto::Bytes hello_body, challenge_body, quote_body;
    cas.send(hello, &hello_body);
    wire::Message challenge = cas.recv(&challenge_body);
    if (challenge.type == uint8_t(MsgType::Reject))
        throw_reject(challenge, "CAS");
    expect_type(challenge, MsgType::Challenge);
    const auto &nonce_b = challenge.get_bytes(1);
    if (nonce_b.size() != kNonceLen)
        throw wire::ProtocolError("malformed challenge");
    res.phases.cas_ns += wall_ns() - t;

    t = wall_ns();
    Socket las_sock = connect_with_retry(las_addr, opt, "LAS");
    Channel las{las_sock, opt};
    wire::Message qreq;
    qreq.type = uint8_t(MsgType::QuoteRequest);
    qreq.bytes(1, res.measurement).bytes(2, nonce_b).u64(3, opt.sgx ? 1 : 0);
    las.send(qreq);
    wire::Message qresp = las.recv();
    if (qresp.type == uint8_t(MsgType::Reject))
        throw_reject(qresp, "LAS");
    expect_type(qresp, MsgType::QuoteResponse);
    Quote q = quote_from(qresp);
    res.phases.las_ns = wall_ns() - t;

    t = wall_ns();
    cas.send(quote_message(MsgType::Quote, q), &quote_body);
    wire::Message verdict = cas.recv();
    if (verdict.type == uint8_t(MsgType::Reject))
        throw_reject(verdict, "CAS");
    expect_type(verdict, MsgType::Accept);
    res.phases.cas_ns += wall_ns() - t;
    res.phases.attestation_ns = wall_ns() - t0;

    t = wall_ns();
    crypto::Digest th = crypto::sha256({hello_body, challenge_body, quote_body});
    SessionKeys keys;
    derive_session(kp.priv, challenge.get_bytes(2), th, keys);
    crypto::cleanse(kp.priv);
    wire::Message cfg = cas.recv();
    expect_type(cfg, MsgType::Config);
    crypto::Bytes pt = open_message(cfg, keys.to_instance);
    res.config = decode_config(pt);
    crypto::cleanse(pt);
    res.phases.configuration_ns = wall_ns() - t;
    res.phases.total_ns = wall_ns() - t0;
    return res;
}

} // namespace slick::attest
