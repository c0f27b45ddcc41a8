#include <slick/wire.hh>

#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <unistd.h>

namespace slick::wire {

namespace {

constexpr uint8_t kKindU64 = 1;
constexpr uint8_t kKindBytes = 2;

void put_le(crypto::Bytes &out, uint64_t v, int n) {
    for (int i = 0; i < n; ++i)
        out.push_back(uint8_t(v >> (8 * i)));
}

uint64_t get_le(const uint8_t *p, int n) {
    uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i)
        v = v << 8 | p[i];
    return v;
}

void check_order(const Message &m, uint8_t tag) {
    if (!m.fields.empty() && m.fields.back().tag > tag)
        throw ProtocolError("fields must be added in tag order");
}

} // namespace

Message &Message::u64(uint8_t tag, uint64_t v) {
    check_order(*this, tag);
    fields.push_back({tag, v});
    return *this;
}

Message &Message::bytes(uint8_t tag, crypto::ByteView v) {
    check_order(*this, tag);
    fields.push_back({tag, crypto::Bytes(v.begin(), v.end())});
    return *this;
}

Message &Message::str(uint8_t tag, std::string_view v) { return bytes(tag, crypto::as_bytes(v)); }

uint64_t Message::get_u64(uint8_t tag) const {
    for (const auto &f : fields)
        if (f.tag == tag) {
            if (auto *v = std::get_if<uint64_t>(&f.value))
                return *v;
            throw ProtocolError("field " + std::to_string(tag) + " is not an integer");
        }
    throw ProtocolError("missing field " + std::to_string(tag));
}

const crypto::Bytes &Message::get_bytes(uint8_t tag) const {
    for (const auto &f : fields)
        if (f.tag == tag) {
            if (auto *v = std::get_if<crypto::Bytes>(&f.value))
                return *v;
            throw ProtocolError("field " + std::to_string(tag) + " is not a byte string");
        }
    throw ProtocolError("missing field " + std::to_string(tag));
}

std::string Message::get_str(uint8_t tag) const {
    const auto &b = get_bytes(tag);
    return std::string(b.begin(), b.end());
}

std::vector<const crypto::Bytes *> Message::get_all(uint8_t tag) const {
    std::vector<const crypto::Bytes *> out;
    for (const auto &f : fields)
        if (f.tag == tag) {
            auto *v = std::get_if<crypto::Bytes>(&f.value);
            if (!v)
                throw ProtocolError("field " + std::to_string(tag) + " is not a byte string");
            out.push_back(v);
        }
    return out;
}

bool Message::has(uint8_t tag) const {
    for (const auto &f : fields)
        if (f.tag == tag)
            return true;
    return false;
}

crypto::Bytes encode(const Message &m) {
    crypto::Bytes out;
    out.push_back(m.type);
    for (const auto &f : m.fields) {
        out.push_back(f.tag);
        if (auto *v = std::get_if<uint64_t>(&f.value)) {
            out.push_back(kKindU64);
            put_le(out, *v, 8);
        } else {
            const auto &b = std::get<crypto::Bytes>(f.value);
            out.push_back(kKindBytes);
            put_le(out, b.size(), 4);
            out.insert(out.end(), b.begin(), b.end());
        }
    }
    return out;
}

Message decode(crypto::ByteView body) {
    if (body.empty())
        throw ProtocolError("empty message");
    Message m;
    m.type = body[0];
    size_t i = 1;
    int last_tag = -1;
    while (i < body.size()) {
        if (body.size() - i < 2)
            throw ProtocolError("truncated field header");
        uint8_t tag = body[i], kind = body[i + 1];
        i += 2;
        if (tag < last_tag)
            throw ProtocolError("fields out of canonical order");
        last_tag = tag;
        if (kind == kKindU64) {
            if (body.size() - i < 8)
                throw ProtocolError("truncated integer field");
            m.fields.push_back({tag, get_le(body.data() + i, 8)});
            i += 8;
        } else if (kind == kKindBytes) {
            if (body.size() - i < 4)
                throw ProtocolError("truncated length");
            uint64_t n = get_le(body.data() + i, 4);
            i += 4;
            if (body.size() - i < n)
                throw ProtocolError("truncated byte field");
            m.fields.push_back({tag, crypto::Bytes(body.begin() + long(i),
                                                   body.begin() + long(i + n))});
            i += n;
        } else {
            throw ProtocolError("unknown field kind " + std::to_string(kind));
        }
    }
    return m;
}

namespace {

void write_all(int fd, const uint8_t *p, size_t n) {
    while (n) {
        ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR)
                continue;
            throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
        }
        p += w;
        n -= size_t(w);
    }
}

void read_all(int fd, uint8_t *p, size_t n) {
    while (n) {
        ssize_t r = ::recv(fd, p, n, 0);
        if (r == 0)
            throw ProtocolError("connection closed by peer");
        if (r < 0) {
            if (errno == EINTR)
                continue;
            throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
        }
        p += r;
        n -= size_t(r);
    }
}

} // namespace

void send_frame(int fd, crypto::ByteView body) {
    if (body.size() > kMaxFrame)
        throw ProtocolError("frame too large");
    uint8_t hdr[4];
    for (int i = 0; i < 4; ++i)
        hdr[i] = uint8_t(body.size() >> (8 * i));
    crypto::Bytes buf(hdr, hdr + 4);
    buf.insert(buf.end(), body.begin(), body.end());
    write_all(fd, buf.data(), buf.size());
}

crypto::Bytes recv_frame(int fd) {
    uint8_t hdr[4];
    read_all(fd, hdr, 4);
    uint32_t n = uint32_t(get_le(hdr, 4));
    if (n > kMaxFrame)
        throw ProtocolError("frame too large");
    crypto::Bytes body(n);
    read_all(fd, body.data(), n);
    return body;
}

} // namespace slick::wire
