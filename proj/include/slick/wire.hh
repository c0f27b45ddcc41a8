#ifndef SLICK_WIRE_HH
#define SLICK_WIRE_HH

// Canonical message encoding for the attestation protocol.
//
// Frame:   len u32 LE | body
// Body:    type u8 | field*
// Field:   tag u8 | kind u8 | value
//          kind 1: u64 LE
//          kind 2: len u32 LE | bytes
// Tags appear in non-decreasing order; a repeated tag encodes a list. Any
// other ordering, an unknown kind or trailing bytes is a protocol error.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <slick/crypto.hh>
#include <slick/error.hh>

namespace slick::wire {

constexpr uint32_t kMaxFrame = 1u << 20;

class ProtocolError : public Error {
  public:
    using Error::Error;
};

struct Field {
    uint8_t tag = 0;
    std::variant<uint64_t, crypto::Bytes> value;
};

struct Message {
    uint8_t type = 0;
    std::vector<Field> fields;

    Message &u64(uint8_t tag, uint64_t v);
    Message &bytes(uint8_t tag, crypto::ByteView v);
    Message &str(uint8_t tag, std::string_view v);

    // Throw ProtocolError when the field is missing or of the wrong kind.
    uint64_t get_u64(uint8_t tag) const;
    const crypto::Bytes &get_bytes(uint8_t tag) const;
    std::string get_str(uint8_t tag) const;
    std::vector<const crypto::Bytes *> get_all(uint8_t tag) const;
    bool has(uint8_t tag) const;
};

crypto::Bytes encode(const Message &m);
Message decode(crypto::ByteView body);

// Length-prefixed framing over a connected socket. Both throw ProtocolError
// on short reads, oversize frames or closed connections.
void send_frame(int fd, crypto::ByteView body);
crypto::Bytes recv_frame(int fd);

} // namespace slick::wire

#endif
