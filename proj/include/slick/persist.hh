#ifndef SLICK_PERSIST_HH
#define SLICK_PERSIST_HH

// Encrypted element-state persistence.
//
// File layout (integers little-endian):
//   "SLKS" | version u16 = 1 | nonce[12] | ciphertext | tag[16]
// The 18-byte header is the AEAD associated data. The plaintext is a
// sequence of (name_len u32, name, blob_len u32, blob) records, one per
// element that exposes state.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <slick/crypto.hh>
#include <slick/error.hh>

namespace slick {

class Instance;

namespace persist {

constexpr char kMagic[4] = {'S', 'L', 'K', 'S'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderLen = 4 + 2 + crypto::kGcmNonceLen;

struct StateFileSpec {
    std::string path;
    crypto::Key256 key{};
    std::optional<uint64_t> period_ns;
};

class IoError : public Error {
  public:
    using Error::Error;
};
class HandlerError : public Error {
  public:
    HandlerError(std::string element, const std::string &msg)
        : Error(msg), _element(std::move(element)) {}
    const std::string &element() const { return _element; }

  private:
    std::string _element;
};
class AuthFailure : public Error {
  public:
    using Error::Error;
};
class VersionMismatch : public Error {
  public:
    using Error::Error;
};
class MissingFile : public Error {
  public:
    using Error::Error;
};
class FormatError : public Error {
  public:
    using Error::Error;
};

struct StateEntry {
    std::string name;
    crypto::Bytes blob;
    bool operator==(const StateEntry &) const = default;
};

crypto::Bytes encode_entries(const std::vector<StateEntry> &entries);
// Throws FormatError on truncated or trailing bytes.
std::vector<StateEntry> decode_entries(crypto::ByteView plaintext);

// Encrypts with a fresh random nonce.
crypto::Bytes seal_blob(const crypto::Key256 &key, crypto::ByteView plaintext);
// Throws VersionMismatch, AuthFailure (including truncation or bad magic).
crypto::Bytes unseal_blob(const crypto::Key256 &key, crypto::ByteView file);

// Collects every stateful element's bytes and atomically replaces the file.
// Returns the number of bytes written. Throws HandlerError, IoError; on
// either the previous file is left untouched.
size_t seal_state(Instance &inst, const StateFileSpec &spec);

// Returns the number of elements restored. Throws MissingFile, AuthFailure,
// VersionMismatch, FormatError or HandlerError. Nothing is applied unless
// the whole file authenticates and decodes.
size_t unseal_state(Instance &inst, const StateFileSpec &spec);

// Registers a periodic seal when spec.period_ns is set; returns the timer id
// or 0.
uint64_t persist_periodic(Instance &inst, const StateFileSpec &spec);

// Test hook run after the temporary file is written and before the rename.
// Throwing from it simulates a crash at that point.
void set_commit_hook(std::function<void(const std::string &tmp_path)> hook);

} // namespace persist
} // namespace slick

#endif
