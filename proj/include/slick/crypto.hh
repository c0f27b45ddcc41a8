#ifndef SLICK_CRYPTO_HH
#define SLICK_CRYPTO_HH

// Thin RAII wrappers over OpenSSL for the primitives the framework needs:
// AES-256-GCM, SHA-256, HMAC-SHA256, HKDF-SHA256 and X25519.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <slick/error.hh>

typedef struct evp_cipher_ctx_st EVP_CIPHER_CTX;

namespace slick::crypto {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;
using Key256 = std::array<uint8_t, 32>;
using Digest = std::array<uint8_t, 32>;
using Tag = std::array<uint8_t, 16>;

constexpr size_t kGcmTagLen = 16;
constexpr size_t kGcmNonceLen = 12;

class CryptoError : public Error {
  public:
    using Error::Error;
};

// An AES-256-GCM context bound to one key. Not thread-safe; one per owner.
// Input and output may alias exactly (in-place operation).
class AesGcm256 {
  public:
    explicit AesGcm256(std::span<const uint8_t, 32> key);
    ~AesGcm256();
    AesGcm256(const AesGcm256 &) = delete;
    AesGcm256 &operator=(const AesGcm256 &) = delete;

    void seal(ByteView iv, ByteView aad, ByteView plaintext,
              std::span<uint8_t> ciphertext, std::span<uint8_t, 16> tag);
    // Returns false when the tag does not verify; output contents are then
    // unspecified and must be discarded.
    [[nodiscard]] bool open(ByteView iv, ByteView aad, ByteView ciphertext,
                            std::span<const uint8_t, 16> tag,
                            std::span<uint8_t> plaintext);

  private:
    EVP_CIPHER_CTX *_enc;
    EVP_CIPHER_CTX *_dec;
};

Digest sha256(ByteView data);
Digest sha256(std::initializer_list<ByteView> parts);
Digest hmac_sha256(ByteView key, ByteView data);
void hkdf_sha256(ByteView ikm, ByteView salt, ByteView info,
                 std::span<uint8_t> out);

void random_bytes(std::span<uint8_t> out);
bool constant_time_equal(ByteView a, ByteView b);
void cleanse(std::span<uint8_t> buf);

struct X25519KeyPair {
    std::array<uint8_t, 32> priv;
    std::array<uint8_t, 32> pub;

    static X25519KeyPair generate();
};
std::array<uint8_t, 32> x25519(std::span<const uint8_t, 32> priv,
                               std::span<const uint8_t, 32> peer_pub);

std::string to_hex(ByteView data);
// Throws CryptoError on odd length or a non-hex character.
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const uint8_t *>(s.data()), s.size()};
}

} // namespace slick::crypto

#endif
