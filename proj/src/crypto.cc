#include <slick/crypto.hh>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <memory>

namespace slick::crypto {

namespace {

void check(int ok, const char *what) {
    if (ok != 1)
        throw CryptoError(std::string("openssl: ") + what + " failed");
}

int as_int(size_t n) {
    if (n > static_cast<size_t>(INT32_MAX))
        throw CryptoError("buffer too large");
    return static_cast<int>(n);
}

} // namespace

AesGcm256::AesGcm256(std::span<const uint8_t, 32> key)
    : _enc(EVP_CIPHER_CTX_new()), _dec(EVP_CIPHER_CTX_new()) {
    if (!_enc || !_dec) {
        EVP_CIPHER_CTX_free(_enc);
        EVP_CIPHER_CTX_free(_dec);
        throw CryptoError("openssl: context allocation failed");
    }
    check(EVP_EncryptInit_ex(_enc, EVP_aes_256_gcm(), nullptr, key.data(), nullptr),
          "EncryptInit");
    check(EVP_DecryptInit_ex(_dec, EVP_aes_256_gcm(), nullptr, key.data(), nullptr),
          "DecryptInit");
}

AesGcm256::~AesGcm256() {
    EVP_CIPHER_CTX_free(_enc);
    EVP_CIPHER_CTX_free(_dec);
}

void AesGcm256::seal(ByteView iv, ByteView aad, ByteView plaintext,
                     std::span<uint8_t> ciphertext, std::span<uint8_t, 16> tag) {
    if (ciphertext.size() < plaintext.size())
        throw CryptoError("ciphertext buffer too small");
    int len = 0;
    check(EVP_CIPHER_CTX_ctrl(_enc, EVP_CTRL_GCM_SET_IVLEN, as_int(iv.size()), nullptr),
          "set ivlen");
    check(EVP_EncryptInit_ex(_enc, nullptr, nullptr, nullptr, iv.data()), "set iv");
    if (!aad.empty())
        check(EVP_EncryptUpdate(_enc, nullptr, &len, aad.data(), as_int(aad.size())),
              "aad");
    if (!plaintext.empty())
        check(EVP_EncryptUpdate(_enc, ciphertext.data(), &len, plaintext.data(),
                                as_int(plaintext.size())),
              "encrypt");
    check(EVP_EncryptFinal_ex(_enc, ciphertext.data() + plaintext.size(), &len),
          "final");
    check(EVP_CIPHER_CTX_ctrl(_enc, EVP_CTRL_GCM_GET_TAG, 16, tag.data()), "get tag");
}

bool AesGcm256::open(ByteView iv, ByteView aad, ByteView ciphertext,
                     std::span<const uint8_t, 16> tag, std::span<uint8_t> plaintext) {
    if (plaintext.size() < ciphertext.size())
        throw CryptoError("plaintext buffer too small");
    int len = 0;
    check(EVP_CIPHER_CTX_ctrl(_dec, EVP_CTRL_GCM_SET_IVLEN, as_int(iv.size()), nullptr),
          "set ivlen");
    check(EVP_DecryptInit_ex(_dec, nullptr, nullptr, nullptr, iv.data()), "set iv");
    if (!aad.empty())
        check(EVP_DecryptUpdate(_dec, nullptr, &len, aad.data(), as_int(aad.size())),
              "aad");
    if (!ciphertext.empty())
        check(EVP_DecryptUpdate(_dec, plaintext.data(), &len, ciphertext.data(),
                                as_int(ciphertext.size())),
              "decrypt");
    check(EVP_CIPHER_CTX_ctrl(_dec, EVP_CTRL_GCM_SET_TAG, 16,
                              const_cast<uint8_t *>(tag.data())),
          "set tag");
    return EVP_DecryptFinal_ex(_dec, plaintext.data() + ciphertext.size(), &len) == 1;
}

Digest sha256(ByteView data) { return sha256({data}); }

Digest sha256(std::initializer_list<ByteView> parts) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                &EVP_MD_CTX_free);
    check(ctx ? 1 : 0, "md ctx");
    check(EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr), "DigestInit");
    for (ByteView p : parts)
        check(EVP_DigestUpdate(ctx.get(), p.data(), p.size()), "DigestUpdate");
    Digest out;
    unsigned int n = 0;
    check(EVP_DigestFinal_ex(ctx.get(), out.data(), &n), "DigestFinal");
    return out;
}

Digest hmac_sha256(ByteView key, ByteView data) {
    Digest out;
    unsigned int n = 0;
    if (!HMAC(EVP_sha256(), key.data(), as_int(key.size()), data.data(), data.size(),
              out.data(), &n))
        throw CryptoError("openssl: HMAC failed");
    return out;
}

void hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::span<uint8_t> out) {
    std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)> ctx(
        EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr), &EVP_PKEY_CTX_free);
    check(ctx ? 1 : 0, "hkdf ctx");
    check(EVP_PKEY_derive_init(ctx.get()) > 0 ? 1 : 0, "hkdf init");
    check(EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) > 0 ? 1 : 0, "hkdf md");
    static const uint8_t zero = 0;
    check(EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.empty() ? &zero : salt.data(),
                                      as_int(salt.size())) > 0 ? 1 : 0,
          "hkdf salt");
    check(EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(), as_int(ikm.size())) > 0 ? 1 : 0,
          "hkdf key");
    check(EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), as_int(info.size())) > 0 ? 1 : 0,
          "hkdf info");
    size_t len = out.size();
    check(EVP_PKEY_derive(ctx.get(), out.data(), &len) > 0 ? 1 : 0, "hkdf derive");
}

void random_bytes(std::span<uint8_t> out) {
    check(RAND_bytes(out.data(), as_int(out.size())), "RAND_bytes");
}

bool constant_time_equal(ByteView a, ByteView b) {
    return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

void cleanse(std::span<uint8_t> buf) { OPENSSL_cleanse(buf.data(), buf.size()); }

X25519KeyPair X25519KeyPair::generate() {
    X25519KeyPair kp;
    random_bytes(kp.priv);
    std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)> key(
        EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, kp.priv.data(), 32),
        &EVP_PKEY_free);
    check(key ? 1 : 0, "x25519 key");
    size_t n = 32;
    check(EVP_PKEY_get_raw_public_key(key.get(), kp.pub.data(), &n), "x25519 pub");
    return kp;
}

std::array<uint8_t, 32> x25519(std::span<const uint8_t, 32> priv,
                               std::span<const uint8_t, 32> peer_pub) {
    std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)> key(
        EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, priv.data(), 32),
        &EVP_PKEY_free);
    std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)> peer(
        EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, peer_pub.data(), 32),
        &EVP_PKEY_free);
    check(key && peer ? 1 : 0, "x25519 keys");
    std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)> ctx(
        EVP_PKEY_CTX_new(key.get(), nullptr), &EVP_PKEY_CTX_free);
    check(ctx ? 1 : 0, "x25519 ctx");
    check(EVP_PKEY_derive_init(ctx.get()) > 0 ? 1 : 0, "derive init");
    check(EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) > 0 ? 1 : 0, "derive peer");
    std::array<uint8_t, 32> out;
    size_t n = out.size();
    check(EVP_PKEY_derive(ctx.get(), out.data(), &n) > 0 ? 1 : 0, "derive");
    return out;
}

std::string to_hex(ByteView data) {
    static const char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (uint8_t b : data) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 15]);
    }
    return s;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2)
        throw CryptoError("hex string has odd length");
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw CryptoError("invalid hex digit");
        out[i] = static_cast<uint8_t>(hi << 4 | lo);
    }
    return out;
}

} // namespace slick::crypto
