#include <slick/persist.hh>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <fcntl.h>
#include <unistd.h>

#include <slick/log.hh>
#include <slick/runtime.hh>

namespace slick::persist {

namespace {

std::mutex g_hook_lock;
std::function<void(const std::string &)> g_commit_hook;

void put_u32(crypto::Bytes &out, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(uint8_t(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t *p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

// Plaintext buffers are wiped when they go out of scope.
struct Wiped {
    crypto::Bytes b;
    ~Wiped() { crypto::cleanse(b); }
};

void write_all(int fd, const crypto::Bytes &data, const std::string &path) {
    size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw IoError("write " + path + ": " + std::strerror(errno));
        }
        off += size_t(n);
    }
}

} // namespace

void set_commit_hook(std::function<void(const std::string &)> hook) {
    std::lock_guard g(g_hook_lock);
    g_commit_hook = std::move(hook);
}

crypto::Bytes encode_entries(const std::vector<StateEntry> &entries) {
    crypto::Bytes out;
    for (const auto &e : entries) {
        put_u32(out, uint32_t(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        put_u32(out, uint32_t(e.blob.size()));
        out.insert(out.end(), e.blob.begin(), e.blob.end());
    }
    return out;
}

std::vector<StateEntry> decode_entries(crypto::ByteView pt) {
    std::vector<StateEntry> out;
    size_t i = 0;
    auto take = [&](size_t n) {
        if (pt.size() - i < n)
            throw FormatError("state record truncated");
        const uint8_t *p = pt.data() + i;
        i += n;
        return p;
    };
    while (i < pt.size()) {
        StateEntry e;
        uint32_t nl = get_u32(take(4));
        const uint8_t *np = take(nl);
        e.name.assign(reinterpret_cast<const char *>(np), nl);
        uint32_t bl = get_u32(take(4));
        const uint8_t *bp = take(bl);
        e.blob.assign(bp, bp + bl);
        out.push_back(std::move(e));
    }
    return out;
}

crypto::Bytes seal_blob(const crypto::Key256 &key, crypto::ByteView plaintext) {
    crypto::Bytes out(kHeaderLen + plaintext.size() + crypto::kGcmTagLen);
    std::memcpy(out.data(), kMagic, 4);
    out[4] = uint8_t(kVersion);
    out[5] = uint8_t(kVersion >> 8);
    std::span<uint8_t> nonce(out.data() + 6, crypto::kGcmNonceLen);
    crypto::random_bytes(nonce);
    crypto::AesGcm256 gcm(key);
    gcm.seal(nonce, {out.data(), kHeaderLen}, plaintext,
             {out.data() + kHeaderLen, plaintext.size()},
             std::span<uint8_t, 16>(out.data() + kHeaderLen + plaintext.size(), 16));
    return out;
}

crypto::Bytes unseal_blob(const crypto::Key256 &key, crypto::ByteView file) {
    if (file.size() < kHeaderLen + crypto::kGcmTagLen || std::memcmp(file.data(), kMagic, 4))
        throw AuthFailure("state file is not a sealed blob");
    uint16_t version = uint16_t(file[4] | file[5] << 8);
    size_t ct_len = file.size() - kHeaderLen - crypto::kGcmTagLen;
    crypto::Bytes pt(ct_len);
    crypto::AesGcm256 gcm(key);
    if (!gcm.open(file.subspan(6, crypto::kGcmNonceLen), file.first(kHeaderLen),
                  file.subspan(kHeaderLen, ct_len),
                  std::span<const uint8_t, 16>(file.data() + kHeaderLen + ct_len, 16), pt)) {
        crypto::cleanse(pt);
        throw AuthFailure("state file failed authentication");
    }
    // The version is covered by the tag, so only an authentic header can
    // report a mismatch.
    if (version != kVersion) {
        crypto::cleanse(pt);
        throw VersionMismatch("state file version " + std::to_string(version) +
                              ", expected " + std::to_string(kVersion));
    }
    return pt;
}

size_t seal_state(Instance &inst, const StateFileSpec &spec) {
    std::vector<StateEntry> entries;
    for (const auto &e : inst.elements()) {
        if (!e->has_state())
            continue;
        try {
            entries.push_back({e->name(), e->state_write()});
        } catch (const std::exception &x) {
            for (auto &s : entries)
                crypto::cleanse(s.blob);
            throw HandlerError(e->name(), e->name() + ": state handler failed: " + x.what());
        }
    }
    Wiped pt{encode_entries(entries)};
    for (auto &s : entries)
        crypto::cleanse(s.blob);
    crypto::Bytes file = seal_blob(spec.key, pt.b);

    std::string tmp = spec.path + ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (fd < 0)
        throw IoError("open " + tmp + ": " + std::strerror(errno));
    try {
        write_all(fd, file, tmp);
        if (::fsync(fd) != 0)
            throw IoError("fsync " + tmp + ": " + std::strerror(errno));
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    {
        std::lock_guard g(g_hook_lock);
        if (g_commit_hook)
            g_commit_hook(tmp);
    }
    if (std::rename(tmp.c_str(), spec.path.c_str()) != 0) {
        int err = errno;
        ::unlink(tmp.c_str());
        throw IoError("rename to " + spec.path + ": " + std::strerror(err));
    }
    return file.size();
}

size_t unseal_state(Instance &inst, const StateFileSpec &spec) {
    std::ifstream in(spec.path, std::ios::binary);
    if (!in)
        throw MissingFile("no state file at " + spec.path);
    crypto::Bytes file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Wiped pt{unseal_blob(spec.key, file)};
    std::vector<StateEntry> entries = decode_entries(pt.b);

    // Apply in two steps so a failing element leaves every other one as it
    // was: snapshot the targets, then restore, rolling back on error.
    std::vector<std::pair<Element *, StateEntry *>> targets;
    for (auto &s : entries) {
        Element *e = inst.find(s.name);
        if (!e || !e->has_state())
            log::warn("{}: state for '{}' has no matching element, skipped", inst.id(), s.name);
        else
            targets.emplace_back(e, &s);
    }
    std::vector<Wiped> snapshots;
    for (auto &[e, s] : targets)
        snapshots.push_back({e->state_write()});
    size_t restored = 0;
    for (auto &[e, s] : targets) {
        try {
            e->state_read(s->blob);
            ++restored;
        } catch (const std::exception &x) {
            for (size_t i = 0; i < restored; ++i)
                targets[i].first->state_read(snapshots[i].b);
            for (auto &r : entries)
                crypto::cleanse(r.blob);
            throw HandlerError(s->name, s->name + ": state restore failed: " + x.what());
        }
    }
    for (auto &r : entries)
        crypto::cleanse(r.blob);
    return restored;
}

uint64_t persist_periodic(Instance &inst, const StateFileSpec &spec) {
    if (!spec.period_ns || *spec.period_ns == 0)
        return 0;
    return inst.schedule_periodic(*spec.period_ns, [&inst, spec] {
        try {
            seal_state(inst, spec);
        } catch (const Error &e) {
            log::error("{}: periodic state seal failed: {}", inst.id(), e.what());
        }
    });
}

} // namespace slick::persist
