#ifndef SLICK_PACKET_HH
#define SLICK_PACKET_HH

// Packet buffers and the trusted/untrusted memory split.
//
// Two kinds of arena exist. The Enclave is one contiguous block standing in
// for protected memory; trusted pools are carved out of it and its address
// range is the EnclaveBounds that every untrusted-path handle is checked
// against. HugePageMemory stands in for the shared, unprotected packet
// memory; each untrusted pool gets its own arena and is registered so that
// handles arriving over rings or device queues can be resolved.
//
// Handle addresses are the real virtual addresses of pool buffers, so the
// interval checks below operate on genuine memory layout.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <slick/error.hh>

namespace slick {

enum class RegionTag : uint8_t { Untrusted, Trusted };

const char *region_name(RegionTag r);

struct EnclaveBounds {
    uint64_t base = 0;
    uint64_t size = 0;

    // Throws std::invalid_argument when size is 0 or base + size overflows.
    static EnclaveBounds make(uint64_t base, uint64_t size);
    uint64_t end() const { return base + size; }
};

enum class AddressCheck : uint8_t { Ok, Rejected };

// Rejected iff [addr, addr+len) intersects [base, base+size), or the range
// runs past the top of the address space.
AddressCheck validate_address(uint64_t addr, uint32_t len,
                              const EnclaveBounds &bounds) noexcept;

struct PacketHandle {
    uint64_t addr = 0;
    uint32_t len = 0;
    RegionTag region = RegionTag::Untrusted;
    uint16_t pool_id = 0;

    bool operator==(const PacketHandle &) const = default;
};
static_assert(sizeof(PacketHandle) == 16);

enum class PoolStatus : uint8_t { Ok, Exhausted, Oversize };

class PacketPool;

// Provides arenas for packet pools. Implementations decide which region the
// memory belongs to.
class MemoryRegion {
  public:
    virtual ~MemoryRegion() = default;
    virtual RegionTag tag() const = 0;
    // Returns a 64-byte aligned span; throws AllocationFailure.
    virtual std::span<uint8_t> reserve(size_t bytes) = 0;
    virtual void register_pool(const std::shared_ptr<PacketPool> &) {}
};

class Enclave final : public MemoryRegion {
  public:
    static constexpr size_t kDefaultSize = 64u << 20;
    // Usable protected memory on the modelled platform.
    static constexpr size_t kEpcBudget = 94u << 20;

    explicit Enclave(size_t size = kDefaultSize);

    RegionTag tag() const override { return RegionTag::Trusted; }
    std::span<uint8_t> reserve(size_t bytes) override;

    EnclaveBounds bounds() const;
    size_t size() const { return _size; }
    size_t used() const { return _used; }

  private:
    std::unique_ptr<uint8_t[]> _mem;
    uint8_t *_base;
    size_t _size;
    size_t _used = 0;
};

class HugePageMemory final : public MemoryRegion {
  public:
    RegionTag tag() const override { return RegionTag::Untrusted; }
    std::span<uint8_t> reserve(size_t bytes) override;
    void register_pool(const std::shared_ptr<PacketPool> &pool) override;

    // nullptr for unknown ids. Thread-safe.
    PacketPool *find_pool(uint16_t pool_id) const;
    size_t reserved_bytes() const;

  private:
    mutable std::mutex _lock;
    std::vector<std::unique_ptr<uint8_t[]>> _arenas;
    std::vector<std::shared_ptr<PacketPool>> _pools;
    size_t _reserved = 0;
};

class PacketPool {
  public:
    static constexpr uint32_t kHeadroom = 128;
    static constexpr uint32_t kMaxFrameSize = 1518;
    static constexpr uint32_t kDefaultBufSize = 2048;
    static constexpr uint32_t kMinBufSize = 64;

    PacketPool(uint16_t id, RegionTag region, uint32_t capacity, uint32_t buf_size,
               std::span<uint8_t> arena);
    PacketPool(const PacketPool &) = delete;
    PacketPool &operator=(const PacketPool &) = delete;

    uint16_t id() const { return _id; }
    RegionTag region() const { return _region; }
    uint32_t capacity() const { return _capacity; }
    uint32_t buf_size() const { return _buf_size; }
    uint32_t stride() const { return _stride; }
    uint32_t free_count() const { return _free_count.load(std::memory_order_relaxed); }
    uint64_t allocations() const { return _allocs.load(std::memory_order_relaxed); }
    uint64_t frees() const { return _frees.load(std::memory_order_relaxed); }
    uint64_t base() const { return reinterpret_cast<uint64_t>(_arena.data()); }
    uint64_t end() const { return base() + _arena.size(); }

    // Data starts kHeadroom bytes into the buffer. Never blocks.
    PoolStatus alloc(uint32_t len, PacketHandle &out);
    // Throws std::logic_error on double free or a handle this pool does not own.
    void free(const PacketHandle &h);

    // True when h names a live buffer of this pool and [addr, addr+len) stays
    // inside that buffer. Never dereferences h.addr.
    bool owns(const PacketHandle &h) const;

    uint8_t *buffer_start(const PacketHandle &h) const;
    uint8_t *buffer_end(const PacketHandle &h) const;

  private:
    bool slot_of(uint64_t addr, uint32_t &slot) const;

    uint16_t _id;
    RegionTag _region;
    uint32_t _capacity;
    uint32_t _buf_size;
    uint32_t _stride;
    std::span<uint8_t> _arena;

    // Pools are owned by one worker but buffers may come back over a ring
    // from a peer, so the free list is guarded.
    mutable std::atomic_flag _busy = ATOMIC_FLAG_INIT;
    std::vector<uint32_t> _free;
    std::vector<uint8_t> _in_use;
    std::atomic<uint32_t> _free_count;
    std::atomic<uint64_t> _allocs{0};
    std::atomic<uint64_t> _frees{0};
};

// pre: capacity >= 1, buf_size >= 64; throws AllocationFailure otherwise or
// when the region cannot supply capacity * stride bytes.
std::shared_ptr<PacketPool> pool_create(MemoryRegion &region, uint32_t capacity,
                                        uint32_t buf_size = PacketPool::kDefaultBufSize);

constexpr uint16_t kNoOffset = 0xffff;

// A reference to a live pool buffer plus the per-packet annotations the
// element graph uses. Cheap to copy; exactly one copy is ever "live", and it
// must end up either emitted or killed.
class Packet {
  public:
    Packet() = default;
    Packet(PacketHandle h, PacketPool *pool) : _h(h), _pool(pool) {}

    const PacketHandle &handle() const { return _h; }
    PacketPool *pool() const { return _pool; }
    RegionTag region() const { return _h.region; }
    bool valid() const { return _pool != nullptr; }

    uint8_t *data() const { return reinterpret_cast<uint8_t *>(_h.addr); }
    uint32_t length() const { return _h.len; }
    std::span<uint8_t> bytes() const { return {data(), _h.len}; }

    uint32_t headroom() const;
    uint32_t tailroom() const;
    // Grow/shrink at either end. Return false when room is insufficient.
    bool push_front(uint32_t n);
    bool pull_front(uint32_t n);
    bool put_back(uint32_t n);
    bool take_back(uint32_t n);
    bool set_length(uint32_t n);

    // Parsed-header offsets relative to data(); kNoOffset when unset.
    uint16_t network_offset = kNoOffset;
    uint16_t transport_offset = kNoOffset;
    // Receive timestamp (clock ns) set by sources that stamp packets.
    uint64_t timestamp = 0;

    // Returns the buffer to its pool and invalidates this object.
    void release();

  private:
    PacketHandle _h;
    PacketPool *_pool = nullptr;
};

enum class CopyStatus : uint8_t { Ok, Exhausted, RegionViolation };

// Copies an untrusted packet into trusted_pool and frees the source. On
// Exhausted the source is freed too and `out` is left invalid. On
// RegionViolation nothing is touched.
CopyStatus copy_to_trusted(Packet &src, PacketPool &trusted_pool, Packet &out);

enum class IngestStatus : uint8_t { Ok, InEnclave, Unresolved };

// Turns a handle read from untrusted shared memory into a Packet. The range
// is checked against the enclave first; then the handle must name a live
// buffer of a registered untrusted pool.
IngestStatus ingest_untrusted(const PacketHandle &h, const EnclaveBounds &bounds,
                              const HugePageMemory &memory, Packet &out);

} // namespace slick

#endif
