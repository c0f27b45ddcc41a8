#include <slick/packet.hh>

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace slick {

namespace {

std::atomic<uint32_t> next_pool_id{1};

uint16_t allocate_pool_id() {
    for (;;) {
        uint32_t id = next_pool_id.fetch_add(1, std::memory_order_relaxed) & 0xffff;
        if (id != 0)
            return uint16_t(id);
    }
}

constexpr size_t align64(size_t n) { return (n + 63) & ~size_t(63); }

std::unique_ptr<uint8_t[]> allocate_arena(size_t bytes, uint8_t *&aligned) {
    std::unique_ptr<uint8_t[]> mem;
    try {
        mem.reset(new uint8_t[bytes + 64]);
    } catch (const std::bad_alloc &) {
        throw AllocationFailure("cannot reserve " + std::to_string(bytes) + " bytes");
    }
    aligned = reinterpret_cast<uint8_t *>(align64(reinterpret_cast<uintptr_t>(mem.get())));
    return mem;
}

class SpinGuard {
  public:
    explicit SpinGuard(std::atomic_flag &f) : _f(f) {
        while (_f.test_and_set(std::memory_order_acquire))
            ;
    }
    ~SpinGuard() { _f.clear(std::memory_order_release); }

  private:
    std::atomic_flag &_f;
};

} // namespace

const char *region_name(RegionTag r) {
    return r == RegionTag::Trusted ? "trusted" : "untrusted";
}

EnclaveBounds EnclaveBounds::make(uint64_t base, uint64_t size) {
    if (size == 0)
        throw std::invalid_argument("enclave size must be positive");
    if (base > UINT64_MAX - size)
        throw std::invalid_argument("enclave range overflows the address space");
    return EnclaveBounds{base, size};
}

AddressCheck validate_address(uint64_t addr, uint32_t len, const EnclaveBounds &b) noexcept {
    using u128 = unsigned __int128;
    u128 end = u128(addr) + len;
    if (end > (u128(1) << 64))
        return AddressCheck::Rejected;
    if (len == 0)
        return AddressCheck::Ok;
    u128 bend = u128(b.base) + b.size;
    if (addr < bend && end > b.base)
        return AddressCheck::Rejected;
    return AddressCheck::Ok;
}

// --- Enclave ---------------------------------------------------------------

Enclave::Enclave(size_t size) : _size(size) {
    if (size == 0)
        throw AllocationFailure("enclave size must be positive");
    if (size > kEpcBudget)
        throw AllocationFailure("enclave of " + std::to_string(size >> 20) +
                                " MB exceeds the " + std::to_string(kEpcBudget >> 20) +
                                " MB protected-memory budget");
    _mem = allocate_arena(size, _base);
}

std::span<uint8_t> Enclave::reserve(size_t bytes) {
    size_t n = align64(bytes);
    if (n > _size - _used)
        throw AllocationFailure("enclave arena exhausted: " + std::to_string(bytes) +
                                " bytes requested, " + std::to_string(_size - _used) +
                                " available");
    std::span<uint8_t> s(_base + _used, bytes);
    _used += n;
    return s;
}

EnclaveBounds Enclave::bounds() const {
    return EnclaveBounds::make(reinterpret_cast<uint64_t>(_base), _size);
}

// --- HugePageMemory --------------------------------------------------------

std::span<uint8_t> HugePageMemory::reserve(size_t bytes) {
    uint8_t *aligned = nullptr;
    auto mem = allocate_arena(bytes, aligned);
    std::lock_guard<std::mutex> g(_lock);
    _arenas.push_back(std::move(mem));
    _reserved += bytes;
    return {aligned, bytes};
}

void HugePageMemory::register_pool(const std::shared_ptr<PacketPool> &pool) {
    std::lock_guard<std::mutex> g(_lock);
    _pools.push_back(pool);
}

PacketPool *HugePageMemory::find_pool(uint16_t pool_id) const {
    std::lock_guard<std::mutex> g(_lock);
    for (const auto &p : _pools)
        if (p->id() == pool_id)
            return p.get();
    return nullptr;
}

size_t HugePageMemory::reserved_bytes() const {
    std::lock_guard<std::mutex> g(_lock);
    return _reserved;
}

// --- PacketPool ------------------------------------------------------------

PacketPool::PacketPool(uint16_t id, RegionTag region, uint32_t capacity,
                       uint32_t buf_size, std::span<uint8_t> arena)
    : _id(id), _region(region), _capacity(capacity), _buf_size(buf_size),
      _stride(uint32_t(align64(size_t(kHeadroom) + buf_size))), _arena(arena),
      _in_use(capacity, 0), _free_count(capacity) {
    if (arena.size() < size_t(_stride) * capacity)
        throw AllocationFailure("arena too small for pool");
    _free.reserve(capacity);
    for (uint32_t i = capacity; i > 0; --i)
        _free.push_back(i - 1);
}

PoolStatus PacketPool::alloc(uint32_t len, PacketHandle &out) {
    if (len > _buf_size) [[unlikely]]
        return PoolStatus::Oversize;
    uint32_t slot;
    {
        SpinGuard g(_busy);
        if (_free.empty()) [[unlikely]]
            return PoolStatus::Exhausted;
        slot = _free.back();
        _free.pop_back();
        _in_use[slot] = 1;
        _free_count.store(uint32_t(_free.size()), std::memory_order_relaxed);
    }
    _allocs.fetch_add(1, std::memory_order_relaxed);
    out.addr = base() + uint64_t(slot) * _stride + kHeadroom;
    out.len = len;
    out.region = _region;
    out.pool_id = _id;
    return PoolStatus::Ok;
}

bool PacketPool::slot_of(uint64_t addr, uint32_t &slot) const {
    if (addr < base() || addr >= base() + uint64_t(_stride) * _capacity)
        return false;
    slot = uint32_t((addr - base()) / _stride);
    return true;
}

void PacketPool::free(const PacketHandle &h) {
    uint32_t slot;
    if (h.pool_id != _id || !slot_of(h.addr, slot))
        throw std::logic_error("free of a handle not owned by pool " + std::to_string(_id));
    {
        SpinGuard g(_busy);
        if (!_in_use[slot])
            throw std::logic_error("double free in pool " + std::to_string(_id));
        _in_use[slot] = 0;
        _free.push_back(slot);
        _free_count.store(uint32_t(_free.size()), std::memory_order_relaxed);
    }
    _frees.fetch_add(1, std::memory_order_relaxed);
}

bool PacketPool::owns(const PacketHandle &h) const {
    uint32_t slot;
    if (h.pool_id != _id || h.region != _region || !slot_of(h.addr, slot))
        return false;
    uint64_t slot_end = base() + uint64_t(slot + 1) * _stride;
    if (h.len > slot_end - h.addr)
        return false;
    SpinGuard g(_busy);
    return _in_use[slot] != 0;
}

uint8_t *PacketPool::buffer_start(const PacketHandle &h) const {
    uint32_t slot = uint32_t((h.addr - base()) / _stride);
    return reinterpret_cast<uint8_t *>(base() + uint64_t(slot) * _stride);
}

uint8_t *PacketPool::buffer_end(const PacketHandle &h) const {
    return buffer_start(h) + _stride;
}

std::shared_ptr<PacketPool> pool_create(MemoryRegion &region, uint32_t capacity,
                                        uint32_t buf_size) {
    if (capacity < 1)
        throw AllocationFailure("pool capacity must be at least 1");
    if (buf_size < PacketPool::kMinBufSize)
        throw AllocationFailure("pool buffer size must be at least 64 bytes");
    size_t stride = align64(size_t(PacketPool::kHeadroom) + buf_size);
    auto arena = region.reserve(stride * capacity);
    auto pool = std::make_shared<PacketPool>(allocate_pool_id(), region.tag(), capacity,
                                             buf_size, arena);
    region.register_pool(pool);
    return pool;
}

// --- Packet ----------------------------------------------------------------

uint32_t Packet::headroom() const {
    return uint32_t(data() - _pool->buffer_start(_h));
}

uint32_t Packet::tailroom() const {
    return uint32_t(_pool->buffer_end(_h) - (data() + _h.len));
}

bool Packet::push_front(uint32_t n) {
    if (n > headroom())
        return false;
    _h.addr -= n;
    _h.len += n;
    if (network_offset != kNoOffset) network_offset = uint16_t(network_offset + n);
    if (transport_offset != kNoOffset) transport_offset = uint16_t(transport_offset + n);
    return true;
}

bool Packet::pull_front(uint32_t n) {
    if (n > _h.len)
        return false;
    _h.addr += n;
    _h.len -= n;
    network_offset = transport_offset = kNoOffset;
    return true;
}

bool Packet::put_back(uint32_t n) {
    if (n > tailroom())
        return false;
    _h.len += n;
    return true;
}

bool Packet::take_back(uint32_t n) {
    if (n > _h.len)
        return false;
    _h.len -= n;
    return true;
}

bool Packet::set_length(uint32_t n) {
    return n >= _h.len ? put_back(n - _h.len) : take_back(_h.len - n);
}

void Packet::release() {
    if (_pool) {
        _pool->free(_h);
        _pool = nullptr;
    }
}

CopyStatus copy_to_trusted(Packet &src, PacketPool &trusted_pool, Packet &out) {
    if (src.region() != RegionTag::Untrusted || trusted_pool.region() != RegionTag::Trusted)
        return CopyStatus::RegionViolation;
    PacketHandle h;
    if (trusted_pool.alloc(src.length(), h) != PoolStatus::Ok) {
        src.release();
        out = Packet();
        return CopyStatus::Exhausted;
    }
    Packet copy(h, &trusted_pool);
    std::memcpy(copy.data(), src.data(), src.length());
    copy.network_offset = src.network_offset;
    copy.transport_offset = src.transport_offset;
    src.release();
    out = copy;
    return CopyStatus::Ok;
}

IngestStatus ingest_untrusted(const PacketHandle &h, const EnclaveBounds &bounds,
                              const HugePageMemory &memory, Packet &out) {
    if (validate_address(h.addr, h.len, bounds) == AddressCheck::Rejected)
        return IngestStatus::InEnclave;
    if (h.region != RegionTag::Untrusted)
        return IngestStatus::Unresolved;
    PacketPool *pool = memory.find_pool(h.pool_id);
    if (!pool || pool->region() != RegionTag::Untrusted || !pool->owns(h))
        return IngestStatus::Unresolved;
    out = Packet(h, pool);
    return IngestStatus::Ok;
}

} // namespace slick
