#include <slick/chain.hh>

#include <bit>

#include <slick/log.hh>

namespace slick::chain {

Ring::Ring(std::string name, uint32_t capacity) : _name(std::move(name)) {
    if (capacity < kMinCapacity || capacity > kMaxCapacity ||
        (capacity & (capacity - 1)) != 0)
        throw RingError(RingError::NotPowerOfTwo,
                        "ring '" + _name + "': capacity " + std::to_string(capacity) +
                            " is not a power of two >= 8");
    _mask = capacity - 1;
    _slots.reset(new PacketHandle[capacity]);
}

uint32_t Ring::count() const {
    return _tail.load(std::memory_order_acquire) - _head.load(std::memory_order_acquire);
}

EnqueueStatus Ring::enqueue(const PacketHandle &h) {
    uint32_t tail = _tail.load(std::memory_order_relaxed);
    if (tail - _head_cache > _mask) [[unlikely]] {
        _head_cache = _head.load(std::memory_order_acquire);
        if (tail - _head_cache > _mask)
            return EnqueueStatus::Full;
    }
    _slots[tail & _mask] = h;
    _tail.store(tail + 1, std::memory_order_release);
    return EnqueueStatus::Ok;
}

uint32_t Ring::enqueue_burst(std::span<const PacketHandle> hs) {
    uint32_t tail = _tail.load(std::memory_order_relaxed);
    uint32_t space = capacity() - (tail - _head_cache);
    if (space < hs.size()) {
        _head_cache = _head.load(std::memory_order_acquire);
        space = capacity() - (tail - _head_cache);
    }
    uint32_t n = space < hs.size() ? space : uint32_t(hs.size());
    for (uint32_t i = 0; i < n; ++i)
        _slots[(tail + i) & _mask] = hs[i];
    _tail.store(tail + n, std::memory_order_release);
    return n;
}

bool Ring::dequeue_raw(PacketHandle &out) {
    uint32_t head = _head.load(std::memory_order_relaxed);
    if (head == _tail_cache) {
        _tail_cache = _tail.load(std::memory_order_acquire);
        if (head == _tail_cache)
            return false;
    }
    out = _slots[head & _mask];
    _head.store(head + 1, std::memory_order_release);
    return true;
}

DequeueStatus Ring::dequeue(const EnclaveBounds &bounds, const HugePageMemory &memory,
                            Packet &out) {
    PacketHandle word;
    if (!dequeue_raw(word))
        return DequeueStatus::Empty;
    IngestStatus st = ingest_untrusted(word, bounds, memory, out);
    if (st == IngestStatus::Ok) [[likely]]
        return DequeueStatus::Ok;
    uint64_t n = _attacks.fetch_add(1, std::memory_order_relaxed) + 1;
    // Reported at every power of two so a flood cannot swamp the log.
    if (std::has_single_bit(n))
        log::warn("ring '{}': dropped forged handle #{} addr={:#x} len={} pool={} ({})", _name,
              n, word.addr, word.len, word.pool_id,
              st == IngestStatus::InEnclave ? "points into enclave memory"
                                            : "not a live untrusted buffer");
    return DequeueStatus::RejectedAttack;
}

std::shared_ptr<Ring> RingRegistry::create(const std::string &name, uint32_t capacity) {
    std::lock_guard<std::mutex> g(_lock);
    if (_rings.count(name))
        throw RingError(RingError::NameCollision, "ring '" + name + "' already exists");
    auto r = std::make_shared<Ring>(name, capacity);
    _rings.emplace(name, r);
    return r;
}

std::shared_ptr<Ring> RingRegistry::lookup(const std::string &name) const {
    std::lock_guard<std::mutex> g(_lock);
    auto it = _rings.find(name);
    if (it == _rings.end())
        throw RingError(RingError::UnknownRing, "ring '" + name + "' does not exist");
    return it->second;
}

size_t RingRegistry::size() const {
    std::lock_guard<std::mutex> g(_lock);
    return _rings.size();
}

} // namespace slick::chain
