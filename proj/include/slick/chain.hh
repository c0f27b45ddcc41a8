#ifndef SLICK_CHAIN_HH
#define SLICK_CHAIN_HH

// Inter-instance chaining over single-producer/single-consumer rings that
// live in shared untrusted memory. Slots carry raw packet handles, so the
// consumer treats every word as hostile until it has been validated.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>

#include <slick/error.hh>
#include <slick/packet.hh>

namespace slick::chain {

class RingError : public Error {
  public:
    enum Kind { NameCollision, UnknownRing, NotPowerOfTwo };
    RingError(Kind kind, const std::string &msg) : Error(msg), _kind(kind) {}
    Kind kind() const { return _kind; }

  private:
    Kind _kind;
};

enum class EnqueueStatus : uint8_t { Ok, Full };
enum class DequeueStatus : uint8_t { Ok, Empty, RejectedAttack };

class Ring {
  public:
    static constexpr uint32_t kMinCapacity = 8;
    static constexpr uint32_t kMaxCapacity = 1u << 30;

    // Throws RingError(NotPowerOfTwo) unless capacity is a power of two in
    // [kMinCapacity, kMaxCapacity].
    Ring(std::string name, uint32_t capacity);
    Ring(const Ring &) = delete;
    Ring &operator=(const Ring &) = delete;

    const std::string &name() const { return _name; }
    uint32_t capacity() const { return _mask + 1; }
    uint32_t count() const;

    // Producer side.
    EnqueueStatus enqueue(const PacketHandle &h);
    uint32_t enqueue_burst(std::span<const PacketHandle> hs);

    // Consumer side, no validation.
    bool dequeue_raw(PacketHandle &out);

    // Consumer side with validation: a word whose range touches the enclave,
    // or that does not name a live untrusted buffer, is discarded, counted
    // and reported to the operator.
    DequeueStatus dequeue(const EnclaveBounds &bounds, const HugePageMemory &memory,
                          Packet &out);

    uint64_t attacks() const { return _attacks.load(std::memory_order_relaxed); }

    // Writes an arbitrary slot word, the way a compromised host could.
    EnqueueStatus inject_slot(const PacketHandle &word) { return enqueue(word); }

  private:
    std::string _name;
    uint32_t _mask;
    std::unique_ptr<PacketHandle[]> _slots;

    alignas(64) std::atomic<uint32_t> _tail{0};
    uint32_t _head_cache = 0; // producer's view of _head
    alignas(64) std::atomic<uint32_t> _head{0};
    uint32_t _tail_cache = 0; // consumer's view of _tail
    alignas(64) std::atomic<uint64_t> _attacks{0};
};

// Name -> ring map shared by every instance of the process. Creation and
// lookup are serialized.
class RingRegistry {
  public:
    std::shared_ptr<Ring> create(const std::string &name, uint32_t capacity);
    std::shared_ptr<Ring> lookup(const std::string &name) const;
    size_t size() const;

  private:
    mutable std::mutex _lock;
    std::map<std::string, std::shared_ptr<Ring>> _rings;
};

} // namespace slick::chain

#endif
