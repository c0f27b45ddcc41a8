#ifndef SLICK_TESTDEVICE_HH
#define SLICK_TESTDEVICE_HH

// In-process stand-in for a NIC port. The receive side holds frames "on the
// wire" plus raw descriptor words written into shared memory; the transmit
// side counts and optionally records what the instance sent.

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <slick/packet.hh>

namespace slick {

class TestDevice {
  public:
    explicit TestDevice(std::string name) : _name(std::move(name)) {}

    const std::string &name() const { return _name; }

    void inject(std::vector<uint8_t> frame);
    // Places a raw descriptor on the receive path, as a host-side driver
    // would. Used to exercise handle validation.
    void inject_handle(const PacketHandle &h);

    bool pop_frame(std::vector<uint8_t> &out);
    bool pop_handle(PacketHandle &out);
    size_t rx_pending() const;

    void set_record(bool on) { _record.store(on); }
    void transmit(std::span<const uint8_t> frame);
    uint64_t tx_packets() const { return _tx_packets.load(std::memory_order_acquire); }
    uint64_t tx_bytes() const { return _tx_bytes.load(std::memory_order_relaxed); }
    std::vector<std::vector<uint8_t>> take_tx();

  private:
    std::string _name;
    mutable std::mutex _lock;
    std::deque<std::vector<uint8_t>> _rx;
    std::deque<PacketHandle> _rx_handles;
    std::atomic<size_t> _rx_count{0};
    std::vector<std::vector<uint8_t>> _tx;
    std::atomic<bool> _record{false};
    std::atomic<uint64_t> _tx_packets{0};
    std::atomic<uint64_t> _tx_bytes{0};
};

class TestDeviceRegistry {
  public:
    // Creates the device on first use.
    TestDevice &get(const std::string &name);

  private:
    std::mutex _lock;
    std::map<std::string, std::unique_ptr<TestDevice>> _devices;
};

} // namespace slick

#endif
