#include <slick/testdevice.hh>

namespace slick {

void TestDevice::inject(std::vector<uint8_t> frame) {
    std::lock_guard<std::mutex> g(_lock);
    _rx.push_back(std::move(frame));
    _rx_count.fetch_add(1, std::memory_order_release);
}

void TestDevice::inject_handle(const PacketHandle &h) {
    std::lock_guard<std::mutex> g(_lock);
    _rx_handles.push_back(h);
    _rx_count.fetch_add(1, std::memory_order_release);
}

bool TestDevice::pop_frame(std::vector<uint8_t> &out) {
    if (_rx_count.load(std::memory_order_acquire) == 0)
        return false;
    std::lock_guard<std::mutex> g(_lock);
    if (_rx.empty())
        return false;
    out = std::move(_rx.front());
    _rx.pop_front();
    _rx_count.fetch_sub(1, std::memory_order_relaxed);
    return true;
}

bool TestDevice::pop_handle(PacketHandle &out) {
    if (_rx_count.load(std::memory_order_acquire) == 0)
        return false;
    std::lock_guard<std::mutex> g(_lock);
    if (_rx_handles.empty())
        return false;
    out = _rx_handles.front();
    _rx_handles.pop_front();
    _rx_count.fetch_sub(1, std::memory_order_relaxed);
    return true;
}

size_t TestDevice::rx_pending() const { return _rx_count.load(std::memory_order_acquire); }

void TestDevice::transmit(std::span<const uint8_t> frame) {
    if (_record.load(std::memory_order_relaxed)) {
        std::lock_guard<std::mutex> g(_lock);
        _tx.emplace_back(frame.begin(), frame.end());
    }
    _tx_bytes.fetch_add(frame.size(), std::memory_order_relaxed);
    _tx_packets.fetch_add(1, std::memory_order_release);
}

std::vector<std::vector<uint8_t>> TestDevice::take_tx() {
    std::lock_guard<std::mutex> g(_lock);
    return std::exchange(_tx, {});
}

TestDevice &TestDeviceRegistry::get(const std::string &name) {
    std::lock_guard<std::mutex> g(_lock);
    auto &slot = _devices[name];
    if (!slot)
        slot = std::make_unique<TestDevice>(name);
    return *slot;
}

} // namespace slick
