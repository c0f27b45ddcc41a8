#include "internal.hh"

#include <algorithm>
#include <bit>
#include <cstring>

#include <slick/clock.hh>
#include <slick/log.hh>
#include <slick/pcap.hh>
#include <slick/pktgen.hh>
#include <slick/testdevice.hh>

namespace slick::elements {
namespace {

// FromTestDevice(DEV [, SIZE n] [, COUNT n] [, RATE pps] [, PCAP file]
//                [, SEED n] [, TIMESTAMP bool])
//
// Emits, in order: the records of PCAP, COUNT synthetic frames of SIZE bytes
// (unbounded when COUNT is 0), then whatever is injected into device DEV.
// Raw descriptors found on the device are validated like ring slots.
class FromTestDevice final : public Element {
  public:
    static constexpr size_t kTemplates = 64;

    const char *class_name() const override { return "FromTestDevice"; }

    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        auto size = a.keyword_uint("SIZE");
        auto count = a.keyword_uint("COUNT");
        auto rate = a.keyword_uint("RATE");
        auto pcap = a.keyword("PCAP");
        auto seed = a.keyword_uint("SEED");
        _stamp = a.keyword_bool("TIMESTAMP").value_or(false);
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() != 1)
            throw std::invalid_argument("expected FromTestDevice(DEV, ...)");
        _device = &instance().platform().devices.get(config::unquote(pos[0]));
        _rate = rate.value_or(0);

        if (pcap) {
            for (auto &r : pcap::read_file(instance().resolve_path(*pcap)))
                _replay.push_back(std::move(r.data));
        }
        if (size || count) {
            uint64_t sz = size.value_or(64);
            if (sz < pktgen::kMinFrameSize || sz > PacketPool::kMaxFrameSize)
                throw std::invalid_argument("SIZE must be within [42, 1518]");
            _synthetic = true;
            _remaining = count.value_or(0);
            _unbounded = !count || *count == 0;
            pktgen::FrameSpec spec;
            spec.size = uint32_t(sz);
            spec.seed = seed.value_or(1);
            pktgen::Generator gen(spec);
            for (size_t i = 0; i < kTemplates; ++i)
                _templates.push_back(gen.next());
        }
    }

    void initialize() override {
        _attacks = &counter("attacks");
        _alloc_fail = &counter("alloc_failures");
        _emitted = &counter("packets");
    }

    uint32_t run_task(uint32_t budget) override {
        uint32_t n = 0;
        if (_rate) {
            uint64_t now = wall_ns();
            if (!_start)
                _start = now;
            uint64_t allowed = (now - _start) / 1000 * _rate / 1000000 + 1;
            if (*_emitted >= allowed)
                return 0;
            // No catch-up beyond one burst after a stall.
            if (allowed - *_emitted > budget) {
                _start += (allowed - *_emitted - budget) * 1000000000 / _rate;
                allowed = *_emitted + budget;
            }
            budget = uint32_t(std::min<uint64_t>(budget, allowed - *_emitted));
        }

        PacketHandle h;
        while (n < budget && _device->pop_handle(h)) {
            Packet p;
            if (ingest_untrusted(h, instance().bounds(), instance().platform().memory, p) !=
                IngestStatus::Ok) {
                if (std::has_single_bit(++*_attacks))
                    log::warn("{}: dropped forged descriptor #{} addr={:#x} len={}", name(),
                              *_attacks, h.addr, h.len);
                continue;
            }
            instance().count_rx();
            emit(p);
            ++n;
        }
        while (n < budget && _replay_pos < _replay.size()) {
            emit_bytes(_replay[_replay_pos++]);
            ++n;
        }
        while (n < budget && _synthetic && (_unbounded || _remaining > 0)) {
            emit_bytes(_templates[_next_template]);
            if (++_next_template == kTemplates)
                _next_template = 0;
            if (!_unbounded)
                --_remaining;
            ++n;
        }
        std::vector<uint8_t> &frame = _scratch;
        while (n < budget && _device->pop_frame(frame)) {
            emit_bytes(frame);
            ++n;
        }
        return n;
    }

    bool task_exhausted() const override {
        return _replay_pos == _replay.size() && !(_synthetic && (_unbounded || _remaining)) &&
               _device->rx_pending() == 0;
    }

  private:
    void emit_bytes(const std::vector<uint8_t> &frame) {
        instance().count_rx();
        PacketHandle h;
        PacketPool &pool = instance().untrusted_pool();
        if (frame.size() > PacketPool::kMaxFrameSize ||
            pool.alloc(uint32_t(frame.size()), h) != PoolStatus::Ok) [[unlikely]] {
            ++*_alloc_fail;
            instance().count_drop();
            return;
        }
        std::memcpy(reinterpret_cast<void *>(h.addr), frame.data(), frame.size());
        emit(Packet(h, &pool));
    }

    void emit(Packet p) {
        ++*_emitted;
        if (_stamp)
            p.timestamp = instance().clock().now();
        output(0, p);
    }

    TestDevice *_device = nullptr;
    bool _stamp = false;
    uint64_t _rate = 0;
    uint64_t _start = 0;

    std::vector<std::vector<uint8_t>> _replay;
    size_t _replay_pos = 0;

    bool _synthetic = false;
    bool _unbounded = false;
    uint64_t _remaining = 0;
    std::vector<std::vector<uint8_t>> _templates;
    size_t _next_template = 0;
    std::vector<uint8_t> _scratch;

    uint64_t *_attacks = nullptr;
    uint64_t *_alloc_fail = nullptr;
    uint64_t *_emitted = nullptr;
};

// ToTestDevice(DEV [, RECORD bool] [, TIMESTAMP bool])
//
// Packets are queued and handed to the device a burst at a time; a partial
// burst is flushed by an immediately-scheduled timer event.
class ToTestDevice final : public Element {
  public:
    const char *class_name() const override { return "ToTestDevice"; }

    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        bool record = a.keyword_bool("RECORD").value_or(false);
        _stamp = a.keyword_bool("TIMESTAMP").value_or(false);
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() != 1)
            throw std::invalid_argument("expected ToTestDevice(DEV, ...)");
        _device = &instance().platform().devices.get(config::unquote(pos[0]));
        if (record)
            _device->set_record(true);
        _burst = instance().settings().burst;
        _queue.reserve(_burst);
    }

    void push(int, Packet p) override {
        _queue.push_back(p);
        if (_queue.size() >= _burst) {
            flush();
        } else if (!_scheduled) {
            _scheduled = true;
            instance().schedule_immediate(
                [this] {
                    _scheduled = false;
                    flush();
                },
                this);
        }
    }

    bool has_pending() const override { return !_queue.empty(); }

    ~ToTestDevice() override {
        for (Packet &p : _queue)
            p.release();
    }

  private:
    void flush() {
        for (Packet &p : _queue) {
            if (_stamp)
                p.timestamp = instance().clock().now();
            _device->transmit(p.bytes());
            p.release();
        }
        instance().count_tx(_queue.size());
        _queue.clear();
    }

    TestDevice *_device = nullptr;
    bool _stamp = false;
    bool _scheduled = false;
    uint32_t _burst = 32;
    std::vector<Packet> _queue;
};

} // namespace

void register_devices(config::ElementRegistry &r) {
    config::PortSpec src = fixed_ports(0, 1);
    r.add(make_class<FromTestDevice>("FromTestDevice", src, config::TaskKind::Always));
    config::PortSpec sink = fixed_ports(1, 0);
    sink.variable_inputs = true;
    r.add(make_class<ToTestDevice>("ToTestDevice", sink));
}

} // namespace slick::elements
