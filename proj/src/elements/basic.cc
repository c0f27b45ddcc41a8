#include "internal.hh"

#include <algorithm>
#include <cstring>

#include <slick/net.hh>

namespace slick::elements {
namespace {

class Wire final : public Element {
  public:
    const char *class_name() const override { return "Wire"; }
    void push(int, Packet p) override { output(0, p); }
};

class EtherMirror final : public Element {
  public:
    const char *class_name() const override { return "EtherMirror"; }

    void initialize() override { _runts = &counter("runts"); }

    void push(int, Packet p) override {
        if (p.length() < net::kEtherHeaderLen) [[unlikely]] {
            ++*_runts;
            kill(p);
            return;
        }
        uint8_t *d = p.data();
        uint8_t tmp[6];
        std::memcpy(tmp, d, 6);
        std::memcpy(d, d + 6, 6);
        std::memcpy(d + 6, tmp, 6);
        output(0, p);
    }

  private:
    uint64_t *_runts = nullptr;
};

class Counter final : public Element {
  public:
    const char *class_name() const override { return "Counter"; }

    void initialize() override {
        add_read_handler("count", [this] { return std::to_string(_count); });
        add_read_handler("byte_count", [this] { return std::to_string(_bytes); });
        add_write_handler("reset", [this](std::string_view) { _count = _bytes = 0; });
    }

    void push(int, Packet p) override {
        ++_count;
        _bytes += p.length();
        output(0, p);
    }

    bool has_state() const override { return true; }

    std::vector<uint8_t> state_write() const override {
        std::vector<uint8_t> out(16);
        for (int i = 0; i < 8; ++i) {
            out[size_t(i)] = uint8_t(_count >> (8 * i));
            out[size_t(8 + i)] = uint8_t(_bytes >> (8 * i));
        }
        return out;
    }

    void state_read(std::span<const uint8_t> s) override {
        if (s.size() != 16)
            throw std::invalid_argument("Counter state must be 16 bytes");
        uint64_t c = 0, b = 0;
        for (int i = 7; i >= 0; --i) {
            c = c << 8 | s[size_t(i)];
            b = b << 8 | s[size_t(8 + i)];
        }
        _count = c;
        _bytes = b;
    }

  private:
    uint64_t _count = 0;
    uint64_t _bytes = 0;
};

class Discard final : public Element {
  public:
    const char *class_name() const override { return "Discard"; }
    void push(int, Packet p) override { kill(p); }
};

} // namespace

void register_basic(config::ElementRegistry &r) {
    r.add(make_class<Wire>("Wire", fixed_ports(1, 1)));
    r.add(make_class<EtherMirror>("EtherMirror", fixed_ports(1, 1)));
    r.add(make_class<Counter>("Counter", fixed_ports(1, 1)));
    config::PortSpec sink = fixed_ports(1, 0);
    sink.variable_inputs = true;
    r.add(make_class<Discard>("Discard", sink));
}

} // namespace slick::elements
