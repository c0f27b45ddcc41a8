#include "internal.hh"

#include <slick/log.hh>

namespace slick::elements {
namespace {

// DPDKRing(NAME [, MODE create|lookup] [, SIZE n])
//
// Input packets are enqueued; with its output connected the element is also
// a source that dequeues (and validates) up to a burst per poll. MODE
// defaults to create for primary instances and lookup for secondaries.
class DPDKRing final : public Element {
  public:
    const char *class_name() const override { return "DPDKRing"; }

    void configure(const std::vector<std::string> &args) override {
        Args a(args);
        auto mode = a.keyword("MODE");
        auto size = a.keyword_uint("SIZE");
        a.reject_unknown_keywords();
        auto pos = a.positional();
        if (pos.size() == 2 && !mode) {
            mode = pos[1];
            pos.pop_back();
        }
        if (pos.size() != 1)
            throw std::invalid_argument("expected DPDKRing(NAME [, MODE create|lookup] [, SIZE n])");
        std::string ring = config::unquote(pos[0]);
        bool primary = instance().role() == Role::Primary;
        std::string m = mode ? *mode : (primary ? "create" : "lookup");
        auto &reg = instance().platform().rings;
        if (m == "create") {
            if (!primary)
                throw std::invalid_argument("only a primary instance may create ring '" + ring +
                                            "'");
            if (size && *size > chain::Ring::kMaxCapacity)
                throw chain::RingError(chain::RingError::NotPowerOfTwo,
                                       "ring size out of range");
            _ring = reg.create(ring, uint32_t(size.value_or(1024)));
        } else if (m == "lookup") {
            _ring = reg.lookup(ring);
        } else {
            throw std::invalid_argument("MODE must be create or lookup");
        }
    }

    void initialize() override {
        _full = &counter("full_drops");
        _attacks = &counter("attacks");
        _region = &counter("region_violations");
        _burst.reserve(instance().settings().burst);
        add_read_handler("count", [this] { return std::to_string(_ring->count()); });
    }

    void push(int, Packet p) override {
        // Trusted buffers never leave the enclave.
        if (p.region() != RegionTag::Untrusted) [[unlikely]] {
            ++*_region;
            kill(p);
            return;
        }
        if (_ring->enqueue(p.handle()) == chain::EnqueueStatus::Full) {
            ++*_full;
            kill(p);
            return;
        }
        instance().count_tx();
    }

    uint32_t run_task(uint32_t budget) override {
        uint32_t n = 0;
        const EnclaveBounds bounds = instance().bounds();
        const HugePageMemory &mem = instance().platform().memory;
        _burst.clear();
        while (n < budget) {
            Packet p;
            auto st = _ring->dequeue(bounds, mem, p);
            if (st == chain::DequeueStatus::Empty)
                break;
            if (st == chain::DequeueStatus::RejectedAttack) {
                ++*_attacks;
                continue;
            }
            _burst.push_back(p);
            ++n;
        }
        instance().count_rx(n);
        for (Packet &p : _burst)
            output(0, p);
        return n;
    }

    bool task_exhausted() const override { return _ring->count() == 0; }

  private:
    std::shared_ptr<chain::Ring> _ring;
    std::vector<Packet> _burst;
    uint64_t *_full = nullptr;
    uint64_t *_attacks = nullptr;
    uint64_t *_region = nullptr;
};

} // namespace

void register_dpdkring(config::ElementRegistry &r) {
    config::PortSpec p = fixed_ports(1, 1, {true});
    r.add(make_class<DPDKRing>("DPDKRing", p, config::TaskKind::WhenOutputConnected));
}

} // namespace slick::elements
