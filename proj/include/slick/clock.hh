#ifndef SLICK_CLOCK_HH
#define SLICK_CLOCK_HH

#include <cstdint>
#include <optional>
#include <string_view>

namespace slick {

enum class ClockKind { Host, NicPtp, InstrumentedTest };

const char *clock_kind_name(ClockKind k);
std::optional<ClockKind> parse_clock_kind(std::string_view s);

// A time source with read accounting. Every now() increments read_count and
// charges read_cost_ns to the accumulated virtual cost, which latency
// measurements add to wall time. Values never decrease.
class ClockSource {
  public:
    // Cost of reading the on-NIC PTP clock from inside the enclave.
    static constexpr uint64_t kNicPtpReadCostNs = 900;

    static ClockSource host(uint64_t read_cost_ns = 0);
    static ClockSource nic_ptp(uint64_t read_cost_ns = kNicPtpReadCostNs);
    static ClockSource instrumented(uint64_t start_ns = 0, uint64_t read_cost_ns = 0);

    ClockKind kind() const { return _kind; }
    uint64_t now();
    // Current time without read accounting, for harness-side checks.
    uint64_t peek() const;

    uint64_t read_count() const { return _reads; }
    uint64_t read_cost_ns() const { return _cost; }
    uint64_t virtual_cost_ns() const { return _virtual_cost; }
    void set_read_cost_ns(uint64_t ns) { _cost = ns; }

    // InstrumentedTest only: manual time control.
    void set(uint64_t ns);
    void advance(uint64_t ns);
    // Adds `ns` to the test time after every read.
    void set_auto_advance(uint64_t ns) { _auto_advance = ns; }

  private:
    ClockSource(ClockKind kind, uint64_t cost) : _kind(kind), _cost(cost) {}
    uint64_t raw() const;

    ClockKind _kind;
    uint64_t _cost;
    uint64_t _reads = 0;
    uint64_t _virtual_cost = 0;
    uint64_t _last = 0;
    uint64_t _test_now = 0;
    uint64_t _auto_advance = 0;
};

// Steady host time in ns, not accounted. For harness-side measurement.
uint64_t wall_ns();
// CPU time consumed by the calling thread, in ns.
uint64_t thread_cpu_ns();

} // namespace slick

#endif
