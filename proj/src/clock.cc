#include <slick/clock.hh>

#include <chrono>
#include <ctime>
#include <stdexcept>

namespace slick {

const char *clock_kind_name(ClockKind k) {
    switch (k) {
    case ClockKind::Host: return "host";
    case ClockKind::NicPtp: return "nicptp";
    case ClockKind::InstrumentedTest: return "test";
    }
    return "?";
}

std::optional<ClockKind> parse_clock_kind(std::string_view s) {
    if (s == "host") return ClockKind::Host;
    if (s == "nicptp") return ClockKind::NicPtp;
    if (s == "test") return ClockKind::InstrumentedTest;
    return std::nullopt;
}

ClockSource ClockSource::host(uint64_t cost) { return ClockSource(ClockKind::Host, cost); }

ClockSource ClockSource::nic_ptp(uint64_t cost) {
    return ClockSource(ClockKind::NicPtp, cost);
}

ClockSource ClockSource::instrumented(uint64_t start, uint64_t cost) {
    ClockSource c(ClockKind::InstrumentedTest, cost);
    c._test_now = start;
    return c;
}

uint64_t ClockSource::raw() const {
    if (_kind == ClockKind::InstrumentedTest)
        return _test_now;
    return wall_ns();
}

uint64_t ClockSource::now() {
    ++_reads;
    _virtual_cost += _cost;
    uint64_t v = raw();
    if (_kind == ClockKind::InstrumentedTest)
        _test_now += _auto_advance;
    if (v < _last)
        v = _last;
    _last = v;
    return v;
}

uint64_t ClockSource::peek() const {
    uint64_t v = raw();
    return v < _last ? _last : v;
}

void ClockSource::set(uint64_t ns) {
    if (_kind != ClockKind::InstrumentedTest)
        throw std::logic_error("only the test clock can be set");
    _test_now = ns;
}

void ClockSource::advance(uint64_t ns) {
    if (_kind != ClockKind::InstrumentedTest)
        throw std::logic_error("only the test clock can be advanced");
    _test_now += ns;
}

uint64_t wall_ns() {
    return uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count());
}

uint64_t thread_cpu_ns() {
    timespec ts;
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return uint64_t(ts.tv_sec) * 1000000000ull + uint64_t(ts.tv_nsec);
}

} // namespace slick
