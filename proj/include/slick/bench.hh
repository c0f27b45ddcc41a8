#ifndef SLICK_BENCH_HH
#define SLICK_BENCH_HH

// Benchmark harness. Load is generated in-process: throughput mode floods
// the instance from a synthetic source, latency mode keeps one UDP packet in
// flight and times its round trip.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <slick/clock.hh>

namespace slick::bench {

enum class Mode { Throughput, Latency };

struct Options {
    std::string app = "wire";
    std::vector<uint32_t> sizes{64};
    double duration_s = 1.0;
    Mode mode = Mode::Throughput;
    bool timer_optimization = true;
    // Throughput mode uses the host clock, latency mode the NIC clock,
    // unless set.
    std::optional<ClockKind> clock;
    std::optional<uint64_t> clock_read_cost_ns;
    // Best of this many runs per size.
    int trials = 1;
    // Latency mode: number of round trips (0: as many as fit the duration).
    uint32_t latency_samples = 2000;
};

struct Report {
    std::string app;
    uint32_t packet_size = 0;
    std::string mode;
    bool timer_optimization = true;
    std::string clock;
    uint64_t duration_ns = 0;
    uint64_t rx = 0;
    uint64_t tx = 0;
    uint64_t drops = 0;
    double pps = 0;
    double gbps = 0;
    std::optional<uint64_t> latency_p50_ns;
    std::optional<uint64_t> latency_p99_ns;
    // Mean clock cost charged per round trip in latency mode.
    std::optional<double> clock_cost_per_packet_ns;
    uint64_t clock_reads = 0;

    std::string to_json() const;
    static Report from_json(const std::string &s);
    bool operator==(const Report &) const = default;
};

const std::vector<std::string> &app_names();
bool known_app(const std::string &app);

// Configuration text of an app reading from device `in` and writing to
// `out`. Support files (rules, patterns) are written to `dir`.
std::string app_config(const std::string &app, const std::string &in, const std::string &out,
                       const std::string &dir, bool timestamp = false);

Report run_throughput(const std::string &app, uint32_t size, const Options &opt);
Report run_latency(const std::string &app, uint32_t size, const Options &opt);
// Every size of opt.sizes in the chosen mode.
std::vector<Report> run(const Options &opt);

std::string format_table(const std::vector<Report> &reports);

// Nearest-rank percentile of `v` (sorted in place).
uint64_t percentile(std::vector<uint64_t> &v, double p);

} // namespace slick::bench

#endif
