#include <doctest.h>

#include <stdexcept>

#include <slick/bench.hh>

using namespace slick::bench;

TEST_CASE("nearest-rank percentiles") {
    std::vector<uint64_t> v = {5, 1, 4, 2, 3};
    CHECK(percentile(v, 50) == 3);
    CHECK(percentile(v, 99) == 5);
    CHECK(percentile(v, 0) == 1);
    std::vector<uint64_t> hundred;
    for (uint64_t i = 1; i <= 100; ++i)
        hundred.push_back(i);
    CHECK(percentile(hundred, 99) == 99);
    std::vector<uint64_t> empty;
    CHECK(percentile(empty, 50) == 0);
}

TEST_CASE("report JSON round-trips with a fixed field order") {
    Report r;
    r.app = "wire";
    r.packet_size = 128;
    r.mode = "latency";
    r.clock = "nicptp";
    r.duration_ns = 10;
    r.tx = 5;
    r.pps = 0.5;
    r.latency_p50_ns = 100;
    r.latency_p99_ns = 200;
    r.clock_cost_per_packet_ns = 1800;
    auto j = r.to_json();
    CHECK(j.rfind("{\"app\":\"wire\",\"packet_size\":128,", 0) == 0);
    CHECK(Report::from_json(j) == r);
    Report t;
    CHECK(Report::from_json(t.to_json()) == t);
}

TEST_CASE("throughput run: tx over duration") {
    Options o;
    o.duration_s = 0.05;
    auto r = run_throughput("wire", 64, o);
    CHECK(r.tx > 0);
    CHECK(r.pps == doctest::Approx(double(r.tx) * 1e9 / double(r.duration_ns)));
    CHECK(r.gbps == doctest::Approx(r.pps * 64 * 8 / 1e9));
    CHECK(r.rx == r.tx + r.drops);
}

TEST_CASE("every app runs") {
    Options o;
    o.duration_s = 0.02;
    for (const auto &app : app_names()) {
        CAPTURE(app);
        auto r = run_throughput(app, 128, o);
        CHECK(r.tx > 0);
        if (app != "chain") {
            o.mode = Mode::Latency;
            o.latency_samples = 20;
            auto l = run_latency(app == "ids" || app == "iprouter" ? "wire" : app, 128, o);
            CHECK(l.latency_p50_ns);
            o.mode = Mode::Throughput;
        }
    }
    CHECK_THROWS_AS(run_throughput("nope", 64, o), std::invalid_argument);
}

TEST_CASE("wire packet rate falls with size") {
    Options o;
    o.duration_s = 0.1;
    o.trials = 2;
    auto small = run_throughput("wire", 64, o);
    auto large = run_throughput("wire", 1518, o);
    // Both rates are bounded by per-packet work; the check is loose.
    CHECK(small.pps >= large.pps * 0.8);
    CHECK(large.gbps >= small.gbps);
}
