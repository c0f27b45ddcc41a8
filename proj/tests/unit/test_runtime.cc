#include <doctest.h>

#include <slick/bench.hh>
#include <slick/runtime.hh>

#include "../support/testutil.hh"

using namespace slick;

namespace {

std::unique_ptr<Instance> wire_instance(bool optimized, std::shared_ptr<Platform> platform = {}) {
    InstanceSettings s;
    s.clock = ClockKind::InstrumentedTest;
    s.timer_optimization = optimized;
    s.yield_when_idle = false;
    s.platform = platform ? platform : std::make_shared<Platform>();
    return testutil::build("src :: FromTestDevice(in);\nw :: Wire;\nout :: ToTestDevice(out);\n"
                           "src -> w -> out;\n",
                           s);
}

} // namespace

TEST_CASE("optimized scheduler never reads the clock without timestamped timers") {
    auto inst = wire_instance(true);
    uint64_t before = inst->clock().read_count();
    for (int i = 0; i < 1000; ++i)
        inst->run_once();
    CHECK(inst->clock().read_count() == before);
}

TEST_CASE("unoptimized scheduler reads the clock every pass") {
    auto inst = wire_instance(false);
    uint64_t before = inst->clock().read_count();
    for (int i = 0; i < 1000; ++i)
        inst->run_once();
    CHECK(inst->clock().read_count() - before == 1000);
}

TEST_CASE("immediate events cost at least one read less when optimized") {
    auto reads_per_event = [](bool optimized) {
        auto inst = wire_instance(optimized);
        uint64_t before = inst->clock().read_count();
        int fired = 0;
        for (int i = 0; i < 100; ++i) {
            inst->schedule_immediate([&] { ++fired; });
            inst->run_once();
        }
        REQUIRE(fired == 100);
        return double(inst->clock().read_count() - before) / 100.0;
    };
    double opt = reads_per_event(true), unopt = reads_per_event(false);
    CHECK(opt == 0.0);
    CHECK(unopt - opt >= 1.0);
}

TEST_CASE("immediate events run in FIFO order within one pass") {
    auto inst = wire_instance(true);
    std::vector<int> order;
    for (int i = 0; i < 5; ++i)
        inst->schedule_immediate([&, i] { order.push_back(i); });
    inst->run_once();
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("periodic timers fire on schedule and can be cancelled") {
    auto inst = wire_instance(true);
    int fired = 0;
    uint64_t id = inst->schedule_periodic(1000, [&] { ++fired; });
    CHECK(inst->has_timestamped_timers());
    inst->run_once();
    CHECK(fired == 0);
    inst->clock().advance(1000);
    inst->run_once();
    CHECK(fired == 1);
    inst->clock().advance(2500);
    inst->run_once();
    inst->run_once();
    CHECK(fired == 3);
    inst->cancel_timer(id);
    inst->clock().advance(10000);
    inst->run_once();
    CHECK(fired == 3);
}

TEST_CASE("one-shot timers fire once in deadline order") {
    auto inst = wire_instance(true);
    std::vector<int> order;
    TimerEvent a, b;
    a.deadline_ns = 300;
    a.action = [&] { order.push_back(3); };
    b.deadline_ns = 100;
    b.action = [&] { order.push_back(1); };
    inst->schedule_timer(a);
    inst->schedule_timer(b);
    inst->clock().advance(1000);
    inst->run_once();
    inst->run_once();
    CHECK(order == std::vector<int>{1, 3});
    CHECK(inst->pending_timers() == 0);
}

TEST_CASE("instrumented clock accounting") {
    auto c = ClockSource::instrumented(5, 7);
    CHECK(c.now() == 5);
    c.advance(10);
    CHECK(c.now() == 15);
    CHECK(c.read_count() == 2);
    CHECK(c.virtual_cost_ns() == 14);
    CHECK(c.peek() == 15);
    CHECK(c.read_count() == 2);
    auto n = ClockSource::nic_ptp();
    n.now();
    n.now();
    CHECK(n.virtual_cost_ns() == 1800);
}

TEST_CASE("latency mode charges exactly two NIC clock reads per packet") {
    bench::Options o;
    o.mode = bench::Mode::Latency;
    o.latency_samples = 200;
    o.clock = ClockKind::NicPtp;
    auto r = bench::run_latency("wire", 64, o);
    REQUIRE(r.clock_cost_per_packet_ns);
    CHECK(*r.clock_cost_per_packet_ns == 1800.0);
    o.timer_optimization = false;
    auto u = bench::run_latency("wire", 64, o);
    CHECK(*u.clock_cost_per_packet_ns > 1800.0);
}

TEST_CASE("round-robin tasks share the burst budget fairly") {
    InstanceSettings s;
    s.yield_when_idle = false;
    s.platform = std::make_shared<Platform>();
    auto inst = testutil::build("a :: FromTestDevice(a, SIZE 64, COUNT 0);\n"
                                "b :: FromTestDevice(b, SIZE 64, COUNT 0);\n"
                                "ca :: Counter;\ncb :: Counter;\nd :: Discard;\n"
                                "a -> ca -> [0] d;\nb -> cb -> [1] d;\n",
                                s);
    for (int i = 0; i < 100; ++i)
        inst->run_once();
    CHECK(inst->read_handler("ca.count") == "3200");
    CHECK(inst->read_handler("cb.count") == "3200");
}

TEST_CASE("conservation and pool balance after a drained run") {
    auto platform = std::make_shared<Platform>();
    InstanceSettings s;
    s.platform = platform;
    auto inst = testutil::build("src :: FromTestDevice(in, SIZE 200, COUNT 5000);\n"
                                "m :: EtherMirror;\nout :: ToTestDevice(out);\n"
                                "src -> m -> out;\n",
                                s);
    auto st = testutil::drain(*inst);
    CHECK(st.rx == 5000);
    CHECK(st.rx == st.tx + st.drops);
    CHECK(platform->devices.get("out").tx_packets() == 5000);
    CHECK(testutil::pools_balanced(*inst));
}

TEST_CASE("forged descriptors on a device are dropped and counted") {
    auto platform = std::make_shared<Platform>();
    InstanceSettings s;
    s.platform = platform;
    auto inst = testutil::build("src :: FromTestDevice(in);\nout :: ToTestDevice(out);\n"
                                "src -> out;\n",
                                s);
    auto b = inst->bounds();
    auto &dev = platform->devices.get("in");
    for (int i = 0; i < 10; ++i)
        dev.inject_handle({b.base + uint64_t(i) * 4096, 64, RegionTag::Untrusted, 1});
    auto st = testutil::drain(*inst);
    CHECK(inst->read_handler("src.attacks") == "10");
    CHECK(platform->devices.get("out").tx_packets() == 0);
    CHECK(st.rx == st.tx + st.drops);
}

TEST_CASE("stats JSON has a fixed field order") {
    RunStats st;
    st.rx = 1;
    st.counters["a.b"] = 2;
    CHECK(st.to_json() == R"({"rx":1,"tx":0,"drops":0,"errors":0,"iterations":0,)"
                          R"("clock_reads":0,"clock_cost_ns":0,"duration_ns":0,"counters":{"a.b":2}})");
}

TEST_CASE("element init errors name the element") {
    try {
        testutil::build("src :: FromTestDevice(in, SIZE 20);\nout :: ToTestDevice(out);\nsrc -> out;\n");
        FAIL("expected ElementInitError");
    } catch (const ElementInitError &e) {
        CHECK(e.element() == "src");
    }
}
