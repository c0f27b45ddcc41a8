#include <doctest.h>

#include <random>
#include <set>

#include <slick/packet.hh>

#include "../support/testutil.hh"

using namespace slick;

TEST_CASE("validate_address agrees with a byte-wise oracle") {
    std::mt19937_64 rng(7);
    const uint64_t base = 0x10000, size = 0x4000;
    auto bounds = EnclaveBounds::make(base, size);
    for (int i = 0; i < 100000; ++i) {
        uint64_t addr;
        switch (rng() % 4) {
        case 0: addr = base - 2048 + rng() % 4096; break;
        case 1: addr = base + size - 2048 + rng() % 4096; break;
        case 2: addr = ~uint64_t(0) - rng() % 4096; break;
        default: addr = rng() % (base + size + 8192); break;
        }
        uint32_t len = uint32_t(rng() % 1600);
        bool want = testutil::address_rejected_oracle(addr, len, base, size);
        REQUIRE_MESSAGE((validate_address(addr, len, bounds) == AddressCheck::Rejected) == want,
                        "addr=" << addr << " len=" << len);
    }
}

TEST_CASE("validate_address edges") {
    auto b = EnclaveBounds::make(1000, 100);
    CHECK(validate_address(900, 100, b) == AddressCheck::Ok);
    CHECK(validate_address(900, 101, b) == AddressCheck::Rejected);
    CHECK(validate_address(1099, 1, b) == AddressCheck::Rejected);
    CHECK(validate_address(1100, 50, b) == AddressCheck::Ok);
    CHECK(validate_address(~uint64_t(0) - 3, 8, b) == AddressCheck::Rejected);
}

TEST_CASE("pool alloc and free") {
    HugePageMemory mem;
    auto pool = pool_create(mem, 8);
    std::vector<PacketHandle> hs;
    for (int i = 0; i < 8; ++i) {
        PacketHandle h;
        REQUIRE(pool->alloc(64, h) == PoolStatus::Ok);
        CHECK(pool->owns(h));
        hs.push_back(h);
    }
    PacketHandle extra;
    CHECK(pool->alloc(64, extra) == PoolStatus::Exhausted);
    CHECK(pool->alloc(PacketPool::kDefaultBufSize + 1, extra) == PoolStatus::Oversize);
    std::set<uint64_t> addrs;
    for (auto &h : hs)
        addrs.insert(h.addr);
    CHECK(addrs.size() == 8);
    for (auto &h : hs)
        pool->free(h);
    CHECK_THROWS_AS(pool->free(hs[0]), std::logic_error);
    CHECK(pool->free_count() == 8);
    CHECK(pool->allocations() == pool->frees());
}

TEST_CASE("packet resizing stays within the buffer") {
    HugePageMemory mem;
    auto pool = pool_create(mem, 1);
    PacketHandle h;
    REQUIRE(pool->alloc(100, h) == PoolStatus::Ok);
    Packet p(h, pool.get());
    CHECK(p.headroom() == PacketPool::kHeadroom);
    CHECK(p.push_front(PacketPool::kHeadroom));
    CHECK_FALSE(p.push_front(1));
    CHECK(p.pull_front(PacketPool::kHeadroom));
    CHECK(p.put_back(p.tailroom()));
    CHECK_FALSE(p.put_back(1));
    CHECK_FALSE(p.set_length(p.length() + 1));
    p.release();
    CHECK(pool->free_count() == 1);
}

TEST_CASE("ingest_untrusted rejects enclave and unknown handles") {
    Enclave enclave(1 << 20);
    HugePageMemory mem;
    auto upool = pool_create(mem, 4);
    auto tpool = pool_create(enclave, 4);
    auto bounds = enclave.bounds();

    PacketHandle th;
    REQUIRE(tpool->alloc(64, th) == PoolStatus::Ok);
    PacketHandle forged = th;
    forged.region = RegionTag::Untrusted;
    Packet out;
    CHECK(ingest_untrusted(forged, bounds, mem, out) == IngestStatus::InEnclave);
    CHECK_FALSE(out.valid());

    PacketHandle uh;
    REQUIRE(upool->alloc(64, uh) == PoolStatus::Ok);
    CHECK(ingest_untrusted(uh, bounds, mem, out) == IngestStatus::Ok);
    CHECK(out.valid());
    out.release();
    // The same word again no longer names a live buffer.
    CHECK(ingest_untrusted(uh, bounds, mem, out) == IngestStatus::Unresolved);

    PacketHandle wild{0x1234, 64, RegionTag::Untrusted, upool->id()};
    CHECK(ingest_untrusted(wild, bounds, mem, out) == IngestStatus::Unresolved);
    tpool->free(th);
}

TEST_CASE("copy_to_trusted copies and frees the source") {
    Enclave enclave(1 << 20);
    HugePageMemory mem;
    auto upool = pool_create(mem, 2);
    auto tpool = pool_create(enclave, 1);
    PacketHandle h;
    REQUIRE(upool->alloc(60, h) == PoolStatus::Ok);
    Packet src(h, upool.get());
    for (uint32_t i = 0; i < 60; ++i)
        src.data()[i] = uint8_t(i);
    Packet dst;
    REQUIRE(copy_to_trusted(src, *tpool, dst) == CopyStatus::Ok);
    CHECK(dst.region() == RegionTag::Trusted);
    CHECK(dst.length() == 60);
    CHECK(dst.data()[59] == 59);
    CHECK(upool->free_count() == 2);

    REQUIRE(upool->alloc(60, h) == PoolStatus::Ok);
    Packet src2(h, upool.get());
    Packet dst2;
    CHECK(copy_to_trusted(src2, *tpool, dst2) == CopyStatus::Exhausted);
    CHECK_FALSE(dst2.valid());
    CHECK(upool->free_count() == 2);

    CHECK(copy_to_trusted(dst, *tpool, dst2) == CopyStatus::RegionViolation);
    dst.release();
}
