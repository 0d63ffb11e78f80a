#include <doctest.h>

#include <algorithm>
#include <set>
#include <unordered_map>

#include "interval_oracle.hpp"
#include "simalloc/alloc_core.hpp"
#include "simalloc/error.hpp"
#include "simalloc/rng.hpp"
#include "simalloc/workload.hpp"

using namespace simalloc;

namespace {

HeapConfig small_chunks() {
    HeapConfig c;
    c.classes = SizeClassTable::powers_of_two(16, 4096);
    c.chunk_size = 4096;
    return c;
}

std::size_t class_of_size(const HeapState& h, std::uint64_t s) { return h.size_to_class(s); }

}  // namespace

TEST_SUITE("alloc_core") {

TEST_CASE("size classes round up") {
    const auto t = SizeClassTable::powers_of_two();
    CHECK(t.sizes.front() == 16);
    CHECK(t.sizes.back() == 32768);
    CHECK(t.sizes[size_to_class(t, 64)] == 64);
    CHECK(t.sizes[size_to_class(t, 65)] == 128);
    CHECK(size_to_class(t, 0) == 0);
    CHECK(size_to_class(t, 32768) == t.count() - 1);
    CHECK(size_to_class(t, 32769) == kLargeClass);
}

TEST_CASE("class table checks") {
    SizeClassTable t;
    t.sizes = {16, 48, 32};
    CHECK_THROWS_AS(t.check(), ConfigError);
    t.sizes = {8, 16};
    CHECK_THROWS_AS(t.check(), ConfigError);
    t.sizes = {16, 40};
    CHECK_THROWS_AS(t.check(), ConfigError);
    t.sizes = {16, 48, 80};
    CHECK_NOTHROW(t.check());
}

TEST_CASE("fast path pops the list head") {
    HeapState h(small_chunks());
    const std::size_t cls = class_of_size(h, 64);
    CHECK_FALSE(h.malloc_fast(cls).has_value());
    const Address first = *h.malloc_generic(cls);
    auto list = h.free_list(cls);
    REQUIRE(list.size() == 63);
    const Address a = list[0], b = list[1];
    CHECK(*h.malloc_fast(cls) == a);
    CHECK(h.free_list(cls).front() == b);
    h.free_block(a);
    CHECK(h.free_list(cls).front() == a);
    CHECK(*h.malloc_fast(cls) == a);
    CHECK(first != a);
}

TEST_CASE("generic path carves one chunk into class blocks") {
    HeapState h(small_chunks());
    const std::size_t c64 = class_of_size(h, 64);
    REQUIRE(h.malloc_generic(c64));
    // Pop until empty and count: 4096 / 64 blocks in total.
    std::size_t popped = 1;
    while (h.malloc_fast(c64)) ++popped;
    CHECK(popped == 64);
    CHECK(h.committed_bytes() == 4096);
    CHECK(h.mmap_calls() == 1);

    const std::size_t c4k = class_of_size(h, 4096);
    REQUIRE(h.malloc_generic(c4k));
    CHECK(h.free_count(c4k) == 0);
}

TEST_CASE("two generic calls give disjoint chunks") {
    HeapState h(small_chunks());
    const std::size_t cls = class_of_size(h, 256);
    std::set<Address> seen;
    for (int k = 0; k < 2; ++k) {
        Address a = *h.malloc_generic(cls);
        seen.insert(a);
        while (auto b = h.malloc_fast(cls)) CHECK(seen.insert(*b).second);
    }
    CHECK(seen.size() == 32);
    CHECK(h.chunks().size() == 2);
    h.check_invariants();
}

TEST_CASE("invalid frees are rejected") {
    HeapState h(small_chunks());
    auto a = h.malloc(64);
    h.free_block(*a.address);
    CHECK_THROWS_AS(h.free_block(*a.address), InvalidFree);
    CHECK_THROWS_AS(h.free_block(12345), InvalidFree);
}

TEST_CASE("freed large chunks are reused for requests that fit") {
    HeapState h;
    auto big = h.malloc(200000);
    REQUIRE(big.address);
    CHECK(big.path == AllocPath::Large);
    CHECK(big.block_bytes == 4 * 65536);
    h.free_block(*big.address);
    auto smaller = h.malloc(100000);
    CHECK(*smaller.address == *big.address);
    CHECK(h.mmap_calls() == 1);
    auto bigger = h.malloc(300000);
    CHECK(*bigger.address != *big.address);
    CHECK(h.mmap_calls() == 2);
}

TEST_CASE("chunk budget exhaustion is an out-of-memory outcome") {
    HeapConfig c = small_chunks();
    c.chunk_budget = 2;
    HeapState h(c);
    CHECK(h.malloc(4096).address);
    CHECK(h.malloc(4096).address);
    auto third = h.malloc(4096);
    CHECK_FALSE(third.address);
    CHECK(h.oom_events() == 1);
    CHECK(h.committed_bytes() == 8192);
}

TEST_CASE("metadata touch sets") {
    HeapState h;
    const auto fast = h.metadata_touch_set(MetaOp::FastMalloc, 2);
    CHECK(fast.size() == 3);
    for (const auto& t : fast) {
        CHECK(t.addr >= h.metadata_begin());
        CHECK(t.addr < h.metadata_end());
    }
    CHECK(h.metadata_touch_set(MetaOp::GenericMalloc, 2).size() == 8);
    const auto again = h.metadata_touch_set(MetaOp::FastMalloc, 2);
    CHECK(again[0] == fast[0]);
    CHECK(again[1] == fast[1]);

    HeapConfig c;
    c.meta_lines_fast = 5;
    c.meta_lines_generic = 2;
    HeapState h2(c);
    CHECK(h2.metadata_touch_set(MetaOp::FastMalloc, 0).size() == 5);
    CHECK(h2.metadata_touch_set(MetaOp::GenericMalloc, 0).size() == 2);
}

TEST_CASE("random operation sequences keep the live set disjoint, aligned and segregated") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CAPTURE(seed);
        HeapState h(seed % 2 ? HeapConfig{} : small_chunks());
        SplitMix64 rng(seed);
        IntervalSet oracle;
        std::vector<Address> live;
        for (int step = 0; step < 3000; ++step) {
            if (live.empty() || rng.uniform() < 0.55) {
                const std::uint64_t size = rng.uniform() < 0.02 ? rng.range(1, 200000) : rng.range(0, 4096);
                auto a = h.malloc(size);
                REQUIRE(a.address);
                const std::uint64_t span = h.live_span(*a.address);
                CHECK(span >= std::max<std::uint64_t>(size, 1));
                CHECK(oracle.insert(*a.address, span));
                if (a.path != AllocPath::Large) CHECK(*a.address % a.block_bytes == 0);
                for (const auto& t : a.touches) {
                    CHECK(t.addr >= h.metadata_begin());
                    CHECK(t.addr < h.metadata_end());
                    CHECK(h.chunk_of(t.addr) == nullptr);
                }
                live.push_back(*a.address);
            } else {
                const std::size_t i = rng.range(0, live.size() - 1);
                std::swap(live[i], live.back());
                CHECK(oracle.erase(live.back()));
                h.free_block(live.back());
                live.pop_back();
            }
            CHECK(h.peak_committed_bytes() >= h.committed_bytes());
        }
        h.check_invariants();
        std::uint64_t sum = 0;
        for (const auto& [base, c] : h.chunks()) sum += c.length;
        CHECK(sum == h.committed_bytes());
        CHECK(oracle.size() == h.live_count());
    }
}

TEST_CASE("centralized peak stays flat on producer-consumer traces") {
    const auto one = replay_peak_centralized(
        generate(WorkloadSpec::defaults(WorkloadKind::ProducerConsumer, 1, 2 * 2048 * 4, 5)));
    for (std::uint32_t t : {2u, 4u, 8u}) {
        const auto peak = replay_peak_centralized(
            generate(WorkloadSpec::defaults(WorkloadKind::ProducerConsumer, t, 2ull * 2048 * 4 * t, 5)));
        CHECK(double(peak) / double(one) <= 2.0);
    }
}

}
