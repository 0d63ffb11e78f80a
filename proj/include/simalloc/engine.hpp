#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simalloc/alloc_core.hpp"
#include "simalloc/memsim.hpp"
#include "simalloc/protocol.hpp"
#include "simalloc/tiered.hpp"
#include "simalloc/trace.hpp"

namespace simalloc {

enum class AllocatorKind : std::uint8_t { SpeedMalloc, Tiered, ThreadLocalOnly, IdleCore };

std::string_view to_string(AllocatorKind kind);
AllocatorKind parse_allocator_kind(std::string_view name);
inline constexpr std::array<AllocatorKind, 4> kAllAllocators = {
    AllocatorKind::SpeedMalloc, AllocatorKind::Tiered, AllocatorKind::ThreadLocalOnly,
    AllocatorKind::IdleCore};

struct CostConfig {
    std::uint32_t atomic_cycles = 700;
    std::uint32_t fast_cycles = 50;            // instructions of one allocator call
    std::uint32_t generic_extra_cycles = 400;  // added when a chunk is carved

    void check() const;
    friend bool operator==(const CostConfig&, const CostConfig&) = default;
};

struct AllocatorConfig {
    AllocatorKind kind = AllocatorKind::SpeedMalloc;
    HeapConfig heap;
    TieredConfig tiered;
    ProtocolConfig protocol;
    CostConfig cost;

    void check() const;
    friend bool operator==(const AllocatorConfig&, const AllocatorConfig&) = default;
};

struct SimConfig {
    AllocatorConfig allocator;
    HierarchyConfig hw;
    std::uint32_t process_id = 1;

    void check() const;
    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Cycle split of one main core; the fields sum to `completion`.
struct CoreTimes {
    std::uint64_t compute = 0;
    std::uint64_t user_mem = 0;
    std::uint64_t metadata_mem = 0;
    std::uint64_t atomic_sync = 0;  // atomic execution plus waiting for the shared resource
    std::uint64_t alloc_wait = 0;   // blocked on an offloaded request
    std::uint64_t alloc_exec = 0;   // allocator instructions run locally
    std::uint64_t dependency_wait = 0;  // waiting for another thread's malloc or access
    std::uint64_t completion = 0;

    std::uint64_t sum() const {
        return compute + user_mem + metadata_mem + atomic_sync + alloc_wait + alloc_exec +
               dependency_wait;
    }
    friend bool operator==(const CoreTimes&, const CoreTimes&) = default;
};

inline constexpr std::size_t kLatencyBuckets = 24;  // bucket i holds [2^i, 2^(i+1))

struct Metrics {
    AllocatorKind kind = AllocatorKind::SpeedMalloc;
    std::uint64_t trace_hash = 0;
    std::uint32_t threads = 0;
    std::uint64_t total_cycles = 0;
    std::vector<CoreTimes> cores;  // one per trace thread

    // Support core (SpeedMalloc) or helper core (IdleCore); zero otherwise.
    std::uint64_t server_busy = 0;
    std::uint64_t server_stall = 0;

    std::vector<CoreCacheStats> cache;  // main cores, then the server core if any

    std::uint64_t mallocs = 0;
    std::uint64_t frees = 0;
    std::uint64_t end_signals = 0;
    std::uint64_t mmap_calls = 0;
    std::uint64_t peak_committed_bytes = 0;
    std::uint64_t live_bytes_at_end = 0;
    std::uint64_t oom_events = 0;
    std::uint64_t atomic_sync_events = 0;
    std::uint64_t ownership_transfers = 0;
    std::uint64_t coherence_transfers = 0;
    std::uint64_t peak_spill = 0;
    std::uint64_t rb_misses = 0;
    std::array<std::uint64_t, kLatencyBuckets> malloc_latency{};

    /// Sum over main cores of one category.
    std::uint64_t sum_main(std::uint64_t CoreTimes::*field) const;
    LevelStats main_cache(Level level, Stream stream) const;
    LevelStats all_cache(Level level, Stream stream) const;
    /// Atomic-sync cycles over the summed main-core cycles.
    double atomic_share() const;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// One allocator state change, in the order the allocator performed it.
struct AllocEvent {
    enum class Kind : std::uint8_t { Alloc, Free } kind;
    std::uint64_t time;
    Address addr;
    std::uint64_t span;
    std::size_t cls;
};

/// One request served by the support or helper core.
struct ServiceEvent {
    std::uint64_t start;
    std::uint32_t core;
    OpKind op;
    std::uint64_t seq;
    std::uint64_t malloc_pending;  // mallocs waiting in the queue when this was picked
};

struct SimLog {
    std::vector<AllocEvent> allocs;
    std::vector<ServiceEvent> services;
};

/// Runs a valid trace under one allocator configuration. Throws TraceError
/// for an invalid trace and ConfigError for an inconsistent configuration.
Metrics simulate(const Trace& trace, const SimConfig& config, SimLog* log = nullptr);

struct ComparisonReport {
    double speedup = 1.0;       // total_cycles(b) / total_cycles(a)
    double memory_ratio = 1.0;  // peak(b) / peak(a)
    double atomic_share_a = 0.0;
    double atomic_share_b = 0.0;
    std::int64_t l2_miss_cycles_delta = 0;  // b - a, all cores and streams
    std::array<std::int64_t, 7> category_delta{};  // b - a, in CoreTimes field order
};

inline constexpr std::array<const char*, 7> kCategoryNames = {
    "compute", "user_mem", "metadata_mem", "atomic_sync", "alloc_wait", "alloc_exec",
    "dependency_wait"};
inline constexpr std::array<std::uint64_t CoreTimes::*, 7> kCategoryFields = {
    &CoreTimes::compute,     &CoreTimes::user_mem,   &CoreTimes::metadata_mem,
    &CoreTimes::atomic_sync, &CoreTimes::alloc_wait, &CoreTimes::alloc_exec,
    &CoreTimes::dependency_wait};

/// Throws Error when the two runs came from different traces.
ComparisonReport compare(const Metrics& a, const Metrics& b);

}  // namespace simalloc
