#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "simalloc/trace.hpp"

namespace simalloc {

enum class WorkloadKind : std::uint8_t {
    Larson,            // server/client: per-thread live window with random replacement
    Xmalloc,           // objects freed by a different thread than the allocator
    Scratch,           // sub-line objects handed between threads (passive false sharing)
    ShBench,           // small objects allocated in bursts, freed in random order
    Mstress,           // objects with random lifetimes, freed by whichever thread runs
    AllocTest,         // truncated-Pareto sizes, random alloc/free mix
    ProducerConsumer,  // one thread allocates a batch, another frees most of it
    Uniform,           // per-thread LIFO bursts of uniform sizes
};

std::string_view to_string(WorkloadKind kind);
WorkloadKind parse_workload_kind(std::string_view name);

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::Uniform;
    std::uint32_t threads = 1;
    /// Allocator calls (Malloc + Free records) to emit; Malloc count is
    /// total_ops / 2. Access and Compute records come on top.
    std::uint64_t total_ops = 1000;
    std::uint64_t seed = 1;

    std::uint64_t min_size = 16;
    std::uint64_t max_size = 4096;
    double pareto_shape = 1.5;  // AllocTest only

    std::uint32_t window = 1024;        // Larson live objects per thread; ProducerConsumer batch
    double cross_free_fraction = 0.5;   // Larson, Xmalloc, ProducerConsumer
    std::uint64_t compute_gap = 1000;   // mean cycles of Compute before each call; 0 disables
    std::uint32_t touch_lines = 2;      // lines written after malloc / read before free
    std::uint32_t reuse_accesses = 1;   // extra reads of a random live object per step
    std::uint32_t burst = 16;           // Uniform / ShBench batch length
    std::uint64_t mean_lifetime = 256;  // Mstress, in scheduler steps
    std::uint32_t scratch_writes = 8;   // Scratch writes per object
    bool teardown = true;               // free everything still live at the end

    /// Shape defaults for a workload kind (sizes, compute gaps, windows).
    static WorkloadSpec defaults(WorkloadKind kind, std::uint32_t threads = 1,
                                 std::uint64_t total_ops = 1000, std::uint64_t seed = 1);

    /// Throws ConfigError describing the first violated invariant.
    void check() const;
};

/// Deterministic synthetic trace; identical specs give identical records.
Trace generate(const WorkloadSpec& spec);

/// Inverse-CDF sample of a Pareto(shape, min) truncated to [min, max],
/// floored to an integer byte count. `u` is uniform in [0, 1).
std::uint64_t truncated_pareto(double u, std::uint64_t min, std::uint64_t max, double shape);

}  // namespace simalloc
