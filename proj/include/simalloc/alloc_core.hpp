#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include "simalloc/flat_map.hpp"
#include <vector>

#include "simalloc/trace.hpp"

namespace simalloc {

using Address = std::uint64_t;

/// Class index returned for requests that bypass the size classes.
inline constexpr std::size_t kLargeClass = std::numeric_limits<std::size_t>::max();

struct SizeClassTable {
    std::vector<std::uint64_t> sizes;  // block sizes, strictly increasing
    std::uint64_t large_threshold = 32768;

    /// 16, 32, ..., 32768 with a 32 KiB large threshold.
    static SizeClassTable powers_of_two(std::uint64_t min = 16, std::uint64_t max = 32768);

    std::size_t count() const { return sizes.size(); }
    void check() const;  // throws ConfigError

    friend bool operator==(const SizeClassTable&, const SizeClassTable&) = default;
};

/// Smallest class whose block fits `size` (0 maps to the smallest class);
/// kLargeClass above the threshold or above the largest class.
std::size_t size_to_class(const SizeClassTable& table, std::uint64_t size);

struct HeapConfig {
    SizeClassTable classes = SizeClassTable::powers_of_two();
    std::uint64_t chunk_size = 64 * 1024;
    std::uint32_t meta_lines_fast = 3;
    std::uint32_t meta_lines_generic = 8;
    std::uint64_t chunk_budget = 1u << 16;  // ceiling on chunk_size units committed
    Address metadata_base = Address{1} << 32;
    Address heap_base = Address{1} << 40;

    void check() const;
    friend bool operator==(const HeapConfig&, const HeapConfig&) = default;
};

/// One metadata cache line read or written by an allocator operation.
struct MetaTouch {
    Address addr;
    AccessMode mode;
    friend bool operator==(const MetaTouch&, const MetaTouch&) = default;
};

enum class MetaOp : std::uint8_t { FastMalloc, GenericMalloc, Free, LargeMalloc, LargeFree };

enum class AllocPath : std::uint8_t { Fast, Generic, Large };

struct Allocation {
    std::optional<Address> address;  // empty on out-of-memory
    AllocPath path = AllocPath::Fast;
    std::size_t cls = 0;
    std::uint64_t block_bytes = 0;
    std::vector<MetaTouch> touches;
};

struct Chunk {
    Address base;
    std::uint64_t length;
    std::uint64_t bytes_carved;
    std::size_t cls;  // kLargeClass for whole-chunk allocations
};

/// Centralized segregated-fit heap. Free lists are stacks of block addresses
/// kept in a metadata region that never overlaps any chunk, so allocator
/// bookkeeping and user data never share a cache line.
class HeapState {
public:
    explicit HeapState(HeapConfig config = {});

    const HeapConfig& config() const { return config_; }
    std::size_t size_to_class(std::uint64_t size) const {
        return simalloc::size_to_class(config_.classes, size);
    }
    std::uint64_t block_size(std::size_t cls) const { return config_.classes.sizes.at(cls); }

    /// Pops the head of the class list; empty when the list is empty.
    std::optional<Address> malloc_fast(std::size_t cls);

    /// Acquires a chunk, carves it into class blocks, then pops one.
    /// Empty when the chunk budget is exhausted (counted in oom_events()).
    std::optional<Address> malloc_generic(std::size_t cls);

    /// Whole-chunk allocation for sizes above the class table. Reuses the
    /// best-fitting freed large chunk before committing a new one.
    std::optional<Address> malloc_large(std::uint64_t size);

    /// Fast path, falling back to the generic path, with the metadata lines
    /// both attempts touched.
    Allocation malloc(std::uint64_t size);

    /// Returns a live block to its class list (or a large chunk to the large
    /// pool). Throws InvalidFree for an address that is not live.
    std::size_t free_block(Address addr);

    /// Commits one chunk for `cls` and returns its blocks in address order
    /// without listing or marking them; used by cache front ends that keep
    /// their own free lists. Empty on budget exhaustion.
    std::optional<std::vector<Address>> carve_chunk(std::size_t cls);

    /// Deterministic metadata lines for an operation on `cls` given the
    /// current list state.
    std::vector<MetaTouch> metadata_touch_set(MetaOp op, std::size_t cls) const;

    /// Free list of a class, head first.
    std::vector<Address> free_list(std::size_t cls) const;
    std::size_t free_count(std::size_t cls) const { return free_lists_.at(cls).size(); }

    bool is_live(Address addr) const { return live_.contains(addr); }
    /// Class of a live block (kLargeClass for large ones).
    std::optional<std::size_t> class_of(Address addr) const;
    /// Bytes spanned by a live block (class size or large chunk length).
    std::uint64_t live_span(Address addr) const;
    std::size_t live_count() const { return live_.size(); }
    std::uint64_t live_bytes() const { return live_bytes_; }

    const std::map<Address, Chunk>& chunks() const { return chunks_; }
    const Chunk* chunk_of(Address addr) const;

    std::uint64_t committed_bytes() const { return committed_; }
    std::uint64_t peak_committed_bytes() const { return peak_committed_; }
    std::uint64_t mmap_calls() const { return mmap_calls_; }
    std::uint64_t oom_events() const { return oom_events_; }

    Address metadata_begin() const { return config_.metadata_base; }
    Address metadata_end() const;

    /// Exhaustive structural check (tests). Throws Error on violation.
    void check_invariants() const;

private:
    struct LiveBlock {
        std::size_t cls = 0;
        std::uint64_t span = 0;
    };

    std::optional<Address> commit(std::uint64_t length, std::size_t cls);
    Address class_table_line(std::size_t cls) const;
    Address list_head_line(std::size_t cls) const;
    Address chunk_table_line(std::size_t chunk_index) const;
    Address pointer_line(std::size_t cls, std::size_t index) const;
    Address large_table_line() const;

    HeapConfig config_;
    std::vector<std::vector<Address>> free_lists_;  // back() is the head
    std::vector<std::pair<Address, std::uint64_t>> large_free_;
    std::map<Address, Chunk> chunks_;
    FlatMap<LiveBlock> live_;
    Address next_base_;
    std::uint64_t committed_ = 0;
    std::uint64_t peak_committed_ = 0;
    std::uint64_t mmap_calls_ = 0;
    std::uint64_t oom_events_ = 0;
    std::uint64_t live_bytes_ = 0;
};

/// Replays the Malloc/Free records of a trace, in trace order, against one
/// centralized heap and returns its peak committed bytes.
std::uint64_t replay_peak_centralized(const Trace& trace, const HeapConfig& config = {});

}  // namespace simalloc
