#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "simalloc/alloc_core.hpp"
#include "simalloc/trace.hpp"

namespace simalloc {

enum class TieredMode : std::uint8_t { Tiered, ThreadLocalOnly };

std::string_view to_string(TieredMode mode);
TieredMode parse_tiered_mode(std::string_view name);

struct TieredConfig {
    std::uint32_t batch_size = 32;  // blocks moved per refill or flush
    std::uint32_t local_cap = 64;   // per-class local cache bound
    TieredMode mode = TieredMode::Tiered;

    void check() const;
    friend bool operator==(const TieredConfig&, const TieredConfig&) = default;
};

/// What one tiered operation cost, before any cycle model is applied.
struct CostEvents {
    std::vector<MetaTouch> local_touches;   // lines private to the calling thread
    std::vector<MetaTouch> shared_touches;  // transfer cache and central heap lines
    std::uint32_t atomic_syncs = 0;
    std::uint32_t ownership_transfers = 0;  // shared lines last written by another thread
    std::uint32_t chunk_acquisitions = 0;
    bool large = false;
    bool oom = false;
};

struct TieredAllocation {
    std::optional<Address> address;
    std::size_t cls = 0;
    std::uint64_t block_bytes = 0;
    CostEvents events;
};

/// Per-thread caches in front of a shared transfer cache, with chunks carved
/// from a HeapState. In ThreadLocalOnly mode the transfer cache is replaced by
/// per-thread private pools, so blocks freed by one thread can only ever be
/// reused by that thread.
class TieredState {
public:
    TieredState(std::uint32_t threads, TieredConfig config = {}, HeapConfig heap = {});

    const TieredConfig& config() const { return config_; }
    std::uint32_t threads() const { return static_cast<std::uint32_t>(local_.size()); }

    TieredAllocation malloc(std::uint32_t thread, std::uint64_t size);
    TieredAllocation malloc_class(std::uint32_t thread, std::size_t cls);
    /// Throws InvalidFree when `addr` is not live.
    CostEvents free(std::uint32_t thread, Address addr);

    std::size_t local_count(std::uint32_t thread, std::size_t cls) const;
    std::size_t shared_count(std::size_t cls) const { return shared_.at(cls).size(); }
    std::size_t private_count(std::uint32_t thread, std::size_t cls) const;
    /// Local cache of a thread, head first.
    std::vector<Address> local_list(std::uint32_t thread, std::size_t cls) const;

    bool is_live(Address addr) const;
    std::optional<std::uint32_t> owner_of(Address addr) const;
    std::size_t live_count() const { return live_.size() + heap_.live_count(); }
    std::uint64_t carved_blocks() const { return carved_; }

    std::uint64_t atomic_syncs() const { return atomic_syncs_; }
    std::uint64_t ownership_transfers() const { return ownership_transfers_; }

    const HeapState& heap() const { return heap_; }
    std::uint64_t peak_committed_bytes() const { return heap_.peak_committed_bytes(); }

    /// Block partition and cache bounds. Throws Error on violation.
    void check_invariants() const;

private:
    struct LiveBlock {
        std::uint32_t owner = 0;
        std::size_t cls = 0;
    };

    bool refill(std::uint32_t thread, std::size_t cls, CostEvents& ev);
    void flush(std::uint32_t thread, std::size_t cls, CostEvents& ev);
    void touch_shared(std::uint32_t thread, Address line, AccessMode mode, CostEvents& ev);
    void touch_pool_lines(std::uint32_t thread, std::size_t cls, std::size_t top, std::size_t n,
                          CostEvents& ev);

    Address local_base(std::uint32_t thread) const;
    Address shared_base() const;

    TieredConfig config_;
    HeapState heap_;
    // [thread][cls]; back() is the head, front() the oldest block.
    std::vector<std::vector<std::deque<Address>>> local_;
    std::vector<std::vector<std::vector<Address>>> private_;
    std::vector<std::vector<Address>> shared_;
    FlatMap<LiveBlock> live_;
    FlatMap<std::uint32_t> large_owner_;
    FlatMap<std::uint32_t> line_owner_;
    std::uint64_t carved_ = 0;
    std::uint64_t atomic_syncs_ = 0;
    std::uint64_t ownership_transfers_ = 0;
};

/// Replays the Malloc/Free records of a trace in order and returns the peak
/// committed bytes of the given mode.
std::uint64_t blowup_probe(TieredMode mode, const Trace& trace, TieredConfig config = {},
                           const HeapConfig& heap = {});

}  // namespace simalloc
