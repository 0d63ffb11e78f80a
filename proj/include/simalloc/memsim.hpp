#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simalloc/trace.hpp"

namespace simalloc {

struct CacheLevelConfig {
    std::uint64_t capacity_bytes = 0;
    std::uint32_t associativity = 1;
    std::uint32_t line_bytes = 64;
    std::uint32_t hit_latency = 1;

    std::uint64_t sets() const { return capacity_bytes / (std::uint64_t{associativity} * line_bytes); }
    void check(const std::string& name) const;  // throws ConfigError
    friend bool operator==(const CacheLevelConfig&, const CacheLevelConfig&) = default;
};

struct HierarchyConfig {
    CacheLevelConfig l1{32 * 1024, 8, 64, 4};
    CacheLevelConfig l2{256 * 1024, 8, 64, 12};
    CacheLevelConfig llc{2 * 1024 * 1024, 16, 64, 24};  // capacity per application core
    CacheLevelConfig sc_l1{16 * 1024, 4, 64, 2};        // support core, no private L2
    std::uint32_t dram_latency = 100;
    std::uint32_t coherence_latency = 60;
    std::uint32_t l2_partition_meta_ways = 0;

    void check() const;
    friend bool operator==(const HierarchyConfig&, const HierarchyConfig&) = default;
};

enum class CoreKind : std::uint8_t { Main, Support };
enum class Stream : std::uint8_t { User = 0, Metadata = 1 };
enum class Level : std::uint8_t { L1 = 0, L2 = 1, LLC = 2 };

inline constexpr std::size_t kLevels = 3;
inline constexpr std::size_t kStreams = 2;

struct LevelStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t miss_cycles = 0;  // latency charged beyond this level on each miss

    LevelStats& operator+=(const LevelStats& o) {
        hits += o.hits, misses += o.misses, miss_cycles += o.miss_cycles;
        return *this;
    }
    friend bool operator==(const LevelStats&, const LevelStats&) = default;
};

struct CoreCacheStats {
    std::array<std::array<LevelStats, kStreams>, kLevels> level{};
    std::array<std::uint64_t, kStreams> accesses{};
    std::uint64_t coherence_transfers = 0;

    const LevelStats& at(Level l, Stream s) const {
        return level[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)];
    }
    friend bool operator==(const CoreCacheStats&, const CoreCacheStats&) = default;
};

struct AccessResult {
    std::uint64_t latency = 0;
    /// Level that supplied the line; empty when it came from DRAM.
    std::optional<Level> hit_level;
    bool coherence = false;
};

/// One set-associative LRU array. Lines are tracked by line number; the set
/// index is line % sets. With a partition of m ways, metadata lines fill ways
/// [0, m) and user lines the rest.
class SetAssocCache {
public:
    explicit SetAssocCache(CacheLevelConfig config);
    SetAssocCache(const SetAssocCache& other);
    SetAssocCache(SetAssocCache&&) noexcept = default;
    SetAssocCache& operator=(SetAssocCache&&) noexcept = default;
    SetAssocCache& operator=(const SetAssocCache& other) { return *this = SetAssocCache(other); }

    const CacheLevelConfig& config() const { return config_; }
    /// Hit test that refreshes recency on a hit.
    bool lookup(std::uint64_t line);
    bool contains(std::uint64_t line) const;
    /// Installs a line; returns the evicted line, if any.
    std::optional<std::uint64_t> fill(std::uint64_t line, Stream stream);
    /// fill() for a line known to be absent.
    std::optional<std::uint64_t> insert(std::uint64_t line, Stream stream);
    bool invalidate(std::uint64_t line);
    /// Throws ConfigError unless ways < associativity. Resident lines outside
    /// their stream's ways are dropped.
    void set_partition(std::uint32_t metadata_ways);
    std::uint32_t partition() const { return meta_ways_; }
    /// Resident lines of one set, most recently used first.
    std::vector<std::uint64_t> set_contents(std::uint64_t set) const;
    /// Way index holding `line`, if resident.
    std::optional<std::uint32_t> way_of(std::uint64_t line) const;

private:
    static constexpr std::size_t kAbsent = ~std::size_t{0};
    std::size_t set_base(std::uint64_t line) const {
        const std::uint64_t set = set_mask_ ? line & set_mask_ : line % sets_;
        return static_cast<std::size_t>(set * config_.associativity);
    }
    /// Slot index holding `line`, or kAbsent.
    std::size_t find(std::uint64_t line) const;

    CacheLevelConfig config_;
    std::uint64_t sets_;
    std::uint64_t set_mask_ = 0;  // sets_ - 1 when sets_ is a power of two
    // One entry per slot, set-major. Tags hold line + 1 so that zeroed
    // memory reads as empty and large caches cost nothing until touched.
    struct FreeDeleter {
        void operator()(void* p) const { std::free(p); }
    };
    template <typename T>
    using Zeroed = std::unique_ptr<T[], FreeDeleter>;
    std::size_t slots_ = 0;
    Zeroed<std::uint64_t> tags_;
    Zeroed<std::uint64_t> stamps_;
    Zeroed<Stream> streams_;
    std::uint32_t meta_ways_ = 0;
    std::uint64_t clock_ = 0;
};

/// Private L1/L2 per main core, private L1 per support core, one shared LLC
/// and a last-writer directory. Non-inclusive, write-allocate.
class CacheState {
public:
    /// `llc_cores` scales the shared LLC (its configured capacity is per core).
    CacheState(const HierarchyConfig& config, std::vector<CoreKind> cores, std::uint32_t llc_cores);

    const HierarchyConfig& config() const { return config_; }
    std::size_t cores() const { return kinds_.size(); }
    CoreKind kind(std::size_t core) const { return kinds_.at(core); }

    AccessResult access(std::size_t core, std::uint64_t addr, AccessMode mode, Stream stream);

    /// Applies a metadata way partition to every cache at `level`.
    void set_partition(Level level, std::uint32_t metadata_ways);

    const CoreCacheStats& stats(std::size_t core) const { return stats_.at(core); }
    /// Sum over cores.
    LevelStats total(Level level, Stream stream) const;
    std::uint64_t coherence_transfers() const;

    /// Latency of an access that misses everywhere with no coherence action.
    std::uint64_t cold_latency(std::size_t core) const;

    const SetAssocCache* private_cache(std::size_t core, Level level) const;
    const SetAssocCache& llc() const { return llc_; }

private:
    struct DirEntry {
        std::int32_t last_writer = -1;
        std::uint64_t sharers = 0;
    };
    void invalidate_private(std::size_t core, std::uint64_t line);

    HierarchyConfig config_;
    std::vector<CoreKind> kinds_;
    std::vector<std::vector<SetAssocCache>> private_;  // [core][L1, L2?]
    SetAssocCache llc_;
    // Open-addressed line -> entry map; lines are never removed.
    class Directory {
    public:
        DirEntry& operator[](std::uint64_t line);

    private:
        struct Slot {
            std::uint64_t line = kEmpty;
            DirEntry entry;
        };
        static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
        std::size_t home(std::uint64_t line) const;
        void grow();
        std::vector<Slot> slots_ = std::vector<Slot>(1024);
        std::size_t used_ = 0;
    };
    Directory directory_;
    std::vector<CoreCacheStats> stats_;
};

}  // namespace simalloc
