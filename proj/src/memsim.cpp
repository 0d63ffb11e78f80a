#include "simalloc/memsim.hpp"

#include <algorithm>

#include "simalloc/error.hpp"

namespace simalloc {

void CacheLevelConfig::check(const std::string& name) const {
    if (line_bytes == 0 || (line_bytes & (line_bytes - 1)) != 0)
        throw ConfigError(name + ": line size must be a power of two");
    if (associativity == 0) throw ConfigError(name + ": associativity must be >= 1");
    if (capacity_bytes == 0 || capacity_bytes % (std::uint64_t{associativity} * line_bytes) != 0)
        throw ConfigError(name + ": capacity must be a positive multiple of ways * line size");
    if (hit_latency == 0) throw ConfigError(name + ": latency must be > 0");
}

void HierarchyConfig::check() const {
    l1.check("l1");
    l2.check("l2");
    llc.check("llc");
    sc_l1.check("sc_l1");
    if (l2.line_bytes != l1.line_bytes || llc.line_bytes != l1.line_bytes ||
        sc_l1.line_bytes != l1.line_bytes)
        throw ConfigError("all cache levels must share one line size");
    if (dram_latency == 0) throw ConfigError("dram_lat must be > 0");
    if (coherence_latency == 0) throw ConfigError("coherence_lat must be > 0");
    if (l2_partition_meta_ways >= l2.associativity)
        throw ConfigError("l2_partition_meta_ways must be below the L2 associativity");
}

namespace {
template <typename T>
T* zeroed(std::size_t n) {
    void* p = std::calloc(n, sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
}
}  // namespace

SetAssocCache::SetAssocCache(CacheLevelConfig config)
    : config_(config), sets_(config.sets()) {
    config_.check("cache");
    if (sets_ > 1 && (sets_ & (sets_ - 1)) == 0) set_mask_ = sets_ - 1;
    slots_ = static_cast<std::size_t>(sets_ * config_.associativity);
    tags_.reset(zeroed<std::uint64_t>(slots_));
    stamps_.reset(zeroed<std::uint64_t>(slots_));
    streams_.reset(zeroed<Stream>(slots_));
}

SetAssocCache::SetAssocCache(const SetAssocCache& o)
    : config_(o.config_), sets_(o.sets_), set_mask_(o.set_mask_), slots_(o.slots_),
      tags_(zeroed<std::uint64_t>(o.slots_)), stamps_(zeroed<std::uint64_t>(o.slots_)),
      streams_(zeroed<Stream>(o.slots_)), meta_ways_(o.meta_ways_), clock_(o.clock_) {
    std::copy_n(o.tags_.get(), slots_, tags_.get());
    std::copy_n(o.stamps_.get(), slots_, stamps_.get());
    std::copy_n(o.streams_.get(), slots_, streams_.get());
}

std::size_t SetAssocCache::find(std::uint64_t line) const {
    const std::size_t base = set_base(line);
    const std::uint64_t* set = tags_.get() + base;
    const std::uint64_t tag = line + 1;
    for (std::uint32_t w = 0; w < config_.associativity; ++w)
        if (set[w] == tag) return base + w;
    return kAbsent;
}

bool SetAssocCache::lookup(std::uint64_t line) {
    const std::size_t i = find(line);
    if (i == kAbsent) return false;
    stamps_[i] = ++clock_;
    return true;
}

bool SetAssocCache::contains(std::uint64_t line) const { return find(line) != kAbsent; }

std::optional<std::uint64_t> SetAssocCache::fill(std::uint64_t line, Stream stream) {
    if (lookup(line)) return std::nullopt;
    return insert(line, stream);
}

std::optional<std::uint64_t> SetAssocCache::insert(std::uint64_t line, Stream stream) {
    std::uint32_t lo = 0, hi = config_.associativity;
    if (meta_ways_ > 0) {
        if (stream == Stream::Metadata)
            hi = meta_ways_;
        else
            lo = meta_ways_;
    }
    const std::size_t base = set_base(line);
    std::size_t victim = base + lo;
    for (std::size_t i = base + lo; i < base + hi; ++i) {
        if (tags_[i] == 0) {
            victim = i;
            break;
        }
        if (stamps_[i] < stamps_[victim]) victim = i;
    }
    std::optional<std::uint64_t> evicted;
    if (tags_[victim] != 0) evicted = tags_[victim] - 1;
    tags_[victim] = line + 1;
    stamps_[victim] = ++clock_;
    streams_[victim] = stream;
    return evicted;
}

bool SetAssocCache::invalidate(std::uint64_t line) {
    const std::size_t i = find(line);
    if (i == kAbsent) return false;
    tags_[i] = 0;
    return true;
}

void SetAssocCache::set_partition(std::uint32_t metadata_ways) {
    if (metadata_ways >= config_.associativity)
        throw ConfigError("metadata ways must be below the associativity (" +
                          std::to_string(config_.associativity) + ")");
    meta_ways_ = metadata_ways;
    if (meta_ways_ == 0) return;
    for (std::size_t i = 0; i < slots_; ++i) {
        const bool meta_way = i % config_.associativity < meta_ways_;
        if (tags_[i] != 0 && meta_way != (streams_[i] == Stream::Metadata)) tags_[i] = 0;
    }
}

std::vector<std::uint64_t> SetAssocCache::set_contents(std::uint64_t set) const {
    if (set >= sets_) throw Error("set index out of range");
    std::vector<std::size_t> live;
    for (std::uint32_t w = 0; w < config_.associativity; ++w) {
        const std::size_t i = set * config_.associativity + w;
        if (tags_[i] != 0) live.push_back(i);
    }
    std::sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) { return stamps_[a] > stamps_[b]; });
    std::vector<std::uint64_t> out;
    for (std::size_t i : live) out.push_back(tags_[i] - 1);
    return out;
}

std::optional<std::uint32_t> SetAssocCache::way_of(std::uint64_t line) const {
    const std::size_t i = find(line);
    if (i == kAbsent) return std::nullopt;
    return static_cast<std::uint32_t>(i % config_.associativity);
}

namespace {
CacheLevelConfig scaled_llc(const HierarchyConfig& c, std::uint32_t cores) {
    CacheLevelConfig l = c.llc;
    l.capacity_bytes *= std::max<std::uint32_t>(cores, 1);
    return l;
}
}  // namespace

CacheState::CacheState(const HierarchyConfig& config, std::vector<CoreKind> cores,
                       std::uint32_t llc_cores)
    : config_(config), kinds_(std::move(cores)), llc_(scaled_llc(config, llc_cores)) {
    config_.check();
    if (kinds_.empty()) throw ConfigError("cache model needs at least one core");
    if (kinds_.size() > 64) throw ConfigError("cache model supports at most 64 cores");
    for (CoreKind k : kinds_) {
        std::vector<SetAssocCache> levels;
        if (k == CoreKind::Main) {
            levels.emplace_back(config_.l1);
            levels.emplace_back(config_.l2);
            levels.back().set_partition(config_.l2_partition_meta_ways);
        } else {
            levels.emplace_back(config_.sc_l1);
        }
        private_.push_back(std::move(levels));
    }
    stats_.resize(kinds_.size());
}

void CacheState::invalidate_private(std::size_t core, std::uint64_t line) {
    for (auto& c : private_[core]) c.invalidate(line);
}

std::size_t CacheState::Directory::home(std::uint64_t line) const {
    return static_cast<std::size_t>((line * 0x9e3779b97f4a7c15ULL) >> 24 & (slots_.size() - 1));
}

CacheState::DirEntry& CacheState::Directory::operator[](std::uint64_t line) {
    if (2 * (used_ + 1) > slots_.size()) grow();
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = home(line);; i = (i + 1) & mask) {
        Slot& s = slots_[i];
        if (s.line == line) return s.entry;
        if (s.line == kEmpty) {
            s.line = line;
            ++used_;
            return s.entry;
        }
    }
}

void CacheState::Directory::grow() {
    std::vector<Slot> old(slots_.size() * 2);
    old.swap(slots_);
    const std::size_t mask = slots_.size() - 1;
    for (const Slot& s : old) {
        if (s.line == kEmpty) continue;
        std::size_t i = home(s.line);
        while (slots_[i].line != kEmpty) i = (i + 1) & mask;
        slots_[i] = s;
    }
}

AccessResult CacheState::access(std::size_t core, std::uint64_t addr, AccessMode mode,
                                Stream stream) {
    if (core >= kinds_.size()) throw Error("cache access from unconfigured core " + std::to_string(core));
    const std::uint64_t line = addr / config_.l1.line_bytes;
    const auto self = static_cast<std::int32_t>(core);
    const std::uint64_t bit = std::uint64_t{1} << core;
    AccessResult r;
    CoreCacheStats& st = stats_[core];
    const auto si = static_cast<std::size_t>(stream);
    ++st.accesses[si];

    DirEntry& d = directory_[line];
    if (d.last_writer >= 0 && d.last_writer != self) {
        // Dirty copy elsewhere: pull it back through the LLC.
        invalidate_private(static_cast<std::size_t>(d.last_writer), line);
        d.sharers &= ~(std::uint64_t{1} << d.last_writer);
        d.last_writer = -1;
        llc_.fill(line, stream);
        r.latency += config_.coherence_latency;
        r.coherence = true;
        ++st.coherence_transfers;
    }
    if (mode == AccessMode::Write) {
        for (std::uint64_t m = d.sharers & ~bit; m != 0; m &= m - 1)
            invalidate_private(static_cast<std::size_t>(__builtin_ctzll(m)), line);
        d.sharers = bit;
        d.last_writer = self;
    } else {
        d.sharers |= bit;
    }

    auto& levels = private_[core];
    if (levels[0].lookup(line)) {
        ++st.level[0][si].hits;
        r.hit_level = Level::L1;
        r.latency += levels[0].config().hit_latency;
        return r;
    }
    std::array<std::uint64_t, kLevels> cum{};  // hit latency through each walked level
    std::array<bool, kLevels> missed{};
    std::uint64_t walk = r.latency + levels[0].config().hit_latency;
    cum[0] = walk;
    missed[0] = true;
    bool hit = false;
    auto visit = [&](SetAssocCache& c, Level lvl) {
        walk += c.config().hit_latency;
        cum[static_cast<std::size_t>(lvl)] = walk;
        if (c.lookup(line)) {
            ++st.level[static_cast<std::size_t>(lvl)][si].hits;
            r.hit_level = lvl;
            hit = true;
        } else {
            missed[static_cast<std::size_t>(lvl)] = true;
        }
    };
    for (std::size_t i = 1; i < levels.size() && !hit; ++i)
        visit(levels[i], static_cast<Level>(i));
    if (!hit) visit(llc_, Level::LLC);
    if (!hit) walk += config_.dram_latency;
    r.latency = walk;

    for (std::size_t i = 0; i < kLevels; ++i) {
        if (!missed[i]) continue;
        LevelStats& ls = st.level[i][si];
        ++ls.misses;
        ls.miss_cycles += r.latency - cum[i];
    }
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (missed[i]) levels[i].insert(line, stream);
    if (missed[static_cast<std::size_t>(Level::LLC)]) llc_.insert(line, stream);
    return r;
}

void CacheState::set_partition(Level level, std::uint32_t metadata_ways) {
    if (level == Level::LLC) {
        llc_.set_partition(metadata_ways);
        return;
    }
    const auto idx = static_cast<std::size_t>(level);
    for (auto& levels : private_)
        if (idx < levels.size() && metadata_ways >= levels[idx].config().associativity)
            throw ConfigError("metadata ways must be below the associativity");
    for (auto& levels : private_)
        if (idx < levels.size()) levels[idx].set_partition(metadata_ways);
}

LevelStats CacheState::total(Level level, Stream stream) const {
    LevelStats sum;
    for (const auto& s : stats_) sum += s.at(level, stream);
    return sum;
}

std::uint64_t CacheState::coherence_transfers() const {
    std::uint64_t n = 0;
    for (const auto& s : stats_) n += s.coherence_transfers;
    return n;
}

std::uint64_t CacheState::cold_latency(std::size_t core) const {
    std::uint64_t lat = llc_.config().hit_latency + config_.dram_latency;
    for (const auto& c : private_.at(core)) lat += c.config().hit_latency;
    return lat;
}

const SetAssocCache* CacheState::private_cache(std::size_t core, Level level) const {
    const auto& levels = private_.at(core);
    const auto idx = static_cast<std::size_t>(level);
    return idx < levels.size() ? &levels[idx] : nullptr;
}

}  // namespace simalloc
