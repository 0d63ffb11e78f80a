#include "simalloc/alloc_core.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "simalloc/error.hpp"

namespace simalloc {

namespace {

constexpr std::uint64_t kLine = 64;
constexpr std::uint64_t kPointerBytes = 8;

// Metadata region layout, relative to metadata_base.
constexpr Address kClassTableOffset = 0;
constexpr Address kLargeTableOffset = 2048;
constexpr Address kListHeadOffset = 4096;
constexpr Address kChunkTableOffset = 64 * 1024;
constexpr Address kPointerArrayOffset = 16 * 1024 * 1024;
constexpr Address kPointerArrayStride = 64 * 1024 * 1024;  // per class, 8M entries

std::uint64_t round_up(std::uint64_t v, std::uint64_t m) { return (v + m - 1) / m * m; }

}  // namespace

SizeClassTable SizeClassTable::powers_of_two(std::uint64_t min, std::uint64_t max) {
    SizeClassTable t;
    for (std::uint64_t s = min; s <= max; s *= 2) t.sizes.push_back(s);
    t.large_threshold = max;
    return t;
}

void SizeClassTable::check() const {
    if (sizes.empty()) throw ConfigError("class_table: at least one size class required");
    if (sizes.front() < 16) throw ConfigError("class_table: smallest class must be >= 16 bytes");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] % 16 != 0)
            throw ConfigError("class_table: " + std::to_string(sizes[i]) + " is not a multiple of 16");
        if (i > 0 && sizes[i] <= sizes[i - 1])
            throw ConfigError("class_table: sizes must be strictly increasing");
    }
    if (sizes.size() > 1024) throw ConfigError("class_table: too many classes");
}

std::size_t size_to_class(const SizeClassTable& table, std::uint64_t size) {
    if (size > table.large_threshold) return kLargeClass;
    auto it = std::lower_bound(table.sizes.begin(), table.sizes.end(), size);
    if (it == table.sizes.end()) return kLargeClass;
    return static_cast<std::size_t>(it - table.sizes.begin());
}

void HeapConfig::check() const {
    classes.check();
    if (chunk_size == 0 || chunk_size % 4096 != 0)
        throw ConfigError("chunk_size must be a positive multiple of 4096");
    if (classes.sizes.back() > chunk_size)
        throw ConfigError("chunk_size must hold at least one block of the largest class");
    if (chunk_budget == 0) throw ConfigError("chunk_budget must be >= 1");
    if (heap_base % chunk_size != 0) throw ConfigError("heap_base must be chunk aligned");
}

HeapState::HeapState(HeapConfig config)
    : config_(std::move(config)),
      free_lists_(config_.classes.count()),
      next_base_(config_.heap_base) {
    config_.check();
    if (metadata_end() > config_.heap_base)
        throw ConfigError("metadata region overlaps the heap");
}

Address HeapState::metadata_end() const {
    return config_.metadata_base + kPointerArrayOffset +
           kPointerArrayStride * static_cast<Address>(config_.classes.count());
}

Address HeapState::class_table_line(std::size_t cls) const {
    return config_.metadata_base + kClassTableOffset + (cls * kPointerBytes) / kLine * kLine;
}
Address HeapState::large_table_line() const { return config_.metadata_base + kLargeTableOffset; }
Address HeapState::list_head_line(std::size_t cls) const {
    return config_.metadata_base + kListHeadOffset + cls * kLine;
}
Address HeapState::chunk_table_line(std::size_t chunk_index) const {
    // 16-byte entries; the table wraps inside its 16 MiB window.
    const Address off = (chunk_index * 16) % (kPointerArrayOffset - kChunkTableOffset);
    return config_.metadata_base + kChunkTableOffset + off / kLine * kLine;
}
Address HeapState::pointer_line(std::size_t cls, std::size_t index) const {
    const Address off = (index * kPointerBytes) % kPointerArrayStride;
    return config_.metadata_base + kPointerArrayOffset + kPointerArrayStride * cls +
           off / kLine * kLine;
}

std::vector<MetaTouch> HeapState::metadata_touch_set(MetaOp op, std::size_t cls) const {
    std::vector<MetaTouch> out;
    const bool large = op == MetaOp::LargeMalloc || op == MetaOp::LargeFree;
    if (!large && cls >= free_lists_.size()) throw Error("metadata_touch_set: bad class");
    const std::size_t top = large ? 0 : free_lists_[cls].size();
    const std::size_t chunk_index = chunks_.size();

    std::size_t want = config_.meta_lines_fast;
    out.reserve(std::max<std::size_t>(3, std::max(config_.meta_lines_fast, config_.meta_lines_generic)));
    switch (op) {
        case MetaOp::FastMalloc:
            out = {{class_table_line(cls), AccessMode::Read},
                   {list_head_line(cls), AccessMode::Write},
                   {pointer_line(cls, top == 0 ? 0 : top - 1), AccessMode::Read}};
            break;
        case MetaOp::Free:
            out = {{chunk_table_line(chunk_index == 0 ? 0 : chunk_index - 1), AccessMode::Read},
                   {list_head_line(cls), AccessMode::Write},
                   {pointer_line(cls, top), AccessMode::Write}};
            break;
        case MetaOp::LargeMalloc:
        case MetaOp::LargeFree:
            out = {{large_table_line(), AccessMode::Write},
                   {chunk_table_line(chunk_index), AccessMode::Write},
                   {class_table_line(0), AccessMode::Read}};
            break;
        case MetaOp::GenericMalloc:
            want = config_.meta_lines_generic;
            out = {{class_table_line(cls), AccessMode::Read},
                   {list_head_line(cls), AccessMode::Write},
                   {chunk_table_line(chunk_index), AccessMode::Write}};
            break;
    }
    // Extra configured lines continue along the class pointer array.
    const std::size_t base_line = top * kPointerBytes / kLine;
    for (std::size_t k = 0; out.size() < want; ++k) {
        const Address line = large ? large_table_line() + kLine * (k + 1)
                                   : pointer_line(cls, (base_line + k + 1) * (kLine / kPointerBytes));
        out.push_back({line, op == MetaOp::FastMalloc ? AccessMode::Read : AccessMode::Write});
    }
    out.resize(want);
    return out;
}

std::optional<Address> HeapState::commit(std::uint64_t length, std::size_t cls) {
    const std::uint64_t units = length / config_.chunk_size;
    if (committed_ / config_.chunk_size + units > config_.chunk_budget) {
        ++oom_events_;
        return std::nullopt;
    }
    const Address base = next_base_;
    next_base_ += length;
    chunks_.emplace(base, Chunk{base, length, 0, cls});
    committed_ += length;
    peak_committed_ = std::max(peak_committed_, committed_);
    ++mmap_calls_;
    return base;
}

std::optional<Address> HeapState::malloc_fast(std::size_t cls) {
    auto& list = free_lists_.at(cls);
    if (list.empty()) return std::nullopt;
    const Address a = list.back();
    list.pop_back();
    const std::uint64_t span = config_.classes.sizes[cls];
    live_.insert(a, LiveBlock{cls, span});
    live_bytes_ += span;
    return a;
}

std::optional<std::vector<Address>> HeapState::carve_chunk(std::size_t cls) {
    const std::uint64_t bs = block_size(cls);
    auto base = commit(config_.chunk_size, cls);
    if (!base) return std::nullopt;
    const std::uint64_t n = config_.chunk_size / bs;
    chunks_.at(*base).bytes_carved = n * bs;
    std::vector<Address> blocks;
    blocks.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) blocks.push_back(*base + i * bs);
    return blocks;
}

std::optional<Address> HeapState::malloc_generic(std::size_t cls) {
    auto blocks = carve_chunk(cls);
    if (!blocks) return std::nullopt;
    auto& list = free_lists_.at(cls);
    // Highest address deepest, so the chunk base is the new head.
    for (auto it = blocks->rbegin(); it != blocks->rend(); ++it) list.push_back(*it);
    return malloc_fast(cls);
}

std::optional<Address> HeapState::malloc_large(std::uint64_t size) {
    const std::uint64_t length = round_up(std::max<std::uint64_t>(size, 1), config_.chunk_size);
    auto best = large_free_.end();
    for (auto it = large_free_.begin(); it != large_free_.end(); ++it) {
        if (it->second < length) continue;
        if (best == large_free_.end() || it->second < best->second ||
            (it->second == best->second && it->first < best->first))
            best = it;
    }
    Address a;
    std::uint64_t span;
    if (best != large_free_.end()) {
        a = best->first;
        span = best->second;
        large_free_.erase(best);
    } else {
        auto base = commit(length, kLargeClass);
        if (!base) return std::nullopt;
        chunks_.at(*base).bytes_carved = length;
        a = *base;
        span = length;
    }
    live_.insert(a, LiveBlock{kLargeClass, span});
    live_bytes_ += span;
    return a;
}

Allocation HeapState::malloc(std::uint64_t size) {
    Allocation out;
    out.cls = size_to_class(size);
    if (out.cls == kLargeClass) {
        out.path = AllocPath::Large;
        out.touches = metadata_touch_set(MetaOp::LargeMalloc, 0);
        out.address = malloc_large(size);
        if (out.address) out.block_bytes = live_span(*out.address);
        return out;
    }
    out.block_bytes = block_size(out.cls);
    out.touches = metadata_touch_set(MetaOp::FastMalloc, out.cls);
    out.address = malloc_fast(out.cls);
    if (!out.address) {
        out.path = AllocPath::Generic;
        auto generic = metadata_touch_set(MetaOp::GenericMalloc, out.cls);
        out.touches.insert(out.touches.end(), generic.begin(), generic.end());
        out.address = malloc_generic(out.cls);
    }
    return out;
}

std::size_t HeapState::free_block(Address addr) {
    const LiveBlock* found = live_.find(addr);
    if (!found)
        throw InvalidFree("free of non-live address 0x" + [addr] {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(addr));
            return std::string(buf);
        }());
    const LiveBlock b = *found;
    live_.erase(addr);
    live_bytes_ -= b.span;
    if (b.cls == kLargeClass)
        large_free_.emplace_back(addr, b.span);
    else
        free_lists_[b.cls].push_back(addr);
    return b.cls;
}

std::vector<Address> HeapState::free_list(std::size_t cls) const {
    const auto& l = free_lists_.at(cls);
    return {l.rbegin(), l.rend()};
}

std::uint64_t HeapState::live_span(Address addr) const {
    const LiveBlock* b = live_.find(addr);
    return b ? b->span : 0;
}

std::optional<std::size_t> HeapState::class_of(Address addr) const {
    const LiveBlock* b = live_.find(addr);
    if (!b) return std::nullopt;
    return b->cls;
}

const Chunk* HeapState::chunk_of(Address addr) const {
    auto it = chunks_.upper_bound(addr);
    if (it == chunks_.begin()) return nullptr;
    --it;
    return addr < it->second.base + it->second.length ? &it->second : nullptr;
}

void HeapState::check_invariants() const {
    std::uint64_t sum = 0;
    for (const auto& [base, c] : chunks_) {
        sum += c.length;
        if (c.base < metadata_end() && metadata_begin() < c.base + c.length)
            throw Error("chunk overlaps metadata region");
    }
    if (sum != committed_) throw Error("committed_bytes != sum of chunk lengths");
    if (peak_committed_ < committed_) throw Error("peak below committed");

    // Live blocks: inside one chunk, pairwise disjoint.
    std::map<Address, std::uint64_t> spans;
    live_.for_each([&](Address a, const LiveBlock& b) {
        const Chunk* c = chunk_of(a);
        if (!c || a + b.span > c->base + c->length) throw Error("live block outside chunks");
        if (b.cls != kLargeClass && a % config_.classes.sizes[b.cls] != 0)
            throw Error("live block misaligned for its class");
        spans.emplace(a, b.span);
    });
    Address end = 0;
    for (const auto& [a, len] : spans) {
        if (a < end) throw Error("live blocks overlap");
        end = a + len;
    }
    std::unordered_set<Address> seen;
    for (std::size_t cls = 0; cls < free_lists_.size(); ++cls)
        for (Address a : free_lists_[cls]) {
            if (!chunk_of(a)) throw Error("free block outside chunks");
            if (live_.contains(a)) throw Error("free block is live");
            if (!seen.insert(a).second) throw Error("free block listed twice");
        }
}

std::uint64_t replay_peak_centralized(const Trace& trace, const HeapConfig& config) {
    HeapState heap(config);
    std::unordered_map<std::uint64_t, Address> objects;
    for (const auto& r : trace.records) {
        if (r.kind == RecordKind::Malloc) {
            auto a = heap.malloc(r.size);
            if (a.address) objects[r.object] = *a.address;
        } else if (r.kind == RecordKind::Free) {
            auto it = objects.find(r.object);
            if (it == objects.end()) continue;
            heap.free_block(it->second);
            objects.erase(it);
        }
    }
    return heap.peak_committed_bytes();
}

}  // namespace simalloc
