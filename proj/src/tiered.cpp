#include "simalloc/tiered.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "simalloc/error.hpp"

namespace simalloc {

namespace {

constexpr Address kLine = 64;
constexpr Address kLocalRegion = Address{1} << 36;
constexpr Address kLocalStride = Address{1} << 28;
constexpr Address kSharedRegion = Address{1} << 35;
constexpr Address kPointerWindow = Address{1} << 16;  // per-class pointer array span
constexpr Address kPoolWindow = Address{1} << 20;

Address array_line(Address base, std::size_t index, Address window) {
    return base + (index * 8) % window / kLine * kLine;
}

}  // namespace

std::string_view to_string(TieredMode mode) {
    return mode == TieredMode::Tiered ? "tiered" : "threadlocal";
}

TieredMode parse_tiered_mode(std::string_view name) {
    if (name == "tiered") return TieredMode::Tiered;
    if (name == "threadlocal" || name == "thread-local-only" || name == "threadlocalonly")
        return TieredMode::ThreadLocalOnly;
    throw ConfigError("unknown tiered mode '" + std::string(name) + "'");
}

void TieredConfig::check() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (local_cap == 0) throw ConfigError("local_cap must be >= 1");
    if (batch_size > local_cap) throw ConfigError("batch_size must not exceed local_cap");
}

TieredState::TieredState(std::uint32_t threads, TieredConfig config, HeapConfig heap)
    : config_(config), heap_(std::move(heap)) {
    config_.check();
    if (threads == 0) throw ConfigError("tiered allocator needs at least one thread");
    if (threads > 256) throw ConfigError("tiered allocator supports at most 256 threads");
    const std::size_t classes = heap_.config().classes.count();
    local_.assign(threads, std::vector<std::deque<Address>>(classes));
    private_.assign(threads, std::vector<std::vector<Address>>(classes));
    shared_.assign(classes, {});
}

Address TieredState::local_base(std::uint32_t thread) const {
    return kLocalRegion + kLocalStride * thread;
}
Address TieredState::shared_base() const { return kSharedRegion; }

void TieredState::touch_shared(std::uint32_t thread, Address line, AccessMode mode,
                               CostEvents& ev) {
    ev.shared_touches.push_back({line, mode});
    if (std::uint32_t* owner = line_owner_.find(line)) {
        if (*owner != thread) {
            ++ev.ownership_transfers;
            ++ownership_transfers_;
            *owner = thread;
        }
    } else {
        line_owner_.insert(line, thread);
    }
}

// Pointer-array lines covering entries [top, top + n) of the pool that
// backs a local cache: the transfer cache in Tiered mode, the private pool
// otherwise.
void TieredState::touch_pool_lines(std::uint32_t thread, std::size_t cls, std::size_t top,
                                   std::size_t n, CostEvents& ev) {
    if (n == 0) return;
    const std::size_t first = top * 8 / kLine;
    const std::size_t last = (top + n - 1) * 8 / kLine;
    for (std::size_t l = first; l <= last; ++l) {
        if (config_.mode == TieredMode::Tiered) {
            const Address base = shared_base() + kPoolWindow * (cls + 1);
            touch_shared(thread, array_line(base, l * 8, kPoolWindow), AccessMode::Write, ev);
        } else {
            const Address base = local_base(thread) + (Address{1} << 24) + kPoolWindow * cls;
            ev.local_touches.push_back({array_line(base, l * 8, kPoolWindow), AccessMode::Write});
        }
    }
}

bool TieredState::refill(std::uint32_t thread, std::size_t cls, CostEvents& ev) {
    auto& pool = config_.mode == TieredMode::Tiered ? shared_[cls] : private_[thread][cls];
    if (pool.empty()) return false;
    const std::size_t n = std::min<std::size_t>(config_.batch_size, pool.size());
    const std::size_t top = pool.size() - n;
    touch_pool_lines(thread, cls, top, n, ev);
    auto& local = local_[thread][cls];
    for (std::size_t i = top; i < pool.size(); ++i) local.push_back(pool[i]);
    pool.resize(top);
    return true;
}

void TieredState::flush(std::uint32_t thread, std::size_t cls, CostEvents& ev) {
    auto& local = local_[thread][cls];
    const std::size_t n = std::min<std::size_t>(config_.batch_size, local.size());
    auto& pool = config_.mode == TieredMode::Tiered ? shared_[cls] : private_[thread][cls];
    if (config_.mode == TieredMode::Tiered) {
        ++ev.atomic_syncs;
        ++atomic_syncs_;
        touch_shared(thread, shared_base() + kLine * cls, AccessMode::Write, ev);
    }
    touch_pool_lines(thread, cls, pool.size(), n, ev);
    for (std::size_t i = 0; i < n; ++i) {
        pool.push_back(local.front());
        local.pop_front();
    }
}

TieredAllocation TieredState::malloc(std::uint32_t thread, std::uint64_t size) {
    if (thread >= threads()) throw Error("tiered malloc: unknown thread " + std::to_string(thread));
    const std::size_t cls = heap_.size_to_class(size);
    if (cls != kLargeClass) return malloc_class(thread, cls);

    TieredAllocation out;
    out.cls = kLargeClass;
    out.events.large = true;
    if (config_.mode == TieredMode::Tiered) {
        ++out.events.atomic_syncs;
        ++atomic_syncs_;
    }
    for (const auto& t : heap_.metadata_touch_set(MetaOp::LargeMalloc, 0))
        touch_shared(thread, t.addr, t.mode, out.events);
    const auto before = heap_.mmap_calls();
    out.address = heap_.malloc_large(size);
    out.events.chunk_acquisitions = static_cast<std::uint32_t>(heap_.mmap_calls() - before);
    if (!out.address) {
        out.events.oom = true;
        return out;
    }
    out.block_bytes = heap_.live_span(*out.address);
    large_owner_.insert(*out.address, thread);
    return out;
}

TieredAllocation TieredState::malloc_class(std::uint32_t thread, std::size_t cls) {
    if (thread >= threads()) throw Error("tiered malloc: unknown thread " + std::to_string(thread));
    if (cls >= shared_.size()) throw Error("tiered malloc: bad class");
    TieredAllocation out;
    out.cls = cls;
    out.block_bytes = heap_.block_size(cls);
    CostEvents& ev = out.events;
    ev.local_touches.reserve(4);
    const Address lb = local_base(thread);
    ev.local_touches.push_back({lb + cls * 8 / kLine * kLine, AccessMode::Read});
    ev.local_touches.push_back({lb + 4096 + kLine * cls, AccessMode::Write});

    auto& local = local_[thread][cls];
    if (local.empty()) {
        if (config_.mode == TieredMode::Tiered) {
            // One synchronized visit to the transfer cache, found empty or not.
            ++ev.atomic_syncs;
            ++atomic_syncs_;
            touch_shared(thread, shared_base() + kLine * cls, AccessMode::Write, ev);
        }
        if (!refill(thread, cls, ev)) {
            for (const auto& t : heap_.metadata_touch_set(MetaOp::GenericMalloc, cls))
                touch_shared(thread, t.addr, t.mode, ev);
            auto blocks = heap_.carve_chunk(cls);
            if (!blocks) {
                ev.oom = true;
                return out;
            }
            ev.chunk_acquisitions = 1;
            carved_ += blocks->size();
            auto& pool =
                config_.mode == TieredMode::Tiered ? shared_[cls] : private_[thread][cls];
            touch_pool_lines(thread, cls, pool.size(), blocks->size(), ev);
            // Lowest address ends on top.
            pool.insert(pool.end(), blocks->rbegin(), blocks->rend());
            refill(thread, cls, ev);
        }
    }
    const Address a = local.back();
    local.pop_back();
    ev.local_touches.push_back(
        {array_line(lb + (Address{1} << 20) + kPointerWindow * cls, local.size(), kPointerWindow),
         AccessMode::Read});
    live_.insert(a, LiveBlock{thread, cls});
    out.address = a;
    return out;
}

CostEvents TieredState::free(std::uint32_t thread, Address addr) {
    if (thread >= threads()) throw Error("tiered free: unknown thread " + std::to_string(thread));
    CostEvents ev;
    if (large_owner_.contains(addr)) {
        ev.large = true;
        if (config_.mode == TieredMode::Tiered) {
            ++ev.atomic_syncs;
            ++atomic_syncs_;
        }
        for (const auto& t : heap_.metadata_touch_set(MetaOp::LargeFree, 0))
            touch_shared(thread, t.addr, t.mode, ev);
        heap_.free_block(addr);
        large_owner_.erase(addr);
        return ev;
    }
    const LiveBlock* found = live_.find(addr);
    if (!found) throw InvalidFree("tiered free of non-live address");
    const LiveBlock b = *found;
    live_.erase(addr);

    const Address lb = local_base(thread);
    ev.local_touches.reserve(4);
    ev.local_touches.push_back({lb + b.cls * 8 / kLine * kLine, AccessMode::Read});

    if (b.owner != thread && config_.mode == TieredMode::Tiered) {
        ++ev.atomic_syncs;
        ++atomic_syncs_;
        touch_shared(thread, shared_base() + kLine * b.cls, AccessMode::Write, ev);
        touch_pool_lines(thread, b.cls, shared_[b.cls].size(), 1, ev);
        shared_[b.cls].push_back(addr);
        return ev;
    }
    auto& local = local_[thread][b.cls];
    ev.local_touches.push_back({lb + 4096 + kLine * b.cls, AccessMode::Write});
    ev.local_touches.push_back(
        {array_line(lb + (Address{1} << 20) + kPointerWindow * b.cls, local.size(),
                    kPointerWindow),
         AccessMode::Write});
    local.push_back(addr);
    if (local.size() > config_.local_cap) flush(thread, b.cls, ev);
    return ev;
}

std::size_t TieredState::local_count(std::uint32_t thread, std::size_t cls) const {
    return local_.at(thread).at(cls).size();
}

std::size_t TieredState::private_count(std::uint32_t thread, std::size_t cls) const {
    return private_.at(thread).at(cls).size();
}

std::vector<Address> TieredState::local_list(std::uint32_t thread, std::size_t cls) const {
    const auto& l = local_.at(thread).at(cls);
    return {l.rbegin(), l.rend()};
}

bool TieredState::is_live(Address addr) const {
    return live_.contains(addr) || large_owner_.contains(addr);
}

std::optional<std::uint32_t> TieredState::owner_of(Address addr) const {
    if (const LiveBlock* b = live_.find(addr)) return b->owner;
    if (const std::uint32_t* o = large_owner_.find(addr)) return *o;
    return std::nullopt;
}

void TieredState::check_invariants() const {
    std::unordered_set<Address> seen;
    auto claim = [&](Address a, const char* where) {
        if (!seen.insert(a).second)
            throw Error(std::string("tiered block held twice (") + where + ")");
    };
    std::uint64_t held = 0;
    live_.for_each([&](Address a, const LiveBlock&) { claim(a, "live"), ++held; });
    for (const auto& per_thread : local_)
        for (const auto& l : per_thread) {
            if (l.size() > config_.local_cap) throw Error("local cache above local_cap");
            for (Address a : l) claim(a, "local"), ++held;
        }
    for (const auto& per_thread : private_)
        for (const auto& l : per_thread) {
            if (!l.empty() && config_.mode == TieredMode::Tiered)
                throw Error("private pool used in tiered mode");
            for (Address a : l) claim(a, "private"), ++held;
        }
    for (const auto& l : shared_) {
        if (!l.empty() && config_.mode == TieredMode::ThreadLocalOnly)
            throw Error("shared cache used in thread-local mode");
        for (Address a : l) claim(a, "shared"), ++held;
    }
    if (held != carved_) throw Error("carved blocks != live + cached blocks");
    for (Address a : seen)
        if (!heap_.chunk_of(a)) throw Error("tiered block outside every chunk");
    heap_.check_invariants();
}

std::uint64_t blowup_probe(TieredMode mode, const Trace& trace, TieredConfig config,
                           const HeapConfig& heap) {
    config.mode = mode;
    TieredState state(trace.threads, config, heap);
    std::unordered_map<std::uint64_t, Address> objects;
    for (const auto& r : trace.records) {
        if (r.kind == RecordKind::Malloc) {
            auto a = state.malloc(r.thread, r.size);
            if (a.address) objects[r.object] = *a.address;
        } else if (r.kind == RecordKind::Free) {
            auto it = objects.find(r.object);
            if (it == objects.end()) continue;
            state.free(r.thread, it->second);
            objects.erase(it);
        }
    }
    return state.peak_committed_bytes();
}

}  // namespace simalloc
