#include "simalloc/engine.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

#include "simalloc/error.hpp"
#include "simalloc/flat_map.hpp"

namespace simalloc {

std::string_view to_string(AllocatorKind kind) {
    switch (kind) {
        case AllocatorKind::SpeedMalloc: return "speedmalloc";
        case AllocatorKind::Tiered: return "tiered";
        case AllocatorKind::ThreadLocalOnly: return "threadlocal";
        case AllocatorKind::IdleCore: return "idlecore";
    }
    return "?";
}

AllocatorKind parse_allocator_kind(std::string_view name) {
    for (AllocatorKind k : kAllAllocators)
        if (name == to_string(k)) return k;
    throw ConfigError("unknown allocator '" + std::string(name) +
                      "' (expected speedmalloc, tiered, threadlocal or idlecore)");
}

void CostConfig::check() const {
    if (atomic_cycles == 0 || fast_cycles == 0 || generic_extra_cycles == 0)
        throw ConfigError("allocator cycle constants must be > 0");
}

void AllocatorConfig::check() const {
    heap.check();
    tiered.check();
    protocol.check();
    cost.check();
}

void SimConfig::check() const {
    allocator.check();
    hw.check();
}

std::uint64_t Metrics::sum_main(std::uint64_t CoreTimes::*field) const {
    std::uint64_t s = 0;
    for (const auto& c : cores) s += c.*field;
    return s;
}

LevelStats Metrics::main_cache(Level level, Stream stream) const {
    LevelStats s;
    for (std::size_t i = 0; i < threads && i < cache.size(); ++i) s += cache[i].at(level, stream);
    return s;
}

LevelStats Metrics::all_cache(Level level, Stream stream) const {
    LevelStats s;
    for (const auto& c : cache) s += c.at(level, stream);
    return s;
}

double Metrics::atomic_share() const {
    const std::uint64_t total = sum_main(&CoreTimes::completion);
    return total == 0 ? 0.0 : static_cast<double>(sum_main(&CoreTimes::atomic_sync)) / total;
}

namespace {

constexpr std::uint64_t kServerIdx = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kDoneIdx = kServerIdx - 1;

std::uint32_t current_of(const FlatMap<std::uint32_t>& m, std::uint64_t object) {
    const std::uint32_t* v = m.find(object);
    if (!v) throw Error("trace references object " + std::to_string(object) + " before malloc");
    return *v;
}

enum class Ev : std::uint8_t { CoreReady, Arrival, ServerStep };

// Ordered by (time, record index, core, type). The last three are packed
// into one word: index rank in the high half, then core, then type.
struct Event {
    std::uint64_t time;
    std::uint64_t tie;
    std::uint32_t payload;

    Event(std::uint64_t t, std::uint64_t idx, std::uint32_t core, Ev type, std::uint32_t p)
        : time(t), tie(rank(idx) << 32 | std::uint64_t{core} << 8 | static_cast<std::uint8_t>(type)),
          payload(p) {}

    static std::uint64_t rank(std::uint64_t idx) {
        return idx >= kDoneIdx ? 0xFFFFFFFEULL + (idx - kDoneIdx) : idx;
    }
    std::uint32_t core() const { return static_cast<std::uint32_t>(tie >> 8) & 0xFFFFFF; }
    Ev type() const { return static_cast<Ev>(tie & 0xFF); }
    bool operator>(const Event& o) const {
        return time != o.time ? time > o.time : tie > o.tie;
    }
};

struct Incarnation {
    std::optional<Address> addr;
    std::uint64_t span = 0;
    std::size_t cls = 0;
    bool done = false;
    bool failed = false;
    bool freed = false;
    std::uint64_t done_time = 0;
    std::uint32_t accesses_done = 0;
    std::uint64_t access_time = 0;
    std::vector<std::uint32_t> waiters;
};

struct CoreState {
    std::vector<std::uint32_t> records;
    std::size_t pos = 0;
    std::uint64_t time = 0;
    std::uint64_t issue = 0;  // when the outstanding request was issued
    CoreTimes t;
};

struct PendingRequest {
    std::uint32_t record;
    std::uint32_t core;
    std::uint64_t issue;
};

std::size_t latency_bucket(std::uint64_t v) {
    std::size_t b = 0;
    while (v > 1 && b + 1 < kLatencyBuckets) v >>= 1, ++b;
    return b;
}

class Simulator {
public:
    Simulator(const Trace& trace, const SimConfig& config, SimLog* log)
        : trace_(trace), cfg_(config), kind_(config.allocator.kind), log_(log),
          threads_(trace.threads), cores_(trace.threads) {
        cfg_.check();
        auto report = validate(trace);
        if (!report.valid()) throw TraceError("invalid trace: " + report.summary());
        index_trace();

        std::vector<CoreKind> kinds(threads_, CoreKind::Main);
        if (kind_ == AllocatorKind::SpeedMalloc) kinds.push_back(CoreKind::Support);
        if (kind_ == AllocatorKind::IdleCore) kinds.push_back(CoreKind::Main);
        cache_.emplace(cfg_.hw, kinds, threads_);

        if (is_tiered()) {
            TieredConfig tc = cfg_.allocator.tiered;
            tc.mode = kind_ == AllocatorKind::Tiered ? TieredMode::Tiered
                                                     : TieredMode::ThreadLocalOnly;
            tiered_.emplace(threads_, tc, cfg_.allocator.heap);
        } else {
            heap_.emplace(cfg_.allocator.heap);
            if (kind_ == AllocatorKind::SpeedMalloc) {
                hmq_.emplace(threads_, cfg_.allocator.protocol.hmq_capacity);
                rb_.emplace(cfg_.allocator.protocol.rb_entries);
                front_.emplace(threads_);
            }
        }
    }

    Metrics run() {
        for (std::uint32_t c = 0; c < threads_; ++c) schedule_core(c, 0);
        while (!events_.empty()) {
            const Event e = events_.top();
            events_.pop();
            switch (e.type()) {
                case Ev::CoreReady: core_ready(e.core(), e.time); break;
                case Ev::Arrival: arrival(e.payload, e.time); break;
                case Ev::ServerStep: server_step(e.time); break;
            }
        }
        return finish();
    }

private:
    bool is_tiered() const {
        return kind_ == AllocatorKind::Tiered || kind_ == AllocatorKind::ThreadLocalOnly;
    }
    std::uint32_t server_core() const { return threads_; }

    void index_trace() {
        const auto& recs = trace_.records;
        if (recs.size() >= 0xFFFFFFFEULL) throw TraceError("trace has too many records");
        inc_of_.assign(recs.size(), 0);
        accesses_before_.assign(recs.size(), 0);
        FlatMap<std::uint32_t> current;
        current.reserve(recs.size() / 4);
        std::vector<std::uint32_t> access_count;
        for (std::uint32_t i = 0; i < recs.size(); ++i) {
            const auto& r = recs[i];
            cores_.at(r.thread).records.push_back(i);
            switch (r.kind) {
                case RecordKind::Malloc:
                    inc_of_[i] = current[r.object] = static_cast<std::uint32_t>(access_count.size());
                    access_count.push_back(0);
                    break;
                case RecordKind::Access:
                    inc_of_[i] = current_of(current, r.object);
                    ++access_count[inc_of_[i]];
                    break;
                case RecordKind::Free:
                    inc_of_[i] = current_of(current, r.object);
                    accesses_before_[i] = access_count[inc_of_[i]];
                    break;
                case RecordKind::Compute: break;
            }
        }
        incs_.resize(access_count.size());
    }

    void schedule_core(std::uint32_t c, std::uint64_t time) {
        const CoreState& cs = cores_[c];
        const std::uint64_t idx = cs.pos < cs.records.size() ? cs.records[cs.pos] : kDoneIdx;
        events_.push({time, idx, c, Ev::CoreReady, 0});
    }

    void wake(Incarnation& inc, std::uint64_t time) {
        for (std::uint32_t w : inc.waiters) schedule_core(w, std::max(cores_[w].time, time));
        inc.waiters.clear();
    }

    // Ready to run the next record of core c at `now`, unless it depends on
    // work another core has not finished.
    void core_ready(std::uint32_t c, std::uint64_t now) {
        CoreState& cs = cores_[c];
        while (true) {
            if (now > cs.time) {
                cs.t.dependency_wait += now - cs.time;
                cs.time = now;
            }
            if (cs.pos >= cs.records.size()) {
                cs.t.completion = cs.time;
                return;
            }
            const std::uint32_t ri = cs.records[cs.pos];
            const TraceRecord& r = trace_.records[ri];
            if (r.kind == RecordKind::Access || r.kind == RecordKind::Free) {
                Incarnation& inc = incs_[inc_of_[ri]];
                if (!inc.done) {
                    inc.waiters.push_back(c);
                    return;
                }
                std::uint64_t ready = inc.done_time;
                if (r.kind == RecordKind::Free) {
                    if (inc.accesses_done < accesses_before_[ri]) {
                        inc.waiters.push_back(c);
                        return;
                    }
                    ready = std::max(ready, inc.access_time);
                }
                if (ready > cs.time) {
                    schedule_core(c, ready);
                    return;
                }
            }
            if (!execute(c, ri)) return;
            ++cs.pos;
            // Keep going without the queue while this core's next step
            // would be popped first anyway.
            const std::uint64_t idx = cs.pos < cs.records.size() ? cs.records[cs.pos] : kDoneIdx;
            const Event next{cs.time, idx, c, Ev::CoreReady, 0};
            if (!events_.empty() && next > events_.top()) {
                events_.push(next);
                return;
            }
            now = cs.time;
        }
    }

    // Returns false when the core blocks on an offloaded request.
    bool execute(std::uint32_t c, std::uint32_t ri) {
        CoreState& cs = cores_[c];
        const TraceRecord& r = trace_.records[ri];
        switch (r.kind) {
            case RecordKind::Compute:
                cs.t.compute += r.cycles;
                cs.time += r.cycles;
                return true;
            case RecordKind::Access: {
                Incarnation& inc = incs_[inc_of_[ri]];
                if (inc.addr) {
                    for (std::uint32_t l = 0; l < r.lines; ++l) {
                        auto res = cache_->access(c, *inc.addr + l * std::uint64_t{64}, r.mode,
                                                  Stream::User);
                        cs.t.user_mem += res.latency;
                        cs.time += res.latency;
                    }
                }
                ++inc.accesses_done;
                inc.access_time = std::max(inc.access_time, cs.time);
                wake(inc, cs.time);
                return true;
            }
            case RecordKind::Malloc:
                ++mallocs_;
                if (is_tiered()) return tiered_malloc(c, ri);
                return offload(c, ri, OpKind::Malloc);
            case RecordKind::Free: {
                Incarnation& inc = incs_[inc_of_[ri]];
                inc.freed = true;
                if (!inc.addr) return true;
                ++frees_;
                if (is_tiered()) return tiered_free(c, ri);
                return offload(c, ri, OpKind::Free);
            }
        }
        return true;
    }

    std::uint64_t metadata_touches(std::uint32_t core, const std::vector<MetaTouch>& touches) {
        std::uint64_t lat = 0;
        for (const auto& t : touches) lat += cache_->access(core, t.addr, t.mode, Stream::Metadata).latency;
        return lat;
    }

    void atomics(CoreState& cs, std::uint32_t n) {
        for (std::uint32_t k = 0; k < n; ++k) {
            const std::uint64_t start = std::max(cs.time, atomic_free_at_);
            atomic_free_at_ = start + cfg_.allocator.cost.atomic_cycles;
            cs.t.atomic_sync += atomic_free_at_ - cs.time;
            cs.time = atomic_free_at_;
        }
    }

    void charge_local(std::uint32_t c, const CostEvents& ev) {
        CoreState& cs = cores_[c];
        const auto& cost = cfg_.allocator.cost;
        const std::uint64_t exec =
            cost.fast_cycles + (ev.chunk_acquisitions ? cost.generic_extra_cycles : 0);
        cs.t.alloc_exec += exec;
        cs.time += exec;
        atomics(cs, ev.atomic_syncs);
        std::uint64_t lat = metadata_touches(c, ev.local_touches);
        lat += metadata_touches(c, ev.shared_touches);
        cs.t.metadata_mem += lat;
        cs.time += lat;
    }

    bool tiered_malloc(std::uint32_t c, std::uint32_t ri) {
        CoreState& cs = cores_[c];
        const std::uint64_t issue = cs.time;
        auto a = tiered_->malloc(c, trace_.records[ri].size);
        charge_local(c, a.events);
        record_malloc(ri, a.address, a.block_bytes, a.cls, cs.time, issue);
        return true;
    }

    bool tiered_free(std::uint32_t c, std::uint32_t ri) {
        Incarnation& inc = incs_[inc_of_[ri]];
        auto ev = tiered_->free(c, *inc.addr);
        charge_local(c, ev);
        log_free(inc, cores_[c].time);
        return true;
    }

    void record_malloc(std::uint32_t ri, std::optional<Address> addr, std::uint64_t span,
                       std::size_t cls, std::uint64_t done, std::uint64_t issue) {
        Incarnation& inc = incs_[inc_of_[ri]];
        inc.addr = addr;
        inc.span = span;
        inc.cls = cls;
        inc.failed = !addr;
        inc.done = true;
        inc.done_time = done;
        ++malloc_latency_[latency_bucket(done - issue)];
        if (addr && log_) log_->allocs.push_back({AllocEvent::Kind::Alloc, done, *addr, span, cls});
        wake(inc, done);
    }

    void log_free(const Incarnation& inc, std::uint64_t time) {
        if (log_) log_->allocs.push_back({AllocEvent::Kind::Free, time, *inc.addr, inc.span, inc.cls});
    }

    bool offload(std::uint32_t c, std::uint32_t ri, OpKind op) {
        CoreState& cs = cores_[c];
        const TraceRecord& r = trace_.records[ri];
        const auto id = static_cast<std::uint32_t>(pending_.size());
        pending_.push_back({ri, c, cs.time});
        cs.issue = cs.time;
        std::uint64_t arrive;
        if (kind_ == AllocatorKind::SpeedMalloc) {
            const auto& pc = cfg_.allocator.protocol;
            const std::uint64_t payload = op == OpKind::Malloc ? r.size : *incs_[inc_of_[ri]].addr;
            packets_.push_back(op == OpKind::Malloc
                                   ? front_->malloc_start(c, payload, cfg_.process_id)
                                   : front_->free_start(c, payload, cfg_.process_id));
            arrive = cs.time + pc.signal_latency;
            if (op == OpKind::Malloc) {
                cs.t.compute += pc.overlap_cycles;
                cs.time += pc.overlap_cycles;
                front_->begin_wait(c);
            }
        } else {
            packets_.push_back({});
            arrive = cs.time + cfg_.allocator.cost.atomic_cycles;
        }
        events_.push({arrive, ri, c, Ev::Arrival, id});
        // Frees to the support core retire at once; everything else waits.
        return kind_ == AllocatorKind::SpeedMalloc && op == OpKind::Free;
    }

    void arrival(std::uint32_t id, std::uint64_t now) {
        if (kind_ == AllocatorKind::SpeedMalloc) {
            hmq_->dispatch(packets_[id], now);
            by_seq_.push_back(id);
        } else {
            fifo_.push_back(id);
        }
        if (server_idle_ && !step_scheduled_) {
            step_scheduled_ = true;
            events_.push({now, kServerIdx, server_core(), Ev::ServerStep, 0});
        }
    }

    void server_step(std::uint64_t now) {
        step_scheduled_ = false;
        std::optional<std::uint32_t> id;
        std::uint64_t malloc_pending = 0;
        std::uint64_t seq = 0;
        if (kind_ == AllocatorKind::SpeedMalloc) {
            malloc_pending = hmq_->malloc_queue_size() + hmq_->malloc_spill_size();
            if (auto req = hmq_->schedule_next()) {
                id = by_seq_.at(req->seq);
                seq = req->seq;
                support_.begin(*req);
            }
        } else if (!fifo_.empty()) {
            id = fifo_.front();
            seq = *id;
            fifo_.pop_front();
        }
        if (!id) {
            server_idle_ = true;
            return;
        }
        server_idle_ = false;
        serve(*id, now, seq, malloc_pending);
        step_scheduled_ = true;
        events_.push({server_free_at_, kServerIdx, server_core(), Ev::ServerStep, 0});
    }

    void serve(std::uint32_t id, std::uint64_t start, std::uint64_t seq, std::uint64_t malloc_pending) {
        const PendingRequest p = pending_[id];
        const TraceRecord& r = trace_.records[p.record];
        const auto& cost = cfg_.allocator.cost;
        const auto& pc = cfg_.allocator.protocol;
        const bool speed = kind_ == AllocatorKind::SpeedMalloc;
        const OpKind op = r.kind == RecordKind::Malloc ? OpKind::Malloc : OpKind::Free;
        if (log_) log_->services.push_back({start, p.core, op, seq, malloc_pending});

        std::uint64_t service = 0;
        if (speed && !rb_->lookup(cfg_.process_id)) service += pc.sysreg_install_cycles;
        Incarnation& inc = incs_[inc_of_[p.record]];
        std::optional<Address> result;
        if (op == OpKind::Malloc) {
            Allocation a = heap_->malloc(r.size);
            service += cost.fast_cycles + (a.path == AllocPath::Fast ? 0 : cost.generic_extra_cycles);
            service += metadata_touches(server_core(), a.touches);
            result = a.address;
            inc.span = a.block_bytes;
            inc.cls = a.cls;
        } else {
            const std::size_t cls = heap_->class_of(*inc.addr).value();
            const auto touches = heap_->metadata_touch_set(
                cls == kLargeClass ? MetaOp::LargeFree : MetaOp::Free, cls == kLargeClass ? 0 : cls);
            service += cost.fast_cycles + metadata_touches(server_core(), touches);
            heap_->free_block(*inc.addr);
            log_free(inc, start);
        }

        CoreState& cs = cores_[p.core];
        std::uint64_t busy = service;
        if (speed) {
            if (op == OpKind::Malloc) {
                DataPacket end = support_.malloc_end(result.value_or(0));
                hmq_->respond(end);
                front_->receive_end(*hmq_->pop_response());
                ++end_signals_;
                busy += pc.update_cycles;
                // With a long overlap the end can land before the core waits.
                const std::uint64_t resume =
                    std::max(start + service + pc.signal_latency, cs.time);
                cs.t.alloc_wait += resume - cs.time;
                cs.time = resume;
                record_malloc(p.record, result, inc.span, inc.cls, resume, p.issue);
                ++cs.pos;
                schedule_core(p.core, resume);
            } else {
                support_.free_end();
            }
        } else {
            busy += pc.update_cycles;
            const std::uint64_t resume = start + busy + cost.atomic_cycles;
            cs.t.atomic_sync += 2 * std::uint64_t{cost.atomic_cycles};
            cs.t.alloc_wait += resume - cs.time - 2 * std::uint64_t{cost.atomic_cycles};
            cs.time = resume;
            if (op == OpKind::Malloc) record_malloc(p.record, result, inc.span, inc.cls, resume, p.issue);
            ++cs.pos;
            schedule_core(p.core, resume);
        }
        server_busy_ += busy;
        server_free_at_ = start + busy;
    }

    Metrics finish() {
        Metrics m;
        m.kind = kind_;
        m.trace_hash = trace_hash(trace_);
        m.threads = threads_;
        for (std::uint32_t c = 0; c < threads_; ++c) {
            const CoreState& cs = cores_[c];
            if (cs.pos != cs.records.size()) throw Error("simulation stalled on core " + std::to_string(c));
            CoreTimes t = cs.t;
            t.completion = cs.time;
            if (t.sum() != t.completion) throw Error("core cycle split does not sum to completion");
            m.total_cycles = std::max(m.total_cycles, t.completion);
            m.cores.push_back(t);
        }
        const bool server = !is_tiered();
        if (server) {
            m.total_cycles = std::max(m.total_cycles, server_free_at_);
            m.server_busy = server_busy_;
            m.server_stall = m.total_cycles - server_busy_;
        }
        for (std::size_t c = 0; c < cache_->cores(); ++c) m.cache.push_back(cache_->stats(c));
        m.mallocs = mallocs_;
        m.frees = frees_;
        m.end_signals = end_signals_;
        if (tiered_) {
            m.mmap_calls = tiered_->heap().mmap_calls();
            m.peak_committed_bytes = tiered_->peak_committed_bytes();
            m.oom_events = tiered_->heap().oom_events();
            m.atomic_sync_events = tiered_->atomic_syncs();
            m.ownership_transfers = tiered_->ownership_transfers();
        } else {
            m.mmap_calls = heap_->mmap_calls();
            m.peak_committed_bytes = heap_->peak_committed_bytes();
            m.oom_events = heap_->oom_events();
            if (kind_ == AllocatorKind::IdleCore) m.atomic_sync_events = 2 * (mallocs_ + frees_);
        }
        for (const auto& inc : incs_)
            if (inc.addr && !inc.freed) m.live_bytes_at_end += inc.span;
        m.coherence_transfers = cache_->coherence_transfers();
        if (hmq_) m.peak_spill = hmq_->peak_spill();
        if (rb_) m.rb_misses = rb_->misses();
        m.malloc_latency = malloc_latency_;
        return m;
    }

    const Trace& trace_;
    SimConfig cfg_;
    AllocatorKind kind_;
    SimLog* log_;
    std::uint32_t threads_;

    std::vector<CoreState> cores_;
    std::vector<std::uint32_t> inc_of_;
    std::vector<std::uint32_t> accesses_before_;
    std::vector<Incarnation> incs_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;

    std::optional<CacheState> cache_;
    std::optional<TieredState> tiered_;
    std::optional<HeapState> heap_;
    std::optional<Hmq> hmq_;
    std::optional<RegisterBuffer> rb_;
    std::optional<MainCoreProtocol> front_;
    SupportCoreProtocol support_;

    std::vector<PendingRequest> pending_;
    std::vector<DataPacket> packets_;
    std::vector<std::uint32_t> by_seq_;
    std::deque<std::uint32_t> fifo_;
    bool server_idle_ = true;
    bool step_scheduled_ = false;
    std::uint64_t server_free_at_ = 0;
    std::uint64_t server_busy_ = 0;
    std::uint64_t atomic_free_at_ = 0;

    std::uint64_t mallocs_ = 0;
    std::uint64_t frees_ = 0;
    std::uint64_t end_signals_ = 0;
    std::array<std::uint64_t, kLatencyBuckets> malloc_latency_{};
};

}  // namespace

Metrics simulate(const Trace& trace, const SimConfig& config, SimLog* log) {
    return Simulator(trace, config, log).run();
}

ComparisonReport compare(const Metrics& a, const Metrics& b) {
    if (a.trace_hash != b.trace_hash) throw Error("compare: runs come from different traces");
    ComparisonReport rep;
    rep.speedup = a.total_cycles == 0 ? 1.0 : static_cast<double>(b.total_cycles) / a.total_cycles;
    rep.memory_ratio = a.peak_committed_bytes == 0
                           ? 1.0
                           : static_cast<double>(b.peak_committed_bytes) / a.peak_committed_bytes;
    rep.atomic_share_a = a.atomic_share();
    rep.atomic_share_b = b.atomic_share();
    rep.l2_miss_cycles_delta =
        static_cast<std::int64_t>(b.all_cache(Level::L2, Stream::User).miss_cycles +
                                  b.all_cache(Level::L2, Stream::Metadata).miss_cycles) -
        static_cast<std::int64_t>(a.all_cache(Level::L2, Stream::User).miss_cycles +
                                  a.all_cache(Level::L2, Stream::Metadata).miss_cycles);
    for (std::size_t i = 0; i < kCategoryFields.size(); ++i)
        rep.category_delta[i] = static_cast<std::int64_t>(b.sum_main(kCategoryFields[i])) -
                                static_cast<std::int64_t>(a.sum_main(kCategoryFields[i]));
    return rep;
}

}  // namespace simalloc
