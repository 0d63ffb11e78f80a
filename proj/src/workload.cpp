#include "simalloc/workload.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <queue>
#include <unordered_map>
#include <vector>

#include "simalloc/error.hpp"
#include "simalloc/rng.hpp"

namespace simalloc {

namespace {

struct KindName {
    WorkloadKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {WorkloadKind::Larson, "larson"},
    {WorkloadKind::Xmalloc, "xmalloc"},
    {WorkloadKind::Scratch, "scratch"},
    {WorkloadKind::ShBench, "shbench"},
    {WorkloadKind::Mstress, "mstress"},
    {WorkloadKind::AllocTest, "alloctest"},
    {WorkloadKind::ProducerConsumer, "producer-consumer"},
    {WorkloadKind::Uniform, "uniform"},
};

}  // namespace

std::string_view to_string(WorkloadKind kind) {
    for (const auto& k : kKindNames)
        if (k.kind == kind) return k.name;
    return "?";
}

WorkloadKind parse_workload_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "producerconsumer" || lower == "producer_consumer" || lower == "pc")
        return WorkloadKind::ProducerConsumer;
    for (const auto& k : kKindNames)
        if (k.name == lower) return k.kind;
    throw ConfigError("unknown workload kind '" + std::string(name) + "'");
}

WorkloadSpec WorkloadSpec::defaults(WorkloadKind kind, std::uint32_t threads,
                                    std::uint64_t total_ops, std::uint64_t seed) {
    WorkloadSpec s;
    s.kind = kind;
    s.threads = threads;
    s.total_ops = total_ops;
    s.seed = seed;
    switch (kind) {
        case WorkloadKind::Larson:
            s.min_size = 16;
            s.max_size = 1024;
            s.window = 1024;
            s.compute_gap = 4000;
            s.reuse_accesses = 2;
            break;
        case WorkloadKind::Xmalloc:
            s.min_size = 16;
            s.max_size = 512;
            s.compute_gap = 1500;
            break;
        case WorkloadKind::Scratch:
            s.min_size = 8;
            s.max_size = 32;
            s.compute_gap = 200;
            s.touch_lines = 1;
            s.reuse_accesses = 0;
            break;
        case WorkloadKind::ShBench:
            s.min_size = 16;
            s.max_size = 4096;
            s.burst = 64;
            s.compute_gap = 800;
            break;
        case WorkloadKind::Mstress:
            s.min_size = 16;
            s.max_size = 4096;
            s.compute_gap = 1000;
            break;
        case WorkloadKind::AllocTest:
            s.min_size = 16;
            s.max_size = 4096;
            s.pareto_shape = 1.5;
            s.compute_gap = 1000;
            break;
        case WorkloadKind::ProducerConsumer:
            s.min_size = 64;
            s.max_size = 64;
            s.window = 2048;
            s.compute_gap = 100;
            s.touch_lines = 1;
            s.reuse_accesses = 0;
            break;
        case WorkloadKind::Uniform:
            s.min_size = 16;
            s.max_size = 4096;
            s.burst = 16;
            break;
    }
    return s;
}

void WorkloadSpec::check() const {
    if (threads < 1) throw ConfigError("workload: threads must be >= 1");
    if (total_ops < threads) throw ConfigError("workload: total_ops must be >= threads");
    if (min_size < 1) throw ConfigError("workload: min_size must be >= 1");
    if (max_size < min_size) throw ConfigError("workload: max_size must be >= min_size");
    if (kind == WorkloadKind::AllocTest && !(pareto_shape > 0.0))
        throw ConfigError("workload: pareto_shape must be > 0 for alloctest");
    if (!(cross_free_fraction >= 0.0 && cross_free_fraction <= 1.0))
        throw ConfigError("workload: cross_free_fraction must lie in [0, 1]");
    if (window < 1) throw ConfigError("workload: window must be >= 1");
    if (burst < 1) throw ConfigError("workload: burst must be >= 1");
    if (mean_lifetime < 1) throw ConfigError("workload: mean_lifetime must be >= 1");
}

std::uint64_t truncated_pareto(double u, std::uint64_t min, std::uint64_t max, double shape) {
    const double lo = static_cast<double>(min);
    const double tail = std::pow(lo / static_cast<double>(max), shape);
    const double x = lo * std::pow(1.0 - u * (1.0 - tail), -1.0 / shape);
    const auto v = static_cast<std::uint64_t>(std::floor(x));
    return std::clamp(v, min, max);
}

namespace {

// Objects a thread currently owns, with O(1) random pick and removal.
class OwnedSet {
public:
    void add(std::uint64_t id) {
        pos_[id] = ids_.size();
        ids_.push_back(id);
    }
    void remove(std::uint64_t id) {
        auto it = pos_.find(id);
        if (it == pos_.end()) return;
        const std::size_t p = it->second;
        ids_[p] = ids_.back();
        pos_[ids_[p]] = p;
        ids_.pop_back();
        pos_.erase(id);
    }
    bool empty() const { return ids_.empty(); }
    std::size_t size() const { return ids_.size(); }
    std::uint64_t at(std::size_t i) const { return ids_[i]; }

private:
    std::vector<std::uint64_t> ids_;
    std::unordered_map<std::uint64_t, std::size_t> pos_;
};

class Builder {
public:
    explicit Builder(const WorkloadSpec& spec) : spec_(spec), owned_(spec.threads) {
        trace_.threads = spec.threads;
        trace_.seed = spec.seed;
        trace_.rng = std::string(SplitMix64::kName);
        for (std::uint32_t t = 0; t < spec.threads; ++t)
            rngs_.push_back(SplitMix64::stream(spec.seed, t));
        rngs_.push_back(SplitMix64::stream(spec.seed, spec.threads));  // scheduler stream
        const std::uint64_t mallocs = spec.total_ops / 2;
        for (std::uint32_t t = 0; t < spec.threads; ++t)
            budget_.push_back(mallocs / spec.threads + (t < mallocs % spec.threads ? 1 : 0));
    }

    SplitMix64& rng(std::uint32_t t) { return rngs_[t]; }
    SplitMix64& global() { return rngs_.back(); }
    const WorkloadSpec& spec() const { return spec_; }
    std::uint32_t threads() const { return spec_.threads; }

    std::uint64_t budget(std::uint32_t t) const { return budget_[t]; }
    std::uint64_t total_budget() const {
        std::uint64_t b = 0;
        for (auto x : budget_) b += x;
        return b;
    }

    std::uint64_t uniform_size(std::uint32_t t) { return rng(t).range(spec_.min_size, spec_.max_size); }

    // Log-uniform: small sizes are drawn far more often than large ones.
    std::uint64_t small_biased_size(std::uint32_t t) {
        const double lo = std::log(static_cast<double>(spec_.min_size));
        const double hi = std::log(static_cast<double>(spec_.max_size) + 1.0);
        const double x = std::exp(lo + rng(t).uniform() * (hi - lo));
        return std::clamp(static_cast<std::uint64_t>(x), spec_.min_size, spec_.max_size);
    }

    std::uint64_t pareto_size(std::uint32_t t) {
        return truncated_pareto(rng(t).uniform(), spec_.min_size, spec_.max_size,
                                spec_.pareto_shape);
    }

    void compute(std::uint32_t t) {
        if (spec_.compute_gap == 0) return;
        const double u = rng(t).uniform();
        const double c = -static_cast<double>(spec_.compute_gap) * std::log1p(-u);
        trace_.records.push_back(
            TraceRecord::compute(t, std::max<std::uint64_t>(1, std::llround(c))));
    }

    std::uint64_t malloc(std::uint32_t t, std::uint64_t size) {
        compute(t);
        const std::uint64_t id = next_id_++;
        trace_.records.push_back(TraceRecord::malloc(t, id, size));
        sizes_[id] = size;
        owner_[id] = t;
        owned_[t].add(id);
        if (budget_[t] > 0) --budget_[t];
        touch(t, id, spec_.touch_lines, AccessMode::Write);
        return id;
    }

    void free(std::uint32_t t, std::uint64_t id) {
        compute(t);
        touch(t, id, spec_.touch_lines, AccessMode::Read);
        trace_.records.push_back(TraceRecord::free(t, id));
        owned_[owner_[id]].remove(id);
        sizes_.erase(id);
        owner_.erase(id);
    }

    void touch(std::uint32_t t, std::uint64_t id, std::uint32_t lines, AccessMode mode) {
        if (lines == 0) return;
        const std::uint64_t max_lines = (sizes_.at(id) + kTraceLineBytes - 1) / kTraceLineBytes;
        const auto n = static_cast<std::uint32_t>(std::min<std::uint64_t>(lines, max_lines));
        trace_.records.push_back(TraceRecord::access(t, id, n, mode));
    }

    // Reads of random objects this thread allocated earlier (user working set).
    void reuse(std::uint32_t t) {
        for (std::uint32_t k = 0; k < spec_.reuse_accesses && !owned_[t].empty(); ++k) {
            const std::uint64_t id = owned_[t].at(rng(t).range(0, owned_[t].size() - 1));
            touch(t, id, 1, AccessMode::Read);
        }
    }

    std::uint32_t other_thread(std::uint32_t t) {
        if (spec_.threads < 2) return t;
        auto o = static_cast<std::uint32_t>(rng(t).range(0, spec_.threads - 2));
        return o >= t ? o + 1 : o;
    }

    bool cross(std::uint32_t t) {
        return spec_.threads > 1 && rng(t).uniform() < spec_.cross_free_fraction;
    }

    Trace take() { return std::move(trace_); }

private:
    const WorkloadSpec& spec_;
    Trace trace_;
    std::vector<SplitMix64> rngs_;
    std::vector<std::uint64_t> budget_;
    std::vector<OwnedSet> owned_;
    std::unordered_map<std::uint64_t, std::uint64_t> sizes_;
    std::unordered_map<std::uint64_t, std::uint32_t> owner_;
    std::uint64_t next_id_ = 1;
};

// Per-thread LIFO bursts: allocate up to `burst` objects, free them in reverse.
void gen_uniform(Builder& b) {
    const std::uint32_t T = b.threads();
    std::vector<std::vector<std::uint64_t>> stack(T);
    std::vector<bool> freeing(T, false);
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::uint32_t t = 0; t < T; ++t) {
            if (!freeing[t] && b.budget(t) > 0) {
                stack[t].push_back(b.malloc(t, b.uniform_size(t)));
                if (stack[t].size() == b.spec().burst || b.budget(t) == 0) freeing[t] = true;
                progress = true;
            } else if (!stack[t].empty() && (b.budget(t) > 0 || b.spec().teardown)) {
                b.reuse(t);
                b.free(t, stack[t].back());
                stack[t].pop_back();
                if (stack[t].empty()) freeing[t] = false;
                progress = true;
            }
        }
    }
}

// Sliding per-thread windows; a replacement frees a random slot (sometimes in
// another thread's window) and refills it.
void gen_larson(Builder& b) {
    const std::uint32_t T = b.threads();
    const std::uint32_t W = b.spec().window;
    std::vector<std::vector<std::uint64_t>> window(T);
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::uint32_t t = 0; t < T; ++t) {
            if (b.budget(t) == 0) continue;
            progress = true;
            b.reuse(t);
            if (window[t].size() < W) {
                window[t].push_back(b.malloc(t, b.uniform_size(t)));
                continue;
            }
            const std::uint32_t w = b.cross(t) ? b.other_thread(t) : t;
            if (window[w].empty()) {
                window[t].push_back(b.malloc(t, b.uniform_size(t)));
                continue;
            }
            const auto slot = b.rng(t).range(0, window[w].size() - 1);
            b.free(t, window[w][slot]);
            window[w][slot] = b.malloc(t, b.uniform_size(t));
        }
    }
    if (!b.spec().teardown) return;
    for (std::uint32_t t = 0; t < T; ++t)
        for (auto id : window[t]) b.free(t, id);
}

// Each object is queued to a freeing thread; with probability
// cross_free_fraction that is a different thread.
void gen_xmalloc(Builder& b) {
    const std::uint32_t T = b.threads();
    std::vector<std::deque<std::uint64_t>> inbox(T);
    while (true) {
        bool any = false;
        for (std::uint32_t t = 0; t < T; ++t) {
            const bool can_malloc = b.budget(t) > 0;
            const bool can_free = !inbox[t].empty() && (can_malloc || b.spec().teardown);
            if (!can_malloc && !can_free) continue;
            any = true;
            if (can_free && (!can_malloc || b.rng(t).uniform() < 0.5)) {
                b.free(t, inbox[t].front());
                inbox[t].pop_front();
            } else {
                const std::uint64_t id = b.malloc(t, b.uniform_size(t));
                b.reuse(t);
                inbox[b.cross(t) ? b.other_thread(t) : t].push_back(id);
            }
        }
        if (!any) break;
    }
}

// Rounds of: every thread allocates one sub-line object; the next thread writes
// it repeatedly and frees it; then every thread allocates and writes its own.
void gen_scratch(Builder& b) {
    const std::uint32_t T = b.threads();
    const std::uint32_t writes = std::max<std::uint32_t>(1, b.spec().scratch_writes);
    while (true) {
        std::vector<std::optional<std::uint64_t>> handed(T), own(T);
        bool any = false;
        for (std::uint32_t t = 0; t < T; ++t)
            if (b.budget(t) > 0) {
                handed[t] = b.malloc(t, b.uniform_size(t));
                any = true;
            }
        if (!any) break;
        for (std::uint32_t w = 0; w < writes; ++w)
            for (std::uint32_t t = 0; t < T; ++t)
                if (handed[t]) {
                    const std::uint32_t u = (t + 1) % T;
                    b.compute(u);
                    b.touch(u, *handed[t], 1, AccessMode::Write);
                }
        for (std::uint32_t t = 0; t < T; ++t)
            if (handed[t]) b.free((t + 1) % T, *handed[t]);
        for (std::uint32_t t = 0; t < T; ++t)
            if (b.budget(t) > 0) own[t] = b.malloc(t, b.uniform_size(t));
        for (std::uint32_t w = 0; w < writes; ++w)
            for (std::uint32_t t = 0; t < T; ++t)
                if (own[t]) {
                    b.compute(t);
                    b.touch(t, *own[t], 1, AccessMode::Write);
                }
        for (std::uint32_t t = 0; t < T; ++t)
            if (own[t]) b.free(t, *own[t]);
    }
}

// Bursts of small-biased allocations freed in random order by the same thread.
void gen_shbench(Builder& b) {
    const std::uint32_t T = b.threads();
    std::vector<std::vector<std::uint64_t>> held(T);
    std::vector<bool> freeing(T, false);
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::uint32_t t = 0; t < T; ++t) {
            if (!freeing[t] && b.budget(t) > 0) {
                held[t].push_back(b.malloc(t, b.small_biased_size(t)));
                if (held[t].size() >= b.spec().burst || b.budget(t) == 0) freeing[t] = true;
                progress = true;
            } else if (!held[t].empty() && (b.budget(t) > 0 || b.spec().teardown)) {
                b.reuse(t);
                const auto k = b.rng(t).range(0, held[t].size() - 1);
                b.free(t, held[t][k]);
                held[t][k] = held[t].back();
                held[t].pop_back();
                if (held[t].empty()) freeing[t] = false;
                progress = true;
            }
        }
    }
}

// Objects get a geometric lifetime in scheduler steps; whichever thread runs
// when an object expires frees it, so objects migrate between threads.
void gen_mstress(Builder& b) {
    const std::uint32_t T = b.threads();
    using Entry = std::pair<std::uint64_t, std::uint64_t>;  // (death step, object)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> deaths;
    const double p = 1.0 / static_cast<double>(b.spec().mean_lifetime);
    std::uint64_t step = 0;
    while (true) {
        bool any = false;
        for (std::uint32_t t = 0; t < T; ++t, ++step) {
            const bool expired = !deaths.empty() && deaths.top().first <= step;
            const bool drain = b.total_budget() == 0 && !deaths.empty() && b.spec().teardown;
            if (expired || drain) {
                b.free(t, deaths.top().second);
                deaths.pop();
                any = true;
            } else if (b.budget(t) > 0) {
                const std::uint64_t id = b.malloc(t, b.small_biased_size(t));
                b.reuse(t);
                const double u = b.rng(t).uniform();
                const auto life = static_cast<std::uint64_t>(std::ceil(std::log1p(-u) / std::log1p(-p)));
                deaths.push({step + std::max<std::uint64_t>(1, life), id});
                any = true;
            }
        }
        if (!any && (deaths.empty() || !b.spec().teardown)) break;
    }
}

// Random alloc/free mix per thread, Pareto sizes.
void gen_alloctest(Builder& b) {
    const std::uint32_t T = b.threads();
    std::vector<std::vector<std::uint64_t>> pool(T);
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::uint32_t t = 0; t < T; ++t) {
            const bool can_malloc = b.budget(t) > 0;
            const bool can_free = !pool[t].empty() && (can_malloc || b.spec().teardown);
            if (!can_malloc && !can_free) continue;
            progress = true;
            if (can_free && (!can_malloc || b.rng(t).uniform() < 0.5)) {
                b.reuse(t);
                const auto k = b.rng(t).range(0, pool[t].size() - 1);
                b.free(t, pool[t][k]);
                pool[t][k] = pool[t].back();
                pool[t].pop_back();
            } else {
                pool[t].push_back(b.malloc(t, b.pareto_size(t)));
            }
        }
    }
}

// Phase k: producer p = k mod T allocates a batch of `window` objects; each is
// then freed by the consumer (p - 1) mod T with probability
// cross_free_fraction, otherwise by the producer itself.
void gen_producer_consumer(Builder& b) {
    const std::uint32_t T = b.threads();
    const std::uint32_t W = b.spec().window;
    std::uint64_t remaining = b.total_budget();
    std::vector<std::uint64_t> batch;
    for (std::uint64_t phase = 0; remaining > 0; ++phase) {
        const auto p = static_cast<std::uint32_t>(phase % T);
        const std::uint32_t c = (p + T - 1) % T;
        batch.clear();
        for (std::uint32_t i = 0; i < W && remaining > 0; ++i, --remaining)
            batch.push_back(b.malloc(p, b.uniform_size(p)));
        const bool last = remaining == 0;
        if (last && !b.spec().teardown) break;
        for (auto id : batch) {
            const std::uint32_t freer = (T > 1 && b.rng(p).uniform() < b.spec().cross_free_fraction) ? c : p;
            b.free(freer, id);
        }
    }
}

}  // namespace

Trace generate(const WorkloadSpec& spec) {
    spec.check();
    Builder b(spec);
    switch (spec.kind) {
        case WorkloadKind::Uniform: gen_uniform(b); break;
        case WorkloadKind::Larson: gen_larson(b); break;
        case WorkloadKind::Xmalloc: gen_xmalloc(b); break;
        case WorkloadKind::Scratch: gen_scratch(b); break;
        case WorkloadKind::ShBench: gen_shbench(b); break;
        case WorkloadKind::Mstress: gen_mstress(b); break;
        case WorkloadKind::AllocTest: gen_alloctest(b); break;
        case WorkloadKind::ProducerConsumer: gen_producer_consumer(b); break;
    }
    return b.take();
}

}  // namespace simalloc
