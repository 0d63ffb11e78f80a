// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "interval_oracle.hpp"
#include "lru_reference.hpp"
#include "simalloc/alloc_core.hpp"
#include "simalloc/energy.hpp"
#include "simalloc/engine.hpp"
#include "simalloc/error.hpp"
#include "simalloc/memsim.hpp"
#include "simalloc/protocol.hpp"
#include "simalloc/rng.hpp"
#include "simalloc/tiered.hpp"
#include "simalloc/workload.hpp"

using namespace simalloc;

namespace {

// Pinned thresholds.
constexpr int kSafetyTraces = 100;
constexpr std::uint64_t kSafetyOps = 100000;
constexpr std::uint32_t kSafetyMaxThreads = 16;
constexpr double kSafetyBudgetSeconds = 60.0;
constexpr std::uint64_t kDoubleFreeStride = 32;
constexpr int kCacheAccesses = 10000;
constexpr int kSchedulerRuns = 10000;
constexpr double kLocalOnlyGrowth = 0.7;   // peak(T)/peak(1) >= this * T
constexpr double kCentralizedBlowup = 2.0; // peak(T)/peak(1) <= this
constexpr double kTieredBlowup = 3.0;
constexpr std::uint32_t kLarsonThreads = 16;
constexpr std::uint64_t kLarsonOps = 100000;
constexpr double kAtomicShareLow = 0.05;
constexpr double kAtomicShareHigh = 0.40;
constexpr double kLarsonBudgetSeconds = 30.0;
constexpr double kEnergyExample = 16337.2;
constexpr double kEnergyRelTol = 1e-9;
constexpr double kCycleDecrease = 0.0225;
constexpr std::uint32_t kPartitionThreads[] = {1, 2, 4, 8, 16};
constexpr std::uint64_t kPartitionOps = 40000;
constexpr std::uint64_t kPartitionSeed = 8;

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

SimConfig config_for(AllocatorKind kind) {
    SimConfig c;
    c.allocator.kind = kind;
    return c;
}

constexpr WorkloadKind kKinds[] = {WorkloadKind::Larson,  WorkloadKind::Xmalloc,
                                   WorkloadKind::Scratch, WorkloadKind::ShBench,
                                   WorkloadKind::Mstress, WorkloadKind::AllocTest,
                                   WorkloadKind::ProducerConsumer, WorkloadKind::Uniform};

// ---------------------------------------------------------------------------

// Live intervals from the simulator's allocation log, in the order the
// allocator state changed.
std::string check_log(const SimLog& log, std::uint64_t chunk) {
    IntervalSet live;
    for (const auto& e : log.allocs) {
        if (e.kind == AllocEvent::Kind::Alloc) {
            const std::uint64_t align = e.cls == kLargeClass ? chunk : e.span;
            if (e.addr % align != 0) return "misaligned block";
            if (!live.insert(e.addr, e.span)) return "overlapping live blocks";
        } else if (!live.erase(e.addr)) {
            return "free of a block that is not live";
        }
    }
    return {};
}

// Replays allocator calls directly and tries a second free after every
// kDoubleFreeStride-th freed block; each one must be rejected.
std::string double_free_probe(const Trace& t, AllocatorKind kind) {
    std::unordered_map<std::uint64_t, Address> addr;
    addr.reserve(t.records.size() / 2);
    std::uint64_t frees = 0;
    if (kind == AllocatorKind::SpeedMalloc || kind == AllocatorKind::IdleCore) {
        HeapState h;
        for (const auto& r : t.records) {
            if (r.kind == RecordKind::Malloc) {
                addr[r.object] = *h.malloc(r.size).address;
            } else if (r.kind == RecordKind::Free) {
                const Address a = addr.at(r.object);
                h.free_block(a);
                if (++frees % kDoubleFreeStride != 0) continue;
                try {
                    h.free_block(a);
                    return "double free accepted";
                } catch (const InvalidFree&) {
                }
            }
        }
    } else {
        TieredConfig tc;
        tc.mode = kind == AllocatorKind::Tiered ? TieredMode::Tiered : TieredMode::ThreadLocalOnly;
        TieredState s(t.threads, tc);
        for (const auto& r : t.records) {
            if (r.kind == RecordKind::Malloc) {
                addr[r.object] = *s.malloc(r.thread, r.size).address;
            } else if (r.kind == RecordKind::Free) {
                const Address a = addr.at(r.object);
                s.free(r.thread, a);
                if (++frees % kDoubleFreeStride != 0) continue;
                try {
                    s.free((r.thread + 1) % t.threads, a);
                    return "double free accepted";
                } catch (const InvalidFree&) {
                }
            }
        }
    }
    return {};
}

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(0xacce97);
    std::string problem;
    std::uint64_t blocks = 0;
    double gen_s = 0, sim_s = 0, log_s = 0, probe_s = 0;
    auto lap = [](std::chrono::steady_clock::time_point& mark) {
        const double d = seconds_since(mark);
        mark = std::chrono::steady_clock::now();
        return d;
    };
    for (int i = 0; i < kSafetyTraces && problem.empty(); ++i) {
        auto mark = std::chrono::steady_clock::now();
        const auto kind = kKinds[rng.range(0, std::size(kKinds) - 1)];
        const auto threads = static_cast<std::uint32_t>(rng.range(1, kSafetyMaxThreads));
        const Trace t = generate(WorkloadSpec::defaults(kind, threads, kSafetyOps, rng.next()));
        gen_s += lap(mark);
        for (AllocatorKind a : kAllAllocators) {
            SimLog log;
            const SimConfig cfg = config_for(a);
            simulate(t, cfg, &log);
            sim_s += lap(mark);
            blocks += log.allocs.size();
            std::string why = check_log(log, cfg.allocator.heap.chunk_size);
            log_s += lap(mark);
            // idlecore runs the same centralized heap as speedmalloc
            if (why.empty() && a != AllocatorKind::IdleCore) why = double_free_probe(t, a);
            probe_s += lap(mark);
            if (!why.empty()) {
                problem = std::string(to_string(a)) + " on trace " + std::to_string(i) + " (" +
                          std::string(to_string(kind)) + "): " + why;
                break;
            }
        }
    }
    const double secs = seconds_since(t0);
    report(1, problem.empty() && secs <= kSafetyBudgetSeconds,
           (problem.empty() ? std::string("no overlaps, misalignments or accepted double frees")
                            : problem) +
               " over " + std::to_string(kSafetyTraces) + " traces x 4 allocators, " +
               std::to_string(blocks) + " log events, " + fmt("%.1f", secs) + " s (limit " +
               fmt("%.0f", kSafetyBudgetSeconds) + " s; generate " + fmt("%.1f", gen_s) +
               ", simulate " + fmt("%.1f", sim_s) + ", interval check " + fmt("%.1f", log_s) +
               ", double-free probe " + fmt("%.1f", probe_s) + ")");
}

// ---------------------------------------------------------------------------

void criterion2() {
    HierarchyConfig hw;
    hw.l1 = {512, 2, 64, 1};
    hw.l2 = {2048, 4, 64, 5};
    hw.llc = {4096, 4, 64, 11};
    hw.sc_l1 = {512, 2, 64, 1};
    hw.dram_latency = 50;
    hw.coherence_latency = 30;
    CacheState c(hw, {CoreKind::Main, CoreKind::Main}, 2);
    lru_ref::Hierarchy ref{{{{hw.l1.capacity_bytes, hw.l1.associativity, hw.l1.hit_latency},
                             {hw.l2.capacity_bytes, hw.l2.associativity, hw.l2.hit_latency}},
                            {{hw.l1.capacity_bytes, hw.l1.associativity, hw.l1.hit_latency},
                             {hw.l2.capacity_bytes, hw.l2.associativity, hw.l2.hit_latency}}},
                           {hw.llc.capacity_bytes * 2, hw.llc.associativity, hw.llc.hit_latency},
                           hw.dram_latency, hw.coherence_latency, {}, {}};
    SplitMix64 rng(2024);
    int mismatch = -1;
    for (int i = 0; i < kCacheAccesses; ++i) {
        const int core = static_cast<int>(rng.range(0, 1));
        const std::uint64_t addr = rng.range(0, 383) * 64 + rng.range(0, 63);
        const bool write = rng.uniform() < 0.3;
        const auto got = c.access(core, addr, write ? AccessMode::Write : AccessMode::Read,
                                  rng.uniform() < 0.5 ? Stream::User : Stream::Metadata);
        const auto want = ref.access(core, addr, write);
        const int level = got.hit_level ? static_cast<int>(*got.hit_level) : -1;
        if (level != want.level || got.latency != want.latency) {
            mismatch = i;
            break;
        }
    }
    report(2, mismatch < 0,
           mismatch < 0 ? std::to_string(kCacheAccesses) + " accesses match the LRU reference"
                        : "first divergence at access " + std::to_string(mismatch));
}

// ---------------------------------------------------------------------------

std::string scheduler_run(std::uint64_t seed) {
    SplitMix64 rng(seed);
    const auto cores = static_cast<std::uint32_t>(rng.range(1, 16));
    Hmq q(cores, rng.range(2, 128));
    MainCoreProtocol mains(cores);
    SupportCoreProtocol support;
    // Requests of each core sitting in a dispatch queue, per op. Overflow
    // entries are invisible to the scheduler until they drain in.
    std::vector<std::uint64_t> pending[2] = {std::vector<std::uint64_t>(cores),
                                             std::vector<std::uint64_t>(cores)};
    std::deque<std::uint32_t> spilled[2];
    // served_since[op][c][d]: services of d from queue op since c was last
    // served or last became pending.
    std::vector<std::vector<std::uint32_t>> served_since[2];
    for (auto& s : served_since) s.assign(cores, std::vector<std::uint32_t>(cores, 0));
    std::vector<std::uint32_t> ends(cores, 0), mallocs(cores, 0);
    std::uint64_t next_addr = 0x1000;
    const auto spill_size = [&](int op) {
        return op == 0 ? q.malloc_spill_size() : q.free_spill_size();
    };
    const auto make_pending = [&](int op, std::uint32_t core) {
        if (pending[op][core] == 0)
            std::fill(served_since[op][core].begin(), served_since[op][core].end(), 0);
        ++pending[op][core];
    };
    const auto dispatch = [&](int op, const DataPacket& p) {
        const std::size_t before = spill_size(op);
        q.dispatch(p);
        if (spill_size(op) > before)
            spilled[op].push_back(p.core);
        else
            make_pending(op, p.core);
    };

    const auto deliver = [&]() {
        while (auto e = q.pop_response()) {
            ++ends[e->core];
            mains.receive_end(*e);
        }
    };
    const auto serve = [&]() -> std::string {
        const std::uint64_t waiting_mallocs =
            std::accumulate(pending[0].begin(), pending[0].end(), std::uint64_t{0});
        auto r = q.schedule_next();
        if (!r) return {};
        const int op = r->packet.op == OpKind::Free;
        if (op == 1 && waiting_mallocs > 0) return "free served while a malloc waited";
        const std::uint32_t d = r->packet.core;
        for (std::uint32_t c = 0; c < cores; ++c) {
            if (c == d || pending[op][c] == 0) continue;
            if (++served_since[op][c][d] > 1) return "core served twice while another waited";
        }
        std::fill(served_since[op][d].begin(), served_since[op][d].end(), 0);
        --pending[op][d];
        if (spill_size(op) < spilled[op].size()) {
            make_pending(op, spilled[op].front());
            spilled[op].pop_front();
        }
        support.begin(*r);
        if (op == 0) {
            // Responses are consumed eagerly; a full queue is drained first.
            if (q.response_queue_size() >= q.capacity()) deliver();
            q.respond(support.malloc_end(next_addr));
            next_addr += 64;
        } else {
            support.free_end();
        }
        return {};
    };

    const int steps = static_cast<int>(rng.range(1, 300));
    for (int s = 0; s < steps; ++s) {
        const double u = rng.uniform();
        const auto core = static_cast<std::uint32_t>(rng.range(0, cores - 1));
        if (u < 0.4) {
            const CoreStage st = mains.stage(core);
            if (st == CoreStage::Idle || st == CoreStage::Stage4Resumed) {
                ++mallocs[core];
                dispatch(0, mains.malloc_start(core, rng.range(1, 4096), 1));
                mains.begin_wait(core);
            }
        } else if (u < 0.65) {
            // A core blocked on its malloc cannot issue anything.
            if (mains.stage(core) == CoreStage::Stage3Waiting) continue;
            dispatch(1, mains.free_start(core, 0x40 * rng.range(1, 1000), 1));
        } else if (u < 0.9) {
            if (auto why = serve(); !why.empty()) return why;
        } else {
            deliver();
        }
    }
    while (!q.empty()) {
        if (auto why = serve(); !why.empty()) return why;
    }
    deliver();
    for (std::uint32_t c = 0; c < cores; ++c) {
        if (ends[c] != mallocs[c]) return "End count differs from malloc count";
        if (mallocs[c] > 0 && mains.stage(c) != CoreStage::Stage4Resumed) return "core left waiting";
    }
    return {};
}

void criterion3() {
    std::string problem;
    int bad = -1;
    for (int i = 0; i < kSchedulerRuns && problem.empty(); ++i) {
        try {
            problem = scheduler_run(0x5c4ed + i);
        } catch (const std::exception& e) {
            problem = e.what();
        }
        if (!problem.empty()) bad = i;
    }
    report(3, problem.empty(),
           problem.empty() ? std::to_string(kSchedulerRuns) +
                                 " interleavings: malloc priority, round-robin bound and one End per malloc hold"
                           : "run " + std::to_string(bad) + ": " + problem);
}

// ---------------------------------------------------------------------------

void criterion4() {
    const auto trace_for = [](std::uint32_t t) {
        return generate(
            WorkloadSpec::defaults(WorkloadKind::ProducerConsumer, t, 2ull * 2048 * 4 * t, 21));
    };
    const Trace one = trace_for(1);
    const double local1 = double(blowup_probe(TieredMode::ThreadLocalOnly, one));
    const double tiered1 = double(blowup_probe(TieredMode::Tiered, one));
    const double central1 = double(replay_peak_centralized(one));
    bool ok = true;
    std::string detail;
    for (std::uint32_t t : {1u, 2u, 4u, 8u}) {
        const Trace tr = trace_for(t);
        const double local = blowup_probe(TieredMode::ThreadLocalOnly, tr) / local1;
        const double tiered = blowup_probe(TieredMode::Tiered, tr) / tiered1;
        const double central = replay_peak_centralized(tr) / central1;
        ok = ok && local >= kLocalOnlyGrowth * t && central <= kCentralizedBlowup &&
             tiered <= kTieredBlowup;
        detail += " T=" + std::to_string(t) + " local-only " + fmt("%.2f", local) + " tiered " +
                  fmt("%.2f", tiered) + " centralized " + fmt("%.2f", central) + ";";
    }
    report(4, ok, "peak(T)/peak(1):" + detail);
}

// ---------------------------------------------------------------------------

void criterion5() {
    std::string problem;
    int runs = 0;
    for (WorkloadKind k : kKinds) {
        for (std::uint32_t t : {1u, 4u, 16u}) {
            const Trace tr = generate(WorkloadSpec::defaults(k, t, 20000, 5 + t));
            const Metrics m = simulate(tr, config_for(AllocatorKind::SpeedMalloc));
            ++runs;
            std::uint64_t meta_misses = 0;
            for (Level l : {Level::L1, Level::L2, Level::LLC})
                meta_misses += m.main_cache(l, Stream::Metadata).misses;
            if (meta_misses != 0 || m.sum_main(&CoreTimes::atomic_sync) != 0 ||
                m.atomic_sync_events != 0) {
                problem = std::string(to_string(k)) + " T=" + std::to_string(t) + ": " +
                          std::to_string(meta_misses) + " main metadata misses, " +
                          std::to_string(m.sum_main(&CoreTimes::atomic_sync)) + " atomic cycles";
                break;
            }
        }
        if (!problem.empty()) break;
    }
    report(5, problem.empty(),
           problem.empty() ? std::to_string(runs) +
                                 " runs: zero main-core metadata misses and zero atomic cycles"
                           : problem);
}

// ---------------------------------------------------------------------------

struct Larson {
    Metrics speed, tiered, idle;
    double seconds;
};

Larson larson_runs() {
    const auto t0 = std::chrono::steady_clock::now();
    const Trace tr = generate(WorkloadSpec::defaults(WorkloadKind::Larson, kLarsonThreads, kLarsonOps, 42));
    Larson l;
    SimConfig cfg = config_for(AllocatorKind::SpeedMalloc);
    cfg.allocator.cost.atomic_cycles = 700;
    l.speed = simulate(tr, cfg);
    cfg.allocator.kind = AllocatorKind::Tiered;
    l.tiered = simulate(tr, cfg);
    l.seconds = seconds_since(t0);
    cfg.allocator.kind = AllocatorKind::IdleCore;
    l.idle = simulate(tr, cfg);
    return l;
}

void criterion6(const Larson& l) {
    const double share = l.tiered.atomic_share();
    const bool ok = l.speed.total_cycles < l.tiered.total_cycles && share >= kAtomicShareLow &&
                    share <= kAtomicShareHigh && l.seconds <= kLarsonBudgetSeconds;
    report(6, ok,
           "speedmalloc " + std::to_string(l.speed.total_cycles) + " vs tiered " +
               std::to_string(l.tiered.total_cycles) + " cycles (speedup " +
               fmt("%.3f", double(l.tiered.total_cycles) / l.speed.total_cycles) +
               "), tiered atomic share " + fmt("%.3f", share) + " in [" +
               fmt("%.2f", kAtomicShareLow) + ", " + fmt("%.2f", kAtomicShareHigh) + "], " +
               fmt("%.1f", l.seconds) + " s");
}

void criterion7(const Larson& l) {
    report(7, l.speed.total_cycles < l.idle.total_cycles,
           "speedmalloc " + std::to_string(l.speed.total_cycles) + " vs idlecore " +
               std::to_string(l.idle.total_cycles) + " cycles");
}

// ---------------------------------------------------------------------------

void criterion8() {
    int up = 0, down_or_tie = 0;
    std::string detail;
    for (std::uint32_t threads : kPartitionThreads) {
        detail += " T=" + std::to_string(threads) + ":";
        for (WorkloadKind k : kKinds) {
            const Trace tr = generate(WorkloadSpec::defaults(k, threads, kPartitionOps, kPartitionSeed));
            SimConfig cfg = config_for(AllocatorKind::Tiered);
            const Metrics plain = simulate(tr, cfg);
            cfg.hw.l2_partition_meta_ways = 1;
            const Metrics part = simulate(tr, cfg);
            const auto delta = static_cast<std::int64_t>(part.total_cycles) -
                               static_cast<std::int64_t>(plain.total_cycles);
            if (delta > 0) ++up;
            else ++down_or_tie;
            detail += " " + std::string(to_string(k)) + " " + (delta > 0 ? "+" : "") + std::to_string(delta);
        }
        detail += ";";
    }
    report(8, up >= 1 && down_or_tie >= 1,
           std::to_string(up) + " slower, " + std::to_string(down_or_tie) +
               " faster or tied with one metadata way (cycle deltas):" + detail);
}

// ---------------------------------------------------------------------------

Metrics synthetic(unsigned cores, std::uint64_t cycles, std::uint64_t busy) {
    Metrics m;
    m.threads = cores;
    m.cores.assign(cores, CoreTimes{});
    for (auto& c : m.cores) c.completion = c.compute = cycles;
    m.total_cycles = cycles;
    m.server_busy = busy;
    m.server_stall = cycles - busy;
    return m;
}

void criterion9(const Larson& l) {
    const PowerModel p;
    const double e = energy(synthetic(16, 1000, 1000), p);
    const double rel = std::abs(e - kEnergyExample) / kEnergyExample;
    bool ok = rel <= kEnergyRelTol;
    // A 16-core system without a support core against one that is faster by
    // exactly the bound, with its support core busy throughout.
    bool bound_ok = true;
    for (std::uint64_t base : {1000ull, 40000ull, 1000000ull}) {
        const auto faster = static_cast<std::uint64_t>(base * (1.0 - kCycleDecrease));
        Metrics without = synthetic(16, base, 0);
        without.kind = AllocatorKind::Tiered;
        const Metrics with_support = synthetic(16, faster, faster);
        bound_ok = bound_ok && energy(with_support, p) < energy(without, p);
    }
    // The simulated pair from the Larson run, when it clears the bound.
    const bool applies =
        double(l.speed.total_cycles) <= (1.0 - kCycleDecrease) * double(l.tiered.total_cycles);
    const bool run_ok = !applies || energy(l.speed, p) < energy(l.tiered, p);
    ok = ok && bound_ok && run_ok;
    report(9, ok,
           "16-core example " + fmt("%.6f", e) + " (relative error " + fmt("%.1e", rel) +
               "); energy lower at a 2.25% cycle decrease: synthetic " +
               (bound_ok ? "yes" : "no") + ", larson pair " +
               (applies ? (run_ok ? "yes" : "no") : "n/a") + " (" +
               fmt("%.4g", energy(l.speed, p)) + " vs " + fmt("%.4g", energy(l.tiered, p)) + ")");
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion10() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "simalloc_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = SIMALLOC_CLI;
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        const fs::path d = dir / run;
        fs::create_directories(d);
        const std::string gen = "\"" + cli + "\" gen --workload xmalloc --threads 4 --ops 20000 --seed 9 --out \"" +
                                (d / "trace.txt").string() + "\"";
        const std::string sim = "\"" + cli + "\" run --trace \"" + (d / "trace.txt").string() +
                                "\" --allocator speedmalloc --out \"" + (d / "out").string() + "\"";
        ran = ran && std::system(gen.c_str()) == 0 && std::system(sim.c_str()) == 0;
    }
    const std::string ta = slurp(dir / "a" / "trace.txt"), tb = slurp(dir / "b" / "trace.txt");
    const std::string ma = slurp(dir / "a" / "out" / "metrics.csv");
    const std::string mb = slurp(dir / "b" / "out" / "metrics.csv");
    const bool ok = ran && !ta.empty() && !ma.empty() && ta == tb && ma == mb;
    report(10, ok,
           !ran ? "cli invocation failed"
                : "trace " + std::to_string(ta.size()) + " bytes " + (ta == tb ? "identical" : "differ") +
                      ", metrics " + std::to_string(ma.size()) + " bytes " + (ma == mb ? "identical" : "differ"));
    fs::remove_all(dir);
}

void guarded(int n, const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(n, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

// Arguments select criteria by number; none runs all.
int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const auto want = [&](int n) { return only.empty() || only.count(n) != 0; };
    if (want(1)) guarded(1, criterion1);
    if (want(2)) guarded(2, criterion2);
    if (want(3)) guarded(3, criterion3);
    if (want(4)) guarded(4, criterion4);
    if (want(5)) guarded(5, criterion5);
    Larson l;
    bool have_larson = false;
    if (want(6) || want(7) || want(9)) {
        try {
            l = larson_runs();
            have_larson = true;
        } catch (const std::exception& e) {
            for (int n : {6, 7, 9})
                if (want(n)) report(n, false, std::string("exception: ") + e.what());
        }
    }
    if (have_larson && want(6)) guarded(6, [&] { criterion6(l); });
    if (have_larson && want(7)) guarded(7, [&] { criterion7(l); });
    if (want(8)) guarded(8, criterion8);
    if (have_larson && want(9)) guarded(9, [&] { criterion9(l); });
    if (want(10)) guarded(10, criterion10);
    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
