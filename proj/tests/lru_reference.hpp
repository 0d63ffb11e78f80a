#pragma once

#include <algorithm>
#include <cstdint>
#include <list>
#include <map>
#include <set>
#include <vector>

// Brute-force hierarchy used as a test oracle: every set is a std::list in
// recency order, searched linearly on each access.
namespace lru_ref {

struct Level {
    std::uint64_t sets;
    std::uint32_t ways;
    std::uint32_t latency;
    std::vector<std::list<std::uint64_t>> lists;

    Level(std::uint64_t capacity, std::uint32_t w, std::uint32_t lat)
        : sets(capacity / (64ull * w)), ways(w), latency(lat), lists(sets) {}

    bool touch(std::uint64_t line) {
        auto& l = lists[line % sets];
        auto it = std::find(l.begin(), l.end(), line);
        if (it == l.end()) return false;
        l.splice(l.begin(), l, it);
        return true;
    }
    void fill(std::uint64_t line) {
        auto& l = lists[line % sets];
        auto it = std::find(l.begin(), l.end(), line);
        if (it != l.end()) {
            l.splice(l.begin(), l, it);
            return;
        }
        if (l.size() == ways) l.pop_back();
        l.push_front(line);
    }
    void drop(std::uint64_t line) { lists[line % sets].remove(line); }
};

// Outcome of one access: index of the level that hit (private levels, then
// the shared level) or -1 for memory, and the latency.
struct Outcome {
    int level;
    std::uint64_t latency;
    bool operator==(const Outcome&) const = default;
};

struct Hierarchy {
    std::vector<std::vector<Level>> priv;
    Level shared;
    std::uint32_t mem_latency, transfer_latency;
    std::map<std::uint64_t, int> writer;
    std::map<std::uint64_t, std::set<int>> readers;

    Outcome access(int core, std::uint64_t addr, bool write) {
        const std::uint64_t line = addr / 64;
        std::uint64_t lat = 0;
        auto w = writer.find(line);
        if (w != writer.end() && w->second != core) {
            for (auto& l : priv[w->second]) l.drop(line);
            readers[line].erase(w->second);
            writer.erase(w);
            shared.fill(line);
            lat += transfer_latency;
        }
        if (write) {
            for (int other : readers[line])
                if (other != core)
                    for (auto& l : priv[other]) l.drop(line);
            readers[line] = {core};
            writer[line] = core;
        } else {
            readers[line].insert(core);
        }
        std::vector<Level*> path;
        for (auto& l : priv[core]) path.push_back(&l);
        path.push_back(&shared);
        int hit = -1;
        std::size_t i = 0;
        for (; i < path.size(); ++i) {
            lat += path[i]->latency;
            if (path[i]->touch(line)) {
                hit = static_cast<int>(i);
                break;
            }
        }
        if (hit < 0) lat += mem_latency;
        for (std::size_t j = 0; j < std::min(i, path.size()); ++j) path[j]->fill(line);
        return {hit, lat};
    }
};

}  // namespace lru_ref
