#pragma once

#include <cstdint>
#include <iterator>
#include <map>
#include <string>

// Independent live-set model: half-open intervals keyed by start address.
class IntervalSet {
public:
    // False when [addr, addr + len) intersects a live interval.
    bool insert(std::uint64_t addr, std::uint64_t len) {
        auto next = live_.lower_bound(addr);
        if (next != live_.end() && next->first < addr + len) return false;
        if (next != live_.begin()) {
            auto prev = std::prev(next);
            if (prev->first + prev->second > addr) return false;
        }
        live_.emplace(addr, len);
        return true;
    }
    // False when no live interval starts at addr.
    bool erase(std::uint64_t addr) { return live_.erase(addr) == 1; }
    std::size_t size() const { return live_.size(); }

private:
    std::map<std::uint64_t, std::uint64_t> live_;
};
