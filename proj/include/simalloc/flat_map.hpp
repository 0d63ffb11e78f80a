#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace simalloc {

/// Open-addressed hash map from 64-bit keys, linear probing with
/// backward-shift deletion. Used on the per-operation paths where node
/// allocation of std::unordered_map dominated.
template <typename V>
class FlatMap {
public:
    FlatMap() { slots_.resize(16); }

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    void reserve(std::size_t n) {
        std::size_t cap = slots_.size();
        while (cap < 2 * n) cap *= 2;
        if (cap != slots_.size()) rehash(cap);
    }

    V* find(std::uint64_t key) {
        for (std::size_t i = home(key);; i = next(i)) {
            Slot& s = slots_[i];
            if (!s.used) return nullptr;
            if (s.key == key) return &s.value;
        }
    }
    const V* find(std::uint64_t key) const { return const_cast<FlatMap*>(this)->find(key); }
    bool contains(std::uint64_t key) const { return find(key) != nullptr; }

    /// Inserts or overwrites.
    V& operator[](std::uint64_t key) {
        if (2 * (size_ + 1) > slots_.size()) rehash(slots_.size() * 2);
        for (std::size_t i = home(key);; i = next(i)) {
            Slot& s = slots_[i];
            if (!s.used) {
                s = Slot{key, V{}, true};
                ++size_;
                return s.value;
            }
            if (s.key == key) return s.value;
        }
    }

    /// False if the key was already present (value left unchanged).
    bool insert(std::uint64_t key, V value) {
        const std::size_t before = size_;
        V& slot = (*this)[key];
        if (size_ == before) return false;
        slot = std::move(value);
        return true;
    }

    bool erase(std::uint64_t key) {
        std::size_t i = home(key);
        while (true) {
            if (!slots_[i].used) return false;
            if (slots_[i].key == key) break;
            i = next(i);
        }
        // Shift later members of the probe run back over the hole.
        std::size_t hole = i;
        for (std::size_t j = next(i);; j = next(j)) {
            Slot& s = slots_[j];
            if (!s.used) break;
            const std::size_t h = home(s.key);
            const bool movable = hole <= j ? (h <= hole || h > j) : (h <= hole && h > j);
            if (movable) {
                slots_[hole] = std::move(s);
                hole = j;
            }
        }
        slots_[hole].used = false;
        --size_;
        return true;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (const Slot& s : slots_)
            if (s.used) f(s.key, s.value);
    }

private:
    struct Slot {
        std::uint64_t key = 0;
        V value{};
        bool used = false;
    };

    std::size_t home(std::uint64_t key) const {
        return static_cast<std::size_t>((key * 0x9e3779b97f4a7c15ULL) >> 20) & (slots_.size() - 1);
    }
    std::size_t next(std::size_t i) const { return (i + 1) & (slots_.size() - 1); }

    void rehash(std::size_t cap) {
        std::vector<Slot> old(cap);
        old.swap(slots_);
        size_ = 0;
        for (Slot& s : old)
            if (s.used) (*this)[s.key] = std::move(s.value);
    }

    std::vector<Slot> slots_;
    std::size_t size_ = 0;
};

}  // namespace simalloc
