#include "simalloc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "simalloc/error.hpp"

namespace simalloc {

void RunConfig::check() const {
    sim.check();
    power.check();
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::uint32_t to_u32(std::string_view v) {
    const std::uint64_t x = parse_size(v);
    if (x > 0xffffffffu) throw ConfigError("value " + std::string(v) + " out of range");
    return static_cast<std::uint32_t>(x);
}

double to_double(std::string_view v) {
    std::string s(v);
    std::size_t used = 0;
    double d = 0;
    try {
        d = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty() || !std::isfinite(d))
        throw ConfigError("expected a number, got '" + s + "'");
    return d;
}

std::string fmt_double(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

std::string class_table_text(const SizeClassTable& t) {
    std::string s;
    for (auto v : t.sizes) s += (s.empty() ? "" : ",") + std::to_string(v);
    return s;
}

SizeClassTable parse_class_table(std::string_view v, std::uint64_t threshold) {
    SizeClassTable t;
    t.large_threshold = threshold;
    if (v == "pow2") {
        t = SizeClassTable::powers_of_two(16, 32768);
        t.large_threshold = threshold;
        return t;
    }
    while (!v.empty()) {
        const auto comma = v.find(',');
        t.sizes.push_back(parse_size(trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return t;
}

struct Field {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define SIMALLOC_U(path)                                                                \
    Field {                                                                             \
        [](RunConfig& c, std::string_view v) { c.path = to_u32(v); },                   \
            [](const RunConfig& c) { return std::to_string(c.path); }                   \
    }
#define SIMALLOC_U64(path)                                                              \
    Field {                                                                             \
        [](RunConfig& c, std::string_view v) { c.path = parse_size(v); },               \
            [](const RunConfig& c) { return std::to_string(c.path); }                   \
    }
#define SIMALLOC_D(path)                                                                \
    Field {                                                                             \
        [](RunConfig& c, std::string_view v) { c.path = to_double(v); },                \
            [](const RunConfig& c) { return fmt_double(c.path); }                       \
    }

const std::vector<std::pair<std::string, Field>>& table() {
    static const std::vector<std::pair<std::string, Field>> fields = {
        {"engine.allocator",
         {[](RunConfig& c, std::string_view v) { c.sim.allocator.kind = parse_allocator_kind(v); },
          [](const RunConfig& c) { return std::string(to_string(c.sim.allocator.kind)); }}},
        {"engine.atomic_cycles", SIMALLOC_U(sim.allocator.cost.atomic_cycles)},
        {"engine.alloc_fast_instr_cycles", SIMALLOC_U(sim.allocator.cost.fast_cycles)},
        {"engine.alloc_generic_extra_cycles", SIMALLOC_U(sim.allocator.cost.generic_extra_cycles)},
        {"engine.process_id", SIMALLOC_U(sim.process_id)},

        {"heap.class_table",
         {[](RunConfig& c, std::string_view v) {
              auto& h = c.sim.allocator.heap;
              h.classes = parse_class_table(v, h.classes.large_threshold);
          },
          [](const RunConfig& c) { return class_table_text(c.sim.allocator.heap.classes); }}},
        {"heap.large_threshold", SIMALLOC_U64(sim.allocator.heap.classes.large_threshold)},
        {"heap.chunk_size", SIMALLOC_U64(sim.allocator.heap.chunk_size)},
        {"heap.chunk_budget", SIMALLOC_U64(sim.allocator.heap.chunk_budget)},
        {"heap.meta_lines_fast", SIMALLOC_U(sim.allocator.heap.meta_lines_fast)},
        {"heap.meta_lines_generic", SIMALLOC_U(sim.allocator.heap.meta_lines_generic)},

        {"tiered.batch_size", SIMALLOC_U(sim.allocator.tiered.batch_size)},
        {"tiered.local_cap", SIMALLOC_U(sim.allocator.tiered.local_cap)},

        {"protocol.signal_lat", SIMALLOC_U(sim.allocator.protocol.signal_latency)},
        {"protocol.overlap_cycles", SIMALLOC_U(sim.allocator.protocol.overlap_cycles)},
        {"protocol.update_cycles", SIMALLOC_U(sim.allocator.protocol.update_cycles)},
        {"protocol.hmq_capacity", SIMALLOC_U(sim.allocator.protocol.hmq_capacity)},
        {"protocol.rb_entries", SIMALLOC_U(sim.allocator.protocol.rb_entries)},
        {"protocol.sysreg_install_cycles", SIMALLOC_U(sim.allocator.protocol.sysreg_install_cycles)},

        {"hw.l1_size", SIMALLOC_U64(sim.hw.l1.capacity_bytes)},
        {"hw.l1_ways", SIMALLOC_U(sim.hw.l1.associativity)},
        {"hw.l1_lat", SIMALLOC_U(sim.hw.l1.hit_latency)},
        {"hw.l2_size", SIMALLOC_U64(sim.hw.l2.capacity_bytes)},
        {"hw.l2_ways", SIMALLOC_U(sim.hw.l2.associativity)},
        {"hw.l2_lat", SIMALLOC_U(sim.hw.l2.hit_latency)},
        {"hw.llc_size", SIMALLOC_U64(sim.hw.llc.capacity_bytes)},
        {"hw.llc_ways", SIMALLOC_U(sim.hw.llc.associativity)},
        {"hw.llc_lat", SIMALLOC_U(sim.hw.llc.hit_latency)},
        {"hw.sc_l1_size", SIMALLOC_U64(sim.hw.sc_l1.capacity_bytes)},
        {"hw.sc_l1_ways", SIMALLOC_U(sim.hw.sc_l1.associativity)},
        {"hw.sc_l1_lat", SIMALLOC_U(sim.hw.sc_l1.hit_latency)},
        {"hw.dram_lat", SIMALLOC_U(sim.hw.dram_latency)},
        {"hw.coherence_lat", SIMALLOC_U(sim.hw.coherence_latency)},
        {"hw.l2_partition_meta_ways", SIMALLOC_U(sim.hw.l2_partition_meta_ways)},

        {"power.main_core_power", SIMALLOC_D(power.main_core_power)},
        {"power.support_core_power_ratio", SIMALLOC_D(power.support_core_power_ratio)},
        {"power.support_area_ratio", SIMALLOC_D(power.support_area_ratio)},
        {"power.idle_power_fraction", SIMALLOC_D(power.idle_power_fraction)},
        {"power.uncore_power_ratio", SIMALLOC_D(power.uncore_power_ratio)},
    };
    return fields;
}

#undef SIMALLOC_U
#undef SIMALLOC_U64
#undef SIMALLOC_D

const Field& field(std::string_view qualified) {
    for (const auto& [name, f] : table())
        if (name == qualified) return f;
    throw ConfigError("unknown config key '" + std::string(qualified) + "'");
}

}  // namespace

std::uint64_t parse_size(std::string_view text) {
    text = trim(text);
    std::uint64_t mult = 1;
    if (!text.empty()) {
        switch (text.back()) {
            case 'K': case 'k': mult = 1024; break;
            case 'M': case 'm': mult = 1024 * 1024; break;
            case 'G': case 'g': mult = 1024ull * 1024 * 1024; break;
            default: break;
        }
        if (mult != 1) text.remove_suffix(1);
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("expected an integer, got '" + std::string(text) + "'");
    if (v > UINT64_MAX / mult) throw ConfigError("value out of range");
    return v * mult;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : table()) k.push_back(name);
        return k;
    }();
    return keys;
}

std::string resolve_key(std::string_view key) {
    key = trim(key);
    if (key.find('.') != std::string_view::npos) {
        field(key);
        return std::string(key);
    }
    std::string found;
    for (const auto& name : config_keys()) {
        const auto dot = name.find('.');
        if (dot == std::string::npos || name.compare(dot + 1, std::string::npos, key) != 0) continue;
        if (!found.empty()) throw ConfigError("ambiguous config key '" + std::string(key) + "'");
        found = name;
    }
    if (found.empty()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    return found;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
    const std::string k = resolve_key(key);
    try {
        field(k).set(config, trim(value));
    } catch (const ConfigError& e) {
        throw ConfigError(k + ": " + e.what());
    }
}

std::string get_setting(const RunConfig& config, std::string_view key) {
    return field(resolve_key(key)).get(config);
}

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        try {
            const std::string key = resolve_key(line.substr(0, eq));
            if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
            apply_setting(c, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    c.check();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_config_text(const RunConfig& config) {
    std::string out;
    for (const auto& [name, f] : table()) out += name + "=" + f.get(config) + "\n";
    return out;
}

}  // namespace simalloc
