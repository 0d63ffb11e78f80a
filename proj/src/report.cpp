#include "simalloc/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "simalloc/error.hpp"

namespace simalloc {

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw Error("csv: no column '" + name + "'");
}

const std::string& CsvTable::at(std::size_t row, const std::string& name) const {
    return rows.at(row).at(column(name));
}

std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

double to_num(const std::string& s) {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw Error("csv: bad number '" + s + "'");
    return v;
}

double ratio(double num, double den) { return den == 0.0 ? 1.0 : num / den; }

}  // namespace

const std::vector<std::string>& metrics_header() {
    static const std::vector<std::string> h = {
        "schema", "label", "allocator", "trace_hash", "threads", "total_cycles",
        "compute", "user_mem", "metadata_mem", "atomic_sync", "alloc_wait", "alloc_exec",
        "dependency_wait", "server_busy", "server_stall", "atomic_share", "energy",
        "main_user_l1_misses", "main_user_l2_misses", "main_user_l2_miss_cycles",
        "main_meta_l1_misses", "main_meta_l2_misses", "main_meta_l2_miss_cycles",
        "l2_miss_cycles", "server_meta_l1_misses", "server_meta_l1_miss_cycles",
        "coherence_transfers", "atomic_sync_events", "ownership_transfers", "mallocs", "frees",
        "end_signals", "mmap_calls", "peak_committed_bytes", "live_bytes_at_end", "oom_events",
        "peak_spill", "rb_misses"};
    return h;
}

std::vector<std::string> metrics_row(const std::string& label, const Metrics& m,
                                     const PowerModel& power) {
    auto u = [](std::uint64_t v) { return std::to_string(v); };
    const LevelStats uu1 = m.main_cache(Level::L1, Stream::User);
    const LevelStats uu2 = m.main_cache(Level::L2, Stream::User);
    const LevelStats mm1 = m.main_cache(Level::L1, Stream::Metadata);
    const LevelStats mm2 = m.main_cache(Level::L2, Stream::Metadata);
    LevelStats server;
    if (m.cache.size() > m.threads) server = m.cache.back().at(Level::L1, Stream::Metadata);
    const std::uint64_t l2 = m.all_cache(Level::L2, Stream::User).miss_cycles +
                             m.all_cache(Level::L2, Stream::Metadata).miss_cycles;
    std::vector<std::string> row = {kMetricsSchema, label, std::string(to_string(m.kind)),
                                    hex64(m.trace_hash), u(m.threads), u(m.total_cycles)};
    for (auto f : kCategoryFields) row.push_back(u(m.sum_main(f)));
    for (auto v : {m.server_busy, m.server_stall}) row.push_back(u(v));
    row.push_back(format_float(m.atomic_share()));
    row.push_back(format_float(energy(m, power)));
    for (auto v : {uu1.misses, uu2.misses, uu2.miss_cycles, mm1.misses, mm2.misses,
                   mm2.miss_cycles, l2, server.misses, server.miss_cycles, m.coherence_transfers,
                   m.atomic_sync_events, m.ownership_transfers, m.mallocs, m.frees, m.end_signals,
                   m.mmap_calls, m.peak_committed_bytes, m.live_bytes_at_end, m.oom_events,
                   m.peak_spill, m.rb_misses})
        row.push_back(u(v));
    return row;
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].find_first_of(",\n\"") != std::string::npos)
                throw Error("csv: cell needs quoting: " + cells[i]);
            out += (i ? "," : "") + cells[i];
        }
        out += '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) {
        if (r.size() != table.header.size()) throw Error("csv: row width differs from header");
        line(r);
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) throw Error("csv: row width differs from header");
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw Error("csv: missing header row");
    return t;
}

CsvTable load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    if (!out.flush()) throw Error("write failed for '" + path + "'");
}

const std::vector<std::string>& compare_header() {
    static const std::vector<std::string> h = [] {
        std::vector<std::string> v = {"schema", "label_a", "label_b", "allocator_a", "allocator_b",
                                      "trace_hash", "speedup", "atomic_share_a",
                                      "atomic_share_b", "l2_miss_cycles_delta",
                                      "peak_memory_ratio", "energy_ratio"};
        for (auto* c : kCategoryNames) v.push_back(std::string("delta_") + c);
        return v;
    }();
    return h;
}

std::vector<std::string> compare_row(const CsvTable& a, std::size_t ra, const CsvTable& b,
                                     std::size_t rb) {
    if (a.at(ra, "schema") != kMetricsSchema || b.at(rb, "schema") != kMetricsSchema)
        throw Error("compare: unsupported metrics schema");
    if (a.at(ra, "trace_hash") != b.at(rb, "trace_hash"))
        throw Error("compare: runs come from different traces (" + a.at(ra, "trace_hash") +
                    " vs " + b.at(rb, "trace_hash") + ")");
    auto num = [](const CsvTable& t, std::size_t r, const char* c) { return to_num(t.at(r, c)); };
    std::vector<std::string> row = {
        kCompareSchema, a.at(ra, "label"), b.at(rb, "label"), a.at(ra, "allocator"),
        b.at(rb, "allocator"), a.at(ra, "trace_hash"),
        format_float(ratio(num(b, rb, "total_cycles"), num(a, ra, "total_cycles"))),
        a.at(ra, "atomic_share"), b.at(rb, "atomic_share"),
        format_float(num(b, rb, "l2_miss_cycles") - num(a, ra, "l2_miss_cycles")),
        format_float(ratio(num(b, rb, "peak_committed_bytes"), num(a, ra, "peak_committed_bytes"))),
        format_float(ratio(num(b, rb, "energy"), num(a, ra, "energy")))};
    for (auto* c : kCategoryNames) row.push_back(format_float(num(b, rb, c) - num(a, ra, c)));
    return row;
}

std::string markdown_table(const CsvTable& table) {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        os << '|';
        for (const auto& c : cells) os << ' ' << c << " |";
        os << '\n';
    };
    line(table.header);
    os << '|';
    for (std::size_t i = 0; i < table.header.size(); ++i) os << " --- |";
    os << '\n';
    for (const auto& r : table.rows) line(r);
    return os.str();
}

std::string markdown_report(const std::string& title, const Metrics& m, const RunConfig& config) {
    std::ostringstream os;
    os << "# " << title << "\n\n";
    os << "- allocator: " << to_string(m.kind) << "\n";
    os << "- trace hash: " << hex64(m.trace_hash) << "\n";
    os << "- threads: " << m.threads << "\n";
    os << "- total cycles: " << m.total_cycles << "\n";
    os << "- energy: " << format_float(energy(m, config.power)) << "\n";
    os << "- atomic share: " << format_float(m.atomic_share()) << "\n";
    if (m.kind == AllocatorKind::SpeedMalloc || m.kind == AllocatorKind::IdleCore)
        os << "- server busy / stall: " << m.server_busy << " / " << m.server_stall << "\n";
    os << "- peak committed bytes: " << m.peak_committed_bytes << " (" << m.mmap_calls
       << " chunk acquisitions)\n\n";

    CsvTable cores;
    cores.header = {"core"};
    for (auto* c : kCategoryNames) cores.header.push_back(c);
    cores.header.push_back("completion");
    for (std::size_t i = 0; i < m.cores.size(); ++i) {
        std::vector<std::string> r = {std::to_string(i)};
        for (auto f : kCategoryFields) r.push_back(std::to_string(m.cores[i].*f));
        r.push_back(std::to_string(m.cores[i].completion));
        cores.rows.push_back(std::move(r));
    }
    os << "## Cycles per core\n\n" << markdown_table(cores) << "\n";

    CsvTable caches;
    caches.header = {"level", "stream", "hits", "misses", "miss_cycles"};
    for (Level l : {Level::L1, Level::L2, Level::LLC})
        for (Stream s : {Stream::User, Stream::Metadata}) {
            const LevelStats st = m.all_cache(l, s);
            caches.rows.push_back({l == Level::L1 ? "L1" : l == Level::L2 ? "L2" : "LLC",
                                   s == Stream::User ? "user" : "metadata", std::to_string(st.hits),
                                   std::to_string(st.misses), std::to_string(st.miss_cycles)});
        }
    os << "## Cache\n\n" << markdown_table(caches) << "\n";
    os << "## Configuration\n\n```\n" << to_config_text(config) << "```\n";
    return os.str();
}

std::string markdown_compare(const CsvTable& a, const CsvTable& b, const CsvTable& cmp) {
    std::ostringstream os;
    os << "# Comparison\n\n";
    os << "Baseline (b): " << b.at(0, "label") << " / " << b.at(0, "allocator") << ". ";
    os << "Candidate (a): " << a.at(0, "label") << " / " << a.at(0, "allocator") << ".\n\n";
    os << "Speedup is total_cycles(b) / total_cycles(a).\n\n";
    os << markdown_table(cmp);
    return os.str();
}

}  // namespace simalloc
