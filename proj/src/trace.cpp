#include "simalloc/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "simalloc/error.hpp"
#include "simalloc/flat_map.hpp"

namespace simalloc {

const char* to_string(IssueKind kind) {
    switch (kind) {
        case IssueKind::UnknownThread: return "unknown-thread";
        case IssueKind::FreeBeforeMalloc: return "free-before-malloc";
        case IssueKind::DoubleFree: return "double-free";
        case IssueKind::DuplicateMalloc: return "duplicate-malloc";
        case IssueKind::AccessBeforeMalloc: return "access-before-malloc";
        case IssueKind::AccessAfterFree: return "access-after-free";
        case IssueKind::AccessOutOfBounds: return "access-out-of-bounds";
        case IssueKind::BadField: return "bad-field";
    }
    return "?";
}

std::string ValidationReport::summary(std::size_t max_items) const {
    if (issues.empty()) return "valid";
    std::ostringstream os;
    os << issues.size() << " issue(s)";
    for (std::size_t i = 0; i < issues.size() && i < max_items; ++i) {
        const auto& is = issues[i];
        os << "; record " << is.index << ": " << to_string(is.kind);
        if (!is.detail.empty()) os << " (" << is.detail << ")";
    }
    return os.str();
}

ValidationReport validate(const Trace& trace) {
    ValidationReport report;
    struct ObjectState {
        std::uint64_t size = 0;
        bool live = false;
    };
    FlatMap<ObjectState> objects;
    objects.reserve(trace.records.size() / 4);

    auto issue = [&](std::size_t i, IssueKind k, std::string detail = {}) {
        report.issues.push_back({i, k, std::move(detail)});
    };

    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& r = trace.records[i];
        if (r.thread >= trace.threads) {
            issue(i, IssueKind::UnknownThread, "thread " + std::to_string(r.thread));
            continue;
        }
        switch (r.kind) {
            case RecordKind::Compute:
                if (r.cycles == 0) issue(i, IssueKind::BadField, "compute cycles must be > 0");
                break;
            case RecordKind::Malloc: {
                if (r.size == 0) {
                    issue(i, IssueKind::BadField, "malloc size must be > 0");
                    break;
                }
                const ObjectState* prev = objects.find(r.object);
                if (prev && prev->live) {
                    issue(i, IssueKind::DuplicateMalloc, "object " + std::to_string(r.object));
                    break;
                }
                objects[r.object] = ObjectState{r.size, true};
                break;
            }
            case RecordKind::Free: {
                ObjectState* st = objects.find(r.object);
                if (!st)
                    issue(i, IssueKind::FreeBeforeMalloc, "object " + std::to_string(r.object));
                else if (!st->live)
                    issue(i, IssueKind::DoubleFree, "object " + std::to_string(r.object));
                else
                    st->live = false;
                break;
            }
            case RecordKind::Access: {
                if (r.lines == 0) {
                    issue(i, IssueKind::BadField, "access line count must be > 0");
                    break;
                }
                const ObjectState* st = objects.find(r.object);
                if (!st) {
                    issue(i, IssueKind::AccessBeforeMalloc, "object " + std::to_string(r.object));
                } else if (!st->live) {
                    issue(i, IssueKind::AccessAfterFree, "object " + std::to_string(r.object));
                } else {
                    const std::uint64_t max_lines =
                        (st->size + kTraceLineBytes - 1) / kTraceLineBytes;
                    if (r.lines > max_lines)
                        issue(i, IssueKind::AccessOutOfBounds,
                              std::to_string(r.lines) + " lines > " + std::to_string(max_lines));
                }
                break;
            }
        }
    }
    return report;
}

// --- text format -----------------------------------------------------------

namespace {

std::string header_line(const Trace& trace) {
    return "#SIMALLOC-TRACE v1 threads=" + std::to_string(trace.threads) +
           " seed=" + std::to_string(trace.seed) + " rng=" + trace.rng + '\n';
}

// One record line, newline included; at most 4 fields of 20 digits.
std::size_t format_record(const TraceRecord& r, char (&buf)[96]) {
    std::size_t n = 0;
    const auto num = [&](std::uint64_t v) {
        char digits[20];
        int k = 0;
        do {
            digits[k++] = static_cast<char>('0' + v % 10);
            v /= 10;
        } while (v != 0);
        buf[n++] = ' ';
        while (k > 0) buf[n++] = digits[--k];
    };
    switch (r.kind) {
        case RecordKind::Malloc:
            buf[n++] = 'M';
            num(r.thread);
            num(r.object);
            num(r.size);
            break;
        case RecordKind::Free:
            buf[n++] = 'F';
            num(r.thread);
            num(r.object);
            break;
        case RecordKind::Access:
            buf[n++] = 'A';
            num(r.thread);
            num(r.object);
            num(r.lines);
            buf[n++] = ' ';
            buf[n++] = r.mode == AccessMode::Read ? 'R' : 'W';
            break;
        case RecordKind::Compute:
            buf[n++] = 'C';
            num(r.thread);
            num(r.cycles);
            break;
    }
    buf[n++] = '\n';
    return n;
}

}  // namespace

void write_trace(const Trace& trace, std::ostream& out) {
    out << header_line(trace);
    char buf[96];
    for (const auto& r : trace.records) out.write(buf, static_cast<std::streamsize>(format_record(r, buf)));
}

std::string to_text(const Trace& trace) {
    std::ostringstream os;
    write_trace(trace, os);
    return os.str();
}

namespace {

// Splits on single spaces; empty fields (double spaces, leading or trailing
// blanks) make the line malformed.
std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t sp = line.find(' ', start);
        out.push_back(line.substr(start, sp == std::string_view::npos ? sp : sp - start));
        if (sp == std::string_view::npos) break;
        start = sp + 1;
    }
    return out;
}

template <typename T>
bool parse_uint(std::string_view s, T& value) {
    if (s.empty() || s.front() == '+' || s.front() == '-') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc() && ptr == s.data() + s.size();
}

template <typename T>
T field(std::string_view s, std::size_t line_no, const char* name) {
    T v{};
    if (!parse_uint(s, v))
        throw TraceError(line_no, std::string("bad ") + name + " '" + std::string(s) + "'");
    return v;
}

void parse_header(std::string_view line, Trace& t) {
    constexpr std::string_view magic = "#SIMALLOC-TRACE";
    auto f = split_fields(line);
    if (f.empty() || f[0] != magic) throw TraceError(1, "missing #SIMALLOC-TRACE header");
    if (f.size() < 2 || f[1].size() < 2 || f[1][0] != 'v')
        throw TraceError(1, "missing trace version");
    if (f[1] != "v1")
        throw TraceError(1, "unsupported trace version " + std::string(f[1]) + " (expected v1)");
    if (f.size() != 5) throw TraceError(1, "header must have threads=, seed= and rng= fields");
    auto kv = [&](std::string_view s, std::string_view key) {
        if (s.substr(0, key.size()) != key) throw TraceError(1, "expected " + std::string(key));
        return s.substr(key.size());
    };
    t.threads = field<std::uint32_t>(kv(f[2], "threads="), 1, "threads");
    t.seed = field<std::uint64_t>(kv(f[3], "seed="), 1, "seed");
    t.rng = std::string(kv(f[4], "rng="));
    if (t.threads == 0) throw TraceError(1, "threads must be >= 1");
    if (t.rng.empty()) throw TraceError(1, "empty rng name");
}

TraceRecord parse_record(std::string_view line, std::size_t n) {
    auto f = split_fields(line);
    if (f[0].size() != 1) throw TraceError(n, "unknown record '" + std::string(line) + "'");
    auto want = [&](std::size_t k) {
        if (f.size() != k)
            throw TraceError(n, "expected " + std::to_string(k) + " fields, got " +
                                    std::to_string(f.size()));
    };
    const auto tid = [&] { return field<std::uint32_t>(f[1], n, "thread id"); };
    switch (f[0][0]) {
        case 'M': {
            want(4);
            auto size = field<std::uint64_t>(f[3], n, "size");
            if (size == 0) throw TraceError(n, "malloc size must be > 0");
            return TraceRecord::malloc(tid(), field<std::uint64_t>(f[2], n, "object id"), size);
        }
        case 'F':
            want(3);
            return TraceRecord::free(tid(), field<std::uint64_t>(f[2], n, "object id"));
        case 'A': {
            want(5);
            auto lines = field<std::uint32_t>(f[3], n, "line count");
            if (lines == 0) throw TraceError(n, "access line count must be > 0");
            AccessMode mode;
            if (f[4] == "R") mode = AccessMode::Read;
            else if (f[4] == "W") mode = AccessMode::Write;
            else throw TraceError(n, "access mode must be R or W");
            return TraceRecord::access(tid(), field<std::uint64_t>(f[2], n, "object id"), lines,
                                       mode);
        }
        case 'C': {
            want(3);
            auto cycles = field<std::uint64_t>(f[2], n, "cycles");
            if (cycles == 0) throw TraceError(n, "compute cycles must be > 0");
            return TraceRecord::compute(tid(), cycles);
        }
        default:
            throw TraceError(n, "unknown record '" + std::string(line) + "'");
    }
}

}  // namespace

Trace read_trace(std::istream& in) {
    Trace t;
    std::string line;
    if (!std::getline(in, line)) throw TraceError(1, "empty input, header expected");
    if (!line.empty() && line.back() == '\r') throw TraceError(1, "CR line ending (LF only)");
    parse_header(line, t);
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) throw TraceError(n, "empty line");
        if (line.back() == '\r') throw TraceError(n, "CR line ending (LF only)");
        t.records.push_back(parse_record(line, n));
    }
    return t;
}

Trace trace_from_text(const std::string& text) {
    std::istringstream is(text);
    return read_trace(is);
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open trace file '" + path + "'");
    return read_trace(in);
}

void save_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceError("cannot write trace file '" + path + "'");
    write_trace(trace, out);
    if (!out) throw TraceError("write failed for '" + path + "'");
}

// 64-bit multiply-xorshift over the header and every record field; two
// traces hash alike exactly when their text is identical (up to collisions).
std::uint64_t trace_hash(const Trace& trace) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint64_t w) {
        h = (h ^ w) * 0x9e3779b97f4a7c15ULL;
        h ^= h >> 29;
    };
    mix(trace.threads);
    mix(trace.seed);
    for (unsigned char c : trace.rng) mix(c);
    mix(trace.records.size());
    for (const auto& r : trace.records) {
        mix(static_cast<std::uint64_t>(r.kind) | std::uint64_t{r.thread} << 8);
        switch (r.kind) {
            case RecordKind::Malloc:
                mix(r.object);
                mix(r.size);
                break;
            case RecordKind::Free: mix(r.object); break;
            case RecordKind::Access:
                mix(r.object);
                mix(std::uint64_t{r.lines} << 1 | (r.mode == AccessMode::Write));
                break;
            case RecordKind::Compute: mix(r.cycles); break;
        }
    }
    return h;
}

}  // namespace simalloc
