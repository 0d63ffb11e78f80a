#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace simalloc {

/// Cache line size assumed by trace validation (Access line bounds).
inline constexpr std::uint64_t kTraceLineBytes = 64;

enum class RecordKind : std::uint8_t { Malloc, Free, Access, Compute };
enum class AccessMode : std::uint8_t { Read, Write };

struct TraceRecord {
    RecordKind kind = RecordKind::Compute;
    std::uint32_t thread = 0;
    std::uint64_t object = 0;  // Malloc, Free, Access
    std::uint64_t size = 0;    // Malloc
    std::uint32_t lines = 0;   // Access
    AccessMode mode = AccessMode::Read;
    std::uint64_t cycles = 0;  // Compute

    static TraceRecord malloc(std::uint32_t thread, std::uint64_t object, std::uint64_t size) {
        return {RecordKind::Malloc, thread, object, size, 0, AccessMode::Read, 0};
    }
    static TraceRecord free(std::uint32_t thread, std::uint64_t object) {
        return {RecordKind::Free, thread, object, 0, 0, AccessMode::Read, 0};
    }
    static TraceRecord access(std::uint32_t thread, std::uint64_t object, std::uint32_t lines,
                              AccessMode mode) {
        return {RecordKind::Access, thread, object, 0, lines, mode, 0};
    }
    static TraceRecord compute(std::uint32_t thread, std::uint64_t cycles) {
        return {RecordKind::Compute, thread, 0, 0, 0, AccessMode::Read, cycles};
    }

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
    std::uint32_t threads = 1;
    std::uint64_t seed = 0;
    std::string rng = "splitmix64";
    std::vector<TraceRecord> records;

    friend bool operator==(const Trace&, const Trace&) = default;
};

enum class IssueKind : std::uint8_t {
    UnknownThread,
    FreeBeforeMalloc,
    DoubleFree,
    DuplicateMalloc,
    AccessBeforeMalloc,
    AccessAfterFree,
    AccessOutOfBounds,
    BadField,
};

const char* to_string(IssueKind kind);

struct ValidationIssue {
    std::size_t index;  // 0-based record index
    IssueKind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool valid() const { return issues.empty(); }
    std::string summary(std::size_t max_items = 5) const;
};

/// Checks the ordering and field rules of a trace. Never throws; every problem
/// becomes an issue tagged with the offending record index.
ValidationReport validate(const Trace& trace);

void write_trace(const Trace& trace, std::ostream& out);
std::string to_text(const Trace& trace);

/// Parses the v1 text format. Throws TraceError (with line number) on
/// malformed input or an unsupported header version.
Trace read_trace(std::istream& in);
Trace trace_from_text(const std::string& text);

Trace load_trace(const std::string& path);
void save_trace(const Trace& trace, const std::string& path);

/// FNV-1a 64 over the canonical text serialization.
std::uint64_t trace_hash(const Trace& trace);

}  // namespace simalloc
