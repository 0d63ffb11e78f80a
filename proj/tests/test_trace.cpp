#include <doctest.h>

#include <sstream>

#include "simalloc/error.hpp"
#include "simalloc/trace.hpp"

using namespace simalloc;

TEST_SUITE("trace") {

TEST_CASE("balanced pair is valid") {
    Trace t;
    t.records = {TraceRecord::malloc(0, 1, 64), TraceRecord::free(0, 1)};
    CHECK(validate(t).valid());
}

TEST_CASE("free before malloc is reported at its index") {
    Trace t;
    t.records = {TraceRecord::free(0, 9)};
    auto r = validate(t);
    REQUIRE(r.issues.size() == 1);
    CHECK(r.issues[0].index == 0);
    CHECK(r.issues[0].kind == IssueKind::FreeBeforeMalloc);
}

TEST_CASE("double free is reported at the second free") {
    Trace t;
    t.threads = 2;
    t.records = {TraceRecord::malloc(0, 1, 64), TraceRecord::free(0, 1), TraceRecord::free(1, 1)};
    auto r = validate(t);
    REQUIRE(r.issues.size() == 1);
    CHECK(r.issues[0].index == 2);
    CHECK(r.issues[0].kind == IssueKind::DoubleFree);
    CHECK(std::string(to_string(IssueKind::DoubleFree)) == "double-free");
}

TEST_CASE("other ordering faults") {
    Trace t;
    t.threads = 2;
    t.records = {TraceRecord::access(0, 4, 1, AccessMode::Read),  // before malloc
                 TraceRecord::malloc(2, 5, 16),                     // unknown thread
                 TraceRecord::malloc(0, 1, 64),
                 TraceRecord::access(1, 1, 2, AccessMode::Write),   // 64 bytes hold 1 line
                 TraceRecord::free(0, 1),
                 TraceRecord::access(0, 1, 1, AccessMode::Read)};  // after free
    auto r = validate(t);
    std::vector<IssueKind> kinds;
    for (auto& i : r.issues) kinds.push_back(i.kind);
    CHECK(kinds == std::vector<IssueKind>{IssueKind::AccessBeforeMalloc, IssueKind::UnknownThread,
                                          IssueKind::AccessOutOfBounds, IssueKind::AccessAfterFree});
}

TEST_CASE("object ids may be reused after free") {
    Trace t;
    t.records = {TraceRecord::malloc(0, 1, 64), TraceRecord::free(0, 1),
                 TraceRecord::malloc(0, 1, 128), TraceRecord::access(0, 1, 2, AccessMode::Read),
                 TraceRecord::free(0, 1)};
    CHECK(validate(t).valid());
}

TEST_CASE("empty trace round-trips through a header-only file") {
    Trace t;
    t.threads = 3;
    t.seed = 77;
    const std::string text = to_text(t);
    CHECK(text == "#SIMALLOC-TRACE v1 threads=3 seed=77 rng=splitmix64\n");
    CHECK(trace_from_text(text) == t);
}

TEST_CASE("three records round-trip") {
    Trace t;
    t.threads = 2;
    t.seed = 5;
    t.records = {TraceRecord::malloc(1, 7, 100), TraceRecord::access(0, 7, 2, AccessMode::Write),
                 TraceRecord::compute(1, 30)};
    const std::string text = to_text(t);
    CHECK(text ==
          "#SIMALLOC-TRACE v1 threads=2 seed=5 rng=splitmix64\nM 1 7 100\nA 0 7 2 W\nC 1 30\n");
    CHECK(trace_from_text(text) == t);
}

TEST_CASE("version 2 header is rejected") {
    try {
        trace_from_text("#SIMALLOC-TRACE v2 threads=1 seed=0 rng=splitmix64\n");
        FAIL("accepted");
    } catch (const TraceError& e) {
        CHECK(e.line() == 1);
        CHECK(std::string(e.what()).find("unsupported trace version") != std::string::npos);
    }
}

TEST_CASE("malformed lines carry their line number") {
    const std::string head = "#SIMALLOC-TRACE v1 threads=1 seed=0 rng=splitmix64\n";
    for (const char* bad : {"M 0 1\n", "X 0 1\n", "A 0 1 1 Q\n", "C 0 0\n", "M 0 1 0\n",
                            "M  0 1 8\n", "F 0 -1\n", "\n"}) {
        CAPTURE(bad);
        try {
            trace_from_text(head + "C 0 5\n" + bad);
            FAIL("accepted");
        } catch (const TraceError& e) {
            CHECK(e.line() == 3);
        }
    }
    CHECK_THROWS_AS(trace_from_text(""), TraceError);
    CHECK_THROWS_AS(trace_from_text(head.substr(0, head.size() - 1) + "\r\n"), TraceError);
}

TEST_CASE("hash follows the text") {
    Trace a;
    a.records = {TraceRecord::compute(0, 10)};
    Trace b = a;
    CHECK(trace_hash(a) == trace_hash(b));
    b.records[0].cycles = 11;
    CHECK(trace_hash(a) != trace_hash(b));
}

}
