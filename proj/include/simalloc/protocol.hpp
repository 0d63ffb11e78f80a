#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace simalloc {

struct ProtocolConfig {
    std::uint32_t signal_latency = 8;  // one way, main core <-> support core
    std::uint32_t overlap_cycles = 0;  // independent work between start and wait
    std::uint32_t update_cycles = 10;  // metadata phase after an End is sent
    std::uint32_t hmq_capacity = 128;
    std::uint32_t rb_entries = 16;
    std::uint32_t sysreg_install_cycles = 20;

    void check() const;
    friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

enum class Signal : std::uint8_t { Start, End };
enum class OpKind : std::uint8_t { Malloc, Free };

struct DataPacket {
    Signal signal = Signal::Start;
    OpKind op = OpKind::Malloc;
    std::uint32_t core = 0;
    std::uint32_t pid = 0;
    /// Request size (malloc start), object address (free start) or the
    /// returned address (malloc end).
    std::uint64_t payload = 0;
    bool includes_sysregs = false;

    friend bool operator==(const DataPacket&, const DataPacket&) = default;
};

/// Throws ProtocolViolation for an End packet of a free.
void check_packet(const DataPacket& p);
std::string encode(const DataPacket& p);
DataPacket decode(const std::string& text);

enum class CoreStage : std::uint8_t { Idle, Stage1Sent, Stage3Waiting, Stage4Resumed };
const char* to_string(CoreStage s);

/// Main-core side of the four instructions.
class MainCoreProtocol {
public:
    explicit MainCoreProtocol(std::uint32_t cores);

    /// Sends a malloc start and moves the core to Stage1Sent. Throws
    /// ProtocolViolation if the core already has a malloc outstanding.
    DataPacket malloc_start(std::uint32_t core, std::uint64_t size, std::uint32_t pid);
    /// Stage1Sent -> Stage3Waiting once any overlapped work is done.
    void begin_wait(std::uint32_t core);
    /// Fire-and-forget; the stage does not change.
    DataPacket free_start(std::uint32_t core, std::uint64_t addr, std::uint32_t pid);
    /// Delivers an End; Stage3Waiting -> Stage4Resumed.
    void receive_end(const DataPacket& end);

    CoreStage stage(std::uint32_t core) const { return stages_.at(core); }
    std::optional<std::uint64_t> last_result(std::uint32_t core) const { return result_.at(core); }

private:
    DataPacket start(OpKind op, std::uint32_t core, std::uint64_t payload, std::uint32_t pid);

    std::vector<CoreStage> stages_;
    std::vector<std::optional<std::uint64_t>> result_;
    std::set<std::uint32_t> sysregs_sent_;
};

struct Request {
    DataPacket packet;
    std::uint64_t seq = 0;      // dispatch order
    std::uint64_t arrival = 0;  // cycle the start signal reached the support core
};

/// Dispatch queues of the support core: malloc and free queues with FIFO
/// spill buffers behind them, and a response queue that is drained eagerly.
class Hmq {
public:
    Hmq(std::uint32_t cores, std::size_t capacity = 128);

    void dispatch(const DataPacket& p, std::uint64_t arrival = 0);
    /// Malloc requests first, each queue served round robin over cores;
    /// empty when there is nothing to serve.
    std::optional<Request> schedule_next();
    void respond(const DataPacket& end);
    std::optional<DataPacket> pop_response();

    std::size_t malloc_queue_size() const { return queues_[0].q.size(); }
    std::size_t free_queue_size() const { return queues_[1].q.size(); }
    std::size_t malloc_spill_size() const { return queues_[0].spill.size(); }
    std::size_t free_spill_size() const { return queues_[1].spill.size(); }
    std::size_t response_queue_size() const { return responses_.size(); }
    bool empty() const;
    std::size_t pending() const;
    /// Core served last from the malloc (or free) queue; starts at cores-1
    /// so core 0 is served first.
    std::uint32_t rr_cursor(OpKind op) const { return queues_[op == OpKind::Free].cursor; }
    void set_rr_cursor(OpKind op, std::uint32_t core);
    std::size_t capacity() const { return capacity_; }
    std::uint64_t peak_spill() const { return peak_spill_; }

private:
    struct Queue {
        std::deque<Request> q;
        std::deque<Request> spill;
        std::uint32_t cursor = 0;
    };
    std::optional<Request> take(Queue& queue);

    std::uint32_t cores_;
    std::size_t capacity_;
    Queue queues_[2];
    std::deque<DataPacket> responses_;
    std::uint64_t seq_ = 0;
    std::uint64_t peak_spill_ = 0;
    std::vector<std::ptrdiff_t> first_scratch_;
};

/// Direct-mapped cache of per-process translation registers keyed by pid.
class RegisterBuffer {
public:
    explicit RegisterBuffer(std::size_t entries = 16);
    /// True on a hit; a miss installs the pid, evicting the conflicting tag.
    bool lookup(std::uint32_t pid);
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

private:
    std::vector<std::optional<std::uint32_t>> tags_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

/// Support-core side: one request in service at a time.
class SupportCoreProtocol {
public:
    void begin(const Request& r);
    /// Completes the malloc in service and returns the End packet for the
    /// requesting core.
    DataPacket malloc_end(std::uint64_t returned_address);
    /// Completes the free in service; frees send nothing back.
    void free_end();
    bool busy() const { return current_.has_value(); }
    const std::optional<Request>& current() const { return current_; }

private:
    std::optional<Request> current_;
};

}  // namespace simalloc
