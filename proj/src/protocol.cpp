#include "simalloc/protocol.hpp"

#include <sstream>

#include "simalloc/error.hpp"

namespace simalloc {

void ProtocolConfig::check() const {
    if (signal_latency == 0) throw ConfigError("signal_lat must be > 0");
    if (hmq_capacity == 0) throw ConfigError("hmq_capacity must be >= 1");
    if (rb_entries == 0) throw ConfigError("rb_entries must be >= 1");
}

void check_packet(const DataPacket& p) {
    if (p.signal == Signal::End && p.op == OpKind::Free)
        throw ProtocolViolation("free operations have no end signal");
}

std::string encode(const DataPacket& p) {
    check_packet(p);
    std::ostringstream os;
    os << (p.signal == Signal::Start ? "start" : "end") << ' '
       << (p.op == OpKind::Malloc ? "malloc" : "free") << ' ' << p.core << ' ' << p.pid << ' '
       << p.payload << ' ' << (p.includes_sysregs ? 1 : 0);
    return os.str();
}

DataPacket decode(const std::string& text) {
    std::istringstream is(text);
    std::string sig, op;
    int regs = -1;
    DataPacket p;
    if (!(is >> sig >> op >> p.core >> p.pid >> p.payload >> regs) || !(is >> std::ws).eof())
        throw ProtocolViolation("malformed packet '" + text + "'");
    if (sig == "start")
        p.signal = Signal::Start;
    else if (sig == "end")
        p.signal = Signal::End;
    else
        throw ProtocolViolation("bad signal '" + sig + "'");
    if (op == "malloc")
        p.op = OpKind::Malloc;
    else if (op == "free")
        p.op = OpKind::Free;
    else
        throw ProtocolViolation("bad op '" + op + "'");
    if (regs != 0 && regs != 1) throw ProtocolViolation("bad sysreg flag");
    p.includes_sysregs = regs == 1;
    check_packet(p);
    return p;
}

const char* to_string(CoreStage s) {
    switch (s) {
        case CoreStage::Idle: return "idle";
        case CoreStage::Stage1Sent: return "stage1-sent";
        case CoreStage::Stage3Waiting: return "stage3-waiting";
        case CoreStage::Stage4Resumed: return "stage4-resumed";
    }
    return "?";
}

MainCoreProtocol::MainCoreProtocol(std::uint32_t cores)
    : stages_(cores, CoreStage::Idle), result_(cores) {}

DataPacket MainCoreProtocol::start(OpKind op, std::uint32_t core, std::uint64_t payload,
                                   std::uint32_t pid) {
    DataPacket p{Signal::Start, op, core, pid, payload, false};
    p.includes_sysregs = sysregs_sent_.insert(pid).second;
    return p;
}

DataPacket MainCoreProtocol::malloc_start(std::uint32_t core, std::uint64_t size,
                                          std::uint32_t pid) {
    CoreStage& s = stages_.at(core);
    if (s != CoreStage::Idle && s != CoreStage::Stage4Resumed)
        throw ProtocolViolation("malloc start on core " + std::to_string(core) + " while " +
                                to_string(s));
    s = CoreStage::Stage1Sent;
    result_[core].reset();
    return start(OpKind::Malloc, core, size, pid);
}

void MainCoreProtocol::begin_wait(std::uint32_t core) {
    CoreStage& s = stages_.at(core);
    if (s != CoreStage::Stage1Sent)
        throw ProtocolViolation("wait without a malloc start on core " + std::to_string(core));
    s = CoreStage::Stage3Waiting;
}

DataPacket MainCoreProtocol::free_start(std::uint32_t core, std::uint64_t addr,
                                        std::uint32_t pid) {
    if (stages_.at(core) == CoreStage::Stage3Waiting)
        throw ProtocolViolation("free start on a waiting core " + std::to_string(core));
    return start(OpKind::Free, core, addr, pid);
}

void MainCoreProtocol::receive_end(const DataPacket& end) {
    check_packet(end);
    if (end.signal != Signal::End) throw ProtocolViolation("expected an end packet");
    CoreStage& s = stages_.at(end.core);
    if (s != CoreStage::Stage3Waiting && s != CoreStage::Stage1Sent)
        throw ProtocolViolation("end without matching start on core " + std::to_string(end.core));
    s = CoreStage::Stage4Resumed;
    result_[end.core] = end.payload;
}

Hmq::Hmq(std::uint32_t cores, std::size_t capacity) : cores_(cores), capacity_(capacity) {
    if (cores == 0) throw ConfigError("hmq needs at least one core");
    if (capacity == 0) throw ConfigError("hmq_capacity must be >= 1");
    queues_[0].cursor = queues_[1].cursor = cores - 1;
}

void Hmq::dispatch(const DataPacket& p, std::uint64_t arrival) {
    check_packet(p);
    if (p.signal != Signal::Start) throw ProtocolViolation("only start packets are dispatched");
    if (p.core >= cores_) throw ProtocolViolation("packet from unknown core");
    Queue& queue = queues_[p.op == OpKind::Free];
    Request r{p, seq_++, arrival};
    if (queue.q.size() < capacity_ && queue.spill.empty()) {
        queue.q.push_back(r);
    } else {
        queue.spill.push_back(r);
        peak_spill_ = std::max<std::uint64_t>(peak_spill_, queue.spill.size());
    }
}

std::optional<Request> Hmq::take(Queue& queue) {
    if (queue.q.empty()) return std::nullopt;
    // Each core's entries sit in FIFO order, so the first one found is its oldest.
    auto& first = first_scratch_;
    first.assign(cores_, -1);
    for (std::size_t i = 0; i < queue.q.size(); ++i) {
        auto c = queue.q[i].packet.core;
        if (first[c] < 0) first[c] = static_cast<std::ptrdiff_t>(i);
    }
    for (std::uint32_t k = 1; k <= cores_; ++k) {
        const std::uint32_t c = (queue.cursor + k) % cores_;
        if (first[c] < 0) continue;
        Request r = queue.q[static_cast<std::size_t>(first[c])];
        queue.q.erase(queue.q.begin() + first[c]);
        queue.cursor = c;
        if (!queue.spill.empty()) {
            queue.q.push_back(queue.spill.front());
            queue.spill.pop_front();
        }
        return r;
    }
    return std::nullopt;
}

std::optional<Request> Hmq::schedule_next() {
    if (auto r = take(queues_[0])) return r;
    return take(queues_[1]);
}

void Hmq::respond(const DataPacket& end) {
    check_packet(end);
    if (end.signal != Signal::End) throw ProtocolViolation("responses must be end packets");
    if (responses_.size() >= capacity_) throw ProtocolViolation("response queue overflow");
    responses_.push_back(end);
}

std::optional<DataPacket> Hmq::pop_response() {
    if (responses_.empty()) return std::nullopt;
    DataPacket p = responses_.front();
    responses_.pop_front();
    return p;
}

bool Hmq::empty() const { return pending() == 0; }

std::size_t Hmq::pending() const {
    std::size_t n = 0;
    for (const auto& q : queues_) n += q.q.size() + q.spill.size();
    return n;
}

void Hmq::set_rr_cursor(OpKind op, std::uint32_t core) {
    if (core >= cores_) throw Error("rr cursor out of range");
    queues_[op == OpKind::Free].cursor = core;
}

RegisterBuffer::RegisterBuffer(std::size_t entries) : tags_(entries) {
    if (entries == 0) throw ConfigError("rb_entries must be >= 1");
}

bool RegisterBuffer::lookup(std::uint32_t pid) {
    auto& slot = tags_[pid % tags_.size()];
    if (slot == pid) {
        ++hits_;
        return true;
    }
    slot = pid;
    ++misses_;
    return false;
}

void SupportCoreProtocol::begin(const Request& r) {
    if (current_) throw ProtocolViolation("support core already serving a request");
    current_ = r;
}

DataPacket SupportCoreProtocol::malloc_end(std::uint64_t returned_address) {
    if (!current_ || current_->packet.op != OpKind::Malloc)
        throw ProtocolViolation("malloc end without a malloc in service");
    DataPacket end{Signal::End, OpKind::Malloc, current_->packet.core, current_->packet.pid,
                   returned_address, false};
    current_.reset();
    return end;
}

void SupportCoreProtocol::free_end() {
    if (!current_ || current_->packet.op != OpKind::Free)
        throw ProtocolViolation("free end without a free in service");
    current_.reset();
}

}  // namespace simalloc
