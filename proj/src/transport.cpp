#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "stegolock/errors.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::transport {

namespace {

std::size_t index_of(Side s) { return s == Side::Initiator ? 0 : 1; }
std::size_t index_of(Direction d) { return d == Direction::InitiatorToResponder ? 0 : 1; }

Side receiver_of(Direction d) {
    return d == Direction::InitiatorToResponder ? Side::Responder : Side::Initiator;
}

Direction direction_from(Side sender) {
    return sender == Side::Initiator ? Direction::InitiatorToResponder
                                     : Direction::ResponderToInitiator;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view value) {
    try {
        std::size_t used = 0;
        const std::string v(value);
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw InvalidInput("channel config: bad number for " + std::string(key) + ": " +
                           std::string(value));
    }
}

}  // namespace

std::string_view to_string(FrameKind kind) {
    switch (kind) {
        case FrameKind::PairReq: return "PAIR_REQ";
        case FrameKind::PairRsp: return "PAIR_RSP";
        case FrameKind::PairConfirm: return "PAIR_CONFIRM";
        case FrameKind::PairRandom: return "PAIR_RANDOM";
        case FrameKind::KeyDist: return "KEY_DIST";
        case FrameKind::StegoImage: return "STEGO_IMAGE";
        case FrameKind::PlaintextUnlock: return "PLAINTEXT_UNLOCK";
        case FrameKind::SignedData: return "SIGNED_DATA";
        case FrameKind::UnlockResult: return "UNLOCK_RESULT";
        case FrameKind::KeyExchange: return "KEY_EXCHANGE";
        case FrameKind::PkeData: return "PKE_DATA";
    }
    return "UNKNOWN";
}

bool is_valid_kind(std::uint8_t raw) { return raw >= 0x01 && raw <= 0x0b; }

std::string_view to_string(Direction d) {
    return d == Direction::InitiatorToResponder ? "initiator->responder" : "responder->initiator";
}

Bytes encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxPayload) throw InvalidInput("frame payload exceeds 16 MiB");
    Bytes out(kFrameHeader + frame.payload.size());
    store_be32(out.data(), static_cast<std::uint32_t>(frame.payload.size()));
    out[4] = static_cast<std::uint8_t>(frame.kind);
    std::copy(frame.payload.begin(), frame.payload.end(), out.begin() + kFrameHeader);
    return out;
}

Frame decode_frame(ByteView wire) {
    if (wire.size() < kFrameHeader) throw MalformedFrame("frame shorter than its header");
    const std::size_t len = load_be32(wire.data());
    if (len > kMaxPayload) throw MalformedFrame("frame payload exceeds 16 MiB");
    if (!is_valid_kind(wire[4])) throw MalformedFrame("unknown frame kind " + std::to_string(wire[4]));
    if (wire.size() != kFrameHeader + len)
        throw MalformedFrame("frame length field does not match buffer size");
    return Frame{static_cast<FrameKind>(wire[4]), Bytes(wire.begin() + kFrameHeader, wire.end())};
}

void ChannelModel::validate() const {
    if (!(bandwidth_kbps > 0.0)) throw InvalidInput("channel bandwidth must be > 0");
    if (!(latency_s >= 0.0)) throw InvalidInput("channel latency must be >= 0");
}

ChannelModel parse_channel_config(std::string_view text) {
    ChannelModel model;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view l = line;
        if (auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
        l = trim(l);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw InvalidInput("channel config line " + std::to_string(lineno) + ": expected key=value");
        const auto key = trim(l.substr(0, eq));
        const auto value = trim(l.substr(eq + 1));
        if (key == "bandwidth_kbps") {
            model.bandwidth_kbps = parse_double(key, value);
        } else if (key == "latency_s") {
            model.latency_s = parse_double(key, value);
        } else if (key == "seed") {
            std::uint64_t seed = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
            if (ec != std::errc{} || p != value.data() + value.size())
                throw InvalidInput("channel config: bad seed: " + std::string(value));
            model.seed = seed;
        } else {
            throw InvalidInput("channel config: unknown key " + std::string(key));
        }
    }
    model.validate();
    return model;
}

ChannelModel load_channel_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open channel config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_channel_config(ss.str());
}

double simulated_transfer_time(double size_kb, const ChannelModel& model) {
    if (!(size_kb >= 0.0)) throw InvalidInput("transfer size must be >= 0");
    return model.latency_s + size_kb / model.bandwidth_kbps;
}

double frame_transfer_time(const Frame& frame, const ChannelModel& model) {
    return simulated_transfer_time(static_cast<double>(frame.wire_size()) / kBytesPerKb, model);
}

void Endpoint::send(Frame frame) { link_->send_from(side_, std::move(frame)); }

Frame Endpoint::recv() {
    bool closed = false;
    auto f = link_->pop_for(side_, closed);
    if (f) return std::move(*f);
    throw Disconnect(closed ? "channel closed" : "receive timed out: no frame pending");
}

std::optional<Frame> Endpoint::try_recv() {
    bool closed = false;
    auto f = link_->pop_for(side_, closed);
    if (!f && closed) throw Disconnect("channel closed");
    return f;
}

bool Endpoint::has_pending() const { return link_->pending_for(side_); }

Link::Link(ChannelModel model)
    : model_(model), initiator_(*this, Side::Initiator), responder_(*this, Side::Responder) {
    model_.validate();
}

void Link::attach_interceptor(std::shared_ptr<Interceptor> hook) {
    std::lock_guard lock(mu_);
    hook_ = std::move(hook);
}

void Link::detach_interceptor() {
    std::lock_guard lock(mu_);
    hook_.reset();
}

void Link::close() {
    std::lock_guard lock(mu_);
    open_ = false;
}

bool Link::is_open() const {
    std::lock_guard lock(mu_);
    return open_;
}

double Link::now() const {
    std::lock_guard lock(mu_);
    return clock_;
}

void Link::advance_to(double t) {
    std::lock_guard lock(mu_);
    clock_ = std::max(clock_, t);
}

std::vector<TranscriptEntry> Link::sent() const {
    std::lock_guard lock(mu_);
    return sent_;
}

std::vector<TranscriptEntry> Link::delivered() const {
    std::lock_guard lock(mu_);
    return delivered_;
}

std::uint64_t Link::bytes_sent(Direction d) const {
    std::lock_guard lock(mu_);
    return bytes_sent_[index_of(d)];
}

std::uint64_t Link::bytes_delivered(Direction d) const {
    std::lock_guard lock(mu_);
    return bytes_delivered_[index_of(d)];
}

void Link::deliver_locked(Direction dir, Frame frame) {
    clock_ += frame_transfer_time(frame, model_);
    bytes_delivered_[index_of(dir)] += frame.wire_size();
    delivered_.push_back({clock_, dir, frame});
    queues_[index_of(receiver_of(dir))].push_back(std::move(frame));
}

void Link::inject(Direction dir, Frame frame) {
    if (frame.payload.size() > kMaxPayload) throw InvalidInput("frame payload exceeds 16 MiB");
    std::lock_guard lock(mu_);
    if (!open_) throw Disconnect("channel closed");
    deliver_locked(dir, std::move(frame));
}

void Link::send_from(Side side, Frame frame) {
    if (frame.payload.size() > kMaxPayload) throw InvalidInput("frame payload exceeds 16 MiB");
    const Direction dir = direction_from(side);
    std::shared_ptr<Interceptor> hook;
    double now = 0.0;
    {
        std::lock_guard lock(mu_);
        if (!open_) throw Disconnect("channel closed");
        sent_.push_back({clock_, dir, frame});
        bytes_sent_[index_of(dir)] += frame.wire_size();
        hook = hook_;
        now = clock_;
    }
    // The hook runs unlocked so it may call inject().
    Decision decision = hook ? hook->on_frame(dir, frame, now) : Decision::forward();

    std::lock_guard lock(mu_);
    if (!open_) return;
    switch (decision.action) {
        case Decision::Action::Forward:
            deliver_locked(dir, std::move(frame));
            break;
        case Decision::Action::Modify:
            for (auto& f : decision.frames) deliver_locked(dir, std::move(f));
            break;
        case Decision::Action::Drop:
            break;
        case Decision::Action::Inject:
            if (decision.position == Decision::Position::Before) {
                for (auto& f : decision.frames) deliver_locked(dir, std::move(f));
                deliver_locked(dir, std::move(frame));
            } else {
                deliver_locked(dir, std::move(frame));
                for (auto& f : decision.frames) deliver_locked(dir, std::move(f));
            }
            break;
    }
}

std::optional<Frame> Link::pop_for(Side side, bool& closed) {
    std::lock_guard lock(mu_);
    auto& q = queues_[index_of(side)];
    closed = !open_;
    if (closed || q.empty()) return std::nullopt;
    Frame f = std::move(q.front());
    q.pop_front();
    return f;
}

bool Link::pending_for(Side side) const {
    std::lock_guard lock(mu_);
    return open_ && !queues_[index_of(side)].empty();
}

}  // namespace stegolock::transport
