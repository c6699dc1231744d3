#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stegolock/bytes.hpp"

namespace stegolock::transport {

enum class FrameKind : std::uint8_t {
    PairReq = 0x01,
    PairRsp = 0x02,
    PairConfirm = 0x03,
    PairRandom = 0x04,
    KeyDist = 0x05,
    StegoImage = 0x06,
    PlaintextUnlock = 0x07,
    SignedData = 0x08,
    UnlockResult = 0x09,
    // Abstract public-key handshake of the key-substitution baseline.
    KeyExchange = 0x0a,
    PkeData = 0x0b,
};

std::string_view to_string(FrameKind kind);
bool is_valid_kind(std::uint8_t raw);

inline constexpr std::size_t kMaxPayload = 16u * 1024 * 1024;
inline constexpr std::size_t kFrameHeader = 5;
inline constexpr double kBytesPerKb = 1000.0;

struct Frame {
    FrameKind kind = FrameKind::PlaintextUnlock;
    Bytes payload;

    std::size_t wire_size() const { return kFrameHeader + payload.size(); }
    friend bool operator==(const Frame&, const Frame&) = default;
};

// be32(payload length) || kind || payload
Bytes encode_frame(const Frame& frame);
// Exactly one frame; throws MalformedFrame otherwise.
Frame decode_frame(ByteView wire);

struct ChannelModel {
    double bandwidth_kbps = 10.0;
    double latency_s = 0.0;
    std::uint64_t seed = 1;

    // Throws InvalidInput unless bandwidth > 0 and latency >= 0.
    void validate() const;
};

// key=value lines (bandwidth_kbps, latency_s, seed); '#' starts a comment.
ChannelModel parse_channel_config(std::string_view text);
ChannelModel load_channel_config(const std::filesystem::path& path);

double simulated_transfer_time(double size_kb, const ChannelModel& model);
double frame_transfer_time(const Frame& frame, const ChannelModel& model);

enum class Direction { InitiatorToResponder, ResponderToInitiator };
enum class Side { Initiator, Responder };

std::string_view to_string(Direction d);

/// What an interceptor does with one frame in flight.
struct Decision {
    enum class Action { Forward, Modify, Drop, Inject };

    Action action = Action::Forward;
    std::vector<Frame> frames;  // Modify: the replacement; Inject: extra frames

    enum class Position { Before, After };
    Position position = Position::After;

    static Decision forward() { return {}; }
    static Decision modify(Frame replacement) { return {Action::Modify, {std::move(replacement)}}; }
    static Decision drop() { return {Action::Drop, {}}; }
    static Decision inject(std::vector<Frame> extra, Position where = Position::After) {
        return {Action::Inject, std::move(extra), where};
    }
};

class Interceptor {
public:
    virtual ~Interceptor() = default;
    virtual Decision on_frame(Direction dir, const Frame& frame, double now) = 0;
};

struct TranscriptEntry {
    double time = 0.0;
    Direction direction = Direction::InitiatorToResponder;
    Frame frame;
};

class Link;

class Endpoint {
public:
    void send(Frame frame);
    // Throws Disconnect when the channel is closed or nothing is pending.
    Frame recv();
    std::optional<Frame> try_recv();
    bool has_pending() const;
    Side side() const { return side_; }

private:
    friend class Link;
    Endpoint(Link& link, Side side) : link_(&link), side_(side) {}

    Link* link_;
    Side side_;
};

/// In-process duplex channel on a simulated clock. Each delivered frame advances the
/// clock by latency + size/bandwidth. Per-direction FIFO; endpoint calls are thread-safe.
class Link {
public:
    explicit Link(ChannelModel model);
    Link(const Link&) = delete;
    Link& operator=(const Link&) = delete;

    Endpoint& initiator() { return initiator_; }
    Endpoint& responder() { return responder_; }
    Endpoint& endpoint(Side s) { return s == Side::Initiator ? initiator_ : responder_; }

    void attach_interceptor(std::shared_ptr<Interceptor> hook);
    void detach_interceptor();

    // Delivers directly, bypassing the interceptor (adversary-originated traffic).
    void inject(Direction dir, Frame frame);

    void close();
    bool is_open() const;

    double now() const;
    // Idle time on the simulated clock; never moves backwards.
    void advance_to(double t);

    const ChannelModel& model() const { return model_; }
    std::vector<TranscriptEntry> sent() const;
    std::vector<TranscriptEntry> delivered() const;
    std::uint64_t bytes_sent(Direction d) const;
    std::uint64_t bytes_delivered(Direction d) const;

private:
    friend class Endpoint;

    void send_from(Side side, Frame frame);
    std::optional<Frame> pop_for(Side side, bool& closed);
    bool pending_for(Side side) const;
    void deliver_locked(Direction dir, Frame frame);

    ChannelModel model_;
    Endpoint initiator_;
    Endpoint responder_;
    std::shared_ptr<Interceptor> hook_;

    mutable std::mutex mu_;
    bool open_ = true;
    double clock_ = 0.0;
    std::array<std::deque<Frame>, 2> queues_;  // indexed by receiving side
    std::vector<TranscriptEntry> sent_;
    std::vector<TranscriptEntry> delivered_;
    std::array<std::uint64_t, 2> bytes_sent_{};
    std::array<std::uint64_t, 2> bytes_delivered_{};
};

// Loopback TCP carrying the same frame layout. Demo use only; no simulated clock.
namespace tcp {

class Stream {
public:
    explicit Stream(int fd) : fd_(fd) {}
    Stream(Stream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Stream& operator=(Stream&& other) noexcept;
    Stream(const Stream&) = delete;
    Stream& operator=(const Stream&) = delete;
    ~Stream();

    static Stream connect(const std::string& host, std::uint16_t port);

    void send_frame(const Frame& frame);
    // Throws Disconnect on EOF.
    Frame recv_frame();

private:
    int fd_;
};

class Listener {
public:
    // Port 0 picks an ephemeral port; see port().
    explicit Listener(std::uint16_t port);
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;
    ~Listener();

    std::uint16_t port() const { return port_; }
    Stream accept();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace tcp

}  // namespace stegolock::transport
