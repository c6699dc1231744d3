#include <thread>

#include "doctest.h"
#include "stegolock/errors.hpp"
#include "stegolock/transport.hpp"

using namespace stegolock;
using namespace stegolock::transport;

namespace {

Frame make_frame(FrameKind kind, std::size_t n, std::uint8_t fill = 0x5a) {
    return Frame{kind, Bytes(n, fill)};
}

struct DropAll : Interceptor {
    Decision on_frame(Direction, const Frame&, double) override { return Decision::drop(); }
};

struct Identity : Interceptor {
    Decision on_frame(Direction, const Frame&, double) override { return Decision::forward(); }
};

struct InjectOnce : Interceptor {
    bool done = false;
    Decision on_frame(Direction, const Frame&, double) override {
        if (done) return Decision::forward();
        done = true;
        return Decision::inject({make_frame(FrameKind::SignedData, 3, 0xee)}, Decision::Position::Before);
    }
};

struct FlipFirstByte : Interceptor {
    Decision on_frame(Direction, const Frame& f, double) override {
        Frame g = f;
        if (!g.payload.empty()) g.payload[0] ^= 0xff;
        return Decision::modify(std::move(g));
    }
};

}  // namespace

TEST_CASE("frame wire layout") {
    const Frame f{FrameKind::StegoImage, {0xde, 0xad}};
    const Bytes wire = encode_frame(f);
    CHECK(to_hex(wire) == "0000000206dead");
    CHECK(decode_frame(wire) == f);
    CHECK_THROWS_AS(decode_frame(from_hex("00000002")), MalformedFrame);
    CHECK_THROWS_AS(decode_frame(from_hex("0000000206de")), MalformedFrame);
    CHECK_THROWS_AS(decode_frame(from_hex("00000000ff")), MalformedFrame);
    CHECK_THROWS_AS(decode_frame(from_hex("0000000000")), MalformedFrame);
    CHECK_THROWS_AS(encode_frame(Frame{FrameKind::StegoImage, Bytes(kMaxPayload + 1)}), InvalidInput);
}

TEST_CASE("channel config parsing") {
    const auto m = parse_channel_config("# calibrated\nbandwidth_kbps = 10.5\nlatency_s=24.7\nseed=42\n");
    CHECK(m.bandwidth_kbps == 10.5);
    CHECK(m.latency_s == 24.7);
    CHECK(m.seed == 42);
    CHECK_THROWS_AS(parse_channel_config("bandwidth_kbps=0\n"), InvalidInput);
    CHECK_THROWS_AS(parse_channel_config("latency_s=-1\n"), InvalidInput);
    CHECK_THROWS_AS(parse_channel_config("color=blue\n"), InvalidInput);
    CHECK_THROWS_AS(parse_channel_config("bandwidth_kbps\n"), InvalidInput);
    CHECK_THROWS_AS(parse_channel_config("seed=x\n"), InvalidInput);
}

TEST_CASE("simulated transfer time is affine in size") {
    const ChannelModel m{10.0, 2.5, 1};
    CHECK(simulated_transfer_time(0, m) == 2.5);
    CHECK(simulated_transfer_time(43, m) == doctest::Approx(2.5 + 4.3));
    const double t1 = simulated_transfer_time(100, m) - m.latency_s;
    const double t2 = simulated_transfer_time(200, m) - m.latency_s;
    CHECK(t2 == doctest::Approx(2 * t1));
    const double sizes[] = {6.97, 21.85, 43, 79.7, 224, 557, 1070, 1100};
    for (int i = 1; i < 8; ++i)
        CHECK(simulated_transfer_time(sizes[i], m) > simulated_transfer_time(sizes[i - 1], m));
    CHECK_THROWS_AS(simulated_transfer_time(-1, m), InvalidInput);
}

TEST_CASE("identity channel: FIFO, bit-exact, clock advances per delivery") {
    Link link(ChannelModel{10.0, 0.5, 1});
    const Frame a = make_frame(FrameKind::PairReq, 4);
    const Frame b = make_frame(FrameKind::StegoImage, 43000 - kFrameHeader);
    link.initiator().send(a);
    link.initiator().send(b);
    CHECK(link.responder().recv() == a);
    CHECK(link.responder().recv() == b);
    const double expected = (0.5 + 0.009 / 10.0) + (0.5 + 43.0 / 10.0);
    CHECK(link.now() == doctest::Approx(expected));
    CHECK_THROWS_AS(link.responder().recv(), Disconnect);
    CHECK_FALSE(link.initiator().try_recv().has_value());
}

TEST_CASE("closed channel disconnects") {
    Link link(ChannelModel{});
    link.initiator().send(make_frame(FrameKind::PairReq, 1));
    link.close();
    CHECK_THROWS_AS(link.responder().recv(), Disconnect);
    CHECK_THROWS_AS(link.initiator().send(make_frame(FrameKind::PairReq, 1)), Disconnect);
}

TEST_CASE("interceptor decisions") {
    SUBCASE("identity hook matches no hook, conservation of bytes") {
        Link plain(ChannelModel{5.0, 0.1, 3});
        Link hooked(ChannelModel{5.0, 0.1, 3});
        hooked.attach_interceptor(std::make_shared<Identity>());
        for (Link* l : {&plain, &hooked}) {
            l->initiator().send(make_frame(FrameKind::PairReq, 10));
            l->responder().send(make_frame(FrameKind::PairRsp, 20));
            l->initiator().send(make_frame(FrameKind::StegoImage, 3000));
        }
        CHECK(plain.now() == hooked.now());
        const auto dp = plain.delivered();
        const auto dh = hooked.delivered();
        REQUIRE(dp.size() == dh.size());
        for (std::size_t i = 0; i < dp.size(); ++i) {
            CHECK(dp[i].frame == dh[i].frame);
            CHECK(dp[i].time == dh[i].time);
        }
        for (auto d : {Direction::InitiatorToResponder, Direction::ResponderToInitiator})
            CHECK(hooked.bytes_sent(d) == hooked.bytes_delivered(d));
    }
    SUBCASE("drop-all starves the receiver") {
        Link link(ChannelModel{});
        link.attach_interceptor(std::make_shared<DropAll>());
        link.initiator().send(make_frame(FrameKind::PairReq, 1));
        CHECK_THROWS_AS(link.responder().recv(), Disconnect);
        CHECK(link.now() == 0.0);
    }
    SUBCASE("inject adds exactly one frame in position") {
        Link link(ChannelModel{});
        link.attach_interceptor(std::make_shared<InjectOnce>());
        const Frame a = make_frame(FrameKind::PairReq, 2);
        link.initiator().send(a);
        link.initiator().send(a);
        CHECK(link.responder().recv().kind == FrameKind::SignedData);
        CHECK(link.responder().recv() == a);
        CHECK(link.responder().recv() == a);
        CHECK_FALSE(link.responder().has_pending());
    }
    SUBCASE("modify replaces the frame") {
        Link link(ChannelModel{});
        link.attach_interceptor(std::make_shared<FlipFirstByte>());
        link.responder().send(Frame{FrameKind::UnlockResult, {0x01}});
        CHECK(link.initiator().recv().payload == Bytes{0xfe});
        CHECK(link.sent()[0].frame.payload == Bytes{0x01});
    }
}

TEST_CASE("determinism and clock monotonicity") {
    auto run = [] {
        Link link(ChannelModel{7.0, 0.2, 9});
        std::vector<double> times;
        for (int i = 0; i < 50; ++i) {
            link.initiator().send(make_frame(FrameKind::SignedData, static_cast<std::size_t>(i * 37)));
            times.push_back(link.now());
        }
        return times;
    };
    const auto a = run();
    CHECK(a == run());
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] >= a[i - 1]);
    Link link(ChannelModel{});
    link.advance_to(10);
    link.advance_to(5);
    CHECK(link.now() == 10);
}

TEST_CASE("endpoints in different threads keep per-direction FIFO") {
    Link link(ChannelModel{1000.0, 0.0, 1});
    constexpr int n = 500;
    std::thread producer([&] {
        for (int i = 0; i < n; ++i)
            link.initiator().send(Frame{FrameKind::SignedData, {static_cast<std::uint8_t>(i & 0xff)}});
    });
    int received = 0;
    while (received < n) {
        if (auto f = link.responder().try_recv()) {
            CHECK(f->payload[0] == (received & 0xff));
            ++received;
        }
    }
    producer.join();
}

TEST_CASE("TCP loopback carries the same frames") {
    tcp::Listener listener(0);
    const Frame f{FrameKind::StegoImage, Bytes(70000, 0x33)};
    std::thread server([&] {
        auto s = listener.accept();
        auto got = s.recv_frame();
        s.send_frame(Frame{FrameKind::UnlockResult, {static_cast<std::uint8_t>(got == f)}});
    });
    auto c = tcp::Stream::connect("127.0.0.1", listener.port());
    c.send_frame(f);
    const Frame reply = c.recv_frame();
    server.join();
    CHECK(reply.kind == FrameKind::UnlockResult);
    CHECK(reply.payload == Bytes{1});
    CHECK_THROWS_AS(c.recv_frame(), Disconnect);
}
