#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "stegolock/errors.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::transport::tcp {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw Disconnect(std::string("send failed: ") + std::strerror(errno));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void read_all(int fd, std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t r = ::recv(fd, data, n, 0);
        if (r == 0) throw Disconnect("peer closed connection");
        if (r < 0) {
            if (errno == EINTR) continue;
            throw Disconnect(std::string("recv failed: ") + std::strerror(errno));
        }
        data += r;
        n -= static_cast<std::size_t>(r);
    }
}

}  // namespace

Stream& Stream::operator=(Stream&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Stream::~Stream() {
    if (fd_ >= 0) ::close(fd_);
}

Stream Stream::connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw IoError("cannot resolve " + host);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        fail("socket");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) < 0) {
        ::freeaddrinfo(res);
        ::close(fd);
        fail("connect to " + host + ":" + std::to_string(port));
    }
    ::freeaddrinfo(res);
    return Stream(fd);
}

void Stream::send_frame(const Frame& frame) {
    const Bytes wire = encode_frame(frame);
    write_all(fd_, wire.data(), wire.size());
}

Frame Stream::recv_frame() {
    std::uint8_t header[kFrameHeader];
    read_all(fd_, header, kFrameHeader);
    const std::size_t len = load_be32(header);
    if (len > kMaxPayload) throw MalformedFrame("frame payload exceeds 16 MiB");
    if (!is_valid_kind(header[4])) throw MalformedFrame("unknown frame kind");
    Frame f{static_cast<FrameKind>(header[4]), Bytes(len)};
    if (len) read_all(fd_, f.payload.data(), len);
    return f;
}

Listener::Listener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) fail("socket");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd_);
        fail("bind 127.0.0.1:" + std::to_string(port));
    }
    if (::listen(fd_, 4) < 0) {
        ::close(fd_);
        fail("listen");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
}

Stream Listener::accept() {
    for (;;) {
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) return Stream(fd);
        if (errno != EINTR) fail("accept");
    }
}

}  // namespace stegolock::transport::tcp
