#include "reach/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace reach {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

struct AddrInfo {
    addrinfo* head = nullptr;
    ~AddrInfo() {
        if (head) freeaddrinfo(head);
    }
};

std::pair<std::string, std::string> split_host_port(std::string_view rest) {
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) throw TransportError("tcp address needs host:port");
    return {std::string(rest.substr(0, colon)), std::string(rest.substr(colon + 1))};
}

sockaddr_un unix_addr(std::string_view path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path)) throw TransportError("unix socket path too long");
    std::memcpy(addr.sun_path, path.data(), path.size());
    return addr;
}

void ignore_sigpipe() {
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

}  // namespace

FdTransport::FdTransport(int in_fd, int out_fd, bool own) : in_fd_(in_fd), out_fd_(out_fd), own_(own) {
    ignore_sigpipe();
}

FdTransport::~FdTransport() {
    if (!own_) return;
    ::close(in_fd_);
    if (out_fd_ != in_fd_) ::close(out_fd_);
}

void FdTransport::send_line(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(out_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EPIPE) throw TransportClosed();
            sys_fail("write");
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> FdTransport::recv_line(std::optional<std::chrono::milliseconds> timeout) {
    using clock = std::chrono::steady_clock;
    const auto deadline = timeout ? std::optional(clock::now() + *timeout) : std::nullopt;
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        int wait_ms = -1;
        if (deadline) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - clock::now()).count();
            if (left <= 0) return std::nullopt;
            wait_ms = static_cast<int>(left);
        }
        pollfd pfd{in_fd_, POLLIN, 0};
        const int r = ::poll(&pfd, 1, wait_ms);
        if (r < 0) {
            if (errno == EINTR) continue;
            sys_fail("poll");
        }
        if (r == 0) continue;  // deadline re-checked above
        char chunk[4096];
        const ssize_t n = ::read(in_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            if (errno == ECONNRESET) throw TransportClosed();
            sys_fail("read");
        }
        if (n == 0) throw TransportClosed();
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::unique_ptr<LineTransport> listen_and_accept(std::string_view address) {
    if (address == "stdio") return std::make_unique<FdTransport>(STDIN_FILENO, STDOUT_FILENO, false);

    int listener = -1;
    if (address.starts_with("unix:")) {
        const std::string path(address.substr(5));
        const sockaddr_un addr = unix_addr(path);
        listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (listener < 0) sys_fail("socket");
        ::unlink(path.c_str());
        if (::bind(listener, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
            ::close(listener);
            sys_fail("bind " + path);
        }
    } else if (address.starts_with("tcp:")) {
        const auto [host, port] = split_host_port(address.substr(4));
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE;
        AddrInfo info;
        if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &info.head); rc != 0)
            throw TransportError(std::string("getaddrinfo: ") + gai_strerror(rc));
        listener = ::socket(info.head->ai_family, info.head->ai_socktype, info.head->ai_protocol);
        if (listener < 0) sys_fail("socket");
        const int one = 1;
        ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(listener, info.head->ai_addr, info.head->ai_addrlen) < 0) {
            ::close(listener);
            sys_fail("bind " + std::string(address));
        }
    } else {
        throw TransportError("unsupported address '" + std::string(address) + "'");
    }
    if (::listen(listener, 1) < 0) {
        ::close(listener);
        sys_fail("listen");
    }
    int conn;
    do {
        conn = ::accept(listener, nullptr, nullptr);
    } while (conn < 0 && errno == EINTR);
    const int saved = errno;
    ::close(listener);
    if (conn < 0) {
        errno = saved;
        sys_fail("accept");
    }
    return std::make_unique<FdTransport>(conn, conn, true);
}

std::unique_ptr<LineTransport> connect_to(std::string_view address) {
    int fd = -1;
    if (address.starts_with("unix:")) {
        const sockaddr_un addr = unix_addr(address.substr(5));
        fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd < 0) sys_fail("socket");
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
            ::close(fd);
            sys_fail("connect");
        }
    } else if (address.starts_with("tcp:")) {
        const auto [host, port] = split_host_port(address.substr(4));
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        AddrInfo info;
        if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &info.head); rc != 0)
            throw TransportError(std::string("getaddrinfo: ") + gai_strerror(rc));
        fd = ::socket(info.head->ai_family, info.head->ai_socktype, info.head->ai_protocol);
        if (fd < 0) sys_fail("socket");
        if (::connect(fd, info.head->ai_addr, info.head->ai_addrlen) < 0) {
            ::close(fd);
            sys_fail("connect");
        }
    } else {
        throw TransportError("unsupported address '" + std::string(address) + "'");
    }
    return std::make_unique<FdTransport>(fd, fd, true);
}

std::pair<std::unique_ptr<LineTransport>, std::unique_ptr<LineTransport>> make_socket_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) < 0) sys_fail("socketpair");
    return {std::make_unique<FdTransport>(fds[0], fds[0], true), std::make_unique<FdTransport>(fds[1], fds[1], true)};
}

}  // namespace reach
