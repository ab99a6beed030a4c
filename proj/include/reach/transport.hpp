#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace reach {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Peer closed the stream.
class TransportClosed : public TransportError {
public:
    TransportClosed() : TransportError("peer closed the connection") {}
};

// Newline-framed byte stream.
class LineTransport {
public:
    virtual ~LineTransport() = default;
    virtual void send_line(std::string_view line) = 0;
    // nullopt on timeout; throws TransportClosed at end of stream.
    virtual std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds> timeout) = 0;
};

class FdTransport final : public LineTransport {
public:
    // Takes ownership of the descriptors when own is true.
    FdTransport(int in_fd, int out_fd, bool own);
    ~FdTransport() override;
    FdTransport(const FdTransport&) = delete;
    FdTransport& operator=(const FdTransport&) = delete;

    void send_line(std::string_view line) override;
    std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds> timeout) override;

private:
    int in_fd_;
    int out_fd_;
    bool own_;
    std::string buffer_;
};

// Address forms: "stdio", "unix:/path/to.sock", "tcp:host:port". Blocks until
// one agent connects.
std::unique_ptr<LineTransport> listen_and_accept(std::string_view address);
// Agent side of the same address forms (used by tests and tools).
std::unique_ptr<LineTransport> connect_to(std::string_view address);

// Connected in-process pair over a socketpair.
std::pair<std::unique_ptr<LineTransport>, std::unique_ptr<LineTransport>> make_socket_pair();

}  // namespace reach
