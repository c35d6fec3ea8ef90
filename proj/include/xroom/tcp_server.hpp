/**
 * tcp_server.hpp: POSIX TCP transport for the gateway
 *
 * One thread per connection reads newline-terminated messages; a timer
 * thread calls Gateway::poll() at the next deadline so ticks and time-outs
 * fire without client traffic. Writes are serialized per connection.
 */

#pragma once

#include "xroom/error.hpp"
#include "xroom/gateway.hpp"

#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace xroom {

/// Milliseconds on a steady clock since construction.
class SteadyClock {
public:
    SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
    std::int64_t operator()() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin_).count();
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

class TcpServer {
public:
    static constexpr std::size_t kMaxLineBytes = 1 << 20;

    /// Binds immediately; port 0 picks a free port.
    TcpServer(Gateway& gateway, std::uint16_t port, const std::string& bind_address = "127.0.0.1") : gw_(gateway) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) fail(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
        int yes = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            fail(ErrorCode::BindFailure, "bad bind address '" + bind_address + "'");
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            fail(ErrorCode::BindFailure, "port " + std::to_string(port) + ": " + why);
        }
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    ~TcpServer() { stop(); }

    std::uint16_t port() const noexcept { return port_; }

    /// Starts the accept and timer threads and returns.
    void start() {
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
        timer_thread_ = std::thread([this] { timer_loop(); });
        spdlog::info("listening on port {}", port_);
    }

    void stop() {
        if (!running_.exchange(false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        {
            std::lock_guard lock(timer_mu_);
        }
        timer_cv_.notify_all();
        if (accept_thread_.joinable()) accept_thread_.join();
        if (timer_thread_.joinable()) timer_thread_.join();
        std::vector<std::thread> readers;
        {
            std::lock_guard lock(conns_mu_);
            for (auto& c : conns_) c->close();
            readers.swap(readers_);
        }
        for (auto& t : readers) t.join();
    }

    /// Wakes the timer so it re-reads the gateway deadline.
    void nudge() { timer_cv_.notify_all(); }

private:
    struct Conn {
        int fd = -1;
        std::mutex write_mu;
        bool open = true;

        void write_line(const std::string& line) {
            std::lock_guard lock(write_mu);
            if (!open) return;
            std::string buf = line;
            buf += '\n';
            std::size_t off = 0;
            while (off < buf.size()) {
                const auto n = ::send(fd, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
                if (n <= 0) {
                    open = false;
                    return;
                }
                off += static_cast<std::size_t>(n);
            }
        }

        void close() {
            std::lock_guard lock(write_mu);
            if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        }
    };

    void accept_loop() {
        while (running_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (!running_) break;
                if (errno == EINTR) continue;
                spdlog::warn("accept failed: {}", std::strerror(errno));
                continue;
            }
            auto conn = std::make_shared<Conn>();
            conn->fd = fd;
            const auto id = gw_.connect([conn](const std::string& line) { conn->write_line(line); });
            spdlog::info("connection {} opened", id);
            std::lock_guard lock(conns_mu_);
            conns_.push_back(conn);
            readers_.emplace_back([this, conn, id] { read_loop(conn, id); });
        }
    }

    void read_loop(const std::shared_ptr<Conn>& conn, ConnectionId id) {
        std::string pending;
        char buf[4096];
        while (true) {
            const auto n = ::recv(conn->fd, buf, sizeof buf, 0);
            if (n <= 0) break;
            pending.append(buf, static_cast<std::size_t>(n));
            std::size_t pos;
            while ((pos = pending.find('\n')) != std::string::npos) {
                auto line = pending.substr(0, pos);
                pending.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                spdlog::debug("conn {} <- {}", id, line);
                gw_.receive(id, line);
                nudge();
            }
            if (pending.size() > kMaxLineBytes) {
                spdlog::warn("connection {} sent an over-long line; closing", id);
                break;
            }
        }
        gw_.disconnect(id);
        {
            std::lock_guard lock(conn->write_mu);
            conn->open = false;
            ::close(conn->fd);
            conn->fd = -1;
        }
        spdlog::info("connection {} closed", id);
    }

    void timer_loop() {
        std::unique_lock lock(timer_mu_);
        while (running_) {
            gw_.poll();
            auto wait = std::chrono::milliseconds(50);
            if (auto d = gw_.next_deadline()) {
                const auto delta = *d - gw_.now();
                wait = std::chrono::milliseconds(std::clamp<std::int64_t>(delta, 0, 50));
            }
            timer_cv_.wait_for(lock, wait);
        }
    }

    Gateway& gw_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::thread timer_thread_;
    std::mutex timer_mu_;
    std::condition_variable timer_cv_;
    std::mutex conns_mu_;
    std::vector<std::shared_ptr<Conn>> conns_;
    std::vector<std::thread> readers_;
};

} // namespace xroom
