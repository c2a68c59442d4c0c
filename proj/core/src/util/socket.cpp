#include "jpt/util/socket.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt::net {

namespace {

sockaddr_un make_address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw UsageError("socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ModelError(std::string("socket write failed: ") + std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns false on EOF before the first byte.
bool read_all(int fd, char* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ModelError(std::string("socket read failed: ") + std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw ModelError("peer closed the socket mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

UnixSocket& UnixSocket::operator=(UnixSocket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

UnixSocket UnixSocket::connect(const std::string& path) {
  const sockaddr_un addr = make_address(path);
  UnixSocket s(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (!s.valid()) throw ModelError(std::string("socket() failed: ") + std::strerror(errno));
  if (::connect(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ModelError("cannot connect to " + path + ": " + std::strerror(errno));
  }
  return s;
}

UnixSocket UnixSocket::listen(const std::string& path, int backlog) {
  const sockaddr_un addr = make_address(path);
  ::unlink(path.c_str());
  UnixSocket s(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (!s.valid()) throw ModelError(std::string("socket() failed: ") + std::strerror(errno));
  if (::bind(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ModelError("cannot bind " + path + ": " + std::strerror(errno));
  }
  if (::listen(s.fd_, backlog) != 0) throw ModelError("cannot listen on " + path + ": " + std::strerror(errno));
  return s;
}

UnixSocket UnixSocket::accept() const {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return UnixSocket(fd);
    if (errno == EINTR) continue;
    return UnixSocket();
  }
}

void UnixSocket::shutdown() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void UnixSocket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void write_frame(const UnixSocket& socket, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ModelError("frame too large");
  std::string head;
  binio::put<std::uint32_t>(head, static_cast<std::uint32_t>(payload.size()));
  write_all(socket.fd(), head.data(), head.size());
  write_all(socket.fd(), payload.data(), payload.size());
}

std::optional<std::string> read_frame(const UnixSocket& socket) {
  char head[4];
  if (!read_all(socket.fd(), head, sizeof(head))) return std::nullopt;
  const auto n = binio::Reader(head, sizeof(head)).get<std::uint32_t>();
  if (n > kMaxFrameBytes) throw ModelError("frame too large");
  std::string payload(n, '\0');
  if (n > 0 && !read_all(socket.fd(), payload.data(), n)) throw ModelError("peer closed the socket mid-frame");
  return payload;
}

FrameServer::FrameServer(std::string path, Handler handler) : path_(std::move(path)), handler_(std::move(handler)) {}

void FrameServer::start() {
  if (running_) return;
  listener_ = UnixSocket::listen(path_);
  running_ = true;
  thread_ = std::thread([this] { run(); });
}

void FrameServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (thread_.joinable()) thread_.join();
  listener_.close();
  ::unlink(path_.c_str());
}

void FrameServer::run() {
  while (running_) {
    UnixSocket conn = listener_.accept();
    if (!conn.valid()) break;
    try {
      while (auto request = read_frame(conn)) write_frame(conn, handler_(*request));
    } catch (const Error&) {
      // A broken connection only ends that client.
    }
  }
}

}  // namespace jpt::net
