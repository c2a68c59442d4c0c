#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

// Length-prefixed frames over Unix domain sockets: u32 little-endian payload
// length followed by the payload. Used by the external backbone and
// embedding-provider adapters.
namespace jpt::net {

inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

class UnixSocket {
 public:
  UnixSocket() = default;
  explicit UnixSocket(int fd) : fd_(fd) {}
  UnixSocket(UnixSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  UnixSocket& operator=(UnixSocket&& other) noexcept;
  UnixSocket(const UnixSocket&) = delete;
  UnixSocket& operator=(const UnixSocket&) = delete;
  ~UnixSocket() { close(); }

  static UnixSocket connect(const std::string& path);
  // Removes a stale socket file at `path` first.
  static UnixSocket listen(const std::string& path, int backlog = 16);
  // Returns an invalid socket once the listener has been shut down.
  UnixSocket accept() const;

  void shutdown() const;
  void close();
  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

void write_frame(const UnixSocket& socket, std::string_view payload);
// std::nullopt on orderly close before a frame starts.
std::optional<std::string> read_frame(const UnixSocket& socket);

// Accept loop on a background thread. Each connection is served until the
// peer closes it; every request frame is answered by handler(request).
class FrameServer {
 public:
  using Handler = std::function<std::string(const std::string& request)>;

  FrameServer(std::string path, Handler handler);
  ~FrameServer() { stop(); }
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  void start();
  void stop();
  const std::string& path() const { return path_; }

 private:
  void run();

  std::string path_;
  Handler handler_;
  UnixSocket listener_;
  std::thread thread_;
  std::atomic<bool> running_{false};
};

}  // namespace jpt::net
