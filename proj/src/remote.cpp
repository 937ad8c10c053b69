#include "tworld/remote.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "tworld/base64.hpp"

namespace tworld {

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

LineChannel::LineChannel(int fd, int child, std::string peer) : fd_(fd), child_(child), peer_(std::move(peer)) {}

std::unique_ptr<LineChannel> LineChannel::spawn(const std::string& command) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
    throw TransportError("socketpair failed: " + errno_text());
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw TransportError("fork failed: " + errno_text());
  }
  if (pid == 0) {
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  return std::unique_ptr<LineChannel>(new LineChannel(fds[0], int(pid), "cmd=" + command));
}

std::unique_ptr<LineChannel> LineChannel::connect_tcp(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) throw TransportError("TCP endpoint must be host:port, got " + endpoint);
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0)
    throw TransportError("cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw TransportError("cannot connect to " + endpoint + ": " + errno_text());
  return std::unique_ptr<LineChannel>(new LineChannel(fd, -1, "tcp=" + endpoint));
}

LineChannel::~LineChannel() {
  if (fd_ >= 0) ::close(fd_);
  if (child_ > 0) {
    int status = 0;
    // Give the service a moment to exit on EOF before forcing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_, &status, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
  }
}

void LineChannel::queue(const std::string& line) {
  if (line.find('\n') != std::string::npos) throw TransportError("frame contains a newline");
  out_ += line;
  out_ += '\n';
}

std::string LineChannel::next_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = in_.find('\n'); nl != std::string::npos) {
      std::string line = in_.substr(0, nl);
      in_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TransportError("timed out waiting for " + peer_);

    pollfd pfd{fd_, short(POLLIN | (out_pos_ < out_.size() ? POLLOUT : 0)), 0};
    const int rc = ::poll(&pfd, 1, int(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("poll failed: " + errno_text());
    }
    if (rc == 0) continue;
    if (pfd.revents & POLLOUT) {
      const ssize_t n = ::send(fd_, out_.data() + out_pos_, out_.size() - out_pos_, MSG_NOSIGNAL | MSG_DONTWAIT);
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)
        throw TransportError("connection to " + peer_ + " lost while sending: " + errno_text());
      if (n > 0) out_pos_ += std::size_t(n);
      if (out_pos_ == out_.size()) {
        out_.clear();
        out_pos_ = 0;
      }
    }
    if (pfd.revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, MSG_DONTWAIT);
      if (n == 0) throw TransportError("connection to " + peer_ + " closed");
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
        throw TransportError("connection to " + peer_ + " lost: " + errno_text());
      }
      in_.append(buf, std::size_t(n));
    }
  }
}

namespace protocol {

nlohmann::json hello(int version) { return {{"op", "hello"}, {"version", version}}; }

nlohmann::json capabilities(const DenoiserCapabilities& caps) {
  return {{"op", "capabilities"},
          {"version", kProtocolVersion},
          {"max_size", caps.max_size},
          {"channels", caps.channels},
          {"pointwise", caps.pointwise},
          {"deterministic", caps.deterministic}};
}

nlohmann::json velocity_request(std::uint64_t id, const DenoiserRequest& request) {
  if (!request.cubic()) throw CapabilityError("wire protocol only carries cubic tiles");
  return {{"op", "velocity"},
          {"id", id},
          {"t", request.t},
          {"size", request.extent.x()},
          {"channels", request.channels},
          {"condition", request.condition},
          {"origin", {request.origin.x(), request.origin.y(), request.origin.z()}},
          {"data", encode_floats(request.values)}};
}

nlohmann::json velocity_ok(std::uint64_t id, std::span<const float> velocity) {
  return {{"op", "velocity_ok"}, {"id", id}, {"data", encode_floats(velocity)}};
}

nlohmann::json error(std::uint64_t id, const std::string& message) {
  return {{"op", "error"}, {"id", id}, {"message", message}};
}

nlohmann::json parse(const std::string& line) {
  nlohmann::json frame;
  try {
    frame = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed frame: ") + e.what());
  }
  if (!frame.is_object() || !frame.contains("op") || !frame["op"].is_string())
    throw TransportError("malformed frame: missing \"op\"");
  return frame;
}

}  // namespace protocol

RemoteDenoiser::RemoteDenoiser(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  channel_->queue(protocol::hello().dump());
  const auto frame = protocol::parse(channel_->next_line(timeout_));
  const std::string op = frame["op"];
  if (op == "error")
    throw TransportError("handshake rejected by " + channel_->peer() + ": " + frame.value("message", std::string()));
  if (op != "capabilities") throw TransportError("handshake: expected capabilities frame, got \"" + op + "\"");
  if (frame.contains("version") && frame["version"] != kProtocolVersion)
    throw TransportError("handshake: unsupported protocol version " + frame["version"].dump());
  try {
    caps_.arbitrary_size = false;
    caps_.max_size = frame.at("max_size").get<int>();
    caps_.channels = frame.at("channels").get<int>();
    caps_.pointwise = frame.at("pointwise").get<bool>();
    caps_.deterministic = frame.at("deterministic").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("handshake: malformed capabilities: ") + e.what());
  }
}

DenoiserResponse RemoteDenoiser::velocity(const DenoiserRequest& request) const {
  return velocity_batch(std::span<const DenoiserRequest>(&request, 1), Executor(1)).front();
}

std::vector<DenoiserResponse> RemoteDenoiser::velocity_batch(std::span<const DenoiserRequest> requests,
                                                             const Executor&) const {
  std::lock_guard lock(mutex_);
  std::map<std::uint64_t, std::size_t> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    check_request(requests[i], caps_);
    const std::uint64_t id = next_id_++;
    pending.emplace(id, i);
    channel_->queue(protocol::velocity_request(id, requests[i]).dump());
  }

  std::vector<DenoiserResponse> out(requests.size());
  while (!pending.empty()) {
    nlohmann::json frame;
    try {
      frame = protocol::parse(channel_->next_line(timeout_));
    } catch (const TransportError& e) {
      const auto& [id, index] = *pending.begin();
      throw TransportError(std::string(e.what()) + "; request id " + std::to_string(id) + " for tile at " +
                           to_string(requests[index].origin) + " unanswered");
    }
    const std::string op = frame["op"];
    const std::uint64_t id = frame.value("id", std::uint64_t(0));
    const auto it = pending.find(id);
    if (it == pending.end())
      throw TransportError("response for unknown or already answered request id " + std::to_string(id));
    const std::size_t index = it->second;
    if (op == "error")
      throw DenoiserError("remote denoiser failed request id " + std::to_string(id) + " for tile at " +
                          to_string(requests[index].origin) + ": " + frame.value("message", std::string()));
    if (op != "velocity_ok") throw TransportError("unexpected frame \"" + op + "\" for request id " + std::to_string(id));
    std::vector<float> data;
    try {
      data = decode_floats(frame.at("data").get<std::string>());
    } catch (const std::exception& e) {
      throw TransportError("bad payload for request id " + std::to_string(id) + ": " + e.what());
    }
    if (data.size() != requests[index].values.size())
      throw ShapeError("remote velocity for request id " + std::to_string(id) + " has " + std::to_string(data.size()) +
                       " values, expected " + std::to_string(requests[index].values.size()));
    out[index].velocity = Eigen::Map<const Eigen::ArrayXf>(data.data(), Eigen::Index(data.size()));
    pending.erase(it);
  }
  return out;
}

}  // namespace tworld
