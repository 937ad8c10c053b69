#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "tworld/denoiser.hpp"

namespace tworld {

inline constexpr int kProtocolVersion = 1;

/// Newline-framed, full-duplex byte stream over a socket: either a child
/// process's standard input/output or a TCP connection.
class LineChannel {
 public:
  /// Runs `command` through /bin/sh with its stdin/stdout attached to the channel.
  static std::unique_ptr<LineChannel> spawn(const std::string& command);
  /// `host:port`.
  static std::unique_ptr<LineChannel> connect_tcp(const std::string& endpoint);

  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  ~LineChannel();

  /// Queues one frame; the newline is appended here.
  void queue(const std::string& line);

  /// Writes queued output while waiting for the next complete input line.
  /// Throws TransportError on end of stream or timeout.
  std::string next_line(std::chrono::milliseconds timeout);

  const std::string& peer() const { return peer_; }

 private:
  LineChannel(int fd, int child, std::string peer);

  int fd_ = -1;
  int child_ = -1;
  std::string peer_;
  std::string out_;
  std::size_t out_pos_ = 0;
  std::string in_;
};

namespace protocol {

nlohmann::json hello(int version = kProtocolVersion);
nlohmann::json capabilities(const DenoiserCapabilities& caps);
nlohmann::json velocity_request(std::uint64_t id, const DenoiserRequest& request);
nlohmann::json velocity_ok(std::uint64_t id, std::span<const float> velocity);
nlohmann::json error(std::uint64_t id, const std::string& message);

/// Parses one frame; throws TransportError on malformed JSON or a missing "op".
nlohmann::json parse(const std::string& line);

}  // namespace protocol

/// Velocity field served by another process over the wire protocol. Requests
/// within one batch are multiplexed by id; responses may arrive in any order.
class RemoteDenoiser final : public Denoiser {
 public:
  explicit RemoteDenoiser(std::unique_ptr<LineChannel> channel,
                          std::chrono::milliseconds timeout = std::chrono::seconds(60));

  std::string name() const override { return "remote:" + channel_->peer(); }
  DenoiserCapabilities capabilities() const override { return caps_; }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;
  std::vector<DenoiserResponse> velocity_batch(std::span<const DenoiserRequest> requests,
                                               const Executor& executor) const override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  DenoiserCapabilities caps_;
  mutable std::mutex mutex_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace tworld
