#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tworld/grid.hpp"
#include "tworld/parallel.hpp"

namespace tworld {

/// One tile evaluation of the velocity field. `condition` empty means unconditional.
struct DenoiserRequest {
  std::span<const float> values;  // extent^3 * channels, local canonical order
  double t = 1.0;
  std::string condition;
  Coord origin = Coord::Zero();  // informational
  Coord extent = Coord::Zero();  // cubic (S, S, S) except for whole-grid references
  int channels = 1;

  bool cubic() const { return extent.x() == extent.y() && extent.y() == extent.z(); }
};

struct DenoiserCapabilities {
  bool arbitrary_size = true;  // accepts any extent, including non-cubic blocks
  int max_size = 0;            // largest cubic S when !arbitrary_size
  int channels = 0;            // required channel count, 0 = any
  bool pointwise = false;
  bool deterministic = true;
};

enum ResponseFlags : std::uint32_t {
  kNoFlags = 0,
  kPosteriorFallback = 1u << 0,
};

struct DenoiserResponse {
  Eigen::ArrayXf velocity;
  std::uint32_t flags = kNoFlags;
};

/// The velocity field contract. Implementations must be safe to call
/// concurrently from several threads.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::string name() const = 0;
  virtual DenoiserCapabilities capabilities() const = 0;
  virtual DenoiserResponse velocity(const DenoiserRequest& request) const = 0;

  /// Evaluates every request; responses are returned in request order.
  virtual std::vector<DenoiserResponse> velocity_batch(std::span<const DenoiserRequest> requests,
                                                       const Executor& executor) const;
};

/// Throws CapabilityError / DenoiserError when the request breaks the contract.
void check_request(const DenoiserRequest& request, const DenoiserCapabilities& caps);

/// Throws DenoiserError naming the tile origin on shape mismatch or non-finite output.
void check_response(const DenoiserRequest& request, const DenoiserResponse& response);

/// FNV-1a over the request's payload bytes, t, condition, extent and channels.
std::uint64_t request_hash(const DenoiserRequest& request);

/// Forwards to another denoiser and counts every evaluated request.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

  std::string name() const override { return inner_.name(); }
  DenoiserCapabilities capabilities() const override { return inner_.capabilities(); }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;
  std::vector<DenoiserResponse> velocity_batch(std::span<const DenoiserRequest> requests,
                                               const Executor& executor) const override;

  std::uint64_t calls() const { return calls_.load(); }
  void reset() { calls_ = 0; }

 private:
  const Denoiser& inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Records (request hash -> response) pairs while forwarding.
class RecordingDenoiser final : public Denoiser {
 public:
  explicit RecordingDenoiser(const Denoiser& inner) : inner_(inner) {}

  std::string name() const override { return inner_.name(); }
  DenoiserCapabilities capabilities() const override { return inner_.capabilities(); }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;

  std::map<std::uint64_t, Eigen::ArrayXf> table() const;

 private:
  const Denoiser& inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::uint64_t, Eigen::ArrayXf> table_;
};

/// Replays a stored table; an unrecorded request is an error.
class RecordedDenoiser final : public Denoiser {
 public:
  RecordedDenoiser(std::map<std::uint64_t, Eigen::ArrayXf> table, DenoiserCapabilities caps)
      : table_(std::move(table)), caps_(caps) {}

  std::string name() const override { return "recorded"; }
  DenoiserCapabilities capabilities() const override { return caps_; }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;

 private:
  std::map<std::uint64_t, Eigen::ArrayXf> table_;
  DenoiserCapabilities caps_;
};

}  // namespace tworld
