#include "tworld/denoiser.hpp"

#include <cmath>
#include <cstring>

namespace tworld {

std::vector<DenoiserResponse> Denoiser::velocity_batch(std::span<const DenoiserRequest> requests,
                                                       const Executor& executor) const {
  std::vector<DenoiserResponse> out(requests.size());
  executor.parallel_for(requests.size(), [&](std::size_t i) { out[i] = velocity(requests[i]); });
  return out;
}

void check_request(const DenoiserRequest& request, const DenoiserCapabilities& caps) {
  const auto where = " (tile origin " + to_string(request.origin) + ")";
  if (!(request.t > 0.0) || !std::isfinite(request.t))
    throw DenoiserError("denoiser evaluated at t=" + std::to_string(request.t) + where);
  if (std::int64_t(request.values.size()) != voxel_count(request.extent) * request.channels)
    throw ShapeError("request payload length does not match extent " + to_string(request.extent) + where);
  if (!caps.arbitrary_size) {
    if (!request.cubic())
      throw CapabilityError("denoiser only accepts cubic tiles, got extent " + to_string(request.extent));
    if (caps.max_size > 0 && request.extent.x() > caps.max_size)
      throw CapabilityError("tile size " + std::to_string(request.extent.x()) + " exceeds denoiser maximum " +
                            std::to_string(caps.max_size));
  }
  if (caps.channels > 0 && caps.channels != request.channels)
    throw CapabilityError("denoiser expects " + std::to_string(caps.channels) + " channels, got " +
                          std::to_string(request.channels));
}

void check_response(const DenoiserRequest& request, const DenoiserResponse& response) {
  if (response.velocity.size() != std::int64_t(request.values.size()))
    throw DenoiserError("velocity block of " + std::to_string(response.velocity.size()) + " values for tile at " +
                        to_string(request.origin) + ", expected " + std::to_string(request.values.size()));
  if (!response.velocity.allFinite())
    throw DenoiserError("non-finite velocity for tile at " + to_string(request.origin));
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof v);
  }
};

}  // namespace

std::uint64_t request_hash(const DenoiserRequest& request) {
  Fnv1a f;
  f.bytes(request.values.data(), request.values.size_bytes());
  f.value(request.t);
  f.value(std::uint64_t(request.condition.size()));
  f.bytes(request.condition.data(), request.condition.size());
  f.value(request.extent.x());
  f.value(request.extent.y());
  f.value(request.extent.z());
  f.value(request.channels);
  return f.h;
}

DenoiserResponse CountingDenoiser::velocity(const DenoiserRequest& request) const {
  ++calls_;
  return inner_.velocity(request);
}

std::vector<DenoiserResponse> CountingDenoiser::velocity_batch(std::span<const DenoiserRequest> requests,
                                                               const Executor& executor) const {
  calls_ += requests.size();
  return inner_.velocity_batch(requests, executor);
}

DenoiserResponse RecordingDenoiser::velocity(const DenoiserRequest& request) const {
  auto response = inner_.velocity(request);
  std::lock_guard lock(mutex_);
  table_[request_hash(request)] = response.velocity;
  return response;
}

std::map<std::uint64_t, Eigen::ArrayXf> RecordingDenoiser::table() const {
  std::lock_guard lock(mutex_);
  return table_;
}

DenoiserResponse RecordedDenoiser::velocity(const DenoiserRequest& request) const {
  const auto it = table_.find(request_hash(request));
  if (it == table_.end())
    throw DenoiserError("no recorded response for tile at " + to_string(request.origin) + " t=" +
                        std::to_string(request.t));
  return {it->second, kNoFlags};
}

}  // namespace tworld
