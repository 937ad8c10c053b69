#include "tworld/analytic.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace tworld {

namespace {

std::string known_list(const std::map<std::string, double>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += (out.empty() ? "\"" : ", \"") + k + "\"";
  return out.empty() ? "(none)" : out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

DenoiserResponse ZeroDenoiser::velocity(const DenoiserRequest& request) const {
  return {Eigen::ArrayXf::Zero(std::int64_t(request.values.size())), kNoFlags};
}

double TargetTable::lookup(const std::string& condition) const {
  if (auto it = entries_.find(condition); it != entries_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw DenoiserError("unknown condition \"" + condition + "\"; known conditions: " + known_list(entries_));
}

double point_target_velocity(double x, double t, double mu) { return (x - mu) / t; }

std::string PointTargetDenoiser::name() const {
  std::string out = "point";
  if (targets_.fallback()) out += ":mu=" + format_double(*targets_.fallback());
  if (!targets_.entries().empty()) out += " (" + std::to_string(targets_.entries().size()) + " conditions)";
  return out;
}

DenoiserResponse PointTargetDenoiser::velocity(const DenoiserRequest& request) const {
  const double mu = targets_.lookup(request.condition);
  Eigen::ArrayXf v(std::int64_t(request.values.size()));
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(point_target_velocity(request.values[i], request.t, mu));
  return {std::move(v), kNoFlags};
}

Posterior mixture_posterior(std::span<const float> x, double t, std::span<const MixtureComponent> components) {
  const std::size_t K = components.size();
  std::vector<double> sq(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double centre = (1.0 - t) * components[k].mean;
    double acc = 0.0;
    for (float xi : x) {
      const double d = double(xi) - centre;
      acc += d * d;
    }
    sq[k] = acc;
  }

  Posterior post;
  post.weights.assign(K, 0.0);
  std::vector<double> logd(K);
  double best = -std::numeric_limits<double>::infinity();
  bool any_density = false;
  for (std::size_t k = 0; k < K; ++k) {
    logd[k] = std::log(components[k].weight) - sq[k] / (2.0 * t * t);
    best = std::max(best, logd[k]);
    if (components[k].weight > 0.0 && std::exp(logd[k]) > 0.0) any_density = true;
  }

  if (!any_density) {
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (sq[k] < sq[nearest]) nearest = k;
    post.weights[nearest] = 1.0;
    post.fallback = true;
    return post;
  }

  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) total += post.weights[k] = std::exp(logd[k] - best);
  for (auto& w : post.weights) w /= total;
  return post;
}

MixtureDenoiser::MixtureDenoiser(std::vector<MixtureComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw DenoiserError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0)) throw DenoiserError("mixture weights must be non-negative");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DenoiserError("mixture weights must sum to 1, got " + format_double(total));
}

std::string MixtureDenoiser::name() const {
  std::string pi, mu;
  for (const auto& c : components_) {
    pi += (pi.empty() ? "" : ",") + format_double(c.weight);
    mu += (mu.empty() ? "" : ",") + format_double(c.mean);
  }
  return "mixture:pi=" + pi + ";mu=" + mu;
}

DenoiserResponse MixtureDenoiser::velocity(const DenoiserRequest& request) const {
  const auto post = mixture_posterior(request.values, request.t, components_);
  double mean = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) mean += post.weights[k] * components_[k].mean;
  Eigen::ArrayXf v(std::int64_t(request.values.size()));
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float((double(request.values[i]) - mean) / request.t);
  return {std::move(v), post.fallback ? kPosteriorFallback : kNoFlags};
}

double Pattern::at(const Coord& local, const Coord& extent) const {
  if (kind == Kind::Constant) return interior;
  const bool on_face = (local == 0).any() || (local == extent - 1).any();
  return on_face ? edge : interior;
}

std::string PatternDenoiser::name() const {
  auto describe = [](const Pattern& p) {
    return p.kind == Pattern::Kind::Constant ? "constant=" + format_double(p.interior)
                                             : "border=" + format_double(p.interior) + "," + format_double(p.edge);
  };
  std::string out = "pattern";
  if (fallback_) out += ":" + describe(*fallback_);
  if (!patterns_.empty()) out += " (" + std::to_string(patterns_.size()) + " conditions)";
  return out;
}

DenoiserCapabilities PatternDenoiser::capabilities() const {
  bool pointwise = !fallback_ || fallback_->kind == Pattern::Kind::Constant;
  for (const auto& [k, p] : patterns_) pointwise = pointwise && p.kind == Pattern::Kind::Constant;
  return {true, 0, 0, pointwise, true};
}

const Pattern& PatternDenoiser::lookup(const std::string& condition) const {
  if (auto it = patterns_.find(condition); it != patterns_.end()) return it->second;
  if (fallback_) return *fallback_;
  std::string known;
  for (const auto& [k, p] : patterns_) known += (known.empty() ? "\"" : ", \"") + k + "\"";
  throw DenoiserError("unknown condition \"" + condition + "\"; known conditions: " + (known.empty() ? "(none)" : known));
}

DenoiserResponse PatternDenoiser::velocity(const DenoiserRequest& request) const {
  const Pattern& pattern = lookup(request.condition);
  const Coord& e = request.extent;
  const int C = request.channels;
  Eigen::ArrayXf v(std::int64_t(request.values.size()));
  std::int64_t i = 0;
  for (int x = 0; x < e.x(); ++x)
    for (int y = 0; y < e.y(); ++y)
      for (int z = 0; z < e.z(); ++z) {
        const double mu = pattern.at(Coord(x, y, z), e);
        for (int c = 0; c < C; ++c, ++i) v[i] = float((double(request.values[i]) - mu) / request.t);
      }
  return {std::move(v), kNoFlags};
}

}  // namespace tworld
