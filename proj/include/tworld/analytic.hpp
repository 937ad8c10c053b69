#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tworld/denoiser.hpp"

namespace tworld {

/// v = 0 everywhere.
class ZeroDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "zero"; }
  DenoiserCapabilities capabilities() const override { return {true, 0, 0, true, true}; }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;
};

/// Condition -> scalar target, with an optional fallback for unlisted conditions.
class TargetTable {
 public:
  TargetTable() = default;
  explicit TargetTable(std::optional<double> fallback, std::map<std::string, double> entries = {})
      : fallback_(fallback), entries_(std::move(entries)) {}

  double lookup(const std::string& condition) const;
  const std::map<std::string, double>& entries() const { return entries_; }
  const std::optional<double>& fallback() const { return fallback_; }

 private:
  std::optional<double> fallback_;
  std::map<std::string, double> entries_;
};

/// v = (x - mu) / t with mu selected by the condition. Euler-exact on the
/// linear path x_t = (1 - t) x0 + t eps.
class PointTargetDenoiser final : public Denoiser {
 public:
  explicit PointTargetDenoiser(TargetTable targets) : targets_(std::move(targets)) {}
  explicit PointTargetDenoiser(double mu) : targets_(mu) {}

  std::string name() const override;
  DenoiserCapabilities capabilities() const override { return {true, 0, 0, true, true}; }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;

  const TargetTable& targets() const { return targets_; }

 private:
  TargetTable targets_;
};

double point_target_velocity(double x, double t, double mu);

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;  // broadcast over the whole tile vector
};

struct Posterior {
  std::vector<double> weights;
  bool fallback = false;  // all densities underflowed; nearest component chosen
};

/// w_k proportional to pi_k exp(-|x - (1 - t) mu_k|^2 / (2 t^2)) over the full tile vector.
Posterior mixture_posterior(std::span<const float> x, double t, std::span<const MixtureComponent> components);

/// Marginal velocity of a mixture of point targets: (x - sum_k w_k mu_k) / t.
/// Not pointwise: the posterior couples every voxel of the tile.
class MixtureDenoiser final : public Denoiser {
 public:
  explicit MixtureDenoiser(std::vector<MixtureComponent> components);

  std::string name() const override;
  DenoiserCapabilities capabilities() const override { return {true, 0, 0, false, true}; }
  DenoiserResponse velocity(const DenoiserRequest& request) const override;

  const std::vector<MixtureComponent>& components() const { return components_; }

 private:
  std::vector<MixtureComponent> components_;
};

/// Target value as a function of local tile position.
struct Pattern {
  enum class Kind { Constant, Border };
  Kind kind = Kind::Constant;
  double interior = 0.0;
  double edge = 0.0;  // Border only: value on the outermost voxel layer of the tile

  double at(const Coord& local, const Coord& extent) const;
};

/// v = (x - mu_p(local)) / t. The border pattern reproduces the wall-at-tile-edge
/// pathology of object-level generators.
class PatternDenoiser final : public Denoiser {
 public:
  PatternDenoiser(std::map<std::string, Pattern> patterns, std::optional<Pattern> fallback)
      : patterns_(std::move(patterns)), fallback_(fallback) {}
  explicit PatternDenoiser(Pattern pattern) : fallback_(pattern) {}

  std::string name() const override;
  DenoiserCapabilities capabilities() const override;
  DenoiserResponse velocity(const DenoiserRequest& request) const override;

 private:
  const Pattern& lookup(const std::string& condition) const;

  std::map<std::string, Pattern> patterns_;
  std::optional<Pattern> fallback_;
};

}  // namespace tworld
