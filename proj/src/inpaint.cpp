#include "tworld/inpaint.hpp"

#include <chrono>
#include <cmath>

namespace tworld {

Eigen::ArrayXd gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ShapeError("blur sigma must be finite and >= 0");
  if (sigma == 0.0) return Eigen::ArrayXd::Ones(1);
  const int radius = int(std::ceil(3.0 * sigma));
  Eigen::ArrayXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
  return k / k.sum();
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

namespace {

void blur_axis(DenseWorldT<double>& field, const Eigen::ArrayXd& kernel, int axis) {
  const Coord dims = field.dims();
  const int radius = int(kernel.size() / 2);
  const int n = dims[axis];
  DenseWorldT<double> out(dims, 1);
  for (int x = 0; x < dims.x(); ++x)
    for (int y = 0; y < dims.y(); ++y)
      for (int z = 0; z < dims.z(); ++z) {
        Coord p(x, y, z);
        double acc = 0.0;
        for (int o = -radius; o <= radius; ++o) {
          Coord q = p;
          q[axis] = reflect_index(p[axis] + o, n);
          acc += kernel[o + radius] * field.at(q);
        }
        out.at(p) = acc;
      }
  field = std::move(out);
}

}  // namespace

KeepMask blur_mask(const DenseWorldT<double>& binary, double sigma) {
  if (binary.channels() != 1) throw ShapeError("keep mask must have exactly one channel");
  const auto kernel = gaussian_kernel(sigma);
  KeepMask mask{binary, sigma};
  if (kernel.size() == 1) return mask;
  for (int axis = 0; axis < 3; ++axis) blur_axis(mask.values, kernel, axis);
  mask.values.data() = mask.values.data().min(1.0).max(0.0);
  return mask;
}

KeepMask keep_mask_from_binary(const DenseWorld& binary, double sigma) {
  const auto hard = binary.cast<double>();
  if ((hard.data() < 0.0).any() || (hard.data() > 1.0).any()) throw ShapeError("keep mask values must lie in [0, 1]");
  KeepMask mask = blur_mask(hard, sigma);
  for (Eigen::Index i = 0; i < hard.data().size(); ++i)
    if (hard.data()[i] == 1.0) mask.values.data()[i] = 1.0;
  return mask;
}

DenseWorld forward_noise(const DenseWorld& x0, double t, const NoiseSource& noise, const Coord& offset) {
  if (!(t >= 0.0 && t <= 1.0)) throw ShapeError("forward noise time must lie in [0, 1]");
  DenseWorld out(x0.dims(), x0.channels());
  const int C = x0.channels();
  for (std::int64_t v = 0; v < x0.voxels(); ++v) {
    const Coord g = unlinear_index(x0.dims(), v) + offset;
    for (int c = 0; c < C; ++c) {
      const double x = x0.data()[v * C + c];
      out.data()[v * C + c] = t == 0.0 ? float(x) : float((1.0 - t) * x + t * noise.normal(g, c));
    }
  }
  return out;
}

DenseWorld forward_noise(const DenseWorld& x0, double t, std::uint64_t seed) {
  return forward_noise(x0, t, NoiseSource(seed, NoiseStream::ForwardNoise));
}

DenseWorld renoise(const DenseWorld& x, double t_from, double t_to, const NoiseSource& noise, const Coord& offset) {
  if (!(t_to > t_from) || t_from < 0.0 || t_to > 1.0) throw ShapeError("renoise needs 0 <= t_from < t_to <= 1");
  const double a = (1.0 - t_to) / (1.0 - t_from);
  const double b = std::sqrt(std::max(0.0, t_to * t_to - a * a * t_from * t_from));
  DenseWorld out(x.dims(), x.channels());
  const int C = x.channels();
  for (std::int64_t v = 0; v < x.voxels(); ++v) {
    const Coord g = unlinear_index(x.dims(), v) + offset;
    for (int c = 0; c < C; ++c)
      out.data()[v * C + c] = float(a * double(x.data()[v * C + c]) + b * noise.normal(g, c));
  }
  return out;
}

void impose(DenseWorld& generated, const DenseWorld& known, const KeepMask& mask) {
  if ((generated.dims() != known.dims()).any() || (generated.dims() != mask.values.dims()).any() ||
      generated.channels() != known.channels())
    throw ShapeError("mask, ground truth and world shapes differ: " + to_string(mask.values.dims()) + " vs " +
                     to_string(generated.dims()));
  const int C = generated.channels();
  for (std::int64_t v = 0; v < generated.voxels(); ++v) {
    const double m = mask.values.data()[v];
    if (m == 0.0) continue;
    for (int c = 0; c < C; ++c) {
      float& g = generated.data()[v * C + c];
      const float k = known.data()[v * C + c];
      g = m == 1.0 ? k : float(m * double(k) + (1.0 - m) * double(g));
    }
  }
}

RunResult repaint_run(const RunConfig& config, const DenseWorld& ground_truth, const DenseWorld& binary_mask,
                      const RepaintOptions& options, const Denoiser& denoiser, const ProgressFn& progress) {
  if ((ground_truth.dims() != config.dims).any() || ground_truth.channels() != config.channels)
    throw ShapeError("ground truth " + to_string(ground_truth.dims()) + " does not match world " + to_string(config.dims));
  if ((binary_mask.dims() != config.dims).any() || binary_mask.channels() != 1)
    throw ShapeError("mask " + to_string(binary_mask.dims()) + " does not match world " + to_string(config.dims));
  if (options.resample < 1) throw ShapeError("resample count must be >= 1");

  const KeepMask mask = keep_mask_from_binary(binary_mask, options.sigma);
  const TileLayout layout = plan_tiles(config.dims, config.tile_size, config.resolved_stride());
  require_full_coverage(layout);
  const BlendMask& blend = make_mask(config.mask, config.tile_size);
  const Executor executor(config.threads);
  CountingDenoiser counter(denoiser);
  const StepContext ctx{layout, blend, counter, config.prompts, config.guidance, executor};

  const Schedule& schedule = config.schedule;
  const auto r = std::uint32_t(options.resample);
  RunResult result{fill_noise(config.dims, config.channels, NoiseSource(config.seed, NoiseStream::Init)), {}, 0};
  if ((options.noise_offset != 0).any()) {
    // Noise keyed on global coordinates so a sub-world matches the enclosing world's draw.
    const NoiseSource init(config.seed, NoiseStream::Init);
    for (std::int64_t v = 0; v < result.world.voxels(); ++v)
      for (int c = 0; c < config.channels; ++c)
        result.world.data()[v * config.channels + c] =
            float(init.normal(unlinear_index(config.dims, v) + options.noise_offset, c));
  }

  for (int k = schedule.steps(); k >= 1; --k) {
    const auto start = std::chrono::steady_clock::now();
    const auto calls_before = counter.calls();
    try {
      for (std::uint32_t j = 0; j < r; ++j) {
        result.world = tiled_step(result.world, schedule.t(k), schedule.dt(k), ctx);
        const auto sub = std::uint32_t(k) * r + j;
        const DenseWorld known = forward_noise(ground_truth, schedule.t(k - 1),
                                               NoiseSource(config.seed, NoiseStream::ForwardNoise, sub),
                                               options.noise_offset);
        impose(result.world, known, mask);
        if (j + 1 < r)
          result.world = renoise(result.world, schedule.t(k - 1), schedule.t(k),
                                 NoiseSource(config.seed, NoiseStream::Renoise, sub), options.noise_offset);
      }
    } catch (const Error& e) {
      throw StepError(k, e.what());
    }
    const StepRecord record{k, schedule.t(k), schedule.dt(k), layout.size(),
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                            counter.calls() - calls_before};
    result.steps.push_back(record);
    if (progress) progress(record);
  }
  result.denoiser_calls = counter.calls();
  return result;
}

}  // namespace tworld
