// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "tworld/analytic.hpp"
#include "tworld/blend.hpp"
#include "tworld/cli.hpp"
#include "tworld/container.hpp"
#include "tworld/inpaint.hpp"
#include "tworld/oracle.hpp"
#include "tworld/pipeline.hpp"
#include "tworld/prompts.hpp"
#include "tworld/sampler.hpp"
#include "tworld/tiling.hpp"

using namespace tworld;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double direct_cosine(const Coord& l, int S) {
  double w = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (l[a] < 0 || l[a] >= S) return 0.0;
    w *= std::cos(M_PI * ((l[a] + 1.0) / (S + 1.0) - 0.5));
  }
  return w;
}

Outcome weight_coverage() {
  const auto start = Clock::now();
  std::mt19937 rng(2024);
  double worst = 0.0;
  int min_cover = 1 << 30;
  const int configs = 120;
  for (int i = 0; i < configs; ++i) {
    const int S = std::array{4, 8, 16}[rng() % 3];
    const int s = std::max(1, S / 4) + int(rng() % unsigned(S - std::max(1, S / 4) + 1));
    Coord dims;
    for (int a = 0; a < 3; ++a) dims[a] = S + int(rng() % unsigned(48 - S + 1));
    const auto layout = plan_tiles(dims, S, s);
    min_cover = std::min(min_cover, coverage_check(layout).min_count);
    const auto sums = normalized_weight_sums(layout, build_mask(S));
    worst = std::max(worst, (sums - 1.0).abs().maxCoeff());
    // Independent check on sampled voxels with the closed form.
    for (int k = 0; k < 20; ++k) {
      const Coord p(int(rng() % unsigned(dims.x())), int(rng() % unsigned(dims.y())), int(rng() % unsigned(dims.z())));
      double den = 0.0;
      std::vector<double> b;
      for (const auto& o : layout.origins) {
        const double w = direct_cosine(p - o, S);
        if (w > 0) b.push_back(w), den += w;
      }
      double total = 0.0;
      for (double w : b) total += w / den;
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  const double secs = seconds_since(start);
  return {min_cover >= 1 && worst <= 1e-12 && secs < 10.0,
          std::to_string(configs) + " configs, min cover " + std::to_string(min_cover) + ", max |sum-1| " + fmt(worst) +
              " (tol 1e-12), " + fmt(secs) + " s (limit 10)"};
}

Outcome cosine_values() {
  double worst = 0.0;
  for (int S = 1; S <= 16; ++S)
    for (int x = -1; x <= S; ++x)
      for (int y = -1; y <= S; ++y)
        for (int z = -1; z <= S; ++z) {
          const Coord l(x, y, z);
          worst = std::max(worst, std::abs(cosine_weight(l, S) - direct_cosine(l, S)));
        }
  const bool edge = cosine_weight(Coord(0, 0, 0), 1) == 1.0 && cosine_weight(Coord(1, 0, 0), 1) == 0.0 &&
                    cosine_weight(Coord(-1, 3, 3), 8) == 0.0 && cosine_weight(Coord(3, 8, 3), 8) == 0.0;
  return {worst <= 1e-12 && edge, "max deviation " + fmt(worst) + " (tol 1e-12), S=1 and out-of-range cases " +
                                      (edge ? "exact" : "wrong")};
}

Outcome tiling_transparency() {
  const auto start = Clock::now();
  const double mu = 0.375;
  PointTargetDenoiser d(mu);
  RunConfig c;
  c.dims = Coord(24, 24, 16);
  c.channels = 4;
  c.seed = 5;
  c.tile_size = 8;
  c.stride = 4;
  const auto a = run_diffusion(c, d).world;
  c.tile_size = 16;
  c.stride = 8;
  const auto b = run_diffusion(c, d).world;
  const auto whole = reference_run(c, d, "scene");
  const double pair = std::max({test::max_abs_diff(a, b), test::max_abs_diff(a, whole), test::max_abs_diff(b, whole)});
  double to_mu = 0.0;
  for (const auto* w : {&a, &b, &whole}) to_mu = std::max(to_mu, (w->data().cast<double>() - mu).abs().maxCoeff());
  const double secs = seconds_since(start);
  return {pair <= 1e-9 && to_mu <= 1e-6 && secs < 30.0,
          "pairwise max " + fmt(pair) + " (tol 1e-9), max |x-mu| " + fmt(to_mu) + " (tol 1e-6), " + fmt(secs) +
              " s (limit 30)"};
}

Outcome blending_ablation() {
  const int S = 16;
  const PatternDenoiser pathology(Pattern{Pattern::Kind::Border, 0.0, 1.0});
  RunConfig c;
  c.dims = Coord(2 * S, S, S);
  c.tile_size = S;
  c.seed = 7;
  const auto layout = plan_tiles(c.dims, S, c.resolved_stride());
  c.mask = MaskKind::Cosine;
  const double cosine = seam_discontinuity(run_diffusion(c, pathology).world, layout).max;
  c.mask = MaskKind::Box;
  const double box = seam_discontinuity(run_diffusion(c, pathology).world, layout).max;
  return {cosine <= 0.5 * box, "seam max cosine " + fmt(cosine) + ", box " + fmt(box) + ", ratio " + fmt(cosine / box) +
                                   " (limit 0.5)"};
}

Outcome tiled_decode() {
  const auto w = test::random_world(Coord(40, 24, 16), 4, 31);
  Eigen::MatrixXd W(3, 4);
  W << 0.5, -1, 0, 2, 1, 1, 1, 1, 0, 0.25, -0.5, 0;
  const LinearDecoder linear(W, Eigen::Vector3d(0.1, -0.2, 0.3));
  const bool exact = decode_tiled(w, linear, 16, 4) == decode_whole(w, linear);
  const auto layout = decode_layout(w.dims(), 16);
  DenseWorld flat(w.dims(), 1, 0.0f);
  const double ramp_seam = seam_discontinuity(decode_tiled(flat, LocalRampDecoder(1.0), 16), layout).max;
  const double flat_seam = seam_discontinuity(decode_tiled(flat, IdentityDecoder(), 16), layout).max;
  return {exact && ramp_seam > 0.0 && flat_seam == 0.0, std::string("linear tiled == whole ") +
                                                            (exact ? "bitwise" : "MISMATCH") + ", ramp seam " +
                                                            fmt(ramp_seam) + ", identity seam " + fmt(flat_seam)};
}

Outcome repaint_preservation() {
  const int S = 16;
  RunConfig tile_cfg;
  tile_cfg.dims = Coord::Constant(S);
  tile_cfg.channels = 2;
  tile_cfg.tile_size = S;
  tile_cfg.seed = 3;
  const auto tile = run_diffusion(tile_cfg, MixtureDenoiser({{0.5, -1.0}, {0.5, 1.0}})).world;

  RunConfig c = tile_cfg;
  c.dims = Coord(3 * S, 3 * S, S);
  DenseWorld truth(c.dims, 2), binary(c.dims, 1);
  write_box(truth, Coord(S, S, 0), tile);
  write_box(binary, Coord(S, S, 0), DenseWorld(tile.dims(), 1, 1.0f));
  const double mu = 0.25;
  const RepaintOptions options;
  const auto out = repaint_run(c, truth, binary, options, PointTargetDenoiser(mu)).world;
  const bool kept = extract_box(out, Coord(S, S, 0), tile.dims()) == tile;
  const auto keep = keep_mask_from_binary(binary, options.sigma);
  double worst = 0.0;
  std::int64_t unknown = 0;
  for (std::int64_t v = 0; v < out.voxels(); ++v) {
    if (keep.values.data()[v] != 0.0) continue;
    ++unknown;
    for (int ch = 0; ch < 2; ++ch) worst = std::max(worst, std::abs(double(out.data()[v * 2 + ch]) - mu));
  }
  return {kept && worst <= 1e-6 && unknown > 0,
          std::string("known tile ") + (kept ? "bitwise preserved" : "CHANGED") + ", " + std::to_string(unknown) +
              " unknown voxels max |x-mu| " + fmt(worst) + " (tol 1e-6)"};
}

// Answers every request with the velocity of one fixed condition.
class PinnedCondition final : public Denoiser {
 public:
  PinnedCondition(const Denoiser& inner, std::string condition) : inner_(inner), condition_(std::move(condition)) {}
  std::string name() const override { return "pinned"; }
  DenoiserCapabilities capabilities() const override { return inner_.capabilities(); }
  DenoiserResponse velocity(const DenoiserRequest& r) const override {
    DenoiserRequest copy = r;
    copy.condition = condition_;
    return inner_.velocity(copy);
  }

 private:
  const Denoiser& inner_;
  std::string condition_;
};

std::vector<DenseWorld> per_step(const RunConfig& c, const Denoiser& d, std::uint64_t* calls = nullptr) {
  std::vector<DenseWorld> worlds;
  const auto r = run_schedule(init_noise(c.dims, c.channels, c.seed), c, d,
                              [&](int, double, DenseWorld& w) { worlds.push_back(w); });
  if (calls) *calls = r.denoiser_calls;
  return worlds;
}

Outcome guidance_identities() {
  const MixtureDenoiser cond_field({{0.3, -1.0}, {0.7, 1.5}});
  const MixtureDenoiser uncond_field({{0.6, 0.5}, {0.4, -2.0}});
  struct Split final : Denoiser {
    const Denoiser& c;
    const Denoiser& u;
    Split(const Denoiser& c, const Denoiser& u) : c(c), u(u) {}
    std::string name() const override { return "split"; }
    DenoiserCapabilities capabilities() const override { return c.capabilities(); }
    DenoiserResponse velocity(const DenoiserRequest& r) const override {
      return r.condition.empty() ? u.velocity(r) : c.velocity(r);
    }
  } split(cond_field, uncond_field);

  RunConfig c;
  c.dims = Coord(16, 12, 8);
  c.channels = 2;
  c.tile_size = 8;
  c.schedule = Schedule::uniform(10);
  std::uint64_t calls = 0;

  c.guidance.scale = 1.0;
  const auto g1 = per_step(c, split, &calls);
  const std::size_t tiles = plan_tiles(c.dims, 8, 4).size();
  const bool single = calls == tiles * 10;
  c.guidance.scale = 0.0;
  const auto g0 = per_step(c, split);

  // Reference: guidance 7.5 against a field whose two branches coincide.
  c.guidance.scale = 7.5;
  const auto cond_only = per_step(c, PinnedCondition(split, "scene"));
  const auto uncond_only = per_step(c, PinnedCondition(split, ""));
  int mismatched = 0;
  for (std::size_t k = 0; k < g1.size(); ++k) mismatched += !(g1[k] == cond_only[k]) + !(g0[k] == uncond_only[k]);
  return {mismatched == 0 && single && g1.size() == 10,
          std::to_string(g1.size()) + " steps compared, " + std::to_string(mismatched) +
              " mismatched (exact), g=1 calls " + std::to_string(calls) + " = tiles x steps " +
              std::to_string(tiles * 10)};
}

Outcome parallel_determinism() {
  RunConfig c;
  c.prompts = load_prompt_grid(std::string(TWORLD_TEST_DATA) + "/city_prompts.txt");
  c.tile_size = 16;
  c.dims = c.prompts.cells * c.tile_size;
  c.channels = 4;
  c.seed = 99;
  std::map<std::string, double> targets;
  for (std::size_t i = 0; i < c.prompts.prompts.size(); ++i) targets[c.prompts.prompts[i]] = -1.0 + 0.2 * double(i);
  const PointTargetDenoiser field(TargetTable(0.0, targets));
  std::vector<DenseWorld> worlds;
  for (int threads : {1, 2, 8}) {
    c.threads = threads;
    worlds.push_back(run_diffusion(c, field).world);
  }
  const bool same = worlds[0] == worlds[1] && worlds[0] == worlds[2];
  return {same, "world " + to_string(c.dims) + ", 25 steps, cfg 7.5, stride 8; threads 1/2/8 " +
                    (same ? "bitwise identical" : "DIFFER")};
}

Outcome cost_accounting() {
  RunConfig c;
  c.dims = Coord::Constant(24);
  c.channels = 4;
  c.tile_size = 8;
  const MixtureDenoiser field({{0.5, -1.0}, {0.5, 1.0}});
  const std::size_t tiles = plan_tiles(c.dims, 8, 4).size();
  double best[2] = {1e300, 1e300};
  std::uint64_t calls[2] = {0, 0};
  for (int rep = 0; rep < 3; ++rep)
    for (int i = 0; i < 2; ++i) {
      c.threads = i == 0 ? 1 : 8;
      const auto start = Clock::now();
      calls[i] = run_diffusion(c, field).denoiser_calls;
      best[i] = std::min(best[i], seconds_since(start));
    }
  const std::uint64_t expected = tiles * 25 * 2;
  const bool counted = calls[0] == expected && calls[1] == expected;
  return {counted && best[1] < best[0],
          "calls " + std::to_string(calls[0]) + "/" + std::to_string(calls[1]) + " expected " +
              std::to_string(expected) + "; best wall clock serial " + fmt(best[0]) + " s, 8 threads " +
              fmt(best[1]) + " s (hardware threads " + std::to_string(std::thread::hardware_concurrency()) + ")"};
}

Outcome mixture_correctness() {
  std::mt19937 rng(77);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const std::vector<MixtureComponent> comps{{0.15, -1.5}, {0.35, -0.25}, {0.3, 0.8}, {0.2, 2.0}};
  double worst = 0.0;
  for (int pair = 0; pair < 10; ++pair) {
    const double t = u(rng);
    const double centre = (1.0 - t) * comps[rng() % comps.size()].mean;
    std::vector<float> x(27);
    for (auto& v : x) v = float(centre + t * n(rng));
    const auto post = mixture_posterior(x, t, comps);
    // Brute force: densities directly, no log-domain shift.
    std::vector<long double> dens;
    long double total = 0;
    for (const auto& c : comps) {
      long double sq = 0;
      for (float xi : x) sq += ((long double)xi - (1.0L - t) * c.mean) * ((long double)xi - (1.0L - t) * c.mean);
      dens.push_back(c.weight * std::exp(-sq / (2.0L * t * t)));
      total += dens.back();
    }
    for (std::size_t k = 0; k < comps.size(); ++k)
      worst = std::max(worst, std::abs(post.weights[k] - double(dens[k] / total)));
  }
  return {worst <= 1e-8, "10 (x, t) pairs, max weight deviation " + fmt(worst) + " (tol 1e-8)"};
}

Outcome format_round_trips() {
  test::TempDir dir;
  bool ok = true;
  std::string detail;
  const auto dense = test::random_world(Coord(9, 7, 5), 4, 8);
  save_world(dir.file("d.twld"), dense);
  save_world(dir.file("d2.twld"), std::get<DenseWorld>(load_world(dir.file("d.twld"))));
  const bool dense_ok = test::slurp(dir.file("d.twld")) == test::slurp(dir.file("d2.twld")) &&
                        load_dense_world(dir.file("d.twld")) == dense;
  const auto sparse = sparsify(dense, 0.7f);
  save_world(dir.file("s.twld"), sparse);
  save_world(dir.file("s2.twld"), std::get<SparseWorld>(load_world(dir.file("s.twld"))));
  const bool sparse_ok = test::slurp(dir.file("s.twld")) == test::slurp(dir.file("s2.twld"));
  const auto pts = collect_points(dense, 0.0, 4);
  save_pointcloud(dir.file("p.ply"), pts);
  save_pointcloud(dir.file("p2.ply"), load_pointcloud(dir.file("p.ply")));
  const bool ply_ok = test::slurp(dir.file("p.ply")) == test::slurp(dir.file("p2.ply"));

  std::ostringstream sink;
  const int a = run_cli({"generate", "--dims", "24,16,16", "--tile", "8", "--steps", "6", "--seed", "4", "--denoiser",
                         "mixture:pi=0.5,0.5;mu=-1,1", "--quiet", "--out", dir.file("g.twld")},
                        sink, sink);
  const int b = run_cli({"generate", "--manifest", dir.file("g.twld.manifest.json"), "--quiet", "--out",
                         dir.file("r.twld")},
                        sink, sink);
  const bool replay_ok = a == 0 && b == 0 && test::slurp(dir.file("g.twld")) == test::slurp(dir.file("r.twld"));
  ok = dense_ok && sparse_ok && ply_ok && replay_ok;
  detail = std::string("dense ") + (dense_ok ? "ok" : "FAIL") + ", sparse " + (sparse_ok ? "ok" : "FAIL") +
           ", point cloud " + (ply_ok ? "ok" : "FAIL") + " (" + std::to_string(pts.size()) + " points), manifest replay " +
           (replay_ok ? "bitwise" : "FAIL");
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"weight-coverage-soundness", weight_coverage},
      {"cosine-weight-values", cosine_values},
      {"tiling-transparency", tiling_transparency},
      {"blending-ablation", blending_ablation},
      {"tiled-decode-ablation", tiled_decode},
      {"repaint-preservation", repaint_preservation},
      {"guidance-identities", guidance_identities},
      {"parallel-determinism", parallel_determinism},
      {"cost-accounting", cost_accounting},
      {"mixture-posterior", mixture_correctness},
      {"format-round-trips", format_round_trips},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - std::size_t(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
