#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tworld/cli.hpp"
#include "tworld/container.hpp"
#include "tworld/manifest.hpp"
#include "tworld/pipeline.hpp"

using namespace tworld;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

int count_lines_starting(const std::string& text, const std::string& prefix) {
  std::istringstream ss(text);
  int n = 0;
  for (std::string line; std::getline(ss, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST_CASE("generate writes a world, a manifest and one progress line per step") {
  test::TempDir dir;
  const auto r = cli({"generate", "--dims", "16,16,8", "--tile", "8", "--steps", "4", "--seed", "3", "--out",
                      dir.file("w.twld")});
  REQUIRE(r.code == 0);
  CHECK(count_lines_starting(r.err, "step ") == 4);
  CHECK(r.err.find("tiles=9") != std::string::npos);
  const auto w = load_dense_world(dir.file("w.twld"));
  CHECK((w.dims() == Coord(16, 16, 8)).all());
  CHECK(w.channels() == 4);
  const auto m = load_manifest(dir.file("w.twld.manifest.json"));
  CHECK(m.denoiser_calls == 9 * 4 * 2);
  CHECK(m.steps.size() == 4);
}

TEST_CASE("same seed gives identical bytes across thread counts; replay reproduces them") {
  test::TempDir dir;
  const std::vector<std::string> base{"generate", "--dims", "24,16,8", "--tile", "8", "--steps", "5",
                                      "--denoiser", "mixture:pi=0.5,0.5;mu=-1,1", "--quiet"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  REQUIRE(cli(with({"--seed", "11", "--threads", "1", "--out", dir.file("a.twld")})).code == 0);
  REQUIRE(cli(with({"--seed", "11", "--threads", "4", "--out", dir.file("b.twld")})).code == 0);
  CHECK(test::slurp(dir.file("a.twld")) == test::slurp(dir.file("b.twld")));
  REQUIRE(cli({"generate", "--manifest", dir.file("a.twld.manifest.json"), "--out", dir.file("c.twld"), "--quiet"})
              .code == 0);
  CHECK(test::slurp(dir.file("c.twld")) == test::slurp(dir.file("a.twld")));
  REQUIRE(cli(with({"--seed", "12", "--out", dir.file("d.twld")})).code == 0);
  CHECK(test::slurp(dir.file("d.twld")) != test::slurp(dir.file("a.twld")));
}

TEST_CASE("config files fill unset flags; explicit flags win") {
  test::TempDir dir;
  {
    std::ofstream cfg(dir.file("run.cfg"));
    cfg << "# run settings\ndims = 16,8,8\ntile = 8\nsteps = 3\nchannels = 2\nquiet = true\n";
  }
  const auto r = cli({"generate", "--config", dir.file("run.cfg"), "--steps", "2", "--out", dir.file("w.twld")});
  REQUIRE(r.code == 0);
  CHECK(r.err.empty());
  const auto m = load_manifest(dir.file("w.twld.manifest.json"));
  CHECK(m.settings.steps == 2);
  CHECK(m.settings.channels == 2);
  CHECK((m.settings.dims == Coord(16, 8, 8)).all());
}

TEST_CASE("prompt grids drive the conditions") {
  test::TempDir dir;
  {
    std::ofstream p(dir.file("p.txt"));
    p << R"([[["sea"]], [["sky"]]])";
    std::ofstream t(dir.file("targets.json"));
    t << R"({"sea": -1.0, "sky": 2.0, "": 0.0})";
  }
  const auto r = cli({"generate", "--dims", "16,8,8", "--tile", "8", "--stride", "8", "--channels", "1", "--cfg", "1",
                      "--prompts", dir.file("p.txt"), "--denoiser", "point:table=" + dir.file("targets.json"),
                      "--quiet", "--out", dir.file("w.twld")});
  REQUIRE(r.code == 0);
  const auto w = load_dense_world(dir.file("w.twld"));
  CHECK(w.at(Coord(0, 0, 0)) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(w.at(Coord(15, 7, 7)) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("usage and runtime errors use distinct exit codes") {
  test::TempDir dir;
  const std::string out = dir.file("x.twld");
  CHECK(cli({"generate", "--dims", "1,2", "--out", out}).code == 1);
  CHECK(cli({"generate", "--dims", "16,16,16"}).code == 1);
  CHECK(cli({"generate", "--blend", "triangle", "--out", out}).code == 1);
  CHECK(cli({"generate", "--dims", "8,8,8", "--tile", "16", "--out", out}).code == 1);
  CHECK(cli({"generate", "--prompts", dir.file("missing.txt"), "--out", out}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  const auto r = cli({"generate", "--dims", "8,8,8", "--tile", "8", "--steps", "2", "--quiet", "--prompt", "lava",
                      "--denoiser", "point:table=" + std::string(TWORLD_TEST_DATA) + "/targets.json", "--out", out});
  CHECK(r.code == 2);
  CHECK(r.err.find("lava") != std::string::npos);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("validate-layout prints origins and the cover histogram") {
  const auto r = cli({"validate-layout", "--dims", "32,32,16", "--tile", "16"});
  CHECK(r.code == 0);
  CHECK(r.out.find("tiles=9") != std::string::npos);
  CHECK(r.out.find("cover[1]=4096") != std::string::npos);
  CHECK(r.out.find("cover[4]=4096") != std::string::npos);
  CHECK(r.out.find("layout ok") != std::string::npos);
  CHECK(cli({"validate", "--dims", "8,8,8", "--tile", "16"}).code == 1);
}

TEST_CASE("ablate reports both seams") {
  const auto r = cli({"ablate", "--blend", "cosine,box", "--tile", "8", "--steps", "5"});
  CHECK(r.code == 0);
  CHECK(r.out.find("mask=cosine seam_max=") != std::string::npos);
  CHECK(r.out.find("mask=box seam_max=") != std::string::npos);
  CHECK(r.out.find("cosine_lt_box=true") != std::string::npos);
}

TEST_CASE("expand grows a single tile to three by three") {
  test::TempDir dir;
  REQUIRE(cli({"generate", "--dims", "8,8,8", "--tile", "8", "--steps", "3", "--channels", "2", "--seed", "1",
               "--denoiser", "mixture:pi=0.5,0.5;mu=-1,1", "--quiet", "--out", dir.file("tile.twld")})
              .code == 0);
  const auto r = cli({"expand", "--world", dir.file("tile.twld"), "--dims", "24,24,8", "--place", "8,8,0", "--tile",
                      "8", "--steps", "6", "--denoiser", "point:mu=0.5", "--quiet", "--out", dir.file("big.twld")});
  REQUIRE(r.code == 0);
  const auto tile = load_dense_world(dir.file("tile.twld"));
  const auto big = load_dense_world(dir.file("big.twld"));
  CHECK(extract_box(big, Coord(8, 8, 0), Coord(8, 8, 8)) == tile);
  CHECK(big.at(Coord(0, 23, 3), 1) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("decode and point-cloud export") {
  test::TempDir dir;
  REQUIRE(cli({"generate", "--dims", "16,8,8", "--tile", "8", "--steps", "2", "--channels", "3", "--denoiser",
               "point:mu=0.5", "--quiet", "--out", dir.file("w.twld"), "--ply", dir.file("w.ply")})
              .code == 0);
  CHECK(load_pointcloud(dir.file("w.ply")).size() == 16 * 8 * 8);
  const auto r = cli({"decode", "--world", dir.file("w.twld"), "--decoder", "linear:w=2,0,0/0,1,0;b=0,1", "--tile",
                      "8", "--out", dir.file("d.twld")});
  REQUIRE(r.code == 0);
  const auto d = load_dense_world(dir.file("d.twld"));
  CHECK(d.channels() == 2);
  CHECK(d.at(Coord(3, 3, 3), 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d.at(Coord(3, 3, 3), 1) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("two-stage generation from the command line") {
  test::TempDir dir;
  const auto r = cli({"generate", "--two-stage", "--dims", "8,8,4", "--tile", "4", "--steps", "2", "--channels", "2",
                      "--denoiser", "pattern:border=-1,1", "--denoiser2", "point:mu=0.7", "--channels2", "3",
                      "--structure-decoder", "affine:up=2", "--decoder", "identity", "--quiet", "--out",
                      dir.file("w.twld"), "--ply", dir.file("w.ply")});
  REQUIRE(r.code == 0);
  const auto w = load_dense_world(dir.file("w.twld"));
  CHECK((w.dims() == Coord(16, 16, 8)).all());
  CHECK(w.channels() == 3);
  CHECK(!load_pointcloud(dir.file("w.ply")).empty());
}

TEST_CASE("bench reports call counts per thread count") {
  const auto r = cli({"bench", "--dims", "16,16,16", "--tile", "8", "--steps", "2", "--thread-list", "1,2"});
  CHECK(r.code == 0);
  CHECK(count_lines_starting(r.out, "threads=") == 2);
  CHECK(r.out.find("calls=" + std::to_string(27 * 2 * 2)) != std::string::npos);
  CHECK(r.out.find("bitwise_identical=true") != std::string::npos);
}
