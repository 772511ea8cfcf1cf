#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "layerscatter/error.hpp"
#include "layerscatter/scene.hpp"

using namespace layerscatter;
namespace fs = std::filesystem;

namespace {

const fs::path kScenes = fs::path(LAYERSCATTER_SOURCE_DIR) / "scenes";

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("layerscatter-test-" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void check_placement(const std::vector<ParticleInstance>& inst, const Rect& r, double R) {
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const Vec2 c = inst[i].center;
    REQUIRE(c.x - R >= r.x0);
    REQUIRE(c.x + R <= r.x1);
    REQUIRE(c.y - R >= r.y0);
    REQUIRE(c.y + R <= r.y1);
    REQUIRE(inst[i].rotation >= 0.0);
    REQUIRE(inst[i].rotation < kTwoPi);
    for (std::size_t j = i + 1; j < inst.size(); ++j)
      if (norm(c - inst[j].center) <= kSeparationFactor * R) FAIL("pair " << i << "," << j << " too close");
  }
}

const char* kMinimal = "k1 = 1\nk2 = 3\nk3 = 1\nd = 32\nsource = 1, 1\n";

SceneConfig small_scene() {
  return parse_scene(
      "k1 = 1\nk2 = 3\nk3 = 1\nd = 6\nsource = 1, 1\nM = 6\n"
      "region = -1.5, 1.5, -4, -1.5\np = 8\ntol = 1e-10\nseed = 9\n");
}

}  // namespace

TEST_CASE("complex values parse in re+imj form") {
  CHECK(parse_complex("3") == cplx(3.0, 0.0));
  CHECK(parse_complex(" 2+1j ") == cplx(2.0, 1.0));
  CHECK(parse_complex("2-0.5j") == cplx(2.0, -0.5));
  CHECK(parse_complex("1e-3+2e-2j") == cplx(1e-3, 2e-2));
  CHECK(parse_complex("1.5e+1-1e-3j") == cplx(15.0, -1e-3));
  CHECK(parse_complex("4j") == cplx(0.0, 4.0));
  CHECK(parse_complex("-j") == cplx(0.0, -1.0));
  CHECK(parse_complex("3+j") == cplx(3.0, 1.0));
  CHECK_THROWS_AS(parse_complex("abc"), ConfigError);
  CHECK_THROWS_AS(parse_complex("1+2i"), ConfigError);
  CHECK_THROWS_AS(parse_complex(""), ConfigError);
}

TEST_CASE("bundled example1 scene") {
  const auto c = load_scene(kScenes / "example1.scene");
  CHECK(c.name == "example1");
  CHECK(c.layers.k1 == cplx(1.0));
  CHECK(c.layers.k2 == cplx(3.0));
  CHECK(c.layers.k3 == cplx(1.0));
  CHECK(c.layers.d == 32.0);
  CHECK(c.layers.source.x == 1.0);
  CHECK(c.layers.source.y == 1.0);
  CHECK(c.shape.a1 == 0.12);
  CHECK(c.shape.a2 == 0.04);
  CHECK(c.shape.a3 == 3);
  CHECK(c.shape.kp == cplx(2.0));
  CHECK(c.shape.N == 300);
  CHECK(c.p == 10);
  CHECK(c.M == 100);
  CHECK(c.gmres.tol == 1e-6);
}

TEST_CASE("scene defaults and round trip") {
  const auto c = parse_scene(kMinimal);
  CHECK(c.p == 10);
  CHECK(c.shape.N == 300);
  CHECK(c.gmres.tol == 1e-6);
  CHECK(c.gmres.restart == 100);
  CHECK(c.gmres.max_iterations == 1000);
  CHECK(c.contour.n_tail == 240);
  CHECK(c.contour.n_mid == 20);
  CHECK(c.contour.b == 0.2);
  CHECK(c.path == CouplingPath::Auto);
  CHECK(c.M == 0);
  const auto e = load_scene(kScenes / "example3.scene");
  const auto r = parse_scene(format_scene(e));
  CHECK(r.name == e.name);
  CHECK(r.layers.k3 == e.layers.k3);
  CHECK(r.shape.a3 == e.shape.a3);
  CHECK(r.region.y0 == e.region.y0);
  CHECK(r.seed == e.seed);
  CHECK(r.M == e.M);
}

TEST_CASE("scene rejections name the field") {
  auto rejects = [](const std::string& text, const std::string& field) {
    try {
      parse_scene(text);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      INFO(msg);
      CHECK(msg.find(field) != std::string::npos);
      return;
    }
    FAIL("accepted: " << text);
  };
  rejects("k1 = 1\nk2 = 3\nk3 = 1\nd = 32\nsource = 1, -1\n", "source");
  rejects("k1 = 1\nk2 = 3\nk3 = 1\nd = 32\n", "source");
  rejects(std::string(kMinimal) + "colour = red\n", "colour");
  rejects(std::string(kMinimal) + "p = 4\np = 5\n", "p");
  rejects(std::string(kMinimal) + "p = x\n", "p");
  rejects(std::string(kMinimal) + "tol = 0\n", "tol");
  rejects(std::string(kMinimal) + "M = 10\n", "region");
  rejects(std::string(kMinimal) + "M = 10\nregion = -5, 5, -10, -0.5\n", "y1");
  rejects(std::string(kMinimal) + "M = 10\nregion = -5, 5, -31.5, -2\n", "y0");
  rejects(std::string(kMinimal) + "M = 100000\nregion = -5, 5, -30, -2\n", "capacity");
  rejects(std::string(kMinimal) + "a1 = 0.01\n", "a1");
  rejects(std::string(kMinimal) + "path = fast\n", "path");
}

TEST_CASE("placement invariants") {
  const Rect r{-20.0, 20.0, -30.5, -1.5};
  const double R = 0.176;
  SUBCASE("single instance") {
    const auto one = place_particles(r, 1, R, 7);
    REQUIRE(one.size() == 1);
    check_placement(one, r, R);
  }
  SUBCASE("5000 instances, exhaustive pair scan") {
    const auto many = place_particles(r, 5000, R, 11);
    REQUIRE(many.size() == 5000);
    check_placement(many, r, R);
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto a = place_particles(r, 300, R, 5);
    const auto b = place_particles(r, 300, R, 5);
    const auto c = place_particles(r, 300, R, 6);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a[i].center.x == b[i].center.x && a[i].center.y == b[i].center.y &&
             a[i].rotation == b[i].rotation;
      differ = differ || a[i].center.x != c[i].center.x;
    }
    CHECK(same);
    CHECK(differ);
  }
  SUBCASE("capacity error names the largest feasible count") {
    const Rect small{0.0, 1.0, -2.0, -1.0};
    const int cap = placement_capacity(small, R);
    CHECK(cap > 0);
    CHECK_NOTHROW(place_particles(small, cap, R, 1));
    check_placement(place_particles(small, cap, R, 1), small, R);
    try {
      place_particles(small, cap + 1, R, 1);
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(std::to_string(cap)) != std::string::npos);
    }
  }
  SUBCASE("all bundled scenes") {
    for (const char* name : {"example1", "example1_full", "example2", "example3"}) {
      const auto c = load_scene(kScenes / (std::string(name) + ".scene"));
      const auto inst = place_particles(c.region, c.M, c.enclosing_radius(), c.seed);
      CHECK(int(inst.size()) == c.M);
      check_placement(inst, c.region, c.enclosing_radius());
    }
  }
}

TEST_CASE("field grid file format") {
  const auto dir = temp_dir("grid");
  FieldGrid g;
  g.extent = {-2.5, 3.0, -4.0, 1.25};
  g.nx = 3;
  g.ny = 2;
  g.fingerprint = 0x0123456789abcdefull;
  g.residual = 3.5e-7;
  g.tol = 1e-6;
  g.iterations = 17;
  for (int i = 0; i < 6; ++i) g.values.push_back({i + 0.5, -i * 0.25});
  const auto path = dir / "g.bin";
  write_field_grid(path, g);
  CHECK(fs::file_size(path) == 64 + 6 * 16);
  std::ifstream in(path, std::ios::binary);
  std::string header(64, '\0');
  in.read(header.data(), 64);
  CHECK(header.rfind("LSFIELD 1 3 2 -2.5 3 -4 1.25", 0) == 0);
  CHECK(header[63] == '\n');
  double first[2];
  in.read(reinterpret_cast<char*>(first), sizeof first);
  CHECK(first[0] == 0.5);
  CHECK(first[1] == 0.0);
  std::ifstream side(path.string() + ".json");
  const auto meta = nlohmann::json::parse(side);
  CHECK(meta.at("fingerprint") == "0123456789abcdef");
  CHECK(meta.at("nx") == 3);
  const auto r = read_field_grid(path);
  CHECK(r.nx == 3);
  CHECK(r.ny == 2);
  CHECK(r.fingerprint == g.fingerprint);
  CHECK(r.residual == g.residual);
  CHECK(r.iterations == 17);
  for (int i = 0; i < 6; ++i) CHECK(r.values[i] == g.values[i]);
  CHECK(g.point(0, 0).x == -2.5);
  CHECK(g.point(2, 1).x == 3.0);
  CHECK(g.point(2, 1).y == 1.25);
}

TEST_CASE("solve, persist, evaluate") {
  const auto dir = temp_dir("solve");
  const auto cfg = small_scene();
  const auto cold = setup_scene(cfg, dir / "cache", true);
  CHECK_FALSE(cold.cache.cache_hit);
  const Solution sol = solve_layered_scene(*cold.problem, cfg.gmres);
  CHECK(sol.residual <= cfg.gmres.tol);

  write_solution(dir / "s.bin", sol);
  const Solution back = read_solution(dir / "s.bin");
  CHECK(back.fingerprint == sol.fingerprint);
  CHECK(back.iterations == sol.iterations);
  CHECK(back.residual == sol.residual);
  CHECK(back.history == sol.history);
  CHECK(back.beta == sol.beta);
  CHECK(back.incoming == sol.incoming);
  REQUIRE(back.densities.size() == sol.densities.size());
  CHECK(back.densities.values.back() == sol.densities.values.back());

  SUBCASE("warm cache reproduces the cold solve") {
    const auto warm = setup_scene(cfg, dir / "cache", true);
    CHECK(warm.cache.cache_hit);
    const Solution ws = solve_layered_scene(*warm.problem, cfg.gmres);
    double diff = 0.0;
    for (std::size_t i = 0; i < ws.beta.size(); ++i) diff = std::max(diff, std::abs(ws.beta[i] - sol.beta[i]));
    CHECK(diff <= 1e-12);
    CHECK(ws.fingerprint == sol.fingerprint);
  }
  SUBCASE("grid evaluation with and without interiors") {
    const auto& inst = cold.instances[0];
    const Rect e{inst.center.x - 0.02, inst.center.x + 0.02, inst.center.y - 0.5, inst.center.y};
    const auto all = eval_field_grid(*cold.problem, back, e, 3, 3, true);
    const auto ext = eval_field_grid(*cold.problem, back, e, 3, 3, false);
    CHECK(all.fingerprint == sol.fingerprint);
    bool any_nan = false;
    for (std::size_t i = 0; i < all.values.size(); ++i) {
      CHECK(std::isfinite(all.values[i].real()));
      if (std::isnan(ext.values[i].real())) any_nan = true;
      else CHECK(ext.values[i] == all.values[i]);
    }
    CHECK(any_nan);
    const auto again = eval_field_grid(*cold.problem, sol, e, 3, 3, true);
    for (std::size_t i = 0; i < all.values.size(); ++i) CHECK(again.values[i] == all.values[i]);
  }
}
