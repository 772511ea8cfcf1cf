#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "layerscatter/coupling.hpp"
#include "layerscatter/gmres.hpp"
#include "layerscatter/particle.hpp"
#include "layerscatter/solver.hpp"
#include "layerscatter/sommerfeld.hpp"

namespace layerscatter {

// Axis-aligned rectangle; enclosing disks must lie inside it.
struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

// Minimum inset of the placement region from both interfaces, in wavelengths of k2.
inline constexpr double kRegionInset = 0.5;
// Minimum centre distance in units of the enclosing radius.
inline constexpr double kSeparationFactor = 2.2;

struct SceneConfig {
  std::string name;
  LayerStack layers;
  ShapeParams shape;
  int M = 0;
  Rect region;
  std::uint64_t seed = 1;
  int p = 10;
  ContourParams contour;
  GmresConfig gmres;
  CouplingPath path = CouplingPath::Auto;

  // Throws ConfigError naming the field and the bound.
  void validate() const;
  double enclosing_radius() const { return kEnclosingFactor * shape.circumradius(); }
};

// Flat `key = value` text, `#` comments, complex values as re+imj.
SceneConfig parse_scene(const std::string& text);
SceneConfig load_scene(const std::filesystem::path& path);
std::string format_scene(const SceneConfig& config);

cplx parse_complex(const std::string& text);
CouplingPath parse_path(const std::string& text);
const char* path_name(CouplingPath path);

// Grid-seeded placement perturbed by randomized sweeps. Centre distances
// exceed kSeparationFactor * R and every disk lies inside `region`.
struct PlacementOptions {
  int sweeps = 5;
  double step = 0.4;  // perturbation radius in grid pitches
};
std::vector<ParticleInstance> place_particles(const Rect& region, int M, double R,
                                              std::uint64_t seed, PlacementOptions options = {});
// Largest M the region accepts at the given radius.
int placement_capacity(const Rect& region, double R);

// LAYERSCATTER_CACHE_DIR, else $XDG_CACHE_HOME/layerscatter, else ~/.cache/layerscatter.
std::filesystem::path default_cache_dir();

// Scene with its particle model and problem assembled.
struct SceneSetup {
  SceneConfig config;
  std::vector<ParticleInstance> instances;
  std::shared_ptr<const ParticleModel> model;
  ModelBuildInfo cache;
  std::unique_ptr<LayeredProblem> problem;
};
SceneSetup setup_scene(const SceneConfig& config,
                       const std::optional<std::filesystem::path>& cache_dir,
                       bool need_densities);

struct FieldGrid {
  Rect extent;
  int nx = 0, ny = 0;
  CVector values;  // row-major, row j at y = y0 + j dy
  std::uint64_t fingerprint = 0;
  double residual = 0.0;
  double tol = 0.0;
  int iterations = 0;
  bool include_interiors = true;
  double solve_seconds = 0.0;
  double eval_seconds = 0.0;

  Vec2 point(int i, int j) const;
};

FieldGrid eval_field_grid(const LayeredProblem& problem, const Solution& solution, const Rect& extent,
                          int nx, int ny, bool include_interiors = true);

// 64-byte text header, little-endian re/im doubles, JSON sidecar at path + ".json".
void write_field_grid(const std::filesystem::path& path, const FieldGrid& grid);
FieldGrid read_field_grid(const std::filesystem::path& path);

void write_solution(const std::filesystem::path& path, const Solution& solution);
Solution read_solution(const std::filesystem::path& path);

}  // namespace layerscatter
