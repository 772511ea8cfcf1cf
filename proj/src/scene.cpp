#include "layerscatter/scene.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "layerscatter/error.hpp"

namespace layerscatter {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  const auto r = std::from_chars(first, t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return v;
}

long long parse_int(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  long long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key + ": cannot parse '" + text + "' as an integer");
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& key, std::size_t n) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, key));
  if (out.size() != n)
    throw ConfigError(key + ": expected " + std::to_string(n) + " comma-separated values");
  return out;
}

std::string format_complex(cplx z) {
  char buf[64];
  if (z.imag() == 0.0)
    std::snprintf(buf, sizeof buf, "%.17g", z.real());
  else
    std::snprintf(buf, sizeof buf, "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

double wavelength(cplx k) { return kTwoPi / k.real(); }

std::int64_t cell_key(long ix, long iy) {
  return (std::int64_t(ix) << 32) ^ std::int64_t(std::uint32_t(iy));
}

int grid_count(double length, double pitch) { return int(std::floor(length / pitch + 1e-12)) + 1; }

// Disks are kept this far inside the region so that rounding never pushes one out.
double edge_margin(const Rect& r) {
  return 1e-9 * (1.0 + std::max({std::abs(r.x0), std::abs(r.x1), std::abs(r.y0), std::abs(r.y1)}));
}

long long capacity_at(const Rect& region, double R, double pitch) {
  const double eps = edge_margin(region);
  const double w = region.width() - 2.0 * (R + eps), h = region.height() - 2.0 * (R + eps);
  if (w < 0.0 || h < 0.0) return 0;
  return (long long)grid_count(w, pitch) * grid_count(h, pitch);
}

double min_pitch(double R) { return kSeparationFactor * R * (1.0 + 1e-6); }

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_cvector(std::ostream& os, const CVector& v) {
  put<std::uint64_t>(os, v.size());
  for (const auto& z : v) {
    put(os, z.real());
    put(os, z.imag());
  }
}

CVector get_cvector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (std::uint64_t(1) << 32)) throw ConfigError("solution file: implausible vector length");
  CVector v(n);
  for (auto& z : v) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    z = {re, im};
  }
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

constexpr char kGridMagic[] = "LSFIELD";
constexpr char kSolutionMagic[8] = {'L', 'S', 'S', 'O', 'L', 'N', '0', '1'};

}  // namespace

cplx parse_complex(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty complex value");
  if (t.back() != 'j') return parse_double(t, "complex");
  const std::string body = t.substr(0, t.size() - 1);
  std::size_t split = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  auto imag = [&](const std::string& s) {
    if (s.empty() || s == "+") return 1.0;
    if (s == "-") return -1.0;
    return parse_double(s, "complex");
  };
  if (split == std::string::npos) return {0.0, imag(body)};
  return {parse_double(body.substr(0, split), "complex"), imag(body.substr(split))};
}

CouplingPath parse_path(const std::string& text) {
  const std::string t = trim(text);
  if (t == "auto") return CouplingPath::Auto;
  if (t == "direct") return CouplingPath::Direct;
  if (t == "nufft") return CouplingPath::Nufft;
  throw ConfigError("path: expected auto, direct or nufft, got '" + text + "'");
}

const char* path_name(CouplingPath path) {
  switch (path) {
    case CouplingPath::Direct: return "direct";
    case CouplingPath::Nufft: return "nufft";
    default: return "auto";
  }
}

void SceneConfig::validate() const {
  layers.validate();
  shape.validate();
  if (p < 0 || p > 60) throw ConfigError("p: must lie in [0, 60]");
  if (M < 0) throw ConfigError("M: must be nonnegative");
  gmres.validate();
  if (!(contour.b > 0.0) || !(contour.pad > 0.0) || contour.n_tail < 1 || contour.n_mid < 1 ||
      contour.tail_panels < 1)
    throw ConfigError("contour: b, pad and node counts must be positive");
  if (M == 0) return;
  if (!(region.x0 < region.x1) || !(region.y0 < region.y1))
    throw ConfigError("region: need x0 < x1 and y0 < y1");
  const double inset = kRegionInset * wavelength(layers.k2);
  std::ostringstream os;
  if (region.y1 > -inset) {
    os << "region: y1 = " << region.y1 << " must be <= " << -inset << " (" << kRegionInset
       << " wavelengths of k2 below y = 0)";
    throw ConfigError(os.str());
  }
  if (region.y0 < -layers.d + inset) {
    os << "region: y0 = " << region.y0 << " must be >= " << -layers.d + inset << " ("
       << kRegionInset << " wavelengths of k2 above y = -d)";
    throw ConfigError(os.str());
  }
  const int cap = placement_capacity(region, enclosing_radius());
  if (M > cap) {
    os << "M: " << M << " exceeds the region capacity " << cap << " at separation "
       << kSeparationFactor << " R";
    throw ConfigError(os.str());
  }
}

SceneConfig parse_scene(const std::string& text) {
  SceneConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(key + ": given more than once");
    if (key == "name") c.name = val;
    else if (key == "k1") c.layers.k1 = parse_complex(val);
    else if (key == "k2") c.layers.k2 = parse_complex(val);
    else if (key == "k3") c.layers.k3 = parse_complex(val);
    else if (key == "d") c.layers.d = parse_double(val, key);
    else if (key == "source") {
      const auto v = parse_list(val, key, 2);
      c.layers.source = {v[0], v[1]};
    } else if (key == "a1") c.shape.a1 = parse_double(val, key);
    else if (key == "a2") c.shape.a2 = parse_double(val, key);
    else if (key == "a3") c.shape.a3 = int(parse_int(val, key));
    else if (key == "kp") c.shape.kp = parse_complex(val);
    else if (key == "N") c.shape.N = int(parse_int(val, key));
    else if (key == "M") c.M = int(parse_int(val, key));
    else if (key == "region") {
      const auto v = parse_list(val, key, 4);
      c.region = {v[0], v[1], v[2], v[3]};
    } else if (key == "seed") c.seed = std::uint64_t(parse_int(val, key));
    else if (key == "p") c.p = int(parse_int(val, key));
    else if (key == "contour_b") c.contour.b = parse_double(val, key);
    else if (key == "contour_pad") c.contour.pad = parse_double(val, key);
    else if (key == "contour_n_tail") c.contour.n_tail = int(parse_int(val, key));
    else if (key == "contour_n_mid") c.contour.n_mid = int(parse_int(val, key));
    else if (key == "contour_tail_panels") c.contour.tail_panels = int(parse_int(val, key));
    else if (key == "tol") c.gmres.tol = parse_double(val, key);
    else if (key == "max_iterations") c.gmres.max_iterations = int(parse_int(val, key));
    else if (key == "restart") c.gmres.restart = int(parse_int(val, key));
    else if (key == "path") c.path = parse_path(val);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  for (const char* req : {"k1", "k2", "k3", "d", "source"})
    if (!seen.count(req)) throw ConfigError(std::string(req) + ": required");
  if (c.M > 0 && !seen.count("region")) throw ConfigError("region: required when M > 0");
  c.validate();
  return c;
}

SceneConfig load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  SceneConfig c = parse_scene(ss.str());
  if (c.name.empty()) c.name = path.stem().string();
  return c;
}

std::string format_scene(const SceneConfig& c) {
  std::ostringstream os;
  os.precision(17);
  if (!c.name.empty()) os << "name = " << c.name << "\n";
  os << "k1 = " << format_complex(c.layers.k1) << "\n"
     << "k2 = " << format_complex(c.layers.k2) << "\n"
     << "k3 = " << format_complex(c.layers.k3) << "\n"
     << "d = " << c.layers.d << "\n"
     << "source = " << c.layers.source.x << ", " << c.layers.source.y << "\n"
     << "a1 = " << c.shape.a1 << "\n"
     << "a2 = " << c.shape.a2 << "\n"
     << "a3 = " << c.shape.a3 << "\n"
     << "kp = " << format_complex(c.shape.kp) << "\n"
     << "N = " << c.shape.N << "\n"
     << "M = " << c.M << "\n"
     << "region = " << c.region.x0 << ", " << c.region.x1 << ", " << c.region.y0 << ", "
     << c.region.y1 << "\n"
     << "seed = " << c.seed << "\n"
     << "p = " << c.p << "\n"
     << "contour_b = " << c.contour.b << "\n"
     << "contour_pad = " << c.contour.pad << "\n"
     << "contour_n_tail = " << c.contour.n_tail << "\n"
     << "contour_n_mid = " << c.contour.n_mid << "\n"
     << "contour_tail_panels = " << c.contour.tail_panels << "\n"
     << "tol = " << c.gmres.tol << "\n"
     << "max_iterations = " << c.gmres.max_iterations << "\n"
     << "restart = " << c.gmres.restart << "\n"
     << "path = " << path_name(c.path) << "\n";
  return os.str();
}

int placement_capacity(const Rect& region, double R) {
  if (!(R > 0.0)) throw ConfigError("placement: radius must be positive");
  return int(std::min<long long>(capacity_at(region, R, min_pitch(R)), 1 << 30));
}

std::vector<ParticleInstance> place_particles(const Rect& region, int M, double R,
                                              std::uint64_t seed, PlacementOptions options) {
  if (M < 0) throw ConfigError("placement: M must be nonnegative");
  if (M == 0) return {};
  const int cap = placement_capacity(region, R);
  if (M > cap) {
    std::ostringstream os;
    os << "placement: region holds at most " << cap << " inclusions of radius " << R
       << " at separation " << kSeparationFactor << " R; requested " << M;
    throw ConfigError(os.str());
  }
  const double eps = edge_margin(region);
  const double w = region.width() - 2.0 * (R + eps), h = region.height() - 2.0 * (R + eps);
  // Largest pitch that still fits M grid points.
  double lo = min_pitch(R), hi = std::max({w, h, lo}) + lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (capacity_at(region, R, mid) >= M ? lo : hi) = mid;
  }
  const double pitch = lo;
  const int nx = grid_count(w, pitch), ny = grid_count(h, pitch);
  const double ox = region.x0 + R + eps + 0.5 * (w - (nx - 1) * pitch);
  const double oy = region.y0 + R + eps + 0.5 * (h - (ny - 1) * pitch);

  std::mt19937_64 rng(seed);
  std::vector<int> cells(std::size_t(nx) * ny);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = int(i);
  std::shuffle(cells.begin(), cells.end(), rng);
  if (cells.size() < std::size_t(M)) throw SolverError("placement: grid smaller than requested count");
  cells.resize(M);

  std::vector<ParticleInstance> out(M);
  const double sep = kSeparationFactor * R;
  const double bin = sep;
  std::unordered_map<std::int64_t, std::vector<int>> bins;
  auto key_of = [&](Vec2 c) {
    return cell_key(long(std::floor(c.x / bin)), long(std::floor(c.y / bin)));
  };
  for (int m = 0; m < M; ++m) {
    out[m].center = {ox + (cells[m] % nx) * pitch, oy + (cells[m] / nx) * pitch};
    out[m].R = R;
    bins[key_of(out[m].center)].push_back(m);
  }
  auto fits = [&](int self, Vec2 c) {
    if (c.x - R < region.x0 || c.x + R > region.x1 || c.y - R < region.y0 || c.y + R > region.y1)
      return false;
    const long ix = long(std::floor(c.x / bin)), iy = long(std::floor(c.y / bin));
    for (long a = ix - 1; a <= ix + 1; ++a)
      for (long b = iy - 1; b <= iy + 1; ++b) {
        const auto it = bins.find(cell_key(a, b));
        if (it == bins.end()) continue;
        for (int j : it->second)
          if (j != self && norm(out[j].center - c) <= sep) return false;
      }
    return true;
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = options.step * pitch;
  for (int sweep = 0; sweep < options.sweeps; ++sweep)
    for (int m = 0; m < M; ++m) {
      const double r = radius * std::sqrt(unit(rng));
      const double th = kTwoPi * unit(rng);
      const Vec2 c = out[m].center + Vec2{r * std::cos(th), r * std::sin(th)};
      if (!fits(m, c)) continue;
      auto& old = bins[key_of(out[m].center)];
      old.erase(std::find(old.begin(), old.end(), m));
      out[m].center = c;
      bins[key_of(c)].push_back(m);
    }
  for (auto& inst : out) inst.rotation = kTwoPi * unit(rng);
  return out;
}

std::filesystem::path default_cache_dir() {
  if (const char* e = std::getenv("LAYERSCATTER_CACHE_DIR"); e && *e) return e;
  if (const char* e = std::getenv("XDG_CACHE_HOME"); e && *e)
    return std::filesystem::path(e) / "layerscatter";
  if (const char* e = std::getenv("HOME"); e && *e)
    return std::filesystem::path(e) / ".cache" / "layerscatter";
  return std::filesystem::temp_directory_path() / "layerscatter-cache";
}

SceneSetup setup_scene(const SceneConfig& config,
                       const std::optional<std::filesystem::path>& cache_dir,
                       bool need_densities) {
  config.validate();
  SceneSetup s;
  s.config = config;
  if (cache_dir) std::filesystem::create_directories(*cache_dir);
  s.model = std::make_shared<const ParticleModel>(
      build_particle_model(config.shape, config.layers.k2, config.p, cache_dir, &s.cache,
                           need_densities));
  s.instances = place_particles(config.region, config.M, s.model->R, config.seed);
  s.problem = std::make_unique<LayeredProblem>(config.layers,
                                               build_contour(config.layers, config.contour),
                                               s.instances, s.model, config.path);
  return s;
}

Vec2 FieldGrid::point(int i, int j) const {
  const double x = nx > 1 ? extent.x0 + extent.width() * i / (nx - 1) : 0.5 * (extent.x0 + extent.x1);
  const double y = ny > 1 ? extent.y0 + extent.height() * j / (ny - 1) : 0.5 * (extent.y0 + extent.y1);
  return {x, y};
}

FieldGrid eval_field_grid(const LayeredProblem& problem, const Solution& solution, const Rect& extent,
                          int nx, int ny, bool include_interiors) {
  if (nx < 1 || ny < 1) throw ConfigError("grid: nx and ny must be at least 1");
  if (!(extent.x0 <= extent.x1) || !(extent.y0 <= extent.y1))
    throw ConfigError("grid: need x0 <= x1 and y0 <= y1");
  const auto t0 = std::chrono::steady_clock::now();
  FieldGrid g;
  g.extent = extent;
  g.nx = nx;
  g.ny = ny;
  g.fingerprint = solution.fingerprint;
  g.residual = solution.residual;
  g.iterations = solution.iterations;
  g.include_interiors = include_interiors;
  g.values.resize(std::size_t(nx) * ny);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 x = g.point(i, j);
      cplx& v = g.values[std::size_t(j) * nx + i];
      if (!include_interiors && problem.locate(x).region == Region::Inclusion)
        v = {nan, nan};
      else
        v = eval_total_field(problem, solution, x);
    }
  g.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return g;
}

void write_field_grid(const std::filesystem::path& path, const FieldGrid& g) {
  if (g.values.size() != std::size_t(g.nx) * g.ny) throw ConfigError("grid: value count mismatch");
  char header[64];
  std::memset(header, ' ', sizeof header);
  const int n = std::snprintf(header, sizeof header, "%s 1 %d %d %.8g %.8g %.8g %.8g", kGridMagic,
                              g.nx, g.ny, g.extent.x0, g.extent.x1, g.extent.y0, g.extent.y1);
  if (n < 0 || n > 63) throw ConfigError("grid: header does not fit in 64 bytes");
  std::memset(header + n, ' ', 63 - n);
  header[63] = '\n';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(header, 64);
  for (const auto& z : g.values) {
    put(out, z.real());
    put(out, z.imag());
  }
  if (!out) throw ConfigError("failed writing " + path.string());

  nlohmann::ordered_json meta;
  meta["format"] = "LSFIELD";
  meta["version"] = 1;
  meta["nx"] = g.nx;
  meta["ny"] = g.ny;
  meta["extent"] = {g.extent.x0, g.extent.x1, g.extent.y0, g.extent.y1};
  meta["layout"] = "row-major, row j at y0 + j (y1 - y0) / (ny - 1), little-endian re/im float64";
  meta["fingerprint"] = hex64(g.fingerprint);
  meta["residual"] = g.residual;
  meta["tol"] = g.tol;
  meta["iterations"] = g.iterations;
  meta["include_interiors"] = g.include_interiors;
  meta["timings"] = {{"solve_seconds", g.solve_seconds}, {"eval_seconds", g.eval_seconds}};
  std::ofstream side(path.string() + ".json");
  side << meta.dump(2) << "\n";
  if (!side) throw ConfigError("failed writing metadata for " + path.string());
}

FieldGrid read_field_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char header[64];
  if (!in.read(header, 64) || header[63] != '\n') throw ConfigError("grid: bad header");
  std::istringstream hs(std::string(header, 63));
  std::string magic;
  int version = 0;
  FieldGrid g;
  hs >> magic >> version >> g.nx >> g.ny >> g.extent.x0 >> g.extent.x1 >> g.extent.y0 >> g.extent.y1;
  if (!hs || magic != kGridMagic || version != 1) throw ConfigError("grid: bad header");
  if (g.nx < 1 || g.ny < 1) throw ConfigError("grid: bad dimensions");
  g.values.resize(std::size_t(g.nx) * g.ny);
  for (auto& z : g.values) {
    const double re = get<double>(in);
    const double im = get<double>(in);
    z = {re, im};
  }
  std::ifstream side(path.string() + ".json");
  if (side) {
    const auto meta = nlohmann::json::parse(side);
    const auto& e = meta.at("extent");
    g.extent = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>(),
                e.at(3).get<double>()};
    g.fingerprint = std::stoull(meta.at("fingerprint").get<std::string>(), nullptr, 16);
    g.residual = meta.at("residual").get<double>();
    g.tol = meta.at("tol").get<double>();
    g.iterations = meta.at("iterations").get<int>();
    g.include_interiors = meta.at("include_interiors").get<bool>();
    g.solve_seconds = meta.at("timings").at("solve_seconds").get<double>();
    g.eval_seconds = meta.at("timings").at("eval_seconds").get<double>();
  }
  return g;
}

void write_solution(const std::filesystem::path& path, const Solution& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kSolutionMagic, sizeof kSolutionMagic);
  put<std::uint64_t>(out, s.fingerprint);
  put<std::int32_t>(out, s.iterations);
  put<std::uint8_t>(out, s.converged ? 1 : 0);
  put(out, s.residual);
  put<std::uint64_t>(out, s.history.size());
  for (double h : s.history) put(out, h);
  put_cvector(out, s.beta);
  put_cvector(out, s.incoming);
  put<std::uint64_t>(out, s.densities.size());
  for (const auto& v : s.densities.values)
    for (const auto& z : v) {
      put(out, z.real());
      put(out, z.imag());
    }
  if (!out) throw ConfigError("failed writing " + path.string());
}

Solution read_solution(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[sizeof kSolutionMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSolutionMagic, sizeof magic) != 0)
    throw ConfigError("solution file: bad magic in " + path.string());
  Solution s;
  s.fingerprint = get<std::uint64_t>(in);
  s.iterations = get<std::int32_t>(in);
  s.converged = get<std::uint8_t>(in) != 0;
  s.residual = get<double>(in);
  const auto nh = get<std::uint64_t>(in);
  if (nh > (1u << 24)) throw ConfigError("solution file: implausible history length");
  s.history.resize(nh);
  for (auto& h : s.history) h = get<double>(in);
  s.beta = get_cvector(in);
  s.incoming = get_cvector(in);
  const auto nd = get<std::uint64_t>(in);
  if (nd > (1u << 24)) throw ConfigError("solution file: implausible density count");
  s.densities.values.resize(nd);
  for (auto& v : s.densities.values)
    for (auto& z : v) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      z = {re, im};
    }
  return s;
}

}  // namespace layerscatter
