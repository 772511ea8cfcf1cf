#include "layerscatter/particle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/numerics/quadrature.hpp"

namespace layerscatter {
namespace {

using numerics::bessel_j_array;

// G = -(1/2pi) log r + g,  G' = -1/(2pi r) + g1 for G = (i/4) H0(kr).
struct SmoothParts {
  cplx g, g1;
};

SmoothParts smooth_parts(cplx k, double r) {
  const cplx z = k * r;
  const double lr = std::log(r);
  if (std::abs(z) <= 4.0) {
    const auto sp = numerics::small_argument_parts(z);
    const cplx lk = std::log(k / 2.0);
    const cplx g = 0.25 * kI * sp.j0 - (lr * (sp.j0 - 1.0) + lk * sp.j0) / kTwoPi - 0.25 * sp.y0_reg;
    const cplx g1 = -0.25 * kI * k * sp.j1 + k * (lr + lk) * sp.j1 / kTwoPi + 0.25 * k * sp.y1_reg;
    return {g, g1};
  }
  cplx h0, h1;
  numerics::hankel1_01(z, h0, h1);
  return {0.25 * kI * h0 + lr / kTwoPi, -0.25 * kI * k * h1 + 1.0 / (kTwoPi * r)};
}

// Trigonometric interpolation kernel on N equispaced nodes.
double dirichlet(int n, double x) {
  const double s = std::sin(0.5 * x);
  if (std::abs(s) < 1e-15) return 1.0;
  if (n % 2 == 0) return std::sin(0.5 * n * x) * std::cos(0.5 * x) / (n * s);
  return std::sin(0.5 * n * x) / (n * s);
}

// Alpert correction points about a grid node: offset (in units of h), weight,
// and interpolation weights onto nodes i + m, m = 0..N-1.
struct Corrections {
  numerics::AlpertRule rule;
  std::vector<double> offset;
  std::vector<double> weight;
  std::vector<double> interp;  // offset.size() x N
};

Corrections make_corrections(int n) {
  Corrections c{numerics::alpert_weights(n), {}, {}, {}};
  const double h = kTwoPi / n;
  for (std::size_t p = 0; p < c.rule.offsets.size(); ++p)
    for (double sign : {1.0, -1.0}) {
      c.offset.push_back(sign * c.rule.offsets[p]);
      c.weight.push_back(c.rule.weights[p]);
    }
  c.interp.resize(c.offset.size() * n);
  for (std::size_t q = 0; q < c.offset.size(); ++q)
    for (int m = 0; m < n; ++m) c.interp[q * n + m] = dirichlet(n, (c.offset[q] - m) * h);
  return c;
}

// J_m from J_0..J_{|m|} using J_{-m} = (-1)^m J_m.
cplx signed_j(const std::vector<cplx>& j, int m) {
  const int a = std::abs(m);
  return (m < 0 && a % 2) ? -j[a] : j[a];
}

Vec2 rotate(Vec2 v, double c, double s) { return {c * v.x - s * v.y, s * v.x + c * v.y}; }

void put_bytes(std::ostream& out, const void* src, std::size_t n) {
  char buf[8];
  std::memcpy(buf, src, n);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + n);
  out.write(buf, std::streamsize(n));
}

template <typename T>
void put(std::ostream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw ConfigError("truncated scattering-matrix file " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

constexpr std::uint32_t kCacheVersion = 1;

std::string format_k(cplx k) {
  std::ostringstream s;
  s << std::setprecision(17) << k.real() << "_" << k.imag();
  return s.str();
}

void check_wavenumber(cplx k, const char* name) {
  if (!(k.real() > 0.0) || k.imag() < 0.0)
    throw ConfigError(std::string(name) + " must satisfy Re k > 0 and Im k >= 0");
}

}  // namespace

void ShapeParams::validate() const {
  if (!(a1 > a2) || !(a2 >= 0.0) || !std::isfinite(a1))
    throw ConfigError("shape: need a1 > a2 >= 0");
  if (a3 < 0) throw ConfigError("shape: a3 must be a nonnegative integer");
  if (N < 64) throw ConfigError("shape: N must be at least 64");
  check_wavenumber(kp, "shape.kp");
}

std::uint64_t ShapeParams::fingerprint() const {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    unsigned char buf[8];
    std::memcpy(buf, p, n);
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + n);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= buf[i];
      hash *= 1099511628211ull;
    }
  };
  const std::int64_t a3l = a3, nl = N;
  mix(&a1, 8);
  mix(&a2, 8);
  mix(&a3l, 8);
  mix(&nl, 8);
  return hash;
}

bool ShapeParams::contains(Vec2 x) const {
  const double t = std::atan2(x.y, x.x);
  return norm(x) < a1 + a2 * std::cos(a3 * t);
}

CurvePoint shape_curve(const ShapeParams& shape, double t, double rotation) {
  const double ct = std::cos(t), st = std::sin(t);
  const double r = shape.a1 + shape.a2 * std::cos(shape.a3 * t);
  const double dr = -shape.a2 * shape.a3 * std::sin(shape.a3 * t);
  Vec2 pos{r * ct, r * st};
  Vec2 tan{dr * ct - r * st, dr * st + r * ct};
  const double speed = norm(tan);
  Vec2 nrm{tan.y / speed, -tan.x / speed};
  if (rotation != 0.0) {
    const double c = std::cos(rotation), s = std::sin(rotation);
    pos = rotate(pos, c, s);
    tan = rotate(tan, c, s);
    nrm = rotate(nrm, c, s);
  }
  return {pos, tan, nrm, speed};
}

double BoundaryDiscretization::arclength() const {
  double s = 0.0;
  for (double v : speed) s += v;
  return s * h;
}

BoundaryDiscretization discretize_boundary(const ShapeParams& shape, double rotation) {
  shape.validate();
  BoundaryDiscretization b;
  b.shape = shape;
  b.rotation = rotation;
  b.N = shape.N;
  b.h = kTwoPi / shape.N;
  for (int i = 0; i < b.N; ++i) {
    const auto c = shape_curve(shape, i * b.h, rotation);
    if (c.speed < 1e-8 * shape.a1) throw DomainError("boundary parametrization has vanishing speed");
    b.nodes.push_back(c.pos);
    b.normals.push_back(c.normal);
    b.speed.push_back(c.speed);
  }
  return b;
}

MullerKernels muller_difference_kernels(cplx k2, cplx kp, Vec2 x, Vec2 nx, Vec2 y, Vec2 ny) {
  const Vec2 dxy = x - y;
  const double r = norm(dxy);
  const auto p2 = smooth_parts(k2, r);
  const auto pp = smooth_parts(kp, r);
  const cplx dg = p2.g - pp.g;
  const cplx dg1 = p2.g1 - pp.g1;
  const cplx dg2 =
      (k2 * k2 - kp * kp) * std::log(r) / kTwoPi - k2 * k2 * p2.g + kp * kp * pp.g - dg1 / r;
  const double a = dot(dxy, nx);
  const double b = dot(dxy, ny);
  MullerKernels k;
  k.S = dg;
  k.D = -dg1 * b / r;
  k.N = dg1 * a / r;
  k.T = -dg2 * a * b / (r * r) + dg1 * (-dot(nx, ny) / r + a * b / (r * r * r));
  return k;
}

Eigen::MatrixXcd assemble_muller(const BoundaryDiscretization& bd, cplx k2, cplx kp) {
  check_wavenumber(k2, "k2");
  check_wavenumber(kp, "kp");
  const int n = bd.N;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    a(i, i) += 1.0;
    a(n + i, n + i) -= 1.0;
  }
  if (k2 == kp) return a;

  const Corrections corr = make_corrections(n);
  const int skip = corr.rule.excluded;
  const double h = bd.h;
  for (int i = 0; i < n; ++i) {
    const Vec2 x = bd.nodes[i], nx = bd.normals[i];
    for (int m = skip; m <= n - skip; ++m) {
      const int j = (i + m) % n;
      const auto k = muller_difference_kernels(k2, kp, x, nx, bd.nodes[j], bd.normals[j]);
      const double w = h * bd.speed[j];
      a(i, j) += w * k.D;
      a(i, n + j) += w * k.S;
      a(n + i, j) += w * k.T;
      a(n + i, n + j) += w * k.N;
    }
    for (std::size_t q = 0; q < corr.offset.size(); ++q) {
      const auto c = bd.at((i + corr.offset[q]) * h);
      const auto k = muller_difference_kernels(k2, kp, x, nx, c.pos, c.normal);
      const double w = h * corr.weight[q] * c.speed;
      const double* li = &corr.interp[q * n];
      const cplx kd = w * k.D, ks = w * k.S, kt = w * k.T, kn = w * k.N;
      for (int m = 0; m < n; ++m) {
        const int j = (i + m) % n;
        a(i, j) += kd * li[m];
        a(i, n + j) += ks * li[m];
        a(n + i, j) += kt * li[m];
        a(n + i, n + j) += kn * li[m];
      }
    }
  }
  return a;
}

Eigen::MatrixXcd incident_mode_rhs(const BoundaryDiscretization& bd, cplx k2, int p) {
  const int n = bd.N;
  Eigen::MatrixXcd rhs(2 * n, 2 * p + 1);
  std::vector<cplx> j(p + 2);
  for (int i = 0; i < n; ++i) {
    const Vec2 x = bd.nodes[i];
    const double rho = norm(x), th = angle(x);
    bessel_j_array(p + 1, k2 * rho, j);
    const Vec2 rhat{std::cos(th), std::sin(th)}, that{-std::sin(th), std::cos(th)};
    const double dr = dot(rhat, bd.normals[i]), dt = dot(that, bd.normals[i]);
    for (int m = -p; m <= p; ++m) {
      const cplx jm = signed_j(j, m);
      const cplx jmp = 0.5 * (signed_j(j, m - 1) - signed_j(j, m + 1));
      const cplx ph = std::exp(kI * (m * th));
      const cplx u = jm * ph;
      const cplx dn = ph * (k2 * jmp * dr + kI * double(m) / rho * jm * dt);
      rhs(i, m + p) = -u;
      rhs(n + i, m + p) = -dn;
    }
  }
  return rhs;
}

PrecomputedDensities factor_and_solve(const Eigen::MatrixXcd& system, const Eigen::MatrixXcd& rhs,
                                      int p) {
  const int n2 = int(system.rows());
  if (system.cols() != n2 || rhs.rows() != n2 || rhs.cols() != 2 * p + 1 || n2 % 2)
    throw ConfigError("factor_and_solve: dimension mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
  const double rc = lu.rcond();
  if (!(rc > 1e-13))
    throw SolverError("Muller system is numerically singular (rcond " + std::to_string(rc) + ")");
  const Eigen::MatrixXcd x = lu.solve(rhs);
  PrecomputedDensities d;
  d.p = p;
  d.N = n2 / 2;
  d.mu = x.topRows(d.N);
  d.sigma = x.bottomRows(d.N);
  return d;
}

CVector ScatteringMatrix::apply(const CVector& alpha) const {
  const int m = dim();
  CVector beta(m, 0.0);
  for (int l = 0; l < m; ++l) {
    cplx s = 0.0;
    for (int n = 0; n < m; ++n) s += entries[std::size_t(l) * m + n] * alpha[n];
    beta[l] = s;
  }
  return beta;
}

ScatteringMatrix scattering_matrix_from_densities(const BoundaryDiscretization& bd,
                                                  const PrecomputedDensities& dens, cplx k2,
                                                  cplx kp, double R) {
  const int p = dens.p, n = bd.N;
  ScatteringMatrix s;
  s.p = p;
  s.R = R;
  s.k2 = k2;
  s.kp = kp;
  s.fingerprint = bd.shape.fingerprint();
  s.entries.assign(std::size_t(2 * p + 1) * (2 * p + 1), 0.0);
  std::vector<cplx> j(p + 2);
  // Row l of the map: (i/4) h sum speed [J_l e^{-il th} sigma + d/dn(J_l e^{-il th}) mu].
  Eigen::MatrixXcd ws(2 * p + 1, n), wm(2 * p + 1, n);
  for (int i = 0; i < n; ++i) {
    const Vec2 x = bd.nodes[i];
    const double rho = norm(x), th = angle(x);
    bessel_j_array(p + 1, k2 * rho, j);
    const Vec2 rhat{std::cos(th), std::sin(th)}, that{-std::sin(th), std::cos(th)};
    const double dr = dot(rhat, bd.normals[i]), dt = dot(that, bd.normals[i]);
    const double w = 0.25 * bd.h * bd.speed[i];
    for (int l = -p; l <= p; ++l) {
      const cplx jl = signed_j(j, l);
      const cplx jlp = 0.5 * (signed_j(j, l - 1) - signed_j(j, l + 1));
      const cplx ph = std::exp(-kI * (l * th));
      ws(l + p, i) = kI * w * jl * ph;
      wm(l + p, i) = kI * w * ph * (k2 * jlp * dr - kI * double(l) / rho * jl * dt);
    }
  }
  const Eigen::MatrixXcd beta = ws * dens.sigma + wm * dens.mu;
  for (int l = 0; l <= 2 * p; ++l)
    for (int m = 0; m <= 2 * p; ++m) s.entries[std::size_t(l) * (2 * p + 1) + m] = beta(l, m);
  return s;
}

ScatteringMatrix scattering_matrix_nystrom(const BoundaryDiscretization& bd, cplx k2, cplx kp,
                                           int p, double R, PrecomputedDensities* densities_out) {
  if (p < 0) throw ConfigError("p must be nonnegative");
  double rmax = 0.0;
  for (const auto& x : bd.nodes) rmax = std::max(rmax, norm(x));
  if (R < bd.shape.circumradius() || R < rmax)
    throw ConfigError("enclosing radius smaller than the circumscribed radius");
  const auto a = assemble_muller(bd, k2, kp);
  auto dens = factor_and_solve(a, incident_mode_rhs(bd, k2, p), p);
  auto s = scattering_matrix_from_densities(bd, dens, k2, kp, R);
  if (densities_out) *densities_out = std::move(dens);
  return s;
}

ScatteringMatrix scattering_matrix_disk(double radius, cplx k2, cplx kp, int p) {
  check_wavenumber(k2, "k2");
  check_wavenumber(kp, "kp");
  ScatteringMatrix s;
  s.p = p;
  s.R = radius;
  s.k2 = k2;
  s.kp = kp;
  s.entries.assign(std::size_t(2 * p + 1) * (2 * p + 1), 0.0);
  for (int n = 0; n <= p; ++n) {
    const cplx j2 = numerics::bessel_j(n, k2 * radius), dj2 = numerics::bessel_j_prime(n, k2 * radius);
    const cplx h2 = numerics::hankel1(n, k2 * radius), dh2 = numerics::hankel1_prime(n, k2 * radius);
    const cplx jp = numerics::bessel_j(n, kp * radius), djp = numerics::bessel_j_prime(n, kp * radius);
    // [h2, -jp; k2 dh2, -kp djp] (beta, gamma) = (-j2, -k2 dj2)
    const cplx det = -h2 * kp * djp + jp * k2 * dh2;
    const cplx beta = (-j2 * (-kp * djp) - (-jp) * (-k2 * dj2)) / det;
    s.at(n, n) = beta;
    s.at(-n, -n) = beta;
  }
  return s;
}

ScatteringMatrix scattering_matrix_pec_disk(double radius, cplx k2, int p) {
  check_wavenumber(k2, "k2");
  ScatteringMatrix s;
  s.p = p;
  s.R = radius;
  s.k2 = k2;
  s.kp = 0.0;
  s.entries.assign(std::size_t(2 * p + 1) * (2 * p + 1), 0.0);
  for (int n = 0; n <= p; ++n) {
    const cplx v = -numerics::bessel_j(n, k2 * radius) / numerics::hankel1(n, k2 * radius);
    s.at(n, n) = v;
    s.at(-n, -n) = v;
  }
  return s;
}

ScatteringMatrix rotate_scattering_matrix(const ScatteringMatrix& s, double theta) {
  ScatteringMatrix r = s;
  for (int l = -s.p; l <= s.p; ++l)
    for (int n = -s.p; n <= s.p; ++n) r.at(l, n) = std::exp(kI * ((n - l) * theta)) * s.at(l, n);
  return r;
}

double truncation_ratio(const ScatteringMatrix& s) {
  double all = 0.0, edge = 0.0;
  for (int l = -s.p; l <= s.p; ++l)
    for (int n = -s.p; n <= s.p; ++n) {
      const double v = std::abs(s.at(l, n));
      all = std::max(all, v);
      if (std::abs(l) == s.p || std::abs(n) == s.p) edge = std::max(edge, v);
    }
  return all > 0.0 ? edge / all : 0.0;
}

cplx layer_potential(const BoundaryDiscretization& bd, const cplx* sigma, const cplx* mu, cplx k,
                     Vec2 x) {
  cplx sum = 0.0;
  for (int j = 0; j < bd.N; ++j) {
    const Vec2 d = bd.nodes[j] - x;
    const double r = norm(d);
    if (r == 0.0) throw DomainError("layer_potential: target on a boundary node");
    cplx h0, h1;
    numerics::hankel1_01(k * r, h0, h1);
    const cplx g = 0.25 * kI * h0;
    const cplx dg = -0.25 * kI * k * h1 * dot(d, bd.normals[j]) / r;
    sum += bd.speed[j] * (g * sigma[j] + dg * mu[j]);
  }
  return sum * bd.h;
}

cplx layer_potential_on_boundary(const BoundaryDiscretization& bd, const cplx* sigma,
                                 const cplx* mu, cplx k, int i) {
  const int n = bd.N;
  static thread_local std::unique_ptr<Corrections> cache;
  if (!cache || int(cache->interp.size() / cache->offset.size()) != n)
    cache = std::make_unique<Corrections>(make_corrections(n));
  const Corrections& corr = *cache;
  const Vec2 x = bd.nodes[i];
  auto kernel = [&](Vec2 y, Vec2 ny, cplx s, cplx m) {
    const Vec2 d = y - x;
    const double r = norm(d);
    cplx h0, h1;
    numerics::hankel1_01(k * r, h0, h1);
    return 0.25 * kI * h0 * s - 0.25 * kI * k * h1 * dot(d, ny) / r * m;
  };
  cplx sum = 0.0;
  for (int m = corr.rule.excluded; m <= n - corr.rule.excluded; ++m) {
    const int j = (i + m) % n;
    sum += bd.speed[j] * kernel(bd.nodes[j], bd.normals[j], sigma[j], mu[j]);
  }
  for (std::size_t q = 0; q < corr.offset.size(); ++q) {
    const auto c = bd.at((i + corr.offset[q]) * bd.h);
    cplx s = 0.0, m = 0.0;
    const double* li = &corr.interp[q * n];
    for (int t = 0; t < n; ++t) {
      const int j = (i + t) % n;
      s += li[t] * sigma[j];
      m += li[t] * mu[j];
    }
    sum += corr.weight[q] * c.speed * kernel(c.pos, c.normal, s, m);
  }
  return sum * bd.h;
}

void write_scattering_matrix(const std::filesystem::path& path, const ScatteringMatrix& s) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp);
    out.write("LSSM", 4);
    put<std::uint32_t>(out, kCacheVersion);
    put<std::uint32_t>(out, std::uint32_t(s.p));
    put<double>(out, s.R);
    put<double>(out, s.k2.real());
    put<double>(out, s.k2.imag());
    put<double>(out, s.kp.real());
    put<double>(out, s.kp.imag());
    put<std::uint64_t>(out, s.fingerprint);
    for (cplx v : s.entries) {
      put<double>(out, v.real());
      put<double>(out, v.imag());
    }
    if (!out) throw ConfigError("error writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ScatteringMatrix read_scattering_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LSSM", 4) != 0)
    throw ConfigError(path.string() + " is not a scattering-matrix file");
  if (get<std::uint32_t>(in, path) != kCacheVersion)
    throw ConfigError(path.string() + ": unsupported format version");
  ScatteringMatrix s;
  s.p = int(get<std::uint32_t>(in, path));
  if (s.p > 1000) throw ConfigError(path.string() + ": implausible order");
  s.R = get<double>(in, path);
  const double k2r = get<double>(in, path), k2i = get<double>(in, path);
  const double kpr = get<double>(in, path), kpi = get<double>(in, path);
  s.k2 = {k2r, k2i};
  s.kp = {kpr, kpi};
  s.fingerprint = get<std::uint64_t>(in, path);
  s.entries.resize(std::size_t(2 * s.p + 1) * (2 * s.p + 1));
  for (cplx& v : s.entries) {
    const double re = get<double>(in, path);
    v = {re, get<double>(in, path)};
  }
  return s;
}

void ensure_densities(ParticleModel& model) {
  if (model.densities.N == model.boundary.N && model.densities.p == model.p) return;
  const auto a = assemble_muller(model.boundary, model.k2, model.shape.kp);
  model.densities = factor_and_solve(a, incident_mode_rhs(model.boundary, model.k2, model.p), model.p);
}

std::filesystem::path scattering_cache_file(const std::filesystem::path& dir, cplx k2, cplx kp,
                                            int p) {
  return dir / ("scattering_p" + std::to_string(p) + "_k2_" + format_k(k2) + "_kp_" + format_k(kp) +
                ".lssm");
}

ParticleModel build_particle_model(const ShapeParams& shape, cplx k2, int p,
                                   const std::optional<std::filesystem::path>& cache_dir,
                                   ModelBuildInfo* info, bool need_densities) {
  shape.validate();
  check_wavenumber(k2, "k2");
  if (p < 0) throw ConfigError("p must be nonnegative");
  ParticleModel m;
  m.shape = shape;
  m.k2 = k2;
  m.p = p;
  m.R = kEnclosingFactor * shape.circumradius();
  m.boundary = discretize_boundary(shape);
  ModelBuildInfo local;
  if (cache_dir) {
    local.cache_file = scattering_cache_file(*cache_dir, k2, shape.kp, p);
    if (std::filesystem::exists(local.cache_file)) {
      try {
        auto s = read_scattering_matrix(local.cache_file);
        if (s.fingerprint == shape.fingerprint() && s.p == p && s.k2 == k2 && s.kp == shape.kp &&
            s.R == m.R) {
          m.S = std::move(s);
          local.cache_hit = true;
        } else {
          local.cache_rebuilt = true;
        }
      } catch (const ConfigError&) {
        local.cache_rebuilt = true;
      }
    }
  }
  if (!local.cache_hit) {
    ensure_densities(m);
    m.S = scattering_matrix_from_densities(m.boundary, m.densities, k2, shape.kp, m.R);
    if (cache_dir) write_scattering_matrix(local.cache_file, m.S);
  } else if (need_densities) {
    ensure_densities(m);
  }
  if (info) *info = local;
  return m;
}

}  // namespace layerscatter
