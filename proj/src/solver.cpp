#include "layerscatter/solver.hpp"

#include <cmath>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"

namespace layerscatter {
namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  }
  void f64(double v) { bytes(&v, sizeof v); }
  void c128(cplx v) {
    f64(v.real());
    f64(v.imag());
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
};

std::int64_t bin_key(long ix, long iy) {
  return (std::int64_t(ix) << 32) ^ std::int64_t(std::uint32_t(iy));
}

double vnorm(const CVector& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

Vec2 rotate(Vec2 v, double th) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// sum_n beta_n H_n(k r) e^{in theta} over all instances, with gradient.
FieldSample multipole_sum(const CVector& beta, const std::vector<ParticleInstance>& inst, cplx k,
                          int p, Vec2 x, bool grad) {
  FieldSample out;
  std::vector<cplx> h(p + 2);
  const int np = 2 * p + 1;
  for (std::size_t m = 0; m < inst.size(); ++m) {
    const Vec2 d = x - inst[m].center;
    const double r = norm(d);
    if (r == 0.0) throw DomainError("eval: point at an expansion center");
    numerics::hankel1_array(p + 1, k * r, h);
    const double th = angle(d);
    auto hn = [&](int n) {
      const int a = std::abs(n);
      const cplx v = h[a] * std::exp(kI * (n * th));
      return (n < 0 && (a % 2)) ? -v : v;
    };
    const cplx* b = &beta[m * np];
    for (int n = -p; n <= p; ++n) {
      if (b[n + p] == 0.0) continue;
      out.value += b[n + p] * hn(n);
      if (grad) {
        const cplx plus = -k * hn(n + 1);   // (d/dx + i d/dy)
        const cplx minus = k * hn(n - 1);   // (d/dx - i d/dy)
        out.dx += b[n + p] * 0.5 * (plus + minus);
        out.dy += b[n + p] * (plus - minus) / (2.0 * kI);
      }
    }
  }
  return out;
}

cplx local_value(const CVector& alpha, std::size_t m, int p, cplx k, Vec2 c, Vec2 x) {
  ExpansionVector e(ExpansionKind::Local, p, c, k);
  for (int n = -p; n <= p; ++n) e[n] = alpha[m * (2 * p + 1) + n + p];
  return e.evaluate(x);
}

// Boundary densities of instance m driven by its incoming coefficients.
void instance_densities(const ParticleModel& model, const CVector& incoming, std::size_t m,
                        double rotation, CVector& sigma, CVector& mu) {
  const int p = model.p;
  const int np = 2 * p + 1;
  const int N = model.densities.N;
  if (N == 0) throw ConfigError("eval: particle model has no boundary densities");
  CVector a(np);
  for (int n = -p; n <= p; ++n)
    a[n + p] = incoming[m * np + n + p] * std::exp(kI * (n * rotation));
  sigma.assign(N, 0.0);
  mu.assign(N, 0.0);
  for (int c = 0; c < np; ++c)
    for (int i = 0; i < N; ++i) {
      sigma[i] += model.densities.sigma(i, c) * a[c];
      mu[i] += model.densities.mu(i, c) * a[c];
    }
}

std::vector<ParticleInstance> prepared(std::vector<ParticleInstance> instances,
                                      const ParticleModel* model) {
  if (!model) throw ConfigError("LayeredProblem: particle model required");
  for (auto& inst : instances) {
    inst.R = model->R;
    inst.fingerprint = model->S.fingerprint;
  }
  return instances;
}

}  // namespace

LayeredProblem::LayeredProblem(const LayerStack& layers, const SommerfeldContour& contour,
                               std::vector<ParticleInstance> instances,
                               std::shared_ptr<const ParticleModel> model, CouplingPath path,
                               CouplingOptions coupling)
    : interfaces_(contour, layers),
      instances_(prepared(std::move(instances), model.get())),
      model_(std::move(model)),
      p_(model_->p),
      path_(path),
      multiscat_(instances_, instance_scattering_matrices(model_->S, instances_), layers.k2, p_) {
  if (model_->k2 != layers.k2) throw ConfigError("LayeredProblem: model k2 differs from layer k2");
  coupling_ = std::make_unique<CouplingContext>(interfaces_, instances_, p_, coupling);

  bin_ = 2.0 * model_->R;
  for (std::size_t m = 0; m < instances_.size(); ++m) {
    const Vec2 c = instances_[m].center;
    bins_[bin_key(std::lround(std::floor(c.x / bin_)), std::lround(std::floor(c.y / bin_)))]
        .push_back(int(m));
  }

  Fnv f;
  f.c128(layers.k1);
  f.c128(layers.k2);
  f.c128(layers.k3);
  f.f64(layers.d);
  f.f64(layers.source.x);
  f.f64(layers.source.y);
  f.u64(contour.size());
  f.f64(contour.b);
  f.f64(contour.t_max);
  f.u64(std::uint64_t(p_));
  f.u64(model_->S.fingerprint);
  f.c128(model_->S.kp);
  for (const auto& inst : instances_) {
    f.f64(inst.center.x);
    f.f64(inst.center.y);
    f.f64(inst.rotation);
  }
  fingerprint_ = f.h;
}

void LayeredProblem::apply_schur(const CVector& beta, CVector& out) const {
  if (beta.size() != size()) throw ConfigError("apply_schur: beta has wrong length");
  CVector total;
  multiscat_.apply_translation(beta, total);
  const auto update = coupling_->multipole_to_sommerfeld(beta, path_);
  const auto reflected = interfaces_.solve_rhs(update.rhs(interfaces_));
  const auto alpha = coupling_->sommerfeld_to_local(reflected, path_);
  for (std::size_t i = 0; i < total.size(); ++i) total[i] += alpha[i];
  CVector st;
  multiscat_.apply_scattering(total, st);
  out.resize(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) out[i] = beta[i] - st[i];
}

CVector LayeredProblem::schur_rhs() const {
  const auto alpha = coupling_->sommerfeld_to_local(interfaces_.solve(), path_);
  CVector out;
  multiscat_.apply_scattering(alpha, out);
  return out;
}

SpectralDensities LayeredProblem::recover_densities(const CVector& beta) const {
  if (instances_.empty()) return interfaces_.solve();
  const auto update = coupling_->multipole_to_sommerfeld(beta, path_);
  const auto extra = update.rhs(interfaces_);
  return interfaces_.solve(&extra);
}

CVector LayeredProblem::incoming(const SpectralDensities& densities, const CVector& beta) const {
  if (instances_.empty()) return {};
  CVector out;
  multiscat_.apply_translation(beta, out);
  const auto alpha = coupling_->sommerfeld_to_local(densities, path_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha[i];
  return out;
}

PointLocation LayeredProblem::locate(Vec2 x) const {
  if (x.y >= 0.0) return {Region::Layer1, -1};
  if (x.y < -layers().d) return {Region::Layer3, -1};
  const long ix = std::lround(std::floor(x.x / bin_));
  const long iy = std::lround(std::floor(x.y / bin_));
  for (long a = ix - 1; a <= ix + 1; ++a)
    for (long b = iy - 1; b <= iy + 1; ++b) {
      const auto it = bins_.find(bin_key(a, b));
      if (it == bins_.end()) continue;
      for (int m : it->second) {
        const auto& inst = instances_[m];
        const Vec2 d = x - inst.center;
        if (norm(d) >= inst.R) continue;
        if (model_->shape.contains(rotate(d, -inst.rotation))) return {Region::Inclusion, m};
        return {Region::EnclosingDisk, m};
      }
    }
  return {Region::Layer2, -1};
}

Solution solve_layered_scene(const LayeredProblem& problem, const GmresConfig& config) {
  config.validate();
  Solution sol;
  sol.fingerprint = problem.fingerprint();
  if (problem.num_instances() == 0) {
    sol.densities = problem.interfaces().solve();
    sol.converged = true;
    sol.history = {0.0};
    return sol;
  }
  const CVector rhs = problem.schur_rhs();
  const LinearOperator op = [&](const CVector& in, CVector& out) { problem.apply_schur(in, out); };
  const GmresResult res = gmres(op, rhs, config);
  sol.beta = res.x;
  sol.history = res.history;
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  sol.residual = res.true_residual;
  sol.densities = problem.recover_densities(sol.beta);
  sol.incoming = problem.incoming(sol.densities, sol.beta);
  return sol;
}

double schur_residual(const LayeredProblem& problem, const CVector& beta) {
  const CVector rhs = problem.schur_rhs();
  CVector ax;
  problem.apply_schur(beta, ax);
  for (std::size_t i = 0; i < ax.size(); ++i) ax[i] = rhs[i] - ax[i];
  const double nb = vnorm(rhs);
  return nb > 0.0 ? vnorm(ax) / nb : vnorm(ax);
}

FieldSample eval_layer_field(const LayeredProblem& problem, const Solution& sol, Vec2 x,
                             int layer, bool want_gradient) {
  const LayerStack& layers = problem.layers();
  const auto& contour = problem.interfaces().contour();
  switch (layer) {
    case 1: {
      FieldSample s = eval_sommerfeld_field(sol.densities, contour, layers, x, FieldPart::U1s,
                                            want_gradient);
      const Vec2 d = x - layers.source;
      const double r = norm(d);
      if (r == 0.0) throw DomainError("eval: point at the source");
      cplx h0, h1;
      numerics::hankel1_01(layers.k1 * r, h0, h1);
      s.value += 0.25 * kI * h0;
      if (want_gradient) {
        const cplx g = -0.25 * kI * layers.k1 * h1 / r;
        s.dx += g * d.x;
        s.dy += g * d.y;
      }
      return s;
    }
    case 3:
      return eval_sommerfeld_field(sol.densities, contour, layers, x, FieldPart::U3s,
                                   want_gradient);
    case 2: break;
    default: throw ConfigError("eval: layer must be 1, 2 or 3");
  }
  const int p = problem.order();
  const PointLocation loc = problem.locate(x);
  if (loc.region == Region::EnclosingDisk || loc.region == Region::Inclusion) {
    if (want_gradient) throw DomainError("eval: gradient not available inside an enclosing disk");
    const auto& inst = problem.instances()[loc.instance];
    const auto& model = problem.model();
    CVector sigma, mu;
    instance_densities(model, sol.incoming, loc.instance, inst.rotation, sigma, mu);
    const auto bd = discretize_boundary(model.shape, inst.rotation);
    FieldSample s;
    if (loc.region == Region::Inclusion) {
      s.value = layer_potential(bd, sigma.data(), mu.data(), model.S.kp, x - inst.center);
    } else {
      s.value = local_value(sol.incoming, loc.instance, p, layers.k2, inst.center, x) +
                layer_potential(bd, sigma.data(), mu.data(), layers.k2, x - inst.center);
    }
    return s;
  }
  FieldSample s = eval_middle_layer(sol.densities, problem.interfaces(), x, want_gradient);
  if (problem.num_instances() > 0) {
    const FieldSample m = multipole_sum(sol.beta, problem.instances(), layers.k2, p, x, want_gradient);
    s.value += m.value;
    s.dx += m.dx;
    s.dy += m.dy;
  }
  return s;
}

cplx eval_total_field(const LayeredProblem& problem, const Solution& sol, Vec2 x) {
  const int layer = x.y >= 0.0 ? 1 : (x.y >= -problem.layers().d ? 2 : 3);
  return eval_layer_field(problem, sol, x, layer).value;
}

BoundaryTraces boundary_traces(const LayeredProblem& problem, const Solution& sol,
                               std::size_t m) {
  if (m >= problem.num_instances()) throw ConfigError("boundary_traces: no such instance");
  const auto& inst = problem.instances()[m];
  const auto& model = problem.model();
  CVector sigma, mu;
  instance_densities(model, sol.incoming, m, inst.rotation, sigma, mu);
  const auto bd = discretize_boundary(model.shape, inst.rotation);
  BoundaryTraces out;
  const int N = bd.N;
  out.nodes.resize(N);
  out.exterior.resize(N);
  out.interior.resize(N);
  for (int i = 0; i < N; ++i) {
    const Vec2 x = inst.center + bd.nodes[i];
    out.nodes[i] = x;
    out.exterior[i] =
        local_value(sol.incoming, m, problem.order(), problem.layers().k2, inst.center, x) +
        layer_potential_on_boundary(bd, sigma.data(), mu.data(), problem.layers().k2, i) +
        0.5 * mu[i];
    out.interior[i] = layer_potential_on_boundary(bd, sigma.data(), mu.data(), model.S.kp, i) -
                      0.5 * mu[i];
  }
  return out;
}

}  // namespace layerscatter
