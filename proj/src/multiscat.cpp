#include "layerscatter/multiscat.hpp"

#include <sstream>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/simd/kernels.hpp"

namespace layerscatter {
namespace {

// e^{i n phi} for n = -m..m into out[n + m].
void phases(double phi, int m, cplx* out) {
  const cplx e = std::exp(kI * phi);
  out[m] = 1.0;
  for (int n = 1; n <= m; ++n) {
    out[m + n] = out[m + n - 1] * e;
    out[m - n] = std::conj(out[m + n]);
  }
}

}  // namespace

ExpansionVector::ExpansionVector(ExpansionKind kind, int p, Vec2 center, cplx k)
    : kind_(kind), p_(p), center_(center), k_(k), c_(std::size_t(2 * p + 1), 0.0) {
  if (p < 0) throw ConfigError("expansion order must be nonnegative");
}

cplx ExpansionVector::evaluate(Vec2 x) const {
  const Vec2 d = x - center_;
  const double r = norm(d);
  std::vector<cplx> z(p_ + 1), ph(2 * p_ + 1);
  if (kind_ == ExpansionKind::Multipole) {
    if (r == 0.0) throw DomainError("multipole expansion evaluated at its center");
    numerics::hankel1_array(p_, k_ * r, z);
  } else {
    numerics::bessel_j_array(p_, k_ * r, z);
  }
  phases(angle(d), p_, ph.data());
  cplx s = c_[p_] * z[0];
  for (int n = 1; n <= p_; ++n) {
    const double sg = (n % 2) ? -1.0 : 1.0;
    s += z[n] * (c_[p_ + n] * ph[p_ + n] + sg * c_[p_ - n] * ph[p_ - n]);
  }
  return s;
}

void validate_instances(std::span<const ParticleInstance> inst) {
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (!(inst[i].R > 0.0)) throw ConfigError("instance " + std::to_string(i) + ": R must be positive");
    for (std::size_t j = i + 1; j < inst.size(); ++j)
      if (norm(inst[i].center - inst[j].center) <= inst[i].R + inst[j].R) {
        std::ostringstream msg;
        msg << "instances " << i << " and " << j << " have overlapping enclosing disks";
        throw ConfigError(msg.str());
      }
  }
}

void m2l_table(cplx k, Vec2 d, int p, std::span<cplx> t) {
  const int q = 2 * p;
  std::vector<cplx> h(q + 1);
  numerics::hankel1_array(q, k * norm(d), h);
  phases(angle(d), q, t.data());
  t[q] *= h[0];
  for (int n = 1; n <= q; ++n) {
    t[q + n] *= h[n];
    t[q - n] *= (n % 2 ? -h[n] : h[n]);
  }
}

ExpansionVector m2l(const ExpansionVector& src, Vec2 target_center, int p, double src_R,
                    double tgt_R) {
  if (src.kind() != ExpansionKind::Multipole) throw ConfigError("m2l needs a multipole expansion");
  const Vec2 d = target_center - src.center();
  if (norm(d) <= src_R + tgt_R || norm(d) == 0.0) throw DomainError("m2l: disks overlap");
  const int pm = std::max(p, src.order());
  std::vector<cplx> t(4 * pm + 1), x(2 * pm + 1, 0.0), y(2 * pm + 1, 0.0);
  m2l_table(src.wavenumber(), d, pm, t);
  for (int n = -src.order(); n <= src.order(); ++n) x[n + pm] = src[n];
  simd::toeplitz_accumulate(simd::kernels(), t.data(), x.data(), y.data(), pm);
  ExpansionVector out(ExpansionKind::Local, p, target_center, src.wavenumber());
  for (int n = -p; n <= p; ++n) out[n] = y[n + pm];
  return out;
}

void m2m_apply(cplx k, Vec2 shift, int p, const cplx* in, cplx* out) {
  const int q = 2 * p;
  std::vector<cplx> j(q + 1), t(2 * q + 1);
  numerics::bessel_j_array(q, k * norm(shift), j);
  phases(-angle(shift), q, t.data());
  t[q] *= j[0];
  for (int n = 1; n <= q; ++n) {
    t[q + n] *= j[n];
    t[q - n] *= (n % 2 ? -j[n] : j[n]);
  }
  // out_m = sum_n in_n t_{m-n}
  for (int m = -p; m <= p; ++m) {
    cplx s = 0.0;
    for (int n = -p; n <= p; ++n) s += in[n + p] * t[m - n + q];
    out[m + p] = s;
  }
}

ExpansionVector m2m(const ExpansionVector& src, Vec2 new_center) {
  if (src.kind() != ExpansionKind::Multipole) throw ConfigError("m2m needs a multipole expansion");
  ExpansionVector out(ExpansionKind::Multipole, src.order(), new_center, src.wavenumber());
  m2m_apply(src.wavenumber(), src.center() - new_center, src.order(), src.coefficients().data(),
            out.coefficients().data());
  return out;
}

ExpansionVector point_source_local(cplx k, Vec2 source, Vec2 center, int p) {
  const Vec2 d = center - source;
  if (norm(d) == 0.0) throw DomainError("point source at an expansion center");
  std::vector<cplx> h(p + 1), ph(2 * p + 1);
  numerics::hankel1_array(p, k * norm(d), h);
  phases(-angle(d), p, ph.data());
  ExpansionVector out(ExpansionKind::Local, p, center, k);
  for (int m = -p; m <= p; ++m) {
    const int a = std::abs(m);
    // H_{-m} = (-1)^m H_m
    const cplx hm = (m > 0 && a % 2) ? -h[a] : h[a];
    out[m] = 0.25 * kI * hm * ph[m + p];
  }
  return out;
}

ExpansionVector plane_wave_local(cplx k, double direction, Vec2 center, int p) {
  ExpansionVector out(ExpansionKind::Local, p, center, k);
  const cplx base = std::exp(kI * k * (std::cos(direction) * center.x + std::sin(direction) * center.y));
  cplx im = 1.0;
  for (int m = 0; m <= p; ++m) {
    out[m] = base * im * std::exp(-kI * (m * direction));
    out[-m] = base * std::conj(im) * std::exp(kI * (m * direction));
    im *= kI;
  }
  return out;
}

std::vector<ScatteringMatrix> instance_scattering_matrices(
    const ScatteringMatrix& prototype, std::span<const ParticleInstance> instances) {
  std::vector<ScatteringMatrix> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(rotate_scattering_matrix(prototype, inst.rotation));
  return out;
}

MultiscatOperator::MultiscatOperator(std::vector<ParticleInstance> instances,
                                     std::vector<ScatteringMatrix> S, cplx k, int p)
    : instances_(std::move(instances)), S_(std::move(S)), k_(k), p_(p) {
  if (S_.size() != instances_.size()) throw ConfigError("one scattering matrix per instance required");
  for (const auto& s : S_)
    if (s.p != p) throw ConfigError("scattering matrix order differs from the operator order");
  validate_instances(instances_);
}

void MultiscatOperator::apply_translation(const CVector& beta, CVector& out) const {
  const int b = 2 * p_ + 1;
  const std::size_t m = instances_.size();
  out.assign(size(), 0.0);
  const auto& kt = simd::kernels();
  std::vector<cplx> t(4 * p_ + 1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      m2l_table(k_, instances_[i].center - instances_[j].center, p_, t);
      simd::toeplitz_accumulate(kt, t.data(), beta.data() + j * b, out.data() + i * b, p_);
    }
}

void MultiscatOperator::apply_scattering(const CVector& in, CVector& out) const {
  const int b = 2 * p_ + 1;
  out.assign(size(), 0.0);
  const auto& kt = simd::kernels();
  for (std::size_t i = 0; i < instances_.size(); ++i)
    for (int l = 0; l < b; ++l)
      out[i * b + l] = kt.dot(S_[i].entries.data() + std::size_t(l) * b, in.data() + i * b, b);
}

void MultiscatOperator::apply(const CVector& beta, CVector& out) const {
  CVector t, st;
  apply_translation(beta, t);
  apply_scattering(t, st);
  out.resize(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta[i] - st[i];
}

GmresResult solve_free_space(const MultiscatOperator& op, const CVector& incident,
                             const GmresConfig& config) {
  if (incident.size() != op.size()) throw ConfigError("incident vector has the wrong size");
  CVector rhs;
  op.apply_scattering(incident, rhs);
  return gmres([&](const CVector& in, CVector& out) { op.apply(in, out); }, rhs, config);
}

cplx eval_multipole_field(const CVector& beta, std::span<const ParticleInstance> instances, cplx k,
                          int p, Vec2 x) {
  const int b = 2 * p + 1;
  std::vector<cplx> h(p + 1), ph(b);
  cplx sum = 0.0;
  for (std::size_t m = 0; m < instances.size(); ++m) {
    const Vec2 d = x - instances[m].center;
    const double r = norm(d);
    if (r == 0.0) throw DomainError("multipole field evaluated at an instance center");
    numerics::hankel1_array(p, k * r, h);
    phases(angle(d), p, ph.data());
    const cplx* c = beta.data() + m * b;
    sum += c[p] * h[0];
    for (int n = 1; n <= p; ++n)
      sum += h[n] * (c[p + n] * ph[p + n] + ((n % 2) ? -1.0 : 1.0) * c[p - n] * ph[p - n]);
  }
  return sum;
}

}  // namespace layerscatter
