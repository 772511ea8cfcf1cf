#pragma once

#include <span>
#include <vector>

#include "layerscatter/gmres.hpp"
#include "layerscatter/particle.hpp"
#include "layerscatter/types.hpp"

namespace layerscatter {

enum class ExpansionKind { Multipole, Local };

// sum_n c_n Z_n(k r) e^{in theta} about `center`, Z = H (multipole) or J (local).
class ExpansionVector {
 public:
  ExpansionVector(ExpansionKind kind, int p, Vec2 center, cplx k);

  ExpansionKind kind() const { return kind_; }
  int order() const { return p_; }
  Vec2 center() const { return center_; }
  cplx wavenumber() const { return k_; }
  std::size_t size() const { return c_.size(); }

  cplx& operator[](int n) { return c_[n + p_]; }
  cplx operator[](int n) const { return c_[n + p_]; }
  CVector& coefficients() { return c_; }
  const CVector& coefficients() const { return c_; }

  cplx evaluate(Vec2 x) const;

 private:
  ExpansionKind kind_;
  int p_;
  Vec2 center_;
  cplx k_;
  CVector c_;
};

struct ParticleInstance {
  Vec2 center;
  double rotation = 0.0;
  double R = 0.0;
  std::uint64_t fingerprint = 0;
};

// Pairwise disjoint enclosing disks.
void validate_instances(std::span<const ParticleInstance> instances);

// Graf translation table t_q = H_q(k|d|) e^{iq arg d}, q = -2p..2p, d = target - source.
void m2l_table(cplx k, Vec2 d, int p, std::span<cplx> t);

ExpansionVector m2l(const ExpansionVector& source, Vec2 target_center, int p, double source_R = 0.0,
                    double target_R = 0.0);
ExpansionVector m2m(const ExpansionVector& source, Vec2 new_center);
// Multipole coefficients about new_center for a shift s = source center - new center:
// b'_m = sum_n b_n J_{m-n}(k|s|) e^{-i(m-n) arg s}.
void m2m_apply(cplx k, Vec2 shift, int p, const cplx* in, cplx* out);

// Local expansions of incident fields about `center`.
ExpansionVector point_source_local(cplx k, Vec2 source, Vec2 center, int p);  // (i/4) H0(k|x - source|)
ExpansionVector plane_wave_local(cplx k, double direction, Vec2 center, int p);  // e^{ik d.x}

// Scattering matrices per instance (the prototype rotated by each instance angle).
std::vector<ScatteringMatrix> instance_scattering_matrices(
    const ScatteringMatrix& prototype, std::span<const ParticleInstance> instances);

// Free-space multiple-scattering operator with stacked beta: block m holds
// coefficients n = -p..p of instance m.
class MultiscatOperator {
 public:
  MultiscatOperator(std::vector<ParticleInstance> instances, std::vector<ScatteringMatrix> S, cplx k,
                    int p);

  std::size_t size() const { return instances_.size() * std::size_t(2 * p_ + 1); }
  int order() const { return p_; }
  cplx wavenumber() const { return k_; }
  const std::vector<ParticleInstance>& instances() const { return instances_; }
  const std::vector<ScatteringMatrix>& scattering() const { return S_; }

  // out_m = sum_{j != m} M2L(beta_j -> center_m).
  void apply_translation(const CVector& beta, CVector& out) const;
  // Block-diagonal S.
  void apply_scattering(const CVector& in, CVector& out) const;
  // (I - S T) beta.
  void apply(const CVector& beta, CVector& out) const;

 private:
  std::vector<ParticleInstance> instances_;
  std::vector<ScatteringMatrix> S_;
  cplx k_;
  int p_;
};

// GMRES on (I - S T) beta = S alpha for stacked incident local coefficients alpha.
GmresResult solve_free_space(const MultiscatOperator& op, const CVector& incident,
                             const GmresConfig& config);

// sum_m sum_n beta^m_n H_n(k r_m) e^{in theta_m}.
cplx eval_multipole_field(const CVector& beta, std::span<const ParticleInstance> instances, cplx k,
                          int p, Vec2 x);

}  // namespace layerscatter
