#pragma once

#include <functional>

#include "layerscatter/types.hpp"

namespace layerscatter {

struct GmresConfig {
  double tol = 1e-6;
  int max_iterations = 1000;
  int restart = 100;
  // When false, non-convergence returns with converged = false instead of throwing.
  bool throw_on_failure = true;

  void validate() const;
};

struct GmresResult {
  CVector x;
  // Relative residual estimate after each iteration, starting with the initial one.
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
  // ||b - A x|| / ||b|| recomputed from the returned x.
  double true_residual = 0.0;
};

using LinearOperator = std::function<void(const CVector& in, CVector& out)>;

GmresResult gmres(const LinearOperator& apply, const CVector& rhs, const GmresConfig& config,
                  const CVector* x0 = nullptr);

}  // namespace layerscatter
