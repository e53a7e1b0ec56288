#pragma once

#include <cstddef>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid::experiments {

/// Heterogeneous clients A_i = A0 + g1_i V, B_i = B0 + g2_i U with g ~ Uniform(0, epsilon).
struct Ensemble {
  std::vector<LtiSystem> systems;
  std::vector<double> gamma_a;
  std::vector<double> gamma_b;
};

/// Client i draws (g1_i, g2_i) from rng.fork(i), so a client's system does not
/// depend on M. Client 0 is the reference client of the error metric.
inline Ensemble make_ensemble(const Matrix& A0, const Matrix& B0, const Matrix& V, const Matrix& U, double epsilon,
                              std::size_t clients, const Rng& rng) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("make_ensemble: epsilon must be >= 0");
  if (V.rows() != A0.rows() || V.cols() != A0.cols() || U.rows() != B0.rows() || U.cols() != B0.cols()) {
    throw InvalidArgument("make_ensemble: patterns V, U must match the shapes of A0, B0");
  }
  Ensemble e;
  e.systems.reserve(clients);
  for (std::size_t i = 0; i < clients; ++i) {
    Rng stream = rng.fork(i);
    const double g1 = epsilon * stream.uniform_open();
    const double g2 = epsilon * stream.uniform_open();
    e.gamma_a.push_back(g1);
    e.gamma_b.push_back(g2);
    e.systems.emplace_back(A0 + g1 * V, B0 + g2 * U);
  }
  return e;
}

}  // namespace fedsysid::experiments
