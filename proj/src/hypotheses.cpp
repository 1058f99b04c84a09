#include "patchkit/hypotheses.hpp"

#include <algorithm>
#include <cmath>

namespace patchkit {

std::pair<bool, std::vector<HypothesisWitness>> check_S1(const Region& S, int n_boundary,
                                                         const CertificateConfig& cert) {
  std::vector<HypothesisWitness> failures;
  for (const Vec& x : S.boundary_sample(n_boundary)) {
    Cone cone;
    try {
      cone = S.normal_cone(x, 10 * tol::boundary, 10 * tol::face_active);
    } catch (const std::exception&) {
      continue;  // sampler drift off the boundary; skip the point
    }
    if (cone.generators.empty()) {
      failures.push_back({x, "no normal directions recovered"});
      continue;
    }
    if (!cone.pointed()) {
      failures.push_back({x, "normal cone not pointed"});
      continue;
    }
    std::vector<Vec> candidates;
    Vec avg = Vec::Zero(S.dim());
    for (const Vec& g : cone.generators) {
      candidates.push_back(-g);
      avg -= g;
    }
    if (cone.generators.size() > 1 && avg.norm() > 1e-9) candidates.push_back(avg / avg.norm());
    if (!wedge_certificate(S, x, candidates, cert))
      failures.push_back({x, "no inner wedge certificate"});
  }
  return {failures.empty(), failures};
}

double check_S2(const ControlSystem& sys, const Region& S, int n_boundary) {
  double margin = -std::numeric_limits<double>::infinity();
  for (const Vec& x : S.boundary_sample(n_boundary)) {
    Cone cone;
    try {
      cone = S.normal_cone(x, 10 * tol::boundary, 10 * tol::face_active);
    } catch (const std::exception&) {
      continue;
    }
    for (const Vec& p : cone.generators) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& u : sys.controls) best = std::min(best, sys.f(x, u).dot(p));
      margin = std::max(margin, best);
    }
  }
  return margin;
}

double find_r_o(const Region& S, std::vector<double> r_grid, int n_boundary_per_level,
                const CertificateConfig& cert) {
  if (r_grid.empty()) throw std::invalid_argument("find_r_o: empty grid");
  std::sort(r_grid.begin(), r_grid.end());
  double r_o = -1.0;
  for (double r : r_grid) {
    Region er = S.eroded(r);
    if (er.is_empty()) break;
    if (er.is_polytope() && er.chebyshev_radius() <= 0) break;
    auto [ok, wit] = check_S1(er, n_boundary_per_level, cert);
    if (!ok) break;
    r_o = r;
  }
  if (r_o < 0)
    throw std::runtime_error("find_r_o: set not uniformly wedged at scale " +
                             std::to_string(r_grid.front()));
  return r_o;
}

std::vector<double> default_r_grid(const Region& S) {
  double hi = S.diameter() / 2.0;
  double lo = S.diameter() / 1000.0;
  std::vector<double> grid(32);
  for (int i = 0; i < 32; ++i) grid[i] = hi * std::pow(lo / hi, i / 31.0);
  std::sort(grid.begin(), grid.end());
  return grid;
}

bool crown_contains(const Region& S, double r, const Vec& x, double tol_bd) {
  if (r < 0) throw std::invalid_argument("crown_contains: r >= 0 required");
  return S.contains(x, tol_bd) && S.depth(x) <= r + tol_bd;
}

}  // namespace patchkit
