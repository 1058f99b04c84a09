#pragma once

#include "patchkit/dynamics.hpp"
#include "patchkit/geometry.hpp"

namespace patchkit {

struct HypothesisWitness {
  Vec point;
  std::string reason;
};

/// Sample-based certificates for the constraint-set hypotheses. Negative
/// s2_margin certifies strict inwardness on the sample; r_o > 0 is the
/// deepest grid erosion that stays nonempty and wedged.
struct HypothesisReport {
  bool s1_ok = false;
  double s2_margin = std::numeric_limits<double>::infinity();
  double r_o = 0.0;
  int n_boundary = 0;
  std::vector<HypothesisWitness> witness_failures;
  RegularityReport regularity;

  bool s2_ok() const { return s2_margin < 0; }
};

/// Pointedness of the normal cone plus a wedge certificate at each of
/// n_boundary sampled boundary points. Candidate axes are the negated
/// normal-cone generators and their average.
std::pair<bool, std::vector<HypothesisWitness>> check_S1(const Region& S, int n_boundary,
                                                         const CertificateConfig& cert = {});

/// max over sampled boundary x and unit normal generators p of
/// min_u f(x,u).p. Negative certifies (S2) on the sample.
double check_S2(const ControlSystem& sys, const Region& S, int n_boundary);

/// Largest grid r whose whole prefix r' <= r keeps the erosion nonempty and
/// wedged (check_S1). Throws when the smallest grid value already fails.
double find_r_o(const Region& S, std::vector<double> r_grid, int n_boundary_per_level = 32,
                const CertificateConfig& cert = CertificateConfig{1.0, 10, 16, 8, 8, 0x51f0ull});

/// 32 geometric steps from diam/2 down to diam/1000.
std::vector<double> default_r_grid(const Region& S);

/// x in S with d(x, complement) <= r + tol_bd.
bool crown_contains(const Region& S, double r, const Vec& x, double tol_bd = tol::boundary);

}  // namespace patchkit
