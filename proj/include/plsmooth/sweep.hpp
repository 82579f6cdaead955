#pragma once

#include <string>
#include <vector>

#include "plsmooth/norms.hpp"
#include "plsmooth/pipeline.hpp"
#include "plsmooth/verify.hpp"

namespace plsmooth {

struct SweepOptions {
  std::vector<double> lambdas = {1.0, 0.5, 0.25, 0.125, 0.0625};
  double p = 2;
  double q = 2;
  std::vector<RINorm> norms;  // extra r.i. norms of |Dg - Df| over the domain
  RegionOptions region;
  long audit_samples = 100000;
  int boundary_samples = 2000;
  unsigned long long seed = 1;
  int workers = 1;
};

struct SweepRow {
  double lambda = 1;
  double vol_E = 0;
  double vol_balls = 0;
  double vol_tubes = 0;
  double vol_slabs = 0;
  double linf_f = 0;     // sup |g - f|
  double w1p_f = 0;      // ||Dg - Df||_{L^p}
  double linf_inv = 0;   // sup |g^-1 - f^-1|
  double w1q_inv = 0;    // ||Dg^-1 - Df^-1||_{L^q}
  double sup_Dg = 0;     // over the whole domain
  double sup_Dginv = 0;
  double sup_ddiff = 0;  // sup |Dg - Df| over the nodes
  double lp_bound = 0;   // sup_ddiff^p vol_E, an upper bound for w1p_f^p
  double image_volume = 0;  // vol g(E) from det Dg
  std::vector<double> ri;   // values of SweepOptions::norms
  long nodes = 0;
  int owner_mismatch = 0;
  double min_det = 0;
  bool certified = false;       // positive Jacobian and injective
  bool boundary_fixed = false;  // g = f next to the domain boundary
  std::vector<CertificationReport> checks;
  std::string note;
};

struct SweepTable {
  double p = 2;
  double q = 2;
  std::vector<std::string> norm_names;
  std::vector<SweepRow> rows;

  std::string csv() const;
  // first row whose error columns both fall below epsilon, or -1
  int first_below(double epsilon) const;
};

// Certification failures annotate the row; they do not stop the sweep.
SweepTable lambda_sweep(const SmoothedMap& g, const SweepOptions& opt = {});

// Per-lambda diffeomorphism certificate: positive Jacobian at the nodes,
// injectivity audit over the difference set and the bulk, and g = f next to
// the domain boundary.
std::vector<CertificationReport> certify_level(const SmoothedMap& g, const RegionQuadrature& quad,
                                               const std::vector<double>& dets, long audit_samples,
                                               int boundary_samples, unsigned long long seed);

}  // namespace plsmooth
