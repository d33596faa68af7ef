#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cofirec::theory {

// Expected dissimilarity of level-by-level decoding: K - sum_{k=1..K} p^k.
double e_hier(double p, int K);
// Expected dissimilarity when a miss lands uniformly on another leaf of a
// complete V-ary tree of depth K.
double e_indep(double p, int V, int K);
// (K - sum p^k) / (1 - p^K); undefined at p = 1.
double psi(double p, int K);

enum class Mode { hier, indep };

struct TheoryConfig {
  double p = 0.9;
  int V = 4;
  int K = 3;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  std::size_t shards = 8;

  void validate() const;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate; shard s draws from mt19937_64(seed + s). Results
// depend on (seed, shards) only, not on the thread count.
Estimate simulate(const TheoryConfig& config, Mode mode);
// Same shards run one after another; must agree bit-for-bit with simulate.
Estimate simulate_serial(const TheoryConfig& config, Mode mode);

struct GridPoint {
  double p = 0.0;
  int V = 2;
  int K = 1;
  double e_hier_cf = 0.0;
  double e_indep_cf = 0.0;
  Estimate hier_mc;
  Estimate indep_mc;
  bool strict_ok = false;
  bool mc_ok = false;  // both estimates within 4 standard errors of the closed forms
};

struct TheoryReport {
  std::vector<GridPoint> points;
  bool all_strict = true;
  bool all_mc_agree = true;
  bool psi_monotone = true;
  std::vector<std::string> failures;
};

struct GridConfig {
  std::vector<double> p = {0.2, 0.5, 0.9};
  std::vector<int> V = {4, 16, 256};
  std::vector<int> K = {2, 4, 8};
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  std::size_t shards = 8;
};

// Checks e_hier < e_indep at every point with Monte Carlo corroboration,
// plus strict decrease of psi across the grid's p values for every K > 1.
// Points with p <= 1/V are still evaluated; they are listed in failures.
TheoryReport verify_proposition(const GridConfig& grid);

// Header p,V,K,e_hier_cf,e_indep_cf,e_hier_mc,e_hier_se,e_indep_mc,e_indep_se,strict_ok.
std::string report_csv(const TheoryReport& report);

}  // namespace cofirec::theory
