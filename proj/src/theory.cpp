#include "cofirec/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "cofirec/io.hpp"

namespace cofirec::theory {

namespace {

void check_p(double p, const char* who) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(who) + ": p must lie in [0, 1]");
  }
}

void check_k(int K, const char* who) {
  if (K < 1) {
    throw std::invalid_argument(std::string(who) + ": K must be >= 1");
  }
}

double power_sum(double x, int K) {
  double s = 0.0;
  double term = 1.0;
  for (int k = 1; k <= K; ++k) {
    term *= x;
    s += term;
  }
  return s;
}

struct ShardSums {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
};

ShardSums run_shard(const TheoryConfig& c, Mode mode, std::size_t shard) {
  const std::size_t base = c.trials / c.shards;
  const std::size_t n = base + (shard < c.trials % c.shards ? 1 : 0);
  std::mt19937_64 rng(c.seed + shard);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> digit(0, c.V - 1);
  const double hit_all = std::pow(c.p, c.K);
  ShardSums s;
  s.n = n;
  for (std::size_t t = 0; t < n; ++t) {
    int depth = 0;
    if (mode == Mode::hier) {
      while (depth < c.K && unit(rng) < c.p) {
        ++depth;
      }
    } else if (unit(rng) < hit_all) {
      depth = c.K;
    } else {
      // Uniform over the V^K - 1 leaves other than the all-zero target.
      std::vector<int> leaf(static_cast<std::size_t>(c.K));
      bool is_target = true;
      while (is_target) {
        is_target = true;
        for (int& x : leaf) {
          x = digit(rng);
          is_target = is_target && x == 0;
        }
      }
      while (depth < c.K && leaf[static_cast<std::size_t>(depth)] == 0) {
        ++depth;
      }
    }
    const double d = static_cast<double>(c.K - depth);
    s.sum += d;
    s.sum_sq += d * d;
  }
  return s;
}

Estimate combine(const std::vector<ShardSums>& shards) {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : shards) {
    sum += s.sum;
    sum_sq += s.sum_sq;
    n += s.n;
  }
  const double dn = static_cast<double>(n);
  Estimate e;
  e.mean = sum / dn;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - dn * e.mean * e.mean) / (dn - 1.0));
    e.std_error = std::sqrt(var / dn);
  }
  return e;
}

}  // namespace

double e_hier(double p, int K) {
  check_p(p, "e_hier");
  check_k(K, "e_hier");
  return static_cast<double>(K) - power_sum(p, K);
}

double e_indep(double p, int V, int K) {
  check_p(p, "e_indep");
  check_k(K, "e_indep");
  if (V < 2) {
    throw std::invalid_argument("e_indep: V must be >= 2");
  }
  if (p == 1.0) {
    return 0.0;
  }
  const double inv_v = 1.0 / static_cast<double>(V);
  const double miss_mean = static_cast<double>(K) - power_sum(inv_v, K);
  return miss_mean * (1.0 - std::pow(p, K)) / (1.0 - std::pow(inv_v, K));
}

double psi(double p, int K) {
  check_k(K, "psi");
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("psi: p must lie in [0, 1)");
  }
  return (static_cast<double>(K) - power_sum(p, K)) / (1.0 - std::pow(p, K));
}

void TheoryConfig::validate() const {
  check_p(p, "simulate");
  check_k(K, "simulate");
  if (V < 2) {
    throw std::invalid_argument("simulate: V must be >= 2");
  }
  if (trials == 0) {
    throw std::invalid_argument("simulate: trials must be >= 1");
  }
  if (shards == 0) {
    throw std::invalid_argument("simulate: shards must be >= 1");
  }
}

Estimate simulate(const TheoryConfig& config, Mode mode) {
  config.validate();
  std::vector<ShardSums> shards(config.shards);
  const long n = static_cast<long>(config.shards);
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < n; ++s) {
    shards[static_cast<std::size_t>(s)] = run_shard(config, mode, static_cast<std::size_t>(s));
  }
  return combine(shards);
}

Estimate simulate_serial(const TheoryConfig& config, Mode mode) {
  config.validate();
  std::vector<ShardSums> shards;
  for (std::size_t s = 0; s < config.shards; ++s) {
    shards.push_back(run_shard(config, mode, s));
  }
  return combine(shards);
}

TheoryReport verify_proposition(const GridConfig& grid) {
  TheoryReport report;
  std::size_t idx = 0;
  for (double p : grid.p) {
    for (int V : grid.V) {
      for (int K : grid.K) {
        GridPoint g;
        g.p = p;
        g.V = V;
        g.K = K;
        g.e_hier_cf = e_hier(p, K);
        g.e_indep_cf = e_indep(p, V, K);
        g.strict_ok = g.e_hier_cf < g.e_indep_cf;
        TheoryConfig tc;
        tc.p = p;
        tc.V = V;
        tc.K = K;
        tc.trials = grid.trials;
        tc.shards = grid.shards;
        tc.seed = grid.seed + 7919 * idx;
        g.hier_mc = simulate(tc, Mode::hier);
        g.indep_mc = simulate(tc, Mode::indep);
        const auto within = [](const Estimate& e, double cf) {
          return std::abs(e.mean - cf) <= 4.0 * e.std_error;
        };
        g.mc_ok = within(g.hier_mc, g.e_hier_cf) && within(g.indep_mc, g.e_indep_cf);
        const std::string name = "p=" + io::format_double(p) + " V=" + std::to_string(V) +
                                 " K=" + std::to_string(K);
        if (!(p > 1.0 / static_cast<double>(V))) {
          report.failures.push_back("p <= 1/V at " + name);
        }
        if (!g.strict_ok) {
          report.all_strict = false;
          report.failures.push_back("e_hier >= e_indep at " + name);
        }
        if (!g.mc_ok) {
          report.all_mc_agree = false;
          report.failures.push_back("Monte Carlo disagrees with closed form at " + name);
        }
        report.points.push_back(g);
        ++idx;
      }
    }
  }
  const std::set<double> ps(grid.p.begin(), grid.p.end());
  for (int K : std::set<int>(grid.K.begin(), grid.K.end())) {
    if (K <= 1) {
      continue;
    }
    double prev = 0.0;
    bool first = true;
    for (double p : ps) {
      const double v = psi(p, K);
      if (!first && !(v < prev)) {
        report.psi_monotone = false;
        report.failures.push_back("psi not strictly decreasing at p=" + io::format_double(p) +
                                  " K=" + std::to_string(K));
      }
      prev = v;
      first = false;
    }
  }
  return report;
}

std::string report_csv(const TheoryReport& report) {
  std::string out = "p,V,K,e_hier_cf,e_indep_cf,e_hier_mc,e_hier_se,e_indep_mc,e_indep_se,strict_ok\n";
  for (const auto& g : report.points) {
    out += io::format_double(g.p) + "," + std::to_string(g.V) + "," + std::to_string(g.K) + "," +
           io::format_double(g.e_hier_cf) + "," + io::format_double(g.e_indep_cf) + "," +
           io::format_double(g.hier_mc.mean) + "," + io::format_double(g.hier_mc.std_error) + "," +
           io::format_double(g.indep_mc.mean) + "," + io::format_double(g.indep_mc.std_error) + "," +
           (g.strict_ok ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace cofirec::theory
