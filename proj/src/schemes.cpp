#include "ghzbayes/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ghzbayes/parallel.hpp"
#include "monte_carlo.hpp"

namespace ghzbayes {

namespace {

constexpr double kPi = std::numbers::pi;

using detail::monte_carlo;
using detail::wrap;

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// x^k (1-x)^(n-k) C(n,k), with 0^0 = 1.
double binomial_pmf(int n, int k, double x) {
  if (x <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (x >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_choose(n, k) + k * std::log(x) + (n - k) * std::log1p(-x));
}

// Draws grid nodes with probability proportional to the prior mass.
struct Sampler {
  const PriorGrid& prior;
  std::vector<double> cumulative;

  explicit Sampler(const PriorGrid& p) : prior(p) {
    const auto mass = p.mass();
    cumulative.resize(mass.size());
    std::partial_sum(mass.begin(), mass.end(), cumulative.begin());
  }

  std::size_t draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative.back());
    const double r = u(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
  }
};

double posterior_variance(const std::vector<double>& w, std::span<const double> phi) {
  double a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    a += w[j];
    b += w[j] * phi[j];
    c += w[j] * phi[j] * phi[j];
  }
  if (a <= 0.0) return 0.0;
  const double mean = b / a;
  return std::max(0.0, c / a - mean * mean);
}

}  // namespace

// ---------------------------------------------------------------- CSS

std::vector<double> css_probabilities(int n_total, double phi) {
  const double s2 = 0.5 * (1.0 + std::sin(phi));
  std::vector<double> p(n_total + 1);
  for (int x = 0; x <= n_total; ++x) p[x] = binomial_pmf(n_total, x, s2);
  return p;
}

double css_bmse(int n_total, const PriorGrid& prior) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  const auto phi = prior.nodes();
  const auto mass = prior.mass();
  std::vector<double> a(n_total + 1, 0.0), b(n_total + 1, 0.0);
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const std::vector<double> p = css_probabilities(n_total, phi[j]);
    for (int x = 0; x <= n_total; ++x) {
      a[x] += mass[j] * p[x];
      b[x] += mass[j] * p[x] * phi[j];
    }
  }
  double info = 0.0;
  for (int x = 0; x <= n_total; ++x) {
    if (a[x] > 0.0) info += b[x] * b[x] / a[x];
  }
  return prior.second_moment() - info;
}

PriorGrid css_prior(double delta_phi, int n_total) {
  return gaussian_prior(delta_phi, suggested_node_count(2.0 * kGaussianSupportSigmas * delta_phi, n_total));
}

// ---------------------------------------------------------------- GHZ

double ghz_parity_closed_form(int n_total, double delta_phi) {
  const double nd2 = static_cast<double>(n_total) * n_total * delta_phi * delta_phi;
  return delta_phi * delta_phi - nd2 * delta_phi * delta_phi * std::exp(-nd2);
}

double ghz_parity_bmse_numeric(int n_total, const PriorGrid& prior) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  const auto phi = prior.nodes();
  const auto mass = prior.mass();
  // Rotation pi / (2N) turns the even-parity fringe into (1 + sin(N phi)) / 2.
  double a_even = 0.0, b_even = 0.0, a_odd = 0.0, b_odd = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const double pe = 0.5 * (1.0 + std::sin(n_total * phi[j]));
    a_even += mass[j] * pe;
    b_even += mass[j] * pe * phi[j];
    a_odd += mass[j] * (1.0 - pe);
    b_odd += mass[j] * (1.0 - pe) * phi[j];
  }
  double info = 0.0;
  if (a_even > 0) info += b_even * b_even / a_even;
  if (a_odd > 0) info += b_odd * b_odd / a_odd;
  return prior.second_moment() - info;
}

double ghz_parity_bmse(int n_total, const PriorGrid& prior) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  if (prior.kind() == PriorKind::kGaussian) return ghz_parity_closed_form(n_total, prior.width());
  return ghz_parity_bmse_numeric(n_total, prior);
}

// ---------------------------------------------------------------- plateaus

namespace {

template <typename Integrand>
double integrate(double lo, double hi, Integrand&& f) {
  std::vector<double> x, w;
  composite_gauss_legendre(lo, hi, 64, x, w);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * f(x[i]);
  return acc;
}

int wrap_terms(double delta_phi) {
  // exp(-(2 pi K - pi)^2 / 2 delta^2) < 1e-16 for K beyond this.
  return static_cast<int>(std::ceil((9.0 * delta_phi + kPi) / (2.0 * kPi))) + 1;
}

}  // namespace

double plateau_hl(double delta_phi) {
  if (!(delta_phi > 0)) throw std::invalid_argument("delta_phi must be positive");
  const int K = wrap_terms(delta_phi);
  const double s2 = 2.0 * delta_phi * delta_phi;
  const double norm = 1.0 / std::sqrt(kPi * s2);
  const double info = integrate(-kPi, kPi, [&](double phi) {
    double num = 0.0, den = 0.0;
    for (int k = -K; k <= K; ++k) {
      const double pk = phi + 2.0 * kPi * k;
      const double g = std::exp(-pk * pk / s2);
      num += pk * g;
      den += g;
    }
    return den > 0.0 ? norm * num * num / den : 0.0;
  });
  return delta_phi * delta_phi - info;
}

double plateau_sql(double delta_phi) {
  if (!(delta_phi > 0)) throw std::invalid_argument("delta_phi must be positive");
  const int K = wrap_terms(delta_phi);
  const double s2 = 2.0 * delta_phi * delta_phi;
  const double norm = 1.0 / std::sqrt(kPi * s2);
  const double info = integrate(-kPi / 2.0, kPi / 2.0, [&](double phi) {
    double num = 0.0, den = 0.0;
    for (int k = -K; k <= K; ++k) {
      const double pk = phi + 2.0 * kPi * k;
      const double qk = kPi - pk;
      const double gp = std::exp(-pk * pk / s2);
      const double gq = std::exp(-qk * qk / s2);
      num += pk * gp + qk * gq;
      den += gp + gq;
    }
    return den > 0.0 ? norm * num * num / den : 0.0;
  });
  return delta_phi * delta_phi - info;
}

// ---------------------------------------------------------------- QCRB

double qcrb_bound(const Partition& p) {
  double fisher = 0.0;
  for (const Block& b : p.blocks()) fisher += b.copies * std::ldexp(1.0, 2 * b.exponent);
  if (fisher <= 0.0) throw std::invalid_argument("empty partition");
  return 1.0 / fisher;
}

// ---------------------------------------------------------------- fixed block

FixedBlockConfig solve_fixed_block_M(int k_max) {
  if (k_max < 0) throw std::invalid_argument("k_max must be >= 0");
  const double c = 16.0 / (kPi * kPi);
  const double sizes = std::ldexp(1.0, k_max + 1) - 1.0;
  double m = 10.0;
  for (int it = 0; it < 10000; ++it) {
    const double next = c * std::log(m * sizes);
    if (!(next > 1.0)) {
      throw std::invalid_argument("copy-number equation has no solution for this k_max");
    }
    if (std::abs(next - m) < 1e-14 * m) {
      m = next;
      break;
    }
    m = next;
  }
  FixedBlockConfig cfg;
  cfg.k_max = k_max;
  cfg.copies_real = m;
  cfg.copies = static_cast<int>(std::lround(m));
  // Half of the copies are read out in each quadrature.
  if (cfg.copies % 2) cfg.copies += 1;
  return cfg;
}

double dual_quadrature_estimate(int n_x, int n_y, int copies) {
  const double re = 2.0 * n_x / copies - 0.5;
  const double im = 2.0 * n_y / copies - 0.5;
  return wrap(std::atan2(im, re));
}

double bit_by_bit_combine(const std::vector<double>& phi_hat) {
  const int k_max = static_cast<int>(phi_hat.size()) - 1;
  double est = std::ldexp(phi_hat[k_max], -k_max);
  for (int j = 1; j <= k_max; ++j) {
    const double z = std::round((2.0 * phi_hat[j - 1] - phi_hat[j]) / (2.0 * kPi));
    est += std::ldexp(2.0 * kPi * z, -j);
  }
  return wrap(est);
}

double bit_by_bit_estimate(const std::vector<std::array<int, 2>>& counts, int copies) {
  std::vector<double> phi_hat(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    phi_hat[k] = dual_quadrature_estimate(counts[k][0], counts[k][1], copies);
  }
  return bit_by_bit_combine(phi_hat);
}

namespace {

// Per-size likelihood tables: table[k][n * G + j] = P(n even | phi_j) for
// the X (cos) and Y (sin) quadratures.
struct QuadratureTables {
  int half = 0;
  std::vector<std::vector<double>> x, y;
};

QuadratureTables quadrature_tables(const FixedBlockConfig& cfg, std::span<const double> phi) {
  QuadratureTables t;
  t.half = cfg.copies / 2;
  const std::size_t g = phi.size();
  t.x.resize(cfg.k_max + 1);
  t.y.resize(cfg.k_max + 1);
  for (int k = 0; k <= cfg.k_max; ++k) {
    t.x[k].resize((t.half + 1) * g);
    t.y[k].resize((t.half + 1) * g);
    const double f = std::ldexp(1.0, k);
    for (std::size_t j = 0; j < g; ++j) {
      const double ax = 0.5 * (1.0 + std::cos(f * phi[j]));
      const double ay = 0.5 * (1.0 + std::sin(f * phi[j]));
      for (int n = 0; n <= t.half; ++n) {
        t.x[k][n * g + j] = binomial_pmf(t.half, n, ax);
        t.y[k][n * g + j] = binomial_pmf(t.half, n, ay);
      }
    }
  }
  return t;
}

struct FixedWalker {
  const FixedBlockConfig& cfg;
  const QuadratureTables& tab;
  std::span<const double> phi;
  FixedEstimator estimator;
  std::size_t g;
  std::vector<std::vector<double>> level;
  std::vector<std::array<int, 2>> counts;
  double acc = 0.0;

  void run(int k, const double* P) {
    if (k < 0) {
      double a = 0.0, b = 0.0, c = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        a += P[j];
        b += P[j] * phi[j];
        c += P[j] * phi[j] * phi[j];
      }
      if (estimator == FixedEstimator::kBayes) {
        if (a > 0.0) acc += b * b / a;
      } else {
        const double est = bit_by_bit_estimate(counts, cfg.copies);
        acc += c - 2.0 * est * b + est * est * a;
      }
      return;
    }
    double* out = level[k].data();
    for (int nx = 0; nx <= tab.half; ++nx) {
      const double* fx = &tab.x[k][nx * g];
      for (int ny = 0; ny <= tab.half; ++ny) {
        const double* fy = &tab.y[k][ny * g];
        for (std::size_t j = 0; j < g; ++j) out[j] = P[j] * fx[j] * fy[j];
        counts[k] = {nx, ny};
        run(k - 1, out);
      }
    }
  }
};

}  // namespace

SchemeResult fixed_block_bmse(const FixedBlockConfig& cfg, const PriorGrid& prior,
                              FixedEstimator estimator, const McOptions& mc,
                              std::uint64_t exact_limit) {
  if (cfg.copies < 2 || cfg.copies % 2) throw std::invalid_argument("copies must be even and >= 2");
  const auto phi = prior.nodes();
  const QuadratureTables tab = quadrature_tables(cfg, phi);
  const double lattice = std::pow(tab.half + 1.0, 2.0 * (cfg.k_max + 1));
  if (lattice <= static_cast<double>(exact_limit)) {
    FixedWalker w{cfg, tab, phi, estimator, phi.size(), {}, {}, 0.0};
    w.level.assign(cfg.k_max + 1, std::vector<double>(phi.size()));
    w.counts.assign(cfg.k_max + 1, {0, 0});
    // Larger blocks are folded in first; order does not matter for the sum.
    w.run(cfg.k_max, prior.mass().data());
    SchemeResult r;
    r.bmse = estimator == FixedEstimator::kBayes ? prior.second_moment() - w.acc : w.acc;
    r.outcomes = static_cast<std::uint64_t>(lattice);
    return r;
  }
  const Sampler sampler(prior);
  const std::size_t g = phi.size();
  return monte_carlo(mc, [&](std::mt19937_64& rng) {
    const std::size_t j = sampler.draw(rng);
    std::vector<std::array<int, 2>> counts(cfg.k_max + 1);
    std::vector<double> w(prior.mass().begin(), prior.mass().end());
    for (int k = 0; k <= cfg.k_max; ++k) {
      const double f = std::ldexp(1.0, k);
      std::binomial_distribution<int> bx(tab.half, 0.5 * (1.0 + std::cos(f * phi[j])));
      std::binomial_distribution<int> by(tab.half, 0.5 * (1.0 + std::sin(f * phi[j])));
      counts[k] = {bx(rng), by(rng)};
      if (estimator == FixedEstimator::kBayes) {
        const double* fx = &tab.x[k][counts[k][0] * g];
        const double* fy = &tab.y[k][counts[k][1] * g];
        double top = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
          w[i] *= fx[i] * fy[i];
          top = std::max(top, w[i]);
        }
        if (top > 0.0) for (double& v : w) v /= top;
      }
    }
    if (estimator == FixedEstimator::kBayes) return posterior_variance(w, phi);
    const double err = phi[j] - bit_by_bit_estimate(counts, cfg.copies);
    return err * err;
  });
}

// ---------------------------------------------------------------- varying block

int VaryingBlockConfig::n_total() const {
  int n = 0;
  for (int k = 0; k <= k_max; ++k) n += copies(k) << k;
  return n;
}

int VaryingBlockConfig::block_count() const {
  int m = 0;
  for (int k = 0; k <= k_max; ++k) m += copies(k);
  return m;
}

Partition VaryingBlockConfig::partition() const {
  std::vector<Block> blocks;
  for (int k = k_max; k >= 0; --k) blocks.push_back({k, copies(k)});
  return Partition(blocks);
}

VaryingBlockConfig varying_block_config(int k_max) {
  if (k_max < 0) throw std::invalid_argument("k_max must be >= 0");
  VaryingBlockConfig cfg;
  cfg.k_max = k_max;
  return cfg;
}

namespace {

std::vector<double> varying_angles(const VaryingBlockConfig& cfg, bool with_rotations,
                                   std::vector<int>& order) {
  order.clear();
  std::vector<double> angles;
  for (int k = cfg.k_max; k >= 0; --k) {
    const int m = cfg.copies(k);
    for (int i = 0; i < m; ++i) {
      order.push_back(k);
      angles.push_back(with_rotations ? kPi * i / (m * std::ldexp(1.0, k)) : 0.0);
    }
  }
  return angles;
}

}  // namespace

std::vector<double> varying_block_angles(const VaryingBlockConfig& cfg, bool with_rotations,
                                         std::vector<int>& order) {
  order.clear();
  return varying_angles(cfg, with_rotations, order);
}

MeasurementPlan varying_block_plan(const VaryingBlockConfig& cfg, bool with_rotations) {
  std::vector<int> order;
  const std::vector<double> angles = varying_angles(cfg, with_rotations, order);
  MeasurementPlan plan = MeasurementPlan::for_order(order);
  for (int d = 0; d < plan.steps(); ++d) {
    for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
      plan.rotations[MeasurementPlan::node_index(d, p)] = angles[d];
    }
  }
  return plan;
}

SchemeResult nonadaptive_plan_bmse(const std::vector<int>& order,
                                   const std::vector<double>& angles, const PriorGrid& prior,
                                   const McOptions& mc, int exact_max_blocks,
                                   const StepContrast& contrast) {
  if (order.size() != angles.size() || order.empty()) {
    throw std::invalid_argument("order and angles must have equal non-zero length");
  }
  const int steps = static_cast<int>(order.size());
  if (steps <= std::min(exact_max_blocks, kMaxPlanSteps)) {
    MeasurementPlan plan = MeasurementPlan::for_order(order);
    for (int d = 0; d < steps; ++d) {
      for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
        plan.rotations[MeasurementPlan::node_index(d, p)] = angles[d];
      }
    }
    SchemeResult r;
    r.bmse = bmse(plan, prior, contrast);
    r.outcomes = std::uint64_t{1} << steps;
    return r;
  }
  const auto phi = prior.nodes();
  const std::size_t g = phi.size();
  // Fringe tables per step: even-parity probability at every node.
  std::vector<double> even(steps * g);
  for (int d = 0; d < steps; ++d) {
    const double f = std::ldexp(1.0, order[d]);
    const double c = contrast.empty() ? 1.0 : contrast[d];
    for (std::size_t j = 0; j < g; ++j) {
      even[d * g + j] = 0.5 * (1.0 + c * std::cos(f * (phi[j] - angles[d])));
    }
  }
  const Sampler sampler(prior);
  return monte_carlo(mc, [&](std::mt19937_64& rng) {
    const std::size_t j = sampler.draw(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(prior.mass().begin(), prior.mass().end());
    for (int d = 0; d < steps; ++d) {
      const double* t = &even[d * g];
      const bool is_even = u(rng) < t[j];
      double top = 0.0;
      for (std::size_t i = 0; i < g; ++i) {
        w[i] *= is_even ? t[i] : 1.0 - t[i];
        top = std::max(top, w[i]);
      }
      if (top > 0.0) for (double& v : w) v /= top;
    }
    return posterior_variance(w, phi);
  });
}

SchemeResult varying_block_bmse(const VaryingBlockConfig& cfg, const PriorGrid& prior,
                                bool with_rotations, const McOptions& mc,
                                int exact_max_blocks) {
  std::vector<int> order;
  const std::vector<double> angles = varying_angles(cfg, with_rotations, order);
  return nonadaptive_plan_bmse(order, angles, prior, mc, exact_max_blocks);
}

int fixed_block_n(int k_max) { return solve_fixed_block_M(k_max).n_total(); }

int varying_block_n(int k_max) { return varying_block_config(k_max).n_total(); }

// ---------------------------------------------------------------- sine / QFT

QftMoments sine_qft_check(int n_total, double phi) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  const int n = n_total;
  const double norm = std::sqrt(2.0 / (n + 2.0)) / std::sqrt(n + 1.0);
  std::vector<std::complex<double>> psi(n + 1);
  for (int m = 0; m <= n; ++m) {
    psi[m] = norm * std::sin(kPi * (m + 1) / (n + 2.0)) * std::polar(1.0, -m * phi);
  }
  QftMoments out;
  double m1 = 0.0, m2 = 0.0;
  for (int k = 0; k <= n; ++k) {
    std::complex<double> amp{};
    for (int m = 0; m <= n; ++m) {
      amp += std::polar(1.0, 2.0 * kPi * k * m / (n + 1.0)) * psi[m];
    }
    const double p = std::norm(amp);
    out.total += p;
    m1 += k * p;
    m2 += static_cast<double>(k) * k * p;
  }
  out.mean = m1 / out.total;
  out.variance = m2 / out.total - out.mean * out.mean;
  return out;
}

// ---------------------------------------------------------------- helpers

double fit_constant_overhead(const std::vector<double>& ratios) {
  if (ratios.empty()) throw std::invalid_argument("no ratios to fit");
  double acc = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("ratios must be positive");
    acc += std::log(r);
  }
  return std::exp(acc / static_cast<double>(ratios.size()));
}

double to_db(double variance_ratio) { return 10.0 * std::log10(variance_ratio); }

double fixed_block_analytic_rbmse(int n_total) {
  const double n = n_total;
  return 8.0 / (kPi * kPi) * std::sqrt(std::log(n)) * 1.55 / std::pow(n, 0.83);
}

}  // namespace ghzbayes
