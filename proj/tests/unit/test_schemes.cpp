#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ghzbayes/oqi.hpp"
#include "ghzbayes/schemes.hpp"

using namespace ghzbayes;

namespace {

constexpr double kPi = std::numbers::pi;

double wrapped(double x) { return x - 2 * kPi * std::floor((x + kPi) / (2 * kPi)); }

}  // namespace

TEST(Schemes, GhzClosedFormExample) {
  EXPECT_NEAR(ghz_parity_closed_form(1, 0.5), 0.25 - 0.0625 * std::exp(-0.25), 1e-15);
  EXPECT_NEAR(ghz_parity_closed_form(64, 1.0), 1.0, 1e-12);
}

TEST(Schemes, GhzClosedFormMatchesQuadrature) {
  for (int n : {1, 2, 4, 8}) {
    for (double d : {0.05, 0.1, 0.3}) {
      const PriorGrid prior = default_gaussian_prior(d, n);
      EXPECT_NEAR(ghz_parity_bmse_numeric(n, prior), ghz_parity_closed_form(n, d), 1e-8)
          << n << " " << d;
    }
  }
}

TEST(Schemes, CssBasics) {
  for (double phi : {-1.0, 0.0, 0.4}) {
    double s = 0.0;
    for (double p : css_probabilities(17, phi)) s += p;
    EXPECT_NEAR(s, 1.0, 1e-13);
  }
  EXPECT_LT(css_bmse(1, css_prior(0.7, 1)), 0.49);
  EXPECT_GT(css_bmse(1, css_prior(0.7, 1)), 0.0);
  EXPECT_LT(css_bmse(20, css_prior(0.7, 20)), css_bmse(10, css_prior(0.7, 10)));
}

TEST(Schemes, PlateauLimitsAndOrdering) {
  EXPECT_LT(plateau_hl(0.2), 1e-15);
  EXPECT_LT(plateau_sql(0.1), 1e-15);
  for (double d : {0.7, 1.05, 1.4}) EXPECT_LT(plateau_hl(d), plateau_sql(d));
  // Far beyond 2 pi the fold carries no information about phi at all.
  const double big = 10.0;
  EXPECT_NEAR(plateau_hl(big), big * big, 1e-6);
}

TEST(Schemes, PlateauHlMatchesMonteCarlo) {
  // The phase is known modulo 2 pi; the estimator is the posterior mean over
  // the 2 pi k images.
  const double d = 3.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, d);
  const int samples = 400000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double phi = g(rng);
    const double theta = wrapped(phi);
    double num = 0.0, den = 0.0;
    for (int k = -20; k <= 20; ++k) {
      const double x = theta + 2 * kPi * k;
      const double w = std::exp(-x * x / (2 * d * d));
      num += x * w;
      den += w;
    }
    const double e = (phi - num / den) * (phi - num / den);
    acc += e;
    acc2 += e * e;
  }
  const double mean = acc / samples;
  const double se = std::sqrt((acc2 / samples - mean * mean) / samples);
  EXPECT_NEAR(plateau_hl(d), mean, 4 * se);
  // Reporting the folded value itself does worse: E[(2 pi k)^2] ~ d^2 + pi^2 / 3.
  const double w = 10.0;
  std::normal_distribution<double> gw(0.0, w);
  double folded = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double phi = gw(rng);
    folded += std::pow(phi - wrapped(phi), 2);
  }
  EXPECT_NEAR(folded / samples, w * w + kPi * kPi / 3, 0.02 * w * w);
  EXPECT_LT(plateau_hl(w), folded / samples);
}

TEST(Schemes, Qcrb) {
  EXPECT_NEAR(qcrb_bound(Partition::parse("3x4+3x2+3x1")), 1.0 / (3 * 21), 1e-15);
  EXPECT_NEAR(qcrb_bound(Partition::parse("1x16")), 1.0 / 256, 1e-15);
  EXPECT_THROW(qcrb_bound(Partition()), std::invalid_argument);
}

TEST(Schemes, FixedBlockCopies) {
  const FixedBlockConfig cfg = solve_fixed_block_M(2);
  EXPECT_EQ(cfg.copies, 6);
  EXPECT_EQ(cfg.n_total(), 42);
  EXPECT_LT(std::abs(cfg.copies_real - 16.0 / (kPi * kPi) * std::log(7 * cfg.copies_real)),
            1e-10);
  EXPECT_EQ(fixed_block_n(2), 42);
  EXPECT_EQ(fixed_block_n(3), 120);
}

TEST(Schemes, DualQuadrature) {
  EXPECT_NEAR(dual_quadrature_estimate(6, 3, 12), 0.0, 1e-15);
  EXPECT_NEAR(dual_quadrature_estimate(6, 6, 12), kPi / 4, 1e-15);
}

TEST(Schemes, BitByBitRecoversBinaryPhase) {
  const double phi = 2 * kPi * 0.625;  // 0.101 in binary
  const int copies = 400;
  std::vector<std::array<int, 2>> counts;
  for (int k = 0; k <= 2; ++k) {
    const double a = std::ldexp(phi, k);
    counts.push_back({static_cast<int>(std::lround(copies / 2 * (1 + std::cos(a)) / 2)),
                      static_cast<int>(std::lround(copies / 2 * (1 + std::sin(a)) / 2))});
  }
  EXPECT_NEAR(bit_by_bit_estimate(counts, copies), wrapped(phi), 0.02);
}

TEST(Schemes, FixedBlockLatticeSumsToOne) {
  // Tiny configuration evaluated exactly; the exact path must agree with MC.
  FixedBlockConfig cfg;
  cfg.k_max = 1;
  cfg.copies = 2;
  const PriorGrid prior = default_gaussian_prior(0.7, 2);
  const SchemeResult exact = fixed_block_bmse(cfg, prior, FixedEstimator::kBayes);
  EXPECT_TRUE(exact.exact);
  const SchemeResult mc =
      fixed_block_bmse(cfg, prior, FixedEstimator::kBayes, McOptions{200000, 3}, 0);
  EXPECT_FALSE(mc.exact);
  EXPECT_NEAR(exact.bmse, mc.bmse, 5 * mc.std_error);
}

TEST(Schemes, VaryingBlockSizes) {
  const std::vector<int> want{2, 9, 26, 63, 140};
  for (int k = 0; k <= 4; ++k) EXPECT_EQ(varying_block_n(k), want[k]);
  EXPECT_EQ(varying_block_config(1).partition().to_string(), "2x2+5x1");
}

TEST(Schemes, NonadaptiveExactMatchesMc) {
  const VaryingBlockConfig cfg = varying_block_config(1);
  const PriorGrid prior = default_gaussian_prior(0.7, 2);
  const SchemeResult exact = varying_block_bmse(cfg, prior, true);
  const SchemeResult mc = varying_block_bmse(cfg, prior, true, McOptions{200000, 2}, 0);
  EXPECT_TRUE(exact.exact);
  EXPECT_NEAR(exact.bmse, mc.bmse, 5 * mc.std_error);
}

TEST(Schemes, SineStateQft) {
  const QftMoments q = sine_qft_check(200, kPi / 2);
  EXPECT_NEAR(q.total, 1.0, 1e-12);
  EXPECT_NEAR(q.variance, 0.25, 0.025);
  EXPECT_NEAR(q.mean, 200 * (kPi / 2) / (2 * kPi), 1.0);
}

TEST(Schemes, Helpers) {
  EXPECT_NEAR(to_db(2.29), 10 * std::log10(2.29), 1e-12);
  EXPECT_NEAR(fit_constant_overhead({1.5, 1.5, 1.5}), 1.5, 1e-14);
}
