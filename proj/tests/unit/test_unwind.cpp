#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ghzbayes/unwind.hpp"

using namespace ghzbayes;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST(Unwind, ExtendedPartitionStrings) {
  const ExtendedPartition ep =
      ExtendedPartition::parse("2x4+3x1+3x(1/8)+3x2+4x(1/2)+2x(1/4)");
  EXPECT_EQ(ep.to_string(), "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4");
  EXPECT_EQ(ep.n_total(), 26);
  EXPECT_EQ(ep.l_max(), 3);
  EXPECT_EQ(ep.slow_atoms(), 9);
  EXPECT_THROW(ExtendedPartition::parse("2x(1/3)"), std::invalid_argument);
  EXPECT_THROW(ExtendedPartition::parse("0x(1/2)"), std::invalid_argument);
}

TEST(Unwind, ReuseCostsFractionalQubits) {
  const ExtendedPartition ep = ExtendedPartition::parse("4x(1/4)+2x(1/2)+1x1", true);
  EXPECT_EQ(ep.n_total(), 1 + 1 + 1);
}

TEST(Unwind, RescaleIdentityWithoutSlowAtoms) {
  const ExtendedPartition ep({}, Partition::parse("3x4+3x2+3x1"));
  const RescaledFrame f = rescale(ep, 0);
  EXPECT_EQ(f.partition, ep.fast());
  EXPECT_EQ(f.scale_factor, 1.0);
  EXPECT_EQ(f.prior_scale, 1.0);
}

TEST(Unwind, RescalesTheTwentySixAtomExample) {
  const ExtendedPartition ep = ExtendedPartition::parse("3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4");
  const RescaledFrame f = rescale(ep, 3);
  // Copies over block sizes 1, 2, 4, 8, 16, 32.
  std::vector<int> copies(6, 0);
  for (const Block& b : f.partition.blocks()) copies[b.exponent] = b.copies;
  EXPECT_EQ(copies, (std::vector<int>{3, 2, 4, 3, 3, 2}));
  EXPECT_EQ(f.n_prime, 159);
  EXPECT_EQ(f.scale_factor, 64.0);
  EXPECT_NEAR(5.6 * f.prior_scale, 0.7, 1e-15);
  EXPECT_EQ(unrescale(f.partition, 3), ep);
  EXPECT_THROW(rescale(ep, 2), std::invalid_argument);
}

TEST(Unwind, BmseScalesBetweenFrames) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 5; ++trial) {
    const int L = 1 + trial % 3;
    const double delta = 0.7 * std::ldexp(1.0, L) * (0.6 + 0.2 * trial);
    MeasurementPlan plan = MeasurementPlan::for_order({1, 0, -1, -L});
    for (double& r : plan.rotations) r = u(rng);
    const PriorGrid original = default_gaussian_prior(delta, 2.0);
    const MeasurementPlan scaled_plan = rescale_plan(plan, L);
    const PriorGrid scaled = default_gaussian_prior(delta * std::ldexp(1.0, -L),
                                                    std::ldexp(2.0, L));
    const double a = bmse(plan, original);
    const double b = std::ldexp(bmse(scaled_plan, scaled), 2 * L);
    EXPECT_NEAR(a / b, 1.0, 1e-10) << trial;
    const MeasurementPlan back = unrescale_plan(scaled_plan, L);
    EXPECT_EQ(back.order, plan.order);
    for (std::size_t i = 0; i < plan.rotations.size(); ++i) {
      EXPECT_NEAR(back.rotations[i], plan.rotations[i], 1e-15);
    }
  }
}

TEST(Unwind, EstimatePExamples) {
  EXPECT_EQ(estimate_P(std::vector<double>(4, 0.0)), 0);
  EXPECT_EQ(estimate_P(fold_phases(6.9, 3)), 1);
  EXPECT_EQ(estimate_P(fold_phases(-7.0, 3)), -1);
  for (double phi : {20.0, -33.3, 45.0, 3.0}) {
    const long want = std::lround(phi / (2 * kPi));
    EXPECT_EQ(estimate_P(fold_phases(phi, 4)), want) << phi;
  }
}

TEST(Unwind, EstimatePToleratesErrorsBelowPiOverThree) {
  std::mt19937_64 rng(3);
  const int L = 4;
  // Keep phi / 2^L clear of the +-pi seam by more than the noise.
  const double span = std::ldexp(2 * kPi / 3, L);
  std::uniform_real_distribution<double> phi_dist(-span, span);
  std::uniform_real_distribution<double> noise(-0.999 * kPi / 3, 0.999 * kPi / 3);
  for (int t = 0; t < 20000; ++t) {
    const double phi = phi_dist(rng);
    auto betas = fold_phases(phi, L);
    for (double& b : betas) b = std::remainder(b + noise(rng), 2 * kPi);
    const double est = 2 * kPi * estimate_P(betas) + betas[0];
    ASSERT_LT(std::abs(est - phi), kPi / 3) << phi;
  }
}

TEST(Unwind, FoldPosteriorNormalisation) {
  std::vector<double> x, w;
  composite_gauss_legendre(-kPi, kPi, 64, x, w);
  for (auto [d, p] : {std::pair{0.5, 0L}, {3.0, 1L}, {3.0, -2L}, {1.0, 4L}}) {
    const FoldPosterior f = posterior_after_P(d, p);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f.density(x[i]);
    EXPECT_NEAR(s, 1.0, 1e-12) << d << " " << p;
  }
  const FoldPosterior wide(100.0, 0);
  for (double t = -kPi; t < kPi; t += 0.01) {
    EXPECT_LT(std::abs(wide.density(t) - 1 / (2 * kPi)), 1e-3);
  }
  EXPECT_EQ(wide.density(kPi), 0.0);
}

TEST(Unwind, FoldPosteriorMatchesRejectionSampling) {
  const double d = 3.0;
  const FoldPosterior f(d, 1);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, d);
  const int bins = 10;
  std::vector<double> hist(bins, 0.0);
  long kept = 0;
  for (long i = 0; i < 4000000; ++i) {
    const double phi = g(rng);
    const double theta = phi - 2 * kPi;
    if (theta < -kPi || theta >= kPi) continue;
    hist[static_cast<int>((theta + kPi) / (2 * kPi) * bins)] += 1.0;
    ++kept;
  }
  std::vector<double> x, w;
  for (int b = 0; b < bins; ++b) {
    const double lo = -kPi + 2 * kPi * b / bins;
    composite_gauss_legendre(lo, lo + 2 * kPi / bins, 2, x, w);
    double mass = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mass += w[i] * f.density(x[i]);
    const double freq = hist[b] / kept;
    EXPECT_NEAR(freq, mass, 4 * std::sqrt(mass * (1 - mass) / kept)) << b;
  }
}

TEST(Unwind, AllocationCosts) {
  UnwindAllocation a;
  a.l_max = 2;
  a.atoms_per_level = 4;
  a.k_max = 1;
  EXPECT_EQ(a.adaptive_cost(), 12 + 9);
  EXPECT_EQ(a.nonadaptive_cost(), 12 + 4 + 9);
  a.atoms_per_level = 3;
  EXPECT_THROW(adaptive_unwind_bmse(a, 1.4, McOptions{100, 1}), std::invalid_argument);
}

TEST(Unwind, NoSlowAtomsReducesToVaryingBlock) {
  UnwindAllocation a;
  a.k_max = 1;
  a.effective_width = 0.7;
  const UnwindResult r = adaptive_unwind_bmse(a, 0.7, McOptions{200000, 5});
  const SchemeResult v =
      varying_block_bmse(varying_block_config(1), default_gaussian_prior(0.7, 2), true);
  EXPECT_NEAR(r.bmse, v.bmse, 5 * r.std_error);
}

TEST(Unwind, McIsDeterministicInSeed) {
  UnwindAllocation a;
  a.l_max = 1;
  a.atoms_per_level = 4;
  a.k_max = 1;
  const UnwindResult x = nonadaptive_unwind_bmse(a, 1.4, McOptions{5000, 9});
  const UnwindResult y = nonadaptive_unwind_bmse(a, 1.4, McOptions{5000, 9});
  EXPECT_EQ(x.bmse, y.bmse);
}

TEST(Unwind, NarrowPriorNeedsNoSlowAtoms) {
  UnwindSearchOptions o;
  o.max_l = 2;
  o.max_slow_per_level = 2;
  o.optimizer.restarts = 1;
  const UnwindSelection s = best_unwind_partition(9, 0.7, false, o);
  EXPECT_EQ(s.l_max, 0);
  EXPECT_TRUE(s.partition.slow().empty());
  EXPECT_LE(s.bmse, s.bound * 3.0);
}
