#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"

namespace ghzbayes {

// Monte Carlo settings shared by the sampled evaluators. Samples draw a grid
// node from the prior mass, simulate outcomes there, and average the grid
// posterior variance (or squared error for fixed estimators).
struct McOptions {
  std::uint64_t samples = 200000;
  std::uint64_t seed = 1;
};

struct SchemeResult {
  double bmse = 0.0;
  double std_error = 0.0;  // 0 for exact evaluations
  bool exact = true;
  std::uint64_t outcomes = 0;  // lattice size or sample count
};

// ---- coherent spin state with single-quadrature readout ----

double css_bmse(int n_total, const PriorGrid& prior);
// p(x | phi) for x = 0..n_total.
std::vector<double> css_probabilities(int n_total, double phi);
// Grid sized for CSS and OQI integrands at n_total.
PriorGrid css_prior(double delta_phi, int n_total);

// ---- single GHZ state with a parity readout at the steepest fringe ----

double ghz_parity_bmse(int n_total, const PriorGrid& prior);
double ghz_parity_bmse_numeric(int n_total, const PriorGrid& prior);
double ghz_parity_closed_form(int n_total, double delta_phi);

// ---- large-N limits set by phase slips ----

double plateau_hl(double delta_phi);
double plateau_sql(double delta_phi);

// ---- quantum Cramer-Rao bound of a block product state ----

double qcrb_bound(const Partition& p);

// ---- fixed block size (M copies of every size 1..2^k_max) ----

struct FixedBlockConfig {
  int k_max = 0;
  int copies = 0;        // M, even
  double copies_real = 0.0;  // fixed point before rounding
  int n_total() const { return copies * ((2 << k_max) - 1); }
};

FixedBlockConfig solve_fixed_block_M(int k_max);

enum class FixedEstimator { kBayes, kBitByBit };

SchemeResult fixed_block_bmse(const FixedBlockConfig& cfg, const PriorGrid& prior,
                              FixedEstimator estimator, const McOptions& mc = {},
                              std::uint64_t exact_limit = 10000000);

// Dual-quadrature phase estimate of 2^k phi from even-parity counts.
double dual_quadrature_estimate(int n_x, int n_y, int copies);
// Assembles the phase from per-size estimates phi_hat[k], k = 0..k_max.
double bit_by_bit_combine(const std::vector<double>& phi_hat);
// Full bit-by-bit estimate from counts[k] = {n_x, n_y}.
double bit_by_bit_estimate(const std::vector<std::array<int, 2>>& counts, int copies);

// ---- varying block size (m_k = 2 + 3 (k_max - k)) ----

struct VaryingBlockConfig {
  int k_max = 0;
  int m_top = 2;
  int mu = 3;
  int copies(int k) const { return m_top + mu * (k_max - k); }
  int n_total() const;
  int block_count() const;
  Partition partition() const;
};

VaryingBlockConfig varying_block_config(int k_max);

// Non-adaptive plan: copy i of size 2^k is rotated by pi i / m_k in the
// block phase (or not at all without rotations).
MeasurementPlan varying_block_plan(const VaryingBlockConfig& cfg, bool with_rotations);
// Per-step angles of the same plan without building the tree; fills `order`.
std::vector<double> varying_block_angles(const VaryingBlockConfig& cfg, bool with_rotations,
                                         std::vector<int>& order);

SchemeResult varying_block_bmse(const VaryingBlockConfig& cfg, const PriorGrid& prior,
                                bool with_rotations, const McOptions& mc = {},
                                int exact_max_blocks = 17);

// BMSE of any non-adaptive parity plan (one fixed angle per step).
SchemeResult nonadaptive_plan_bmse(const std::vector<int>& order,
                                   const std::vector<double>& angles, const PriorGrid& prior,
                                   const McOptions& mc, int exact_max_blocks = 17,
                                   const StepContrast& contrast = {});

int fixed_block_n(int k_max);
int varying_block_n(int k_max);

// ---- sine state with a QFT readout ----

struct QftMoments {
  double mean = 0.0;
  double variance = 0.0;
  double total = 0.0;  // sum of probabilities
};

QftMoments sine_qft_check(int n_total, double phi);

// ---- helpers ----

// Geometric-mean constant c in ratio_i ~ c.
double fit_constant_overhead(const std::vector<double>& ratios);
double to_db(double variance_ratio);
// Analytic fixed-block RBMSE (8/pi^2) sqrt(ln N) * 1.55 / N^0.83.
double fixed_block_analytic_rbmse(int n_total);

}  // namespace ghzbayes
