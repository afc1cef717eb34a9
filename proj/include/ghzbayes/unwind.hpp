#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/partitions.hpp"
#include "ghzbayes/schemes.hpp"

namespace ghzbayes {

// `copies` slow atoms, each accumulating phi / 2^level (level >= 1).
struct SlowBlock {
  int level = 1;
  int copies = 1;
  bool operator==(const SlowBlock&) const = default;
};

// GHZ blocks plus slow atoms. With reuse, one physical qubit can stand in for
// 2^l slow atoms of level l (e.g. by splitting its interrogation), so slow
// atoms cost 2^-l qubits each; otherwise every slow atom is a qubit.
class ExtendedPartition {
 public:
  ExtendedPartition() = default;
  // Merges duplicate levels; throws on level < 1 or copies < 1.
  ExtendedPartition(std::vector<SlowBlock> slow, Partition fast, bool reuse = false);

  const std::vector<SlowBlock>& slow() const { return slow_; }  // deepest level first
  const Partition& fast() const { return fast_; }
  bool reuse() const { return reuse_; }
  int l_max() const { return slow_.empty() ? 0 : slow_.front().level; }
  int slow_atoms() const;
  int block_count() const { return slow_atoms() + fast_.block_count(); }
  // Physical qubit count under the reuse rule.
  int n_total() const;

  // "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4", smallest phase scale first.
  std::string to_string() const;
  // Accepts the form above in any term order.
  static ExtendedPartition parse(const std::string& text, bool reuse = false);

  bool operator==(const ExtendedPartition&) const = default;

 private:
  std::vector<SlowBlock> slow_;
  Partition fast_;
  bool reuse_ = false;
};

// Change of variables phi' = phi / 2^l_max that turns slow atoms into
// ordinary blocks: BMSE(original) = scale_factor * BMSE(rescaled) when the
// prior width is multiplied by prior_scale and rotations by prior_scale.
struct RescaledFrame {
  Partition partition;
  int l_max = 0;
  double scale_factor = 1.0;  // 2^(2 l_max)
  double prior_scale = 1.0;   // 2^-l_max
  int n_prime = 0;            // qubit count of the rescaled partition
};

// Throws when a slow level exceeds l_max.
RescaledFrame rescale(const ExtendedPartition& ep, int l_max);
// Inverse map: blocks below 2^l_max become slow atoms.
ExtendedPartition unrescale(const Partition& rescaled, int l_max, bool reuse = false);
// Same plan expressed in the rescaled frame (exponents + l_max, rotations
// divided by 2^l_max), and back.
MeasurementPlan rescale_plan(const MeasurementPlan& plan, int l_max);
MeasurementPlan unrescale_plan(const MeasurementPlan& plan, int l_max);

// Folded phases beta_j = wrap(phi / 2^j), j = 0..l_max.
std::vector<double> fold_phases(double phi, int l_max);

// Integer P with phi = 2 pi P + beta_0, recovered from betas[j] (j = 0..l_max)
// by P_{j-1} = 2 P_j + round((2 beta_j - beta_{j-1}) / 2 pi), P_{l_max} = 0.
long estimate_P(std::span<const double> betas);

// Conditional density of theta = phi - 2 pi P_m given the fold index, for a
// Gaussian prior of width delta_phi. Supported on [-pi, pi).
class FoldPosterior {
 public:
  FoldPosterior(double delta_phi, long p_m);
  double density(double theta) const;
  double normalization() const { return z_; }

 private:
  double delta_ = 0.0;
  long p_ = 0;
  double z_ = 1.0;
};

FoldPosterior posterior_after_P(double delta_phi, long p_m);

// Qubit allocation for the unwinding baselines. Each level j = 0..l_max gets
// `atoms_per_level` uncorrelated atoms read out in two quadratures (half
// each); a varying-block GHZ stage of size k_max follows. The non-adaptive
// variant also spends 2 * narrowing_copies qubits on 2-qubit GHZ states.
struct UnwindAllocation {
  int l_max = 0;
  int atoms_per_level = 0;  // even
  int narrowing_copies = 2;
  int k_max = 0;
  // Adaptive only: width of the Gaussian prior assumed for the residual.
  // 0 picks it from a pilot run.
  double effective_width = 0.0;
  // Non-adaptive only: probability that the narrowing step picks the wrong
  // half-interval.
  double classification_error = 0.0;

  int nonadaptive_cost() const;
  int adaptive_cost() const;
};

struct UnwindResult {
  double bmse = 0.0;
  double std_error = 0.0;
  double effective_width = 0.0;
  int n_used = 0;
  UnwindAllocation allocation;
};

// Slow atoms fix P, ideal 2-qubit stages narrow theta to [-pi/2, pi/2], and a
// varying-block stage estimates theta under a flat prior on that interval.
UnwindResult nonadaptive_unwind_bmse(const UnwindAllocation& alloc, double delta_phi,
                                     const McOptions& mc = {});
// Slow atoms give phi_est; the GHZ stage is shifted by -phi_est and estimates
// the residual under a Gaussian prior of the effective width.
UnwindResult adaptive_unwind_bmse(const UnwindAllocation& alloc, double delta_phi,
                                  const McOptions& mc = {});

struct AllocationSearch {
  int max_l = 4;
  int max_atoms_per_level = 12;
  int max_k = 6;
  McOptions pilot{4000, 7};
  // Pilot leaders re-scored with `refine` before the final run.
  int shortlist = 6;
  McOptions refine{40000, 11};
  McOptions final{100000, 1};
};

// Grid search over (l_max, atoms per level, k_max) with cost <= n_total.
UnwindResult best_unwind_allocation(bool adaptive, int n_total, double delta_phi,
                                    const AllocationSearch& search = {});

struct UnwindSearchOptions {
  int max_l = 3;
  int max_slow_per_level = 4;
  int max_blocks = 17;
  std::size_t budget = 4000;  // candidates ranked per l_max
  bool optimize = true;
  OptimizerConfig optimizer;
};

struct UnwindSelection {
  ExtendedPartition partition;
  MeasurementPlan plan;  // original frame
  int l_max = 0;
  double bound = 0.0;    // optimal-measurement BMSE, original frame
  double bmse = 0.0;     // optimized adaptive plan, original frame
  bool budget_limited = false;
  std::size_t candidates = 0;
};

// Ranks slow-atom partitions with at most n_total qubits in their rescaled
// frames and optimizes the winner's adaptive plan there.
UnwindSelection best_unwind_partition(int n_total, double delta_phi, bool reuse,
                                      const UnwindSearchOptions& options = {});

}  // namespace ghzbayes
