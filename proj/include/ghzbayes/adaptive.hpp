#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"

namespace ghzbayes {

// Adaptive local-measurement plan. Blocks are measured in `order` (block
// exponents, largest first by default). Before step d the block is rotated by
// an angle that depends on all previous parity outcomes; rotations are stored
// as a heap-indexed binary tree where the node at depth d reached by outcome
// prefix p (first outcome in the most significant bit, 0 = even parity) has
// index 2^d - 1 + p.
struct MeasurementPlan {
  std::vector<int> order;
  std::vector<double> rotations;

  int steps() const { return static_cast<int>(order.size()); }
  double frequency(int step) const;
  static std::size_t node_index(int depth, std::uint64_t prefix) {
    return (std::size_t{1} << depth) - 1 + prefix;
  }
  double rotation(int depth, std::uint64_t prefix) const {
    return rotations[node_index(depth, prefix)];
  }

  // All-zero plan over the partition's blocks, largest first.
  static MeasurementPlan for_partition(const Partition& p);
  // All-zero plan over an explicit exponent sequence (negative exponents are
  // allowed for rescaled slow-atom frames).
  static MeasurementPlan for_order(std::vector<int> order);
};

// Largest number of measured blocks for which the full tree is handled.
inline constexpr int kMaxPlanSteps = 20;

// Per-step parity contrast; empty means noiseless. Parity probabilities are
// (1 +- C cos(f (phi - Phi))) / 2 with f the block size.
using StepContrast = std::vector<double>;

// Probability of a complete outcome string (bit for step 0 is the MSB).
double branch_probability(const MeasurementPlan& plan, std::uint64_t branch, double phi,
                          const StepContrast& contrast = {});

struct BranchTable {
  int steps = 0;
  std::vector<double> posterior_mass;  // integral of p * prior per branch
  std::vector<double> first_moment;    // integral of phi * p * prior
  std::vector<double> estimator;       // posterior mean, 0 for zero mass
  // probability[b * grid_size + j] = p(branch b | phi_j); filled on request.
  std::vector<double> probability;
  std::size_t grid_size = 0;
};

BranchTable bayes_estimators(const MeasurementPlan& plan, const PriorGrid& prior,
                             const StepContrast& contrast = {},
                             bool store_probabilities = false);

// Minimal BMSE of the plan under optimal estimators:
// m2 - sum_b B_b^2 / A_b.
double bmse(const MeasurementPlan& plan, const PriorGrid& prior,
            const StepContrast& contrast = {});

// Gradient of bmse with respect to every rotation node.
std::vector<double> bmse_gradient(const MeasurementPlan& plan, const PriorGrid& prior,
                                  const StepContrast& contrast = {});

// Mean squared error at fixed phases, with estimators derived from `prior`.
std::vector<double> mse_curve(const MeasurementPlan& plan, const PriorGrid& prior,
                              std::span<const double> phis,
                              const StepContrast& contrast = {});

// Evaluates BMSE and gradient for many rotation vectors over a fixed
// (order, prior, contrast). Reusable workspace; not thread safe.
class PlanEvaluator {
 public:
  PlanEvaluator(std::vector<int> order, const PriorGrid& prior, StepContrast contrast = {});
  ~PlanEvaluator();
  PlanEvaluator(const PlanEvaluator&) = delete;
  PlanEvaluator& operator=(const PlanEvaluator&) = delete;

  int steps() const;
  std::size_t node_count() const;
  // Returns the BMSE; fills grad (size node_count) when non-null.
  double evaluate(std::span<const double> rotations, double* grad = nullptr);
  // Rotations placing each step at the steepest point of its parity fringe
  // around the current posterior mean.
  std::vector<double> greedy_rotations();

 private:
  struct Impl;
  Impl* impl_;
};

struct OptimizerConfig {
  double step = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-12;
  int max_steps = 2000;
  int restarts = 8;
  std::uint64_t seed = 1;
  double grad_tol = 1e-6;
  double rel_tol = 1e-10;
  int window = 50;
};

struct OptimizeResult {
  MeasurementPlan plan;
  double bmse = 0.0;
  double initial_bmse = 0.0;
  int best_restart = -1;
  std::vector<double> restart_bmse;
  int discarded_restarts = 0;
  bool converged = false;
  long evaluations = 0;
};

// Adam over all rotation nodes. Restart 0 starts from the greedy plan,
// restart 1 from a staggered plan, the rest from seeded random angles. The
// input plan's own rotations are evaluated too and never beaten upward.
OptimizeResult optimize_plan(const MeasurementPlan& plan, const PriorGrid& prior,
                             const OptimizerConfig& config = {},
                             const StepContrast& contrast = {});

enum class SelectionMode { kRank, kOptimizeAll, kOptimizeTopK };

struct SelectionOptions {
  SelectionMode mode = SelectionMode::kRank;
  int top_k = 3;
  EnumerationLimits limits{-1, 17, 0};
  OptimizerConfig optimizer;
  // Skip plan optimization entirely (rank only).
  bool optimize = true;
};

struct RankedPartition {
  Partition partition;
  double bound = 0.0;  // optimal-measurement BMSE of the product state
};

struct Selection {
  Partition partition;
  MeasurementPlan plan;
  double bmse = 0.0;
  double bound = 0.0;
  bool budget_limited = false;
  std::vector<RankedPartition> ranking;  // best first
};

Selection select_best_partition(int n_total, const PriorGrid& prior,
                                const SelectionOptions& options = {});

// Prior grid sized for adaptive plans over `order`.
PriorGrid plan_prior(double delta_phi, const std::vector<int>& order);

}  // namespace ghzbayes
