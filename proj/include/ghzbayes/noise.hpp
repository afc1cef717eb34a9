#pragma once

#include <array>
#include <span>
#include <vector>

#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/prior.hpp"

namespace ghzbayes {

// Independent noise sources acting on a GHZ block of k qubits. Each one
// shrinks the parity fringe by a factor, and the factors multiply:
// C(k) = (1 - p_a)^(k/2) (1 - 2 p_e)^k f0^k.
struct NoiseModel {
  double p_a = 0.0;  // amplitude-damping probability per qubit
  double p_e = 0.0;  // symmetric bit-flip readout error per qubit
  double f0 = 1.0;   // effective preparation fidelity per qubit

  // Throws std::invalid_argument for out-of-range fields.
  void validate() const;
  bool is_identity() const { return p_a == 0.0 && p_e == 0.0 && f0 == 1.0; }
  // Fringe contrast of a block with `qubits` qubits. Slow atoms count as one.
  double contrast(int qubits) const;
};

// Parity probabilities {even, odd} of a k-qubit GHZ block after per-qubit
// amplitude damping, rotated by `rotation` before the X-basis readout.
std::array<double, 2> damped_parity_probs(int k, double p_a, double phi,
                                          double rotation = 0.0);

double damping_contrast(int k, double p_a);
// (1 - 2 p_e)^k: even-minus-odd probability of the number of flipped bits.
double bitflip_contrast(int k, double p_e);
double preparation_contrast(int k, double f0);

// Per-step contrast for a measurement order (block exponents; exponents
// below zero are single slow atoms).
StepContrast step_contrast(const std::vector<int>& order, const NoiseModel& noise);

// BMSE of the plan with contrast-damped branch probabilities and estimators
// re-derived for the noisy likelihood.
double noisy_plan_bmse(const MeasurementPlan& plan, const PriorGrid& prior,
                       const NoiseModel& noise);

// Re-optimizes the plan rotations under the noisy likelihood. The input plan
// is one of the candidates, so the result never does worse than it.
OptimizeResult optimize_noisy_plan(const MeasurementPlan& plan, const PriorGrid& prior,
                                   const NoiseModel& noise,
                                   const OptimizerConfig& config = {});

// One sample of a gain curve. `infidelity` is 1 - f0, or 2 p_e for readout
// errors, so that g = A exp(-B infidelity) in both cases.
struct GainPoint {
  double infidelity = 0.0;
  double gain = 0.0;
};

struct GainFit {
  double A = 0.0;
  double B = 0.0;
};

// Least squares of ln g against the infidelity. Needs >= 3 points and
// positive gains.
GainFit fit_gain_decay(std::span<const GainPoint> points);

// Readout with a code-space check before the parity measurement.
struct DetectedParity {
  double even = 0.0;
  double odd = 0.0;
  double discard = 0.0;
};

DetectedParity error_detected_parity_probs(int k, double p_a, double phi);

// Classical Fisher information of phi for the plain damped parity readout and
// for the error-detected readout (discards carry no information).
double parity_fisher_information(int k, double p_a, double phi);
double detected_fisher_information(int k, double p_a, double phi);

}  // namespace ghzbayes
