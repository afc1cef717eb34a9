#include "ghzbayes/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace ghzbayes {

namespace {

void check_probability(double p, double hi, const char* what) {
  if (!(p >= 0.0 && p <= hi)) throw std::invalid_argument(what);
}

}  // namespace

void NoiseModel::validate() const {
  check_probability(p_a, 1.0, "p_a must lie in [0, 1]");
  check_probability(p_e, 0.5, "p_e must lie in [0, 1/2]");
  if (!(f0 > 0.0 && f0 <= 1.0)) throw std::invalid_argument("f0 must lie in (0, 1]");
}

double NoiseModel::contrast(int qubits) const {
  return damping_contrast(qubits, p_a) * bitflip_contrast(qubits, p_e) *
         preparation_contrast(qubits, f0);
}

double damping_contrast(int k, double p_a) {
  check_probability(p_a, 1.0, "p_a must lie in [0, 1]");
  return std::pow(1.0 - p_a, 0.5 * k);
}

double bitflip_contrast(int k, double p_e) {
  check_probability(p_e, 0.5, "p_e must lie in [0, 1/2]");
  return std::pow(1.0 - 2.0 * p_e, k);
}

double preparation_contrast(int k, double f0) {
  if (!(f0 > 0.0 && f0 <= 1.0)) throw std::invalid_argument("f0 must lie in (0, 1]");
  return std::pow(f0, k);
}

std::array<double, 2> damped_parity_probs(int k, double p_a, double phi, double rotation) {
  if (k < 1) throw std::invalid_argument("block needs at least one qubit");
  const double c = damping_contrast(k, p_a) * std::cos(k * (phi - rotation));
  return {0.5 * (1.0 + c), 0.5 * (1.0 - c)};
}

StepContrast step_contrast(const std::vector<int>& order, const NoiseModel& noise) {
  noise.validate();
  StepContrast out;
  out.reserve(order.size());
  for (int e : order) out.push_back(noise.contrast(e >= 0 ? (1 << e) : 1));
  return out;
}

double noisy_plan_bmse(const MeasurementPlan& plan, const PriorGrid& prior,
                       const NoiseModel& noise) {
  if (noise.is_identity()) return bmse(plan, prior);
  return bmse(plan, prior, step_contrast(plan.order, noise));
}

OptimizeResult optimize_noisy_plan(const MeasurementPlan& plan, const PriorGrid& prior,
                                   const NoiseModel& noise, const OptimizerConfig& config) {
  return optimize_plan(plan, prior, config, step_contrast(plan.order, noise));
}

GainFit fit_gain_decay(std::span<const GainPoint> points) {
  if (points.size() < 3) throw std::invalid_argument("gain fit needs at least 3 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const GainPoint& p : points) {
    if (!(p.gain > 0.0)) throw std::invalid_argument("gains must be positive");
    const double y = std::log(p.gain);
    sx += p.infidelity;
    sy += y;
    sxx += p.infidelity * p.infidelity;
    sxy += p.infidelity * y;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw std::invalid_argument("gain fit needs distinct abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {std::exp(intercept), -slope};
}

DetectedParity error_detected_parity_probs(int k, double p_a, double phi) {
  if (k < 2) throw std::invalid_argument("error detection needs k >= 2");
  const double c = damping_contrast(k, p_a);
  const double cc = c * c;
  const double cross = 2.0 * c * std::cos(k * phi);
  return {0.25 * (1.0 + cc + cross), 0.25 * (1.0 + cc - cross), 0.5 * (1.0 - cc)};
}

double parity_fisher_information(int k, double p_a, double phi) {
  const double c = damping_contrast(k, p_a);
  const double s = std::sin(k * phi);
  const double co = std::cos(k * phi);
  const double denom = 1.0 - c * c * co * co;
  if (denom <= 0.0) return 0.0;
  return k * k * c * c * s * s / denom;
}

double detected_fisher_information(int k, double p_a, double phi) {
  const DetectedParity p = error_detected_parity_probs(k, p_a, phi);
  const double c = damping_contrast(k, p_a);
  // d p_even / d phi = -d p_odd / d phi = -(c k / 2) sin(k phi)
  const double d = 0.5 * c * k * std::sin(k * phi);
  double f = 0.0;
  if (p.even > 0.0) f += d * d / p.even;
  if (p.odd > 0.0) f += d * d / p.odd;
  return f;
}

}  // namespace ghzbayes
