#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ghzbayes {

enum class PriorKind { kGaussian, kUniform };

std::string to_string(PriorKind kind);

// Quadrature representation of a prior phase density. Every Bayesian
// integral in the library is a weighted sum over these nodes, so the grid
// also fixes the discretisation error of downstream BMSE values.
//
// Nodes come from composite 16-point Gauss-Legendre panels over the support.
// The density is renormalised so that sum(weight * density) == 1 on the grid.
class PriorGrid {
 public:
  static constexpr std::size_t kPanelOrder = 16;

  PriorKind kind() const { return kind_; }
  // Standard deviation of the continuous prior (nominal, not the grid value).
  double width() const { return width_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return nodes_.size(); }

  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> density() const { return density_; }
  // weight * density at each node, the measure used by every integral.
  std::span<const double> mass() const { return mass_; }

  // Raw grid moment sum(mass * phi^order).
  double moment(int order) const;
  double mean() const { return moment(1); }
  double second_moment() const { return second_moment_; }
  // Central second moment on the grid.
  double variance() const;

  // Same prior with the phase axis multiplied by `factor` (> 0).
  PriorGrid scaled(double factor) const;

  // Continuous density evaluated off-grid (normalised like the grid).
  double density_at(double phi) const;

 private:
  friend PriorGrid gaussian_prior(double delta_phi, std::size_t node_count);
  friend PriorGrid uniform_prior(double lo, double hi, std::size_t node_count);

  PriorGrid() = default;
  void finalize();

  PriorKind kind_ = PriorKind::kGaussian;
  double width_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double norm_ = 1.0;
  double second_moment_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> density_;
  std::vector<double> mass_;
};

// Half-width of the Gaussian support in standard deviations. The tails beyond
// carry about 1e-13 of the second moment.
inline constexpr double kGaussianSupportSigmas = 8.0;

// Gaussian prior of standard deviation `delta_phi`, truncated to
// [-8 delta_phi, 8 delta_phi]. node_count >= 64; rounded up to whole panels.
PriorGrid gaussian_prior(double delta_phi, std::size_t node_count);

// Flat prior on [lo, hi].
PriorGrid uniform_prior(double lo, double hi, std::size_t node_count);

// Node count giving at least `nodes_per_period` nodes per period of
// cos(max_frequency * phi) over an interval of length `support_width`,
// never below 512.
std::size_t suggested_node_count(double support_width, double max_frequency,
                                 double nodes_per_period = 16.0);

// Default grid for a Gaussian prior whose integrands oscillate at most at
// `max_frequency` (largest block size for adaptive plans).
PriorGrid default_gaussian_prior(double delta_phi, double max_frequency);

// Composite Gauss-Legendre rule on [lo, hi] with `panels` panels.
void composite_gauss_legendre(double lo, double hi, std::size_t panels,
                              std::vector<double>& nodes,
                              std::vector<double>& weights);

}  // namespace ghzbayes
