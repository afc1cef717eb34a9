#include "ghzbayes/prior.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ghzbayes {

namespace {

std::size_t panel_count(std::size_t node_count) {
  return (node_count + PriorGrid::kPanelOrder - 1) / PriorGrid::kPanelOrder;
}

}  // namespace

std::string to_string(PriorKind kind) {
  return kind == PriorKind::kGaussian ? "gaussian" : "uniform";
}

void composite_gauss_legendre(double lo, double hi, std::size_t panels,
                              std::vector<double>& nodes,
                              std::vector<double>& weights) {
  using Rule = boost::math::quadrature::gauss<double, PriorGrid::kPanelOrder>;
  // Boost stores the non-negative half of the symmetric rule.
  const auto& abscissa = Rule::abscissa();
  const auto& weight = Rule::weights();
  std::vector<double> ref_x;
  std::vector<double> ref_w;
  for (std::size_t i = abscissa.size(); i-- > 0;) {
    if (abscissa[i] == 0.0) continue;
    ref_x.push_back(-abscissa[i]);
    ref_w.push_back(weight[i]);
  }
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    ref_x.push_back(abscissa[i]);
    ref_w.push_back(weight[i]);
  }

  nodes.clear();
  weights.clear();
  nodes.reserve(panels * ref_x.size());
  weights.reserve(panels * ref_x.size());
  const double h = (hi - lo) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = lo + h * static_cast<double>(p);
    const double mid = a + 0.5 * h;
    for (std::size_t i = 0; i < ref_x.size(); ++i) {
      nodes.push_back(mid + 0.5 * h * ref_x[i]);
      weights.push_back(0.5 * h * ref_w[i]);
    }
  }
}

double PriorGrid::moment(int order) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    acc += mass_[j] * std::pow(nodes_[j], order);
  }
  return acc;
}

double PriorGrid::variance() const {
  const double m = mean();
  return second_moment_ - m * m;
}

double PriorGrid::density_at(double phi) const {
  if (phi < lo_ || phi > hi_) return 0.0;
  if (kind_ == PriorKind::kUniform) return 1.0 / (hi_ - lo_);
  const double s = width_;
  return norm_ * std::exp(-phi * phi / (2.0 * s * s)) /
         std::sqrt(2.0 * std::numbers::pi * s * s);
}

void PriorGrid::finalize() {
  double total = 0.0;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    total += weights_[j] * density_[j];
  }
  norm_ = 1.0 / total;
  mass_.resize(nodes_.size());
  second_moment_ = 0.0;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    density_[j] *= norm_;
    mass_[j] = weights_[j] * density_[j];
    second_moment_ += mass_[j] * nodes_[j] * nodes_[j];
  }
}

PriorGrid PriorGrid::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
  PriorGrid out = *this;
  out.width_ *= factor;
  out.lo_ *= factor;
  out.hi_ *= factor;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    out.nodes_[j] *= factor;
    out.weights_[j] *= factor;
    out.density_[j] /= factor;
  }
  // mass is invariant under the change of variables.
  out.second_moment_ *= factor * factor;
  return out;
}

PriorGrid gaussian_prior(double delta_phi, std::size_t node_count) {
  if (!(delta_phi > 0.0) || !std::isfinite(delta_phi)) {
    throw std::invalid_argument("gaussian prior width must be positive");
  }
  if (node_count < 64) {
    throw std::invalid_argument("gaussian prior needs at least 64 nodes");
  }
  PriorGrid g;
  g.kind_ = PriorKind::kGaussian;
  g.width_ = delta_phi;
  g.lo_ = -kGaussianSupportSigmas * delta_phi;
  g.hi_ = kGaussianSupportSigmas * delta_phi;
  composite_gauss_legendre(g.lo_, g.hi_, panel_count(node_count), g.nodes_,
                           g.weights_);
  g.density_.resize(g.nodes_.size());
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * delta_phi * delta_phi);
  for (std::size_t j = 0; j < g.nodes_.size(); ++j) {
    const double x = g.nodes_[j];
    g.density_[j] = c * std::exp(-x * x / (2.0 * delta_phi * delta_phi));
  }
  g.finalize();
  return g;
}

PriorGrid uniform_prior(double lo, double hi, std::size_t node_count) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("uniform prior needs lo < hi");
  }
  if (node_count < PriorGrid::kPanelOrder) {
    throw std::invalid_argument("uniform prior needs at least one panel of nodes");
  }
  PriorGrid g;
  g.kind_ = PriorKind::kUniform;
  g.width_ = (hi - lo) / std::sqrt(12.0);
  g.lo_ = lo;
  g.hi_ = hi;
  composite_gauss_legendre(lo, hi, panel_count(node_count), g.nodes_, g.weights_);
  g.density_.assign(g.nodes_.size(), 1.0 / (hi - lo));
  g.finalize();
  return g;
}

std::size_t suggested_node_count(double support_width, double max_frequency,
                                 double nodes_per_period) {
  const double periods = support_width * max_frequency / (2.0 * std::numbers::pi);
  const double wanted = std::ceil(periods * nodes_per_period);
  return std::max<std::size_t>(512, static_cast<std::size_t>(wanted));
}

PriorGrid default_gaussian_prior(double delta_phi, double max_frequency) {
  const double support = 2.0 * kGaussianSupportSigmas * delta_phi;
  return gaussian_prior(delta_phi, suggested_node_count(support, max_frequency));
}

}  // namespace ghzbayes
