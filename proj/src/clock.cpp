#include "ghzbayes/clock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ghzbayes/parallel.hpp"

namespace ghzbayes {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool uses_unwinding(ClockProtocol p) {
  return p == ClockProtocol::kBestClassical || p == ClockProtocol::kOqc;
}

}  // namespace

std::string to_string(ClockProtocol p) {
  switch (p) {
    case ClockProtocol::kUncorrelated: return "uncorrelated";
    case ClockProtocol::kGhz: return "ghz";
    case ClockProtocol::kBestClassical: return "best-classical";
    case ClockProtocol::kOqc: return "oqc";
  }
  return "unknown";
}

ClockProtocol parse_clock_protocol(const std::string& name) {
  if (name == "uncorrelated") return ClockProtocol::kUncorrelated;
  if (name == "ghz") return ClockProtocol::kGhz;
  if (name == "best-classical") return ClockProtocol::kBestClassical;
  if (name == "oqc") return ClockProtocol::kOqc;
  throw std::invalid_argument("unknown clock protocol: " + name);
}

void ClockConfig::validate() const {
  if (!(gamma_lo > 0.0) || !(gamma_ind > 0.0) || !(omega_a > 0.0)) {
    throw std::invalid_argument("clock rates must be positive");
  }
  if (!std::isfinite(gamma_lo / gamma_ind)) throw std::invalid_argument("rate ratio not finite");
  if (n_atoms < 1) throw std::invalid_argument("clock needs at least one atom");
  if (!(t_min > 0.0 && t_max > t_min) || points_per_decade < 2) {
    throw std::invalid_argument("bad interrogation-time grid");
  }
}

double slip_variance(double delta_phi) {
  if (!(delta_phi > 0.0)) throw std::invalid_argument("prior width must be positive");
  const double s = std::sqrt(2.0) * delta_phi;
  double sum = 0.0;
  for (int k = 1; k < 1000000; ++k) {
    const double a = (2.0 * k - 1.0) * kPi / s;
    const double b = (2.0 * k + 1.0) * kPi / s;
    // erf(b) - erf(a) via erfc to keep the tail accurate.
    const double mass = std::erfc(a) - std::erfc(b);
    const double term = 4.0 * kPi * kPi * k * k * mass;
    sum += term;
    if (a > 1.0 && (term == 0.0 || term < 1e-15 * sum)) break;
  }
  return sum;
}

double effective_uncertainty(double bmse, double delta_phi) {
  if (!(bmse > 0.0) || !(delta_phi > 0.0)) {
    throw std::invalid_argument("bmse and prior width must be positive");
  }
  const double gain = 1.0 / bmse - 1.0 / (delta_phi * delta_phi);
  if (!(gain > 0.0)) throw std::invalid_argument("measurement is uninformative (bmse >= prior)");
  return 1.0 / std::sqrt(gain);
}

double ghz_effective_uncertainty(int n, double delta_phi, double contrast) {
  if (n < 1 || !(delta_phi > 0.0) || !(contrast >= 0.0)) {
    throw std::invalid_argument("bad GHZ uncertainty arguments");
  }
  if (contrast == 0.0) return kInf;
  const double x = static_cast<double>(n) * n * delta_phi * delta_phi;
  const double e = std::exp(x) / (contrast * contrast);
  if (!std::isfinite(e)) return kInf;
  return std::sqrt(e - x) / n;
}

double protocol_uncertainty_sq(const ClockConfig& cfg, double T) {
  const double n = cfg.n_atoms;
  const double decay = cfg.gamma_ind * T;
  switch (cfg.protocol) {
    case ClockProtocol::kUncorrelated:
    case ClockProtocol::kBestClassical:
      // Every atom has unit Fisher information at contrast 1; for a Gaussian
      // prior the posterior precision is N C^2 + delta^-2, so the effective
      // uncertainty is 1 / (sqrt(N) C).
      return std::exp(2.0 * decay) / n;
    case ClockProtocol::kGhz: {
      const double u =
          ghz_effective_uncertainty(cfg.n_atoms, cfg.gamma_lo * T, std::exp(-n * decay));
      return u * u;
    }
    case ClockProtocol::kOqc:
      return kPi * kPi / (n * n);
  }
  return kInf;
}

double allan_at(const ClockConfig& cfg, double tau, double T) {
  if (!(tau > 0.0) || !(T > 0.0) || T > tau * (1.0 + 1e-12)) {
    throw std::invalid_argument("need 0 < T <= tau");
  }
  double var = protocol_uncertainty_sq(cfg, T);
  if (!uses_unwinding(cfg.protocol)) var += (tau / T) * slip_variance(cfg.gamma_lo * T);
  if (!std::isfinite(var)) return kInf;
  return std::sqrt(var / (tau * T)) / cfg.omega_a;
}

AllanPoint allan_deviation(const ClockConfig& cfg, double tau) {
  cfg.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  const double lo = cfg.t_min / cfg.gamma_lo;
  const double hi = uses_unwinding(cfg.protocol) ? std::max(cfg.t_max / cfg.gamma_lo, tau)
                                                 : cfg.t_max / cfg.gamma_lo;
  // Candidate times: log grid clipped to T <= tau, plus T = tau itself.
  std::vector<double> grid;
  const double decades = std::log10(hi / lo);
  const int count = static_cast<int>(std::ceil(decades * cfg.points_per_decade)) + 1;
  for (int i = 0; i < count; ++i) {
    const double t = lo * std::pow(10.0, decades * i / (count - 1));
    if (t < tau) grid.push_back(t);
  }
  grid.push_back(tau);
  std::vector<double> val(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) val[i] = allan_at(cfg, tau, grid[i]);
  const std::size_t best = std::min_element(val.begin(), val.end()) - val.begin();
  AllanPoint out{tau, grid[best], val[best]};
  if (grid.size() < 3 || !std::isfinite(val[best])) return out;

  // Golden-section search in log T between the neighbours of the best node.
  double a = std::log(grid[best == 0 ? 0 : best - 1]);
  double b = std::log(grid[std::min(best + 1, grid.size() - 1)]);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double lt) { return allan_at(cfg, tau, std::min(tau, std::exp(lt))); };
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double lt = 0.5 * (a + b);
  const double refined = f(lt);
  if (refined < out.sigma_y) {
    out.sigma_y = refined;
    out.t_opt = std::min(tau, std::exp(lt));
  }
  return out;
}

std::vector<AllanPoint> allan_curve(const ClockConfig& cfg, std::span<const double> taus) {
  std::vector<AllanPoint> out(taus.size());
  parallel_for(taus.size(), [&](std::size_t i) { out[i] = allan_deviation(cfg, taus[i]); });
  return out;
}

double fundamental_limit(double tau, int n_atoms, double gamma_ind, double omega_a) {
  if (!(tau > 0.0) || n_atoms < 1 || !(gamma_ind > 0.0) || !(omega_a > 0.0)) {
    throw std::invalid_argument("fundamental limit needs positive inputs");
  }
  return std::sqrt(2.0 * gamma_ind / (tau * n_atoms)) / omega_a;
}

double log_log_slope(std::span<const AllanPoint> points) {
  if (points.size() < 2) throw std::invalid_argument("slope needs two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const AllanPoint& p : points) {
    const double x = std::log(p.tau), y = std::log(p.sigma_y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(points.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace ghzbayes
