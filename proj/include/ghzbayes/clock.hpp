#pragma once

#include <span>
#include <string>
#include <vector>

namespace ghzbayes {

enum class ClockProtocol { kUncorrelated, kGhz, kBestClassical, kOqc };

std::string to_string(ClockProtocol p);
ClockProtocol parse_clock_protocol(const std::string& name);

// Rates are in inverse time units; only ratios and products with tau matter.
struct ClockConfig {
  double gamma_lo = 1.0;    // free-running laser linewidth
  double gamma_ind = 1e-4;  // single-atom decay rate (ignored for kOqc)
  double omega_a = 1.0;     // atomic transition frequency
  int n_atoms = 200;
  ClockProtocol protocol = ClockProtocol::kUncorrelated;
  // Interrogation-time search grid, in units of 1/gamma_lo.
  double t_min = 1e-4;
  double t_max = 1e2;
  int points_per_decade = 200;

  void validate() const;
};

// Extra phase variance from 2 pi k slips of a Gaussian phase of width
// delta_phi.
double slip_variance(double delta_phi);

// [bmse^-1 - delta_phi^-2]^(-1/2); throws if bmse >= delta_phi^2.
double effective_uncertainty(double bmse, double delta_phi);

// Effective uncertainty of one N-qubit GHZ parity readout with fringe
// contrast C: sqrt(e^(N^2 d^2) / C^2 - N^2 d^2) / N. Infinite on overflow.
double ghz_effective_uncertainty(int n, double delta_phi, double contrast = 1.0);

// Squared effective uncertainty of the protocol for one interrogation of
// length T (prior width gamma_lo T, contrast reduced by gamma_ind).
double protocol_uncertainty_sq(const ClockConfig& cfg, double T);

// sigma_y for total time tau at a fixed interrogation time T <= tau.
double allan_at(const ClockConfig& cfg, double tau, double T);

struct AllanPoint {
  double tau = 0.0;
  double t_opt = 0.0;
  double sigma_y = 0.0;
};

// Minimum over T of allan_at: log grid, then golden-section refinement.
AllanPoint allan_deviation(const ClockConfig& cfg, double tau);
std::vector<AllanPoint> allan_curve(const ClockConfig& cfg, std::span<const double> taus);

// (1/omega_a) sqrt(2 gamma_ind / (tau N)).
double fundamental_limit(double tau, int n_atoms, double gamma_ind, double omega_a);

// Least-squares slope of log sigma against log tau.
double log_log_slope(std::span<const AllanPoint> points);

}  // namespace ghzbayes
