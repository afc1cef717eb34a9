#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"

namespace ghzbayes {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Applies the phase imprint: element (a, b) times exp(-i phi (a - b)).
CMatrix propagate(const CMatrix& rho, double phi);

// Prior averages of the imprint, indexed by d + n for d in [-n, n]:
// c(d) = sum mass exp(-i phi d) and c'(d) = sum mass phi exp(-i phi d).
struct PhaseKernels {
  int n = 0;
  std::vector<cplx> c;
  std::vector<cplx> c_prime;
  cplx at(int d) const { return c[d + n]; }
  cplx prime_at(int d) const { return c_prime[d + n]; }
};

PhaseKernels phase_kernels(int n_total, const PriorGrid& prior);

struct OptimalMeasurement {
  CMatrix L;
  double bmse = 0.0;
  // True when some eigenvalue pairs of the averaged state fell below the
  // pseudo-inverse cutoff and the corresponding entries of L were zeroed.
  bool ill_conditioned = false;
};

// Optimal estimator operator for a fixed state: solves {L, rho_bar} = 2 rho_bar'.
OptimalMeasurement optimal_L(const CMatrix& rho, const PriorGrid& prior);
OptimalMeasurement optimal_L(const CMatrix& rho, const PhaseKernels& kernels,
                             double second_moment);

// Best BMSE achievable with a GHZ-block product state and any measurement.
double optimal_measurement_bmse(const Partition& p, const PriorGrid& prior);
double optimal_measurement_bmse(const FrequencySpectrum& s, const PriorGrid& prior);

struct OqiSolution {
  int dim = 0;
  CMatrix rho;
  CMatrix L;
  double bmse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // BMSE after each iteration
};

struct OqiOptions {
  double tol = 1e-10;
  int max_iter = 2000;
  // Extra random starting states in addition to the sine state.
  int random_starts = 0;
  std::uint64_t seed = 1;
};

OqiSolution solve_oqi(int n_total, const PriorGrid& prior, const OqiOptions& opts = {});

// Runs the alternating iteration from a given pure starting state.
OqiSolution solve_oqi_from(const CVector& psi0, const PriorGrid& prior,
                           const OqiOptions& opts = {});

// Sine-state amplitudes over n = 0..n_total.
CVector sine_state(int n_total);

CMatrix pure_density(const CVector& psi);

}  // namespace ghzbayes
