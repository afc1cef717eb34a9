#include "ghzbayes/oqi.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ghzbayes {

namespace {

constexpr double kCutoff = 1e-12;

CMatrix averaged(const CMatrix& rho, const std::vector<cplx>& kernel, int n) {
  const Eigen::Index dim = rho.rows();
  CMatrix out(dim, dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    for (Eigen::Index a = 0; a < dim; ++a) {
      out(a, b) = rho(a, b) * kernel[a - b + n];
    }
  }
  return out;
}

// X_ij = (L^2)_ij c(j - i) - 2 L_ij c'(j - i); the BMSE of a pure state psi
// is m2 + <psi|X|psi>.
CMatrix state_functional(const CMatrix& L, const PhaseKernels& k) {
  const CMatrix L2 = L * L;
  const Eigen::Index dim = L.rows();
  CMatrix X(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const int d = static_cast<int>(j - i);
      X(i, j) = L2(i, j) * k.at(d) - 2.0 * L(i, j) * k.prime_at(d);
    }
  }
  return 0.5 * (X + X.adjoint());
}

}  // namespace

CMatrix propagate(const CMatrix& rho, double phi) {
  CMatrix out(rho.rows(), rho.cols());
  for (Eigen::Index b = 0; b < rho.cols(); ++b) {
    for (Eigen::Index a = 0; a < rho.rows(); ++a) {
      out(a, b) = rho(a, b) * std::polar(1.0, -phi * static_cast<double>(a - b));
    }
  }
  return out;
}

PhaseKernels phase_kernels(int n_total, const PriorGrid& prior) {
  PhaseKernels k;
  k.n = n_total;
  k.c.assign(2 * n_total + 1, cplx{});
  k.c_prime.assign(2 * n_total + 1, cplx{});
  const auto nodes = prior.nodes();
  const auto mass = prior.mass();
  for (int d = -n_total; d <= n_total; ++d) {
    double re = 0, im = 0, re_p = 0, im_p = 0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double arg = -nodes[j] * d;
      const double cs = std::cos(arg), sn = std::sin(arg);
      re += mass[j] * cs;
      im += mass[j] * sn;
      re_p += mass[j] * nodes[j] * cs;
      im_p += mass[j] * nodes[j] * sn;
    }
    k.c[d + n_total] = {re, im};
    k.c_prime[d + n_total] = {re_p, im_p};
  }
  return k;
}

OptimalMeasurement optimal_L(const CMatrix& rho, const PhaseKernels& kernels,
                             double second_moment) {
  if (rho.rows() != rho.cols() || rho.rows() != kernels.n + 1) {
    throw std::invalid_argument("state dimension does not match kernels");
  }
  const CMatrix rbar = averaged(rho, kernels.c, kernels.n);
  const CMatrix rbar_p = averaged(rho, kernels.c_prime, kernels.n);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (rbar + rbar.adjoint()));
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const CMatrix& V = eig.eigenvectors();
  const CMatrix Rp = V.adjoint() * rbar_p * V;
  const double lam_max = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::Index dim = rho.rows();
  OptimalMeasurement out;
  CMatrix Lt(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double s = lam(i) + lam(j);
      if (s < kCutoff * lam_max) {
        Lt(i, j) = 0.0;
        if (std::abs(Rp(i, j)) > 0.0) out.ill_conditioned = true;
      } else {
        Lt(i, j) = 2.0 * Rp(i, j) / s;
      }
    }
  }
  Lt = 0.5 * (Lt + Lt.adjoint());
  out.L = V * Lt * V.adjoint();
  // Tr(rho_bar L^2) evaluated in the eigenbasis.
  double gain = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    gain += lam(i) * Lt.row(i).squaredNorm();
  }
  out.bmse = second_moment - gain;
  return out;
}

OptimalMeasurement optimal_L(const CMatrix& rho, const PriorGrid& prior) {
  const int n = static_cast<int>(rho.rows()) - 1;
  return optimal_L(rho, phase_kernels(n, prior), prior.second_moment());
}

double optimal_measurement_bmse(const FrequencySpectrum& s, const PriorGrid& prior) {
  CVector psi(s.amplitude.size());
  for (std::size_t i = 0; i < s.amplitude.size(); ++i) psi(i) = s.amplitude[i];
  return optimal_L(pure_density(psi), prior).bmse;
}

double optimal_measurement_bmse(const Partition& p, const PriorGrid& prior) {
  return optimal_measurement_bmse(frequency_amplitudes(p), prior);
}

CMatrix pure_density(const CVector& psi) { return psi * psi.adjoint(); }

CVector sine_state(int n_total) {
  CVector psi(n_total + 1);
  const double norm = std::sqrt(2.0 / (n_total + 2));
  for (int n = 0; n <= n_total; ++n) {
    psi(n) = norm * std::sin(std::numbers::pi * (n + 1) / (n_total + 2));
  }
  return psi;
}

OqiSolution solve_oqi_from(const CVector& psi0, const PriorGrid& prior,
                           const OqiOptions& opts) {
  const int n = static_cast<int>(psi0.size()) - 1;
  const PhaseKernels k = phase_kernels(n, prior);
  const double m2 = prior.second_moment();

  OqiSolution best;
  best.dim = n + 1;
  CVector psi = psi0.normalized();
  OptimalMeasurement meas = optimal_L(pure_density(psi), k, m2);
  best.rho = pure_density(psi);
  best.L = meas.L;
  best.bmse = meas.bmse;
  best.history.push_back(meas.bmse);

  double prev = meas.bmse;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const CMatrix X = state_functional(meas.L, k);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(X);
    psi = eig.eigenvectors().col(0);
    meas = optimal_L(pure_density(psi), k, m2);
    best.history.push_back(meas.bmse);
    best.iterations = it;
    if (meas.bmse < best.bmse) {
      best.bmse = meas.bmse;
      best.rho = pure_density(psi);
      best.L = meas.L;
    }
    if (std::abs(prev - meas.bmse) <= opts.tol * std::abs(meas.bmse)) {
      best.converged = true;
      break;
    }
    prev = meas.bmse;
  }
  return best;
}

OqiSolution solve_oqi(int n_total, const PriorGrid& prior, const OqiOptions& opts) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  OqiSolution best = solve_oqi_from(sine_state(n_total), prior, opts);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss;
  for (int r = 0; r < opts.random_starts; ++r) {
    CVector psi(n_total + 1);
    for (int i = 0; i <= n_total; ++i) psi(i) = std::abs(gauss(rng));
    OqiSolution s = solve_oqi_from(psi, prior, opts);
    if (s.bmse < best.bmse) best = std::move(s);
  }
  return best;
}

}  // namespace ghzbayes
