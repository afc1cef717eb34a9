#include "ghzbayes/unwind.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ghzbayes/oqi.hpp"
#include "monte_carlo.hpp"

namespace ghzbayes {

namespace {

constexpr double kPi = std::numbers::pi;
using detail::wrap;

int parse_int(const std::string& s, const std::string& whole) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != s.size()) throw std::invalid_argument("bad extended partition: " + whole);
  return v;
}

// Posterior mean of a parity-readout stage on a fixed prior grid. cos_table
// holds cos(f_s (x_j - angle_s)) for every step s and node j.
class ParityStage {
 public:
  ParityStage(const std::vector<int>& order, const std::vector<double>& angles,
              const PriorGrid& grid)
      : steps_(order.size()), nodes_(grid.nodes().begin(), grid.nodes().end()),
        mass_(grid.mass().begin(), grid.mass().end()), freq_(order.size()),
        angles_(angles) {
    const std::size_t g = nodes_.size();
    cos_.resize(steps_ * g);
    for (std::size_t s = 0; s < steps_; ++s) {
      freq_[s] = std::ldexp(1.0, order[s]);
      for (std::size_t j = 0; j < g; ++j) {
        cos_[s * g + j] = std::cos(freq_[s] * (nodes_[j] - angles_[s]));
      }
    }
  }

  // Simulates the readout at true stage phase x and returns the estimate.
  double estimate(double x, std::mt19937_64& rng, std::vector<double>& work) const {
    const std::size_t g = nodes_.size();
    work.assign(mass_.begin(), mass_.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t s = 0; s < steps_; ++s) {
      const double p_even = 0.5 * (1.0 + std::cos(freq_[s] * (x - angles_[s])));
      const double sign = u(rng) < p_even ? 1.0 : -1.0;
      const double* c = &cos_[s * g];
      double total = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        work[j] *= 0.5 * (1.0 + sign * c[j]);
        total += work[j];
      }
      if (!(total > 0.0)) return 0.0;
      // Keep the running product away from underflow.
      const double inv = 1.0 / total;
      for (std::size_t j = 0; j < g; ++j) work[j] *= inv;
    }
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
      m0 += work[j];
      m1 += work[j] * nodes_[j];
    }
    return m0 > 0.0 ? m1 / m0 : 0.0;
  }

 private:
  std::size_t steps_;
  std::vector<double> nodes_;
  std::vector<double> mass_;
  std::vector<double> freq_;
  std::vector<double> angles_;
  std::vector<double> cos_;
};

ParityStage varying_stage(int k_max, const PriorGrid& grid) {
  const VaryingBlockConfig cfg = varying_block_config(k_max);
  std::vector<int> order;
  const std::vector<double> angles = varying_block_angles(cfg, true, order);
  return ParityStage(order, angles, grid);
}

// Slow-atom readout: per level j, atoms_per_level atoms split over two
// quadratures of phi / 2^j. Returns P and the level-0 phase estimate.
struct SlowReadout {
  long p = 0;
  double beta0 = 0.0;
};

SlowReadout read_slow_atoms(double phi, const UnwindAllocation& a, std::mt19937_64& rng,
                            std::vector<double>& betas) {
  if (a.atoms_per_level == 0) return {};
  const int half = a.atoms_per_level / 2;
  betas.resize(a.l_max + 1);
  for (int j = 0; j <= a.l_max; ++j) {
    const double x = std::ldexp(phi, -j);
    std::binomial_distribution<int> bx(half, 0.5 * (1.0 + std::cos(x)));
    std::binomial_distribution<int> by(half, 0.5 * (1.0 + std::sin(x)));
    const int nx = bx(rng);
    const int ny = by(rng);
    betas[j] = dual_quadrature_estimate(nx, ny, a.atoms_per_level);
  }
  return {estimate_P(betas), betas[0]};
}

void check_allocation(const UnwindAllocation& a) {
  if (a.l_max < 0 || a.k_max < 0 || a.atoms_per_level < 0 || a.narrowing_copies < 0) {
    throw std::invalid_argument("allocation fields must be non-negative");
  }
  if (a.atoms_per_level % 2 != 0) {
    throw std::invalid_argument("atoms per level must be even (two quadratures)");
  }
  if (a.atoms_per_level == 0 && a.l_max != 0) {
    throw std::invalid_argument("slow levels need atoms");
  }
  if (!(a.classification_error >= 0.0 && a.classification_error <= 1.0)) {
    throw std::invalid_argument("classification error must lie in [0, 1]");
  }
  if (a.effective_width < 0.0) throw std::invalid_argument("effective width must be >= 0");
}

PriorGrid flat_half_grid(int k_max) {
  return uniform_prior(-0.5 * kPi, 0.5 * kPi,
                       suggested_node_count(kPi, std::ldexp(1.0, k_max)));
}

}  // namespace

// ---- ExtendedPartition ----

ExtendedPartition::ExtendedPartition(std::vector<SlowBlock> slow, Partition fast, bool reuse)
    : fast_(std::move(fast)), reuse_(reuse) {
  std::map<int, int, std::greater<int>> merged;
  for (const SlowBlock& s : slow) {
    if (s.level < 1) throw std::invalid_argument("slow level must be >= 1");
    if (s.level > 30) throw std::invalid_argument("slow level too large");
    if (s.copies < 1) throw std::invalid_argument("slow copies must be >= 1");
    merged[s.level] += s.copies;
  }
  for (const auto& [l, m] : merged) slow_.push_back({l, m});
}

int ExtendedPartition::slow_atoms() const {
  int n = 0;
  for (const SlowBlock& s : slow_) n += s.copies;
  return n;
}

int ExtendedPartition::n_total() const {
  if (!reuse_) return slow_atoms() + fast_.n_total();
  const int L = l_max();
  long long scaled = static_cast<long long>(fast_.n_total()) << L;
  for (const SlowBlock& s : slow_) scaled += static_cast<long long>(s.copies) << (L - s.level);
  const long long unit = 1LL << L;
  return static_cast<int>((scaled + unit - 1) / unit);
}

std::string ExtendedPartition::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const SlowBlock& s : slow_) {
    if (!first) os << '+';
    os << s.copies << "x(1/" << (1LL << s.level) << ')';
    first = false;
  }
  const auto& blocks = fast_.blocks();
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    if (!first) os << '+';
    os << it->copies << 'x' << (1LL << it->exponent);
    first = false;
  }
  return first ? std::string("empty") : os.str();
}

ExtendedPartition ExtendedPartition::parse(const std::string& text, bool reuse) {
  std::vector<SlowBlock> slow;
  std::vector<Block> fast;
  if (text == "empty") return ExtendedPartition({}, Partition{}, reuse);
  std::stringstream ss(text);
  std::string term;
  while (std::getline(ss, term, '+')) {
    const auto x = term.find('x');
    if (x == std::string::npos || x == 0) {
      throw std::invalid_argument("bad extended partition: " + text);
    }
    const int copies = parse_int(term.substr(0, x), text);
    std::string size = term.substr(x + 1);
    const bool is_slow = size.size() > 4 && size.rfind("(1/", 0) == 0 && size.back() == ')';
    const int value = parse_int(is_slow ? size.substr(3, size.size() - 4) : size, text);
    if (value < 1 || (value & (value - 1)) != 0) {
      throw std::invalid_argument("block sizes must be powers of two: " + text);
    }
    const int e = std::countr_zero(static_cast<unsigned>(value));
    if (is_slow) {
      slow.push_back({e, copies});
    } else {
      fast.push_back({e, copies});
    }
  }
  return ExtendedPartition(std::move(slow), Partition(std::move(fast)), reuse);
}

// ---- rescaling ----

RescaledFrame rescale(const ExtendedPartition& ep, int l_max) {
  if (l_max < 0) throw std::invalid_argument("l_max must be >= 0");
  if (ep.l_max() > l_max) throw std::invalid_argument("slow level exceeds l_max");
  std::vector<Block> blocks;
  for (const SlowBlock& s : ep.slow()) blocks.push_back({l_max - s.level, s.copies});
  for (const Block& b : ep.fast().blocks()) blocks.push_back({b.exponent + l_max, b.copies});
  RescaledFrame f;
  f.partition = Partition(std::move(blocks));
  f.l_max = l_max;
  f.scale_factor = std::ldexp(1.0, 2 * l_max);
  f.prior_scale = std::ldexp(1.0, -l_max);
  f.n_prime = f.partition.n_total();
  return f;
}

ExtendedPartition unrescale(const Partition& rescaled, int l_max, bool reuse) {
  std::vector<SlowBlock> slow;
  std::vector<Block> fast;
  for (const Block& b : rescaled.blocks()) {
    if (b.exponent < l_max) {
      slow.push_back({l_max - b.exponent, b.copies});
    } else {
      fast.push_back({b.exponent - l_max, b.copies});
    }
  }
  return ExtendedPartition(std::move(slow), Partition(std::move(fast)), reuse);
}

MeasurementPlan rescale_plan(const MeasurementPlan& plan, int l_max) {
  MeasurementPlan out = plan;
  for (int& e : out.order) e += l_max;
  for (double& r : out.rotations) r = std::ldexp(r, -l_max);
  return out;
}

MeasurementPlan unrescale_plan(const MeasurementPlan& plan, int l_max) {
  MeasurementPlan out = plan;
  for (int& e : out.order) e -= l_max;
  for (double& r : out.rotations) r = std::ldexp(r, l_max);
  return out;
}

// ---- P estimation ----

std::vector<double> fold_phases(double phi, int l_max) {
  std::vector<double> betas(l_max + 1);
  for (int j = 0; j <= l_max; ++j) betas[j] = wrap(std::ldexp(phi, -j));
  return betas;
}

long estimate_P(std::span<const double> betas) {
  if (betas.empty()) throw std::invalid_argument("estimate_P needs at least beta_0");
  for (double b : betas) {
    if (!std::isfinite(b)) throw std::invalid_argument("phase estimates must be finite");
  }
  long p = 0;
  for (std::size_t j = betas.size() - 1; j > 0; --j) {
    p = 2 * p + std::lround((2.0 * betas[j] - betas[j - 1]) / (2.0 * kPi));
  }
  return p;
}

FoldPosterior::FoldPosterior(double delta_phi, long p_m) : delta_(delta_phi), p_(p_m) {
  if (!(delta_phi > 0.0)) throw std::invalid_argument("prior width must be positive");
  // Mass of N(0, delta^2) on [2 pi P - pi, 2 pi P + pi); erfc keeps the far
  // tails accurate.
  const double s = std::sqrt(2.0) * delta_phi;
  const double centre = 2.0 * kPi * static_cast<double>(std::labs(p_m));
  const double a = (centre - kPi) / s;
  const double b = (centre + kPi) / s;
  z_ = a >= 0.0 ? 0.5 * (std::erfc(a) - std::erfc(b)) : 0.5 * (std::erf(b) - std::erf(a));
  if (!(z_ > 0.0)) throw std::invalid_argument("fold index carries no prior mass");
}

double FoldPosterior::density(double theta) const {
  if (theta < -kPi || theta >= kPi) return 0.0;
  const double x = 2.0 * kPi * static_cast<double>(p_) + theta;
  return std::exp(-x * x / (2.0 * delta_ * delta_)) /
         (std::sqrt(2.0 * kPi) * delta_ * z_);
}

FoldPosterior posterior_after_P(double delta_phi, long p_m) {
  return FoldPosterior(delta_phi, p_m);
}

// ---- unwinding baselines ----

int UnwindAllocation::nonadaptive_cost() const {
  return (l_max + 1) * atoms_per_level + 2 * narrowing_copies + varying_block_n(k_max);
}

int UnwindAllocation::adaptive_cost() const {
  return (l_max + 1) * atoms_per_level + varying_block_n(k_max);
}

UnwindResult nonadaptive_unwind_bmse(const UnwindAllocation& alloc, double delta_phi,
                                     const McOptions& mc) {
  check_allocation(alloc);
  if (!(delta_phi > 0.0)) throw std::invalid_argument("prior width must be positive");
  const PriorGrid grid = flat_half_grid(alloc.k_max);
  const ParityStage stage = varying_stage(alloc.k_max, grid);
  const SchemeResult r = detail::monte_carlo(mc, [&](std::mt19937_64& rng) {
    thread_local std::vector<double> work, betas;
    std::normal_distribution<double> prior(0.0, delta_phi);
    const double phi = prior(rng);
    const SlowReadout slow = read_slow_atoms(phi, alloc, rng, betas);
    // The narrowing stage identifies the half-interval centre c of wrap(phi).
    const double folded = wrap(phi);
    double c = kPi * std::round(folded / kPi);
    if (alloc.classification_error > 0.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng) < alloc.classification_error) c += folded >= c ? kPi : -kPi;
    }
    const double theta_hat = c + stage.estimate(folded - c, rng, work);
    // GHZ blocks only see phi mod 2 pi; pick the branch closest to beta_0.
    const double est = 2.0 * kPi * static_cast<double>(slow.p) + slow.beta0 +
                       wrap(theta_hat - slow.beta0);
    const double err = phi - est;
    return err * err;
  });
  return {r.bmse, r.std_error, 0.0, alloc.nonadaptive_cost(), alloc};
}

UnwindResult adaptive_unwind_bmse(const UnwindAllocation& alloc, double delta_phi,
                                  const McOptions& mc) {
  check_allocation(alloc);
  if (!(delta_phi > 0.0)) throw std::invalid_argument("prior width must be positive");
  double width = alloc.effective_width;
  if (width == 0.0) {
    // Pilot run of the slow stage alone: RMS of the folded residual.
    const McOptions pilot{20000, mc.seed ^ 0x9e3779b97f4a7c15ULL};
    const SchemeResult p = detail::monte_carlo(pilot, [&](std::mt19937_64& rng) {
      thread_local std::vector<double> betas;
      std::normal_distribution<double> prior(0.0, delta_phi);
      const double phi = prior(rng);
      const SlowReadout slow = read_slow_atoms(phi, alloc, rng, betas);
      const double r = wrap(phi - 2.0 * kPi * static_cast<double>(slow.p) - slow.beta0);
      return r * r;
    });
    width = std::max(1e-3, std::sqrt(p.bmse));
  }
  const PriorGrid grid = default_gaussian_prior(width, std::ldexp(1.0, alloc.k_max));
  const ParityStage stage = varying_stage(alloc.k_max, grid);
  const SchemeResult r = detail::monte_carlo(mc, [&](std::mt19937_64& rng) {
    thread_local std::vector<double> work, betas;
    std::normal_distribution<double> prior(0.0, delta_phi);
    const double phi = prior(rng);
    const SlowReadout slow = read_slow_atoms(phi, alloc, rng, betas);
    const double phi_est = 2.0 * kPi * static_cast<double>(slow.p) + slow.beta0;
    const double residual = phi - phi_est;
    const double err = residual - stage.estimate(residual, rng, work);
    return err * err;
  });
  return {r.bmse, r.std_error, width, alloc.adaptive_cost(), alloc};
}

UnwindResult best_unwind_allocation(bool adaptive, int n_total, double delta_phi,
                                    const AllocationSearch& search) {
  if (n_total < 2) throw std::invalid_argument("n_total too small for an unwinding scheme");
  auto evaluate = [&](const UnwindAllocation& a, const McOptions& mc) {
    return adaptive ? adaptive_unwind_bmse(a, delta_phi, mc)
                    : nonadaptive_unwind_bmse(a, delta_phi, mc);
  };
  std::vector<UnwindResult> pilots;
  for (int L = 0; L <= search.max_l; ++L) {
    for (int m = L == 0 ? 0 : 2; m <= search.max_atoms_per_level; m += 2) {
      for (int k = 0; k <= search.max_k; ++k) {
        UnwindAllocation a;
        a.l_max = L;
        a.atoms_per_level = m;
        a.k_max = k;
        const int cost = adaptive ? a.adaptive_cost() : a.nonadaptive_cost();
        if (cost > n_total) break;
        pilots.push_back(evaluate(a, search.pilot));
      }
    }
  }
  if (pilots.empty()) throw std::invalid_argument("no allocation fits in n_total qubits");
  // Slips make the pilot estimates heavy tailed, so the pilot only shortlists
  // and a larger run picks the winner.
  std::sort(pilots.begin(), pilots.end(),
            [](const UnwindResult& x, const UnwindResult& y) { return x.bmse < y.bmse; });
  const std::size_t keep = std::min<std::size_t>(pilots.size(), std::max(1, search.shortlist));
  UnwindAllocation best;
  double best_bmse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < keep; ++i) {
    UnwindAllocation a = pilots[i].allocation;
    a.effective_width = pilots[i].effective_width;
    const UnwindResult r = evaluate(a, search.refine);
    if (r.bmse < best_bmse) {
      best_bmse = r.bmse;
      best = a;
    }
  }
  return evaluate(best, search.final);
}

// ---- proposed scheme with slow atoms ----

namespace {

// Slow-atom count vectors (levels 1..L), each entry in [0, cap].
void slow_vectors(int L, int cap, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == L) {
    out.push_back(cur);
    return;
  }
  for (int m = 0; m <= cap; ++m) {
    cur.push_back(m);
    slow_vectors(L, cap, cur, out);
    cur.pop_back();
  }
}

}  // namespace

UnwindSelection best_unwind_partition(int n_total, double delta_phi, bool reuse,
                                      const UnwindSearchOptions& options) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  if (!(delta_phi > 0.0)) throw std::invalid_argument("prior width must be positive");
  UnwindSelection best;
  best.bound = std::numeric_limits<double>::infinity();
  std::size_t total = 0;
  for (int L = 0; L <= options.max_l; ++L) {
    const double width = std::ldexp(delta_phi, -L);
    std::vector<std::vector<int>> vectors;
    std::vector<int> cur;
    slow_vectors(L, options.max_slow_per_level, cur, vectors);
    std::size_t ranked = 0;
    for (const auto& v : vectors) {
      std::vector<SlowBlock> slow;
      int atoms = 0;
      for (int l = 1; l <= L; ++l) {
        if (v[l - 1] > 0) slow.push_back({l, v[l - 1]});
        atoms += v[l - 1];
      }
      // Deepest level must be populated so that the frame is really L.
      if (L > 0 && v[L - 1] == 0) continue;
      const int slow_cost = ExtendedPartition(slow, Partition{}, reuse).n_total();
      const int n_fast = n_total - slow_cost;
      const int blocks_left = options.max_blocks - atoms;
      if (n_fast < 0 || blocks_left < 0) continue;
      std::vector<Partition> fasts;
      if (n_fast == 0) {
        fasts.emplace_back();
      } else {
        fasts = enumerate_partitions(n_fast, EnumerationLimits{-1, blocks_left, 0}).partitions;
      }
      for (const Partition& fast : fasts) {
        if (ranked >= options.budget) {
          best.budget_limited = true;
          break;
        }
        const ExtendedPartition ep(slow, fast, reuse);
        if (ep.block_count() == 0) continue;
        const RescaledFrame frame = rescale(ep, L);
        const PriorGrid prior = default_gaussian_prior(
            width, std::ldexp(1.0, std::max(0, frame.partition.max_exponent())));
        const double bound =
            frame.scale_factor * optimal_measurement_bmse(frame.partition, prior);
        ++ranked;
        const bool better =
            bound < best.bound * (1.0 - 1e-12) ||
            (bound <= best.bound * (1.0 + 1e-12) &&
             ep.block_count() < best.partition.block_count());
        if (better) {
          best.bound = bound;
          best.partition = ep;
          best.l_max = L;
        }
      }
    }
    total += ranked;
  }
  best.candidates = total;
  if (!std::isfinite(best.bound)) throw std::invalid_argument("no candidate partition");

  const RescaledFrame frame = rescale(best.partition, best.l_max);
  const std::vector<int> order = frame.partition.measurement_order();
  const PriorGrid prior = plan_prior(std::ldexp(delta_phi, -best.l_max), order);
  MeasurementPlan plan = MeasurementPlan::for_order(order);
  double value = 0.0;
  if (options.optimize && frame.partition.block_count() <= kMaxPlanSteps) {
    const OptimizeResult opt = optimize_plan(plan, prior, options.optimizer);
    plan = opt.plan;
    value = opt.bmse;
  } else {
    value = bmse(plan, prior);
  }
  best.plan = unrescale_plan(plan, best.l_max);
  best.bmse = frame.scale_factor * value;
  return best;
}

}  // namespace ghzbayes
