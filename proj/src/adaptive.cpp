#include "ghzbayes/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ghzbayes/oqi.hpp"
#include "ghzbayes/parallel.hpp"

namespace ghzbayes {

namespace {

constexpr double kPi = std::numbers::pi;

// Subtrees below this depth are walked as independent tasks. Fixed (not
// tied to the worker count) so results are identical for any thread count.
int split_depth(int steps) { return steps >= 10 ? 3 : 0; }

void check_order(const std::vector<int>& order) {
  if (order.empty()) throw std::invalid_argument("plan needs at least one block");
  if (static_cast<int>(order.size()) > kMaxPlanSteps) {
    throw std::invalid_argument("plan has more blocks than the branch tree supports");
  }
}

// Walks the full outcome tree of a plan over an arbitrary set of phase nodes
// carrying arbitrary masses.
class TreeWalker {
 public:
  TreeWalker(std::vector<int> order, std::vector<double> phi, std::vector<double> mass,
             StepContrast contrast)
      : order_(std::move(order)),
        phi_(std::move(phi)),
        mass_(std::move(mass)),
        contrast_(std::move(contrast)) {
    check_order(order_);
    steps_ = static_cast<int>(order_.size());
    if (contrast_.empty()) contrast_.assign(steps_, 1.0);
    if (static_cast<int>(contrast_.size()) != steps_) {
      throw std::invalid_argument("contrast vector length must match the plan");
    }
    g_ = phi_.size();
    freq_.resize(steps_);
    cos_.resize(steps_ * g_);
    sin_.resize(steps_ * g_);
    for (int d = 0; d < steps_; ++d) {
      freq_[d] = std::ldexp(1.0, order_[d]);
      for (std::size_t j = 0; j < g_; ++j) {
        cos_[d * g_ + j] = std::cos(freq_[d] * phi_[j]);
        sin_[d * g_ + j] = std::sin(freq_[d] * phi_[j]);
      }
    }
    m2_ = 0.0;
    for (std::size_t j = 0; j < g_; ++j) m2_ += mass_[j] * phi_[j] * phi_[j];
    split_ = split_depth(steps_);
  }

  int steps() const { return steps_; }
  std::size_t nodes() const { return (std::size_t{1} << steps_) - 1; }
  std::size_t grid() const { return g_; }
  double second_moment() const { return m2_; }
  double frequency(int d) const { return freq_[d]; }

  // Returns sum over leaves of B^2 / A; fills grad if non-null.
  double information(const double* rot, double* grad) {
    const int s = split_;
    const std::size_t tasks = std::size_t{1} << s;
    ensure_workspaces(tasks);
    if (s == 0) {
      return dfs(spaces_[0], 0, 0, mass_.data(), nullptr, rot, grad);
    }
    const std::size_t top_nodes = (std::size_t{2} << s) - 1;
    top_p_.resize(top_nodes * g_);
    top_t_.resize(((std::size_t{1} << s) - 1) * g_);
    top_w_.resize(top_nodes * g_);
    std::copy(mass_.begin(), mass_.end(), top_p_.begin());
    for (int d = 0; d < s; ++d) {
      for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
        const std::size_t idx = (std::size_t{1} << d) - 1 + p;
        const double* P = &top_p_[idx * g_];
        double* t = &top_t_[idx * g_];
        double* c0 = &top_p_[(2 * idx + 1) * g_];
        double* c1 = &top_p_[(2 * idx + 2) * g_];
        fringe(d, rot[idx], t);
        for (std::size_t j = 0; j < g_; ++j) {
          c0[j] = P[j] * t[j];
          c1[j] = P[j] - c0[j];
        }
      }
    }
    std::vector<double> part(tasks, 0.0);
    parallel_for(tasks, [&](std::size_t q) {
      const std::size_t idx = tasks - 1 + q;
      part[q] = dfs(spaces_[q], s, idx, &top_p_[idx * g_],
                    grad ? &top_w_[idx * g_] : nullptr, rot, grad);
    });
    double total = 0.0;
    for (double v : part) total += v;
    if (grad) {
      for (int d = s - 1; d >= 0; --d) {
        for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
          const std::size_t idx = (std::size_t{1} << d) - 1 + p;
          combine(d, idx, &top_p_[idx * g_], &top_t_[idx * g_],
                  &top_w_[(2 * idx + 1) * g_], &top_w_[(2 * idx + 2) * g_],
                  d > 0 ? &top_w_[idx * g_] : nullptr, rot, grad);
        }
      }
    }
    return total;
  }

  // Visits every leaf with its unnormalised weight vector P (mass * p).
  void for_each_leaf(const double* rot,
                     const std::function<void(std::uint64_t, const double*)>& leaf) {
    ensure_workspaces(1);
    walk(spaces_[0], 0, 0, mass_.data(), rot, leaf);
  }

  std::vector<double> greedy() {
    std::vector<double> rot(nodes(), 0.0);
    ensure_workspaces(1);
    greedy_walk(spaces_[0], 0, 0, mass_.data(), rot);
    return rot;
  }

 private:
  struct Workspace {
    std::vector<double> p, t, wa, wb;
  };

  void ensure_workspaces(std::size_t count) {
    if (spaces_.size() >= count) return;
    spaces_.resize(count);
    for (auto& w : spaces_) {
      const std::size_t n = static_cast<std::size_t>(steps_ + 1) * g_;
      w.p.resize(n);
      w.t.resize(n);
      w.wa.resize(n);
      w.wb.resize(n);
    }
  }

  void fringe(int d, double rotation, double* t) const {
    const double f = freq_[d];
    const double half_c = 0.5 * contrast_[d];
    const double cp = half_c * std::cos(f * rotation);
    const double sp = half_c * std::sin(f * rotation);
    const double* cs = &cos_[d * g_];
    const double* sn = &sin_[d * g_];
    for (std::size_t j = 0; j < g_; ++j) t[j] = 0.5 + cs[j] * cp + sn[j] * sp;
  }

  // Gradient at node idx and the node's W vector from its children.
  void combine(int d, std::size_t idx, const double* P, const double* t, const double* wa,
               const double* wb, double* wout, const double* rot, double* grad) const {
    const double f = freq_[d];
    const double cp = std::cos(f * rot[idx]);
    const double sp = std::sin(f * rot[idx]);
    const double* cs = &cos_[d * g_];
    const double* sn = &sin_[d * g_];
    double acc = 0.0;
    for (std::size_t j = 0; j < g_; ++j) {
      acc += P[j] * (sn[j] * cp - cs[j] * sp) * (wa[j] - wb[j]);
    }
    grad[idx] = 0.5 * f * contrast_[d] * acc;
    if (wout) {
      for (std::size_t j = 0; j < g_; ++j) wout[j] = wb[j] + t[j] * (wa[j] - wb[j]);
    }
  }

  double leaf_info(const double* P, double* wout) const {
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < g_; ++j) {
      a += P[j];
      b += P[j] * phi_[j];
    }
    const double est = a > 0.0 ? b / a : 0.0;
    if (wout) {
      for (std::size_t j = 0; j < g_; ++j) wout[j] = est * (est - 2.0 * phi_[j]);
    }
    return a > 0.0 ? b * b / a : 0.0;
  }

  double dfs(Workspace& w, int d, std::size_t idx, const double* P, double* wout,
             const double* rot, double* grad) const {
    if (d == steps_) return leaf_info(P, wout);
    double* t = &w.t[d * g_];
    double* child = &w.p[(d + 1) * g_];
    double* wa = grad ? &w.wa[(d + 1) * g_] : nullptr;
    double* wb = grad ? &w.wb[(d + 1) * g_] : nullptr;
    fringe(d, rot[idx], t);
    double total = 0.0;
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] * t[j];
    total += dfs(w, d + 1, 2 * idx + 1, child, wa, rot, grad);
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] - P[j] * t[j];
    total += dfs(w, d + 1, 2 * idx + 2, child, wb, rot, grad);
    if (grad) combine(d, idx, P, t, wa, wb, wout, rot, grad);
    return total;
  }

  void walk(Workspace& w, int d, std::size_t idx, const double* P, const double* rot,
            const std::function<void(std::uint64_t, const double*)>& leaf) const {
    if (d == steps_) {
      leaf(idx - nodes(), P);
      return;
    }
    double* t = &w.t[d * g_];
    double* child = &w.p[(d + 1) * g_];
    fringe(d, rot[idx], t);
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] * t[j];
    walk(w, d + 1, 2 * idx + 1, child, rot, leaf);
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] - P[j] * t[j];
    walk(w, d + 1, 2 * idx + 2, child, rot, leaf);
  }

  void greedy_walk(Workspace& w, int d, std::size_t idx, const double* P,
                   std::vector<double>& rot) const {
    if (d == steps_) return;
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < g_; ++j) {
      a += P[j];
      b += P[j] * phi_[j];
    }
    double* t = &w.t[d * g_];
    if (a > 0.0) {
      // Scan one fringe period for the angle whose single measurement leaves
      // the smallest posterior variance.
      constexpr int kScan = 48;
      const double period = 2.0 * kPi / freq_[d];
      double best_info = -1.0;
      for (int s = 0; s < kScan; ++s) {
        const double angle = period * s / kScan;
        fringe(d, angle, t);
        double a0 = 0.0, b0 = 0.0;
        for (std::size_t j = 0; j < g_; ++j) {
          a0 += P[j] * t[j];
          b0 += P[j] * t[j] * phi_[j];
        }
        const double a1 = a - a0, b1 = b - b0;
        double info = 0.0;
        if (a0 > 0.0) info += b0 * b0 / a0;
        if (a1 > 0.0) info += b1 * b1 / a1;
        if (info > best_info) {
          best_info = info;
          rot[idx] = angle;
        }
      }
    }
    double* child = &w.p[(d + 1) * g_];
    fringe(d, rot[idx], t);
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] * t[j];
    greedy_walk(w, d + 1, 2 * idx + 1, child, rot);
    for (std::size_t j = 0; j < g_; ++j) child[j] = P[j] - P[j] * t[j];
    greedy_walk(w, d + 1, 2 * idx + 2, child, rot);
  }

  std::vector<int> order_;
  std::vector<double> phi_, mass_;
  StepContrast contrast_;
  int steps_ = 0;
  int split_ = 0;
  std::size_t g_ = 0;
  double m2_ = 0.0;
  std::vector<double> freq_, cos_, sin_;
  std::vector<Workspace> spaces_;
  std::vector<double> top_p_, top_t_, top_w_;
};

TreeWalker walker_for(const MeasurementPlan& plan, const PriorGrid& prior,
                      const StepContrast& contrast) {
  if (plan.rotations.size() != (std::size_t{1} << plan.steps()) - 1) {
    throw std::invalid_argument("rotation tree size must be 2^M - 1");
  }
  return TreeWalker(plan.order, {prior.nodes().begin(), prior.nodes().end()},
                    {prior.mass().begin(), prior.mass().end()}, contrast);
}

}  // namespace

double MeasurementPlan::frequency(int step) const { return std::ldexp(1.0, order.at(step)); }

MeasurementPlan MeasurementPlan::for_partition(const Partition& p) {
  return for_order(p.measurement_order());
}

MeasurementPlan MeasurementPlan::for_order(std::vector<int> order) {
  check_order(order);
  MeasurementPlan plan;
  plan.order = std::move(order);
  plan.rotations.assign((std::size_t{1} << plan.order.size()) - 1, 0.0);
  return plan;
}

double branch_probability(const MeasurementPlan& plan, std::uint64_t branch, double phi,
                          const StepContrast& contrast) {
  const int m = plan.steps();
  double p = 1.0;
  std::uint64_t prefix = 0;
  for (int d = 0; d < m; ++d) {
    const int bit = static_cast<int>((branch >> (m - 1 - d)) & 1u);
    const double c = contrast.empty() ? 1.0 : contrast.at(d);
    const double f = plan.frequency(d);
    const double fringe = c * std::cos(f * (phi - plan.rotation(d, prefix)));
    p *= 0.5 * (1.0 + (bit ? -fringe : fringe));
    prefix = (prefix << 1) | static_cast<std::uint64_t>(bit);
  }
  return p;
}

BranchTable bayes_estimators(const MeasurementPlan& plan, const PriorGrid& prior,
                             const StepContrast& contrast, bool store_probabilities) {
  TreeWalker walker = walker_for(plan, prior, contrast);
  const std::size_t leaves = std::size_t{1} << plan.steps();
  const std::size_t g = prior.size();
  const auto phi = prior.nodes();
  const auto mass = prior.mass();
  BranchTable table;
  table.steps = plan.steps();
  table.grid_size = g;
  table.posterior_mass.assign(leaves, 0.0);
  table.first_moment.assign(leaves, 0.0);
  table.estimator.assign(leaves, 0.0);
  if (store_probabilities) table.probability.assign(leaves * g, 0.0);
  walker.for_each_leaf(plan.rotations.data(), [&](std::uint64_t b, const double* P) {
    double a = 0.0, m1 = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
      a += P[j];
      m1 += P[j] * phi[j];
      if (store_probabilities && mass[j] > 0.0) table.probability[b * g + j] = P[j] / mass[j];
    }
    table.posterior_mass[b] = a;
    table.first_moment[b] = m1;
    table.estimator[b] = a > 0.0 ? m1 / a : 0.0;
  });
  return table;
}

double bmse(const MeasurementPlan& plan, const PriorGrid& prior, const StepContrast& contrast) {
  TreeWalker walker = walker_for(plan, prior, contrast);
  return walker.second_moment() - walker.information(plan.rotations.data(), nullptr);
}

std::vector<double> bmse_gradient(const MeasurementPlan& plan, const PriorGrid& prior,
                                  const StepContrast& contrast) {
  TreeWalker walker = walker_for(plan, prior, contrast);
  std::vector<double> grad(walker.nodes(), 0.0);
  walker.information(plan.rotations.data(), grad.data());
  return grad;
}

std::vector<double> mse_curve(const MeasurementPlan& plan, const PriorGrid& prior,
                              std::span<const double> phis, const StepContrast& contrast) {
  const BranchTable table = bayes_estimators(plan, prior, contrast);
  std::vector<double> at(phis.begin(), phis.end());
  TreeWalker walker(plan.order, at, std::vector<double>(at.size(), 1.0), contrast);
  std::vector<double> mse(at.size(), 0.0);
  walker.for_each_leaf(plan.rotations.data(), [&](std::uint64_t b, const double* P) {
    const double est = table.estimator[b];
    for (std::size_t j = 0; j < at.size(); ++j) {
      mse[j] += P[j] * (at[j] - est) * (at[j] - est);
    }
  });
  return mse;
}

struct PlanEvaluator::Impl {
  TreeWalker walker;
};

PlanEvaluator::PlanEvaluator(std::vector<int> order, const PriorGrid& prior,
                             StepContrast contrast)
    : impl_(new Impl{TreeWalker(std::move(order),
                                {prior.nodes().begin(), prior.nodes().end()},
                                {prior.mass().begin(), prior.mass().end()},
                                std::move(contrast))}) {}

PlanEvaluator::~PlanEvaluator() { delete impl_; }

int PlanEvaluator::steps() const { return impl_->walker.steps(); }

std::size_t PlanEvaluator::node_count() const { return impl_->walker.nodes(); }

double PlanEvaluator::evaluate(std::span<const double> rotations, double* grad) {
  if (rotations.size() != node_count()) {
    throw std::invalid_argument("rotation tree size must be 2^M - 1");
  }
  return impl_->walker.second_moment() - impl_->walker.information(rotations.data(), grad);
}

std::vector<double> PlanEvaluator::greedy_rotations() { return impl_->walker.greedy(); }

namespace {

std::vector<double> staggered_rotations(const std::vector<int>& order) {
  std::vector<double> rot((std::size_t{1} << order.size()) - 1, 0.0);
  for (std::size_t d = 0; d < order.size(); ++d) {
    const double f = std::ldexp(1.0, order[d]);
    for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
      rot[MeasurementPlan::node_index(static_cast<int>(d), p)] = (p & 1u) ? kPi / (2.0 * f) : 0.0;
    }
  }
  return rot;
}

std::vector<double> random_rotations(const std::vector<int>& order, std::mt19937_64& rng) {
  std::vector<double> rot((std::size_t{1} << order.size()) - 1, 0.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t d = 0; d < order.size(); ++d) {
    const double f = std::ldexp(1.0, order[d]);
    for (std::size_t p = 0; p < (std::size_t{1} << d); ++p) {
      rot[MeasurementPlan::node_index(static_cast<int>(d), p)] = u(rng) * kPi / f;
    }
  }
  return rot;
}

}  // namespace

OptimizeResult optimize_plan(const MeasurementPlan& plan, const PriorGrid& prior,
                             const OptimizerConfig& config, const StepContrast& contrast) {
  PlanEvaluator ev(plan.order, prior, contrast);
  const std::size_t n = ev.node_count();
  if (plan.rotations.size() != n) throw std::invalid_argument("rotation tree size must be 2^M - 1");

  OptimizeResult out;
  out.plan = plan;
  out.initial_bmse = ev.evaluate(plan.rotations);
  out.bmse = out.initial_bmse;
  out.evaluations = 1;

  std::mt19937_64 rng(config.seed);
  std::vector<double> x(n), grad(n), m(n), v(n), best_x(n);
  std::vector<double> history;
  for (int r = 0; r < config.restarts; ++r) {
    if (r == 0) {
      x = ev.greedy_rotations();
    } else if (r == 1) {
      x = staggered_rotations(plan.order);
    } else {
      x = random_rotations(plan.order, rng);
    }
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    history.clear();
    double start = 0.0, last = 0.0, best = 0.0;
    bool converged = false;
    double b1t = 1.0, b2t = 1.0;
    for (int step = 0; step <= config.max_steps; ++step) {
      const double val = ev.evaluate(x, grad.data());
      ++out.evaluations;
      if (step == 0) {
        start = val;
        best = val;
        best_x = x;
      } else if (val < best) {
        best = val;
        best_x = x;
      }
      last = val;
      history.push_back(val);
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::abs(g));
      if (gmax < config.grad_tol) {
        converged = true;
        break;
      }
      if (step >= config.window) {
        const double old = history[step - config.window];
        if (std::abs(old - val) <= config.rel_tol * std::abs(val)) {
          converged = true;
          break;
        }
      }
      if (step == config.max_steps) break;
      b1t *= config.beta1;
      b2t *= config.beta2;
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double mh = m[i] / (1.0 - b1t);
        const double vh = v[i] / (1.0 - b2t);
        x[i] -= config.step * mh / (std::sqrt(vh) + config.epsilon);
      }
    }
    if (last > start) {
      ++out.discarded_restarts;
      out.restart_bmse.push_back(best);
      continue;
    }
    out.restart_bmse.push_back(best);
    if (best < out.bmse) {
      out.bmse = best;
      out.plan.rotations = best_x;
      out.best_restart = r;
      out.converged = converged;
    }
  }
  return out;
}

PriorGrid plan_prior(double delta_phi, const std::vector<int>& order) {
  double fmax = 0.0;
  for (int e : order) fmax = std::max(fmax, std::ldexp(1.0, e));
  return default_gaussian_prior(delta_phi, fmax);
}

Selection select_best_partition(int n_total, const PriorGrid& prior,
                                const SelectionOptions& options) {
  const PartitionList list = enumerate_partitions(n_total, options.limits);
  if (list.partitions.empty()) {
    throw std::invalid_argument("no partition satisfies the enumeration limits");
  }
  const PhaseKernels kernels = phase_kernels(n_total, prior);
  const double m2 = prior.second_moment();
  std::vector<RankedPartition> ranked;
  ranked.reserve(list.partitions.size());
  for (const Partition& p : list.partitions) {
    const FrequencySpectrum s = frequency_amplitudes(p);
    CVector psi(s.amplitude.size());
    for (std::size_t i = 0; i < s.amplitude.size(); ++i) psi(i) = s.amplitude[i];
    ranked.push_back({p, optimal_L(pure_density(psi), kernels, m2).bmse});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedPartition& a, const RankedPartition& b) {
                     const double tol = 1e-12 * std::max(std::abs(a.bound), std::abs(b.bound));
                     if (std::abs(a.bound - b.bound) > tol) return a.bound < b.bound;
                     return a.partition.block_count() < b.partition.block_count();
                   });

  Selection out;
  out.budget_limited = list.truncated;
  out.ranking = ranked;
  out.partition = ranked.front().partition;
  out.bound = ranked.front().bound;
  out.plan = MeasurementPlan::for_partition(out.partition);
  if (!options.optimize) {
    out.bmse = bmse(out.plan, prior);
    return out;
  }
  std::size_t candidates = 1;
  if (options.mode == SelectionMode::kOptimizeAll) candidates = ranked.size();
  if (options.mode == SelectionMode::kOptimizeTopK) {
    candidates = std::min<std::size_t>(ranked.size(), std::max(1, options.top_k));
  }
  out.bmse = INFINITY;
  for (std::size_t i = 0; i < candidates; ++i) {
    const OptimizeResult r = optimize_plan(MeasurementPlan::for_partition(ranked[i].partition),
                                           prior, options.optimizer);
    if (r.bmse < out.bmse) {
      out.bmse = r.bmse;
      out.plan = r.plan;
      out.partition = ranked[i].partition;
      out.bound = ranked[i].bound;
    }
  }
  return out;
}

}  // namespace ghzbayes
