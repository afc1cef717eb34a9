#include "ghzbayes/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/clock.hpp"
#include "ghzbayes/noise.hpp"
#include "ghzbayes/oqi.hpp"
#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"
#include "ghzbayes/schemes.hpp"
#include "ghzbayes/unwind.hpp"

namespace ghzbayes::cli {

namespace {

constexpr double kPi = std::numbers::pi;

using Header = std::map<std::string, std::string>;

struct Context {
  const ExperimentSpec& spec;
  const RunOptions& options;
  RunOutcome outcome;
  std::ostringstream summary;

  Header header() const {
    Header h = spec.params();
    h["command"] = spec.command();
    if (!h.count("seed")) h["seed"] = "1";
    return h;
  }
  void write_csv(const std::string& name, const CsvTable& table) const {
    if (options.write_files) table.write(options.out_dir / name, header());
  }
};

bool is_flat(const ExperimentSpec& spec) {
  const std::string kind = spec.get_string("prior", "gaussian");
  if (kind != "gaussian" && kind != "flat") {
    throw ValidationError(spec.command() + ".prior", "expected gaussian or flat");
  }
  return kind == "flat";
}

double positive(const ExperimentSpec& spec, const std::string& key, double fallback) {
  const double v = spec.get_double(key, fallback);
  if (!(v > 0.0)) throw ValidationError(spec.command() + "." + key, "must be positive");
  return v;
}

int at_least(const ExperimentSpec& spec, const std::string& key, int fallback, int lo) {
  const int v = spec.get_int(key, fallback);
  if (v < lo) {
    throw ValidationError(spec.command() + "." + key, "must be >= " + std::to_string(lo));
  }
  return v;
}

int required_n(const ExperimentSpec& spec) {
  const int n = spec.require_int("n");
  if (n < 1 || n > 4096) throw ValidationError(spec.command() + ".n", "must lie in [1, 4096]");
  return n;
}

// Flat prior on [-pi/2, pi/2] or Gaussian, sized for frequencies up to fmax.
PriorGrid make_prior(bool flat, double delta_phi, double fmax) {
  if (flat) {
    return uniform_prior(-0.5 * kPi, 0.5 * kPi, suggested_node_count(kPi, fmax));
  }
  return default_gaussian_prior(delta_phi, fmax);
}

Json blocks_json(const Partition& p) {
  Json a = Json::array();
  for (const Block& b : p.blocks()) a.push_back({b.exponent, b.copies});
  return a;
}

// Minimal gnuplot script plotting columns of a CSV written next to it.
void write_plot(const Context& c, const std::string& csv, const std::string& x,
                const std::vector<std::pair<int, std::string>>& series, bool logscale) {
  if (!c.options.write_files) return;
  std::ofstream out(c.options.out_dir / (csv.substr(0, csv.size() - 4) + ".gp"), std::ios::binary);
  out << "set datafile separator ','\n";
  if (logscale) out << "set logscale xy\n";
  out << "set xlabel '" << x << "'\n";
  out << "plot ";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << (i ? ", " : "") << "'" << csv << "' every ::1 using 1:" << series[i].first
        << " with lines title '" << series[i].second << "'";
  }
  out << '\n';
}

Json plan_json(const MeasurementPlan& plan) {
  Json j;
  j["order"] = plan.order;
  j["rotations"] = plan.rotations;
  return j;
}

OptimizerConfig optimizer_from(const ExperimentSpec& spec, int default_restarts) {
  OptimizerConfig oc;
  oc.restarts = at_least(spec, "restarts", default_restarts, 0);
  oc.seed = spec.get_seed("seed", 1);
  oc.step = positive(spec, "step", oc.step);
  oc.max_steps = at_least(spec, "max_steps", oc.max_steps, 1);
  return oc;
}

// Posterior-mean estimators of the single-quadrature CSS readout.
std::vector<double> css_mse_curve(int n, const PriorGrid& prior, const std::vector<double>& phis) {
  const auto nodes = prior.nodes();
  const auto mass = prior.mass();
  std::vector<double> a(n + 1, 0.0), b(n + 1, 0.0);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const std::vector<double> p = css_probabilities(n, nodes[j]);
    for (int x = 0; x <= n; ++x) {
      a[x] += mass[j] * p[x];
      b[x] += mass[j] * p[x] * nodes[j];
    }
  }
  std::vector<double> out;
  for (double phi : phis) {
    const std::vector<double> p = css_probabilities(n, phi);
    double m = 0.0;
    for (int x = 0; x <= n; ++x) {
      const double est = a[x] > 0.0 ? b[x] / a[x] : 0.0;
      m += p[x] * (phi - est) * (phi - est);
    }
    out.push_back(m);
  }
  return out;
}

// MSE of the OQI measurement (eigenbasis of L, eigenvalue as estimate).
std::vector<double> oqi_mse_curve(const OqiSolution& sol, const std::vector<double>& phis) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sol.L);
  std::vector<double> out;
  for (double phi : phis) {
    const CMatrix rho = propagate(sol.rho, phi);
    double m = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const auto v = es.eigenvectors().col(i);
      const double p = std::real(v.dot(rho * v));
      const double d = phi - es.eigenvalues()(i);
      m += p * d * d;
    }
    out.push_back(m);
  }
  return out;
}

double reference_bmse(bool flat, int n, double delta_phi) {
  if (flat) return (kPi / n) * (kPi / n);
  return solve_oqi(n, css_prior(delta_phi, n)).bmse;
}

// ---- commands ----

void cmd_partitions(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "k_cap", "max_blocks", "budget", "delta_phi", "seed"});
  const int n = required_n(s);
  EnumerationLimits lim{s.get_int("k_cap", -1), s.get_int("max_blocks", -1),
                        static_cast<std::size_t>(at_least(s, "budget", 0, 0))};
  const PartitionList list = enumerate_partitions(n, lim);
  const bool ranked = s.has("delta_phi");
  PriorGrid prior = default_gaussian_prior(ranked ? positive(s, "delta_phi", 0.7) : 0.7, n);
  CsvTable table({"index", "partition", "blocks", "n_total", "bound"});
  Json rows = Json::array();
  for (std::size_t i = 0; i < list.partitions.size(); ++i) {
    const Partition& p = list.partitions[i];
    const double bound = ranked ? optimal_measurement_bmse(p, prior) : NAN;
    table.add_row({static_cast<long long>(i), p.to_string(),
                   static_cast<long long>(p.block_count()),
                   static_cast<long long>(p.n_total()), bound});
    Json r{{"partition", p.to_string()}, {"blocks", p.block_count()}};
    if (ranked) r["bound"] = bound;
    rows.push_back(r);
    c.summary << p.to_string() << (ranked ? "  bound=" + format_double(bound) : "") << '\n';
  }
  c.write_csv("partitions.csv", table);
  c.outcome.result["count"] = list.partitions.size();
  c.outcome.result["truncated"] = list.truncated;
  c.outcome.result["partitions"] = rows;
  if (list.truncated) c.outcome.exit_code = kExitBudget;
}

void cmd_oqi(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "tol", "max_iter", "random_starts", "seed", "prior",
                 "curve_points"});
  const int n = required_n(s);
  const bool flat = is_flat(s);
  const double dphi = positive(s, "delta_phi", 0.7);
  OqiOptions o;
  o.tol = positive(s, "tol", o.tol);
  o.max_iter = at_least(s, "max_iter", o.max_iter, 1);
  o.random_starts = at_least(s, "random_starts", 0, 0);
  o.seed = s.get_seed("seed", 1);
  const PriorGrid prior = flat ? make_prior(true, dphi, n) : css_prior(dphi, n);
  const OqiSolution sol = solve_oqi(n, prior, o);
  CsvTable hist({"iteration", "bmse"});
  for (std::size_t i = 0; i < sol.history.size(); ++i) {
    hist.add_row({static_cast<long long>(i + 1), sol.history[i]});
  }
  c.write_csv("oqi_history.csv", hist);
  const int points = at_least(s, "curve_points", 101, 2);
  std::vector<double> phis;
  for (int i = 0; i < points; ++i) phis.push_back(-kPi + 2.0 * kPi * i / (points - 1));
  const std::vector<double> mse = oqi_mse_curve(sol, phis);
  CsvTable curve({"phi", "mse_oqi"});
  for (int i = 0; i < points; ++i) curve.add_row({phis[i], mse[i]});
  c.write_csv("oqi_mse_curve.csv", curve);
  c.outcome.result = {{"n", n},
                      {"delta_phi", dphi},
                      {"bmse", sol.bmse},
                      {"rbmse", std::sqrt(sol.bmse)},
                      {"iterations", sol.iterations},
                      {"converged", sol.converged}};
  c.summary << "OQI N=" << n << " bmse=" << format_double(sol.bmse)
            << " iterations=" << sol.iterations << (sol.converged ? "" : " (not converged)")
            << '\n';
}

void cmd_optimize(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "partition", "mode", "top_k", "restarts", "seed",
                 "max_blocks", "k_cap", "budget", "step", "max_steps", "phi_points", "prior",
                 "oqi_curve"});
  const int n = required_n(s);
  const bool flat = is_flat(s);
  const double dphi = positive(s, "delta_phi", 0.7);
  const OptimizerConfig oc = optimizer_from(s, 8);
  const PriorGrid prior = make_prior(flat, dphi, n);

  Selection sel;
  if (s.has("partition")) {
    Partition p;
    try {
      p = Partition::parse(s.require_string("partition"));
    } catch (const std::invalid_argument& e) {
      throw ValidationError("optimize.partition", e.what());
    }
    if (p.n_total() != n) throw ValidationError("optimize.partition", "does not sum to n");
    const OptimizeResult r = optimize_plan(MeasurementPlan::for_partition(p), prior, oc);
    sel.partition = p;
    sel.plan = r.plan;
    sel.bmse = r.bmse;
    sel.bound = optimal_measurement_bmse(p, prior);
  } else {
    SelectionOptions so;
    const std::string mode = s.get_string("mode", "rank");
    if (mode == "rank") {
      so.mode = SelectionMode::kRank;
    } else if (mode == "all") {
      so.mode = SelectionMode::kOptimizeAll;
    } else if (mode == "topk") {
      so.mode = SelectionMode::kOptimizeTopK;
    } else {
      throw ValidationError("optimize.mode", "expected rank, all or topk");
    }
    so.top_k = at_least(s, "top_k", 3, 1);
    so.limits = {s.get_int("k_cap", -1), s.get_int("max_blocks", 17),
                 static_cast<std::size_t>(at_least(s, "budget", 0, 0))};
    so.optimizer = oc;
    sel = select_best_partition(n, prior, so);
  }
  const PriorGrid cprior = flat ? make_prior(true, dphi, n) : css_prior(dphi, n);
  const double css = css_bmse(n, cprior);
  const double gain = css / sel.bmse;

  const int points = at_least(s, "phi_points", 101, 2);
  std::vector<double> phis;
  for (int i = 0; i < points; ++i) phis.push_back(-kPi + 2.0 * kPi * i / (points - 1));
  const std::vector<double> mp = mse_curve(sel.plan, prior, phis);
  const std::vector<double> mc = css_mse_curve(n, cprior, phis);
  const bool with_oqi = s.get_flag("oqi_curve", n <= 64);
  std::vector<double> mo;
  if (with_oqi) mo = oqi_mse_curve(solve_oqi(n, cprior), phis);
  CsvTable curve({"phi", "mse_proposed", "mse_css", "mse_oqi"});
  for (int i = 0; i < points; ++i) {
    curve.add_row({phis[i], mp[i], mc[i], with_oqi ? mo[i] : NAN});
  }
  c.write_csv("optimize_mse_curve.csv", curve);
  write_plot(c, "optimize_mse_curve.csv", "phi",
             {{2, "proposed"}, {3, "css"}, {4, "oqi"}}, false);

  c.outcome.result = {{"n", n},
                      {"delta_phi", dphi},
                      {"prior", flat ? "flat" : "gaussian"},
                      {"partition", sel.partition.to_string()},
                      {"partition_blocks", blocks_json(sel.partition)},
                      {"bound", sel.bound},
                      {"bmse", sel.bmse},
                      {"rbmse", std::sqrt(sel.bmse)},
                      {"css_bmse", css},
                      {"gain", gain},
                      {"gain_db", to_db(gain)},
                      {"budget_limited", sel.budget_limited},
                      {"plan", plan_json(sel.plan)}};
  c.summary << "partition " << sel.partition.to_string() << "  bmse=" << format_double(sel.bmse)
            << "  css=" << format_double(css) << "  gain=" << format_double(gain) << " ("
            << format_double(to_db(gain)) << " dB)\n";
  if (sel.budget_limited) c.outcome.exit_code = kExitBudget;
}

void cmd_sweep_prior(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "optimize", "restarts", "seed", "max_blocks", "budget",
                 "oqi", "step", "max_steps"});
  const std::vector<int> ns = s.get_ints("n");
  for (int n : ns) {
    if (n < 1 || n > 4096) throw ValidationError("sweep-prior.n", "must be in [1, 4096]");
  }
  const std::vector<double> widths = s.get_doubles("delta_phi");
  for (double w : widths) {
    if (!(w > 0.0)) throw ValidationError("sweep-prior.delta_phi", "widths must be positive");
  }
  const bool optimize = s.get_flag("optimize", false);
  const bool with_oqi = s.get_flag("oqi", true);
  SelectionOptions so;
  so.optimize = optimize;
  so.optimizer = optimizer_from(s, 4);
  so.limits = {-1, s.get_int("max_blocks", 17),
               static_cast<std::size_t>(at_least(s, "budget", 0, 0))};

  std::ostringstream fp;
  for (const auto& [k, v] : c.header()) fp << k << '=' << v << ';';
  Manifest manifest(c.options.out_dir / "sweep-prior", fp.str());
  CsvTable table({"n", "delta_phi", "partition", "bound", "bmse", "css_bmse", "oqi_bmse",
                  "rbmse_over_prior", "gain", "bound_over_oqi"});
  Json records = Json::array();
  bool limited = false;
  std::size_t point = 0;
  for (int n : ns) {
    for (double w : widths) {
      const std::string shard = "point_" + std::to_string(point++);
      Json rec;
      if (c.options.write_files && manifest.has(shard)) {
        rec = manifest.load(shard);
      } else {
        const Selection sel = select_best_partition(n, default_gaussian_prior(w, n), so);
        const double css = css_bmse(n, css_prior(w, n));
        const double oqi = with_oqi ? solve_oqi(n, css_prior(w, n)).bmse : NAN;
        rec = {{"n", n},
               {"delta_phi", w},
               {"partition", sel.partition.to_string()},
               {"partition_blocks", blocks_json(sel.partition)},
               {"bound", sel.bound},
               {"bmse", optimize ? Json(sel.bmse) : Json(nullptr)},
               {"css_bmse", css},
               {"oqi_bmse", with_oqi ? Json(oqi) : Json(nullptr)},
               {"budget_limited", sel.budget_limited}};
        if (c.options.write_files) manifest.store(shard, rec);
      }
      const double b = rec["bmse"].is_null() ? NAN : rec["bmse"].get<double>();
      const double bound = rec["bound"].get<double>();
      const double css = rec["css_bmse"].get<double>();
      const double oqi = rec["oqi_bmse"].is_null() ? NAN : rec["oqi_bmse"].get<double>();
      const double rw = rec["delta_phi"].get<double>();
      limited = limited || rec["budget_limited"].get<bool>();
      table.add_row({static_cast<long long>(rec["n"].get<int>()), rw,
                     rec["partition"].get<std::string>(), bound, b, css, oqi, std::sqrt(b) / rw,
                     css / b, bound / oqi});
      records.push_back(rec);
      c.summary << "N=" << rec["n"].get<int>() << "  delta_phi=" << format_double(rw) << "  "
                << rec["partition"].get<std::string>()
                << "  bound=" << format_double(bound);
      if (optimize) c.summary << "  rbmse/delta=" << format_double(std::sqrt(b) / rw);
      if (with_oqi) c.summary << "  bound/oqi=" << format_double(bound / oqi);
      c.summary << '\n';
    }
  }
  c.write_csv("sweep_prior.csv", table);
  c.outcome.result = {{"optimized", optimize}, {"records", records}};
  if (c.options.write_files) c.outcome.result["manifest"] = manifest.path().string();
  if (limited) c.outcome.exit_code = kExitBudget;
}

struct SchemeValue {
  double bmse = 0.0;
  double std_error = 0.0;
  std::string label;
  bool budget_limited = false;
};

SchemeValue scheme_value(const ExperimentSpec& s, const std::string& scheme, int n, bool flat,
                         double dphi, const PriorGrid& prior, const McOptions& mc,
                         const OptimizerConfig& oc) {
  auto find_k = [&](int (*size)(int)) {
    for (int k = 0; k <= 12; ++k) {
      try {
        if (size(k) == n) return k;
      } catch (const std::invalid_argument&) {
        // no configuration of this depth
      }
    }
    throw ValidationError("scaling.n",
                          "N=" + std::to_string(n) + " is not a valid " + scheme + " size");
  };
  SchemeValue v;
  if (scheme == "proposed") {
    SelectionOptions so;
    so.optimizer = oc;
    so.limits = {-1, s.get_int("max_blocks", 17), 0};
    const Selection sel = select_best_partition(n, prior, so);
    v.bmse = sel.bmse;
    v.label = sel.partition.to_string();
    v.budget_limited = sel.budget_limited;
  } else if (scheme == "varying") {
    const VaryingBlockConfig cfg = varying_block_config(find_k(varying_block_n));
    const SchemeResult r = varying_block_bmse(cfg, prior, true, mc);
    v = {r.bmse, r.std_error, cfg.partition().to_string(), false};
  } else if (scheme == "fixed-bayes" || scheme == "fixed-bitbybit") {
    const FixedBlockConfig cfg = solve_fixed_block_M(find_k(fixed_block_n));
    const SchemeResult r = fixed_block_bmse(
        cfg, prior, scheme == "fixed-bayes" ? FixedEstimator::kBayes : FixedEstimator::kBitByBit,
        mc);
    v = {r.bmse, r.std_error, "M=" + std::to_string(cfg.copies), false};
  } else if (scheme == "css") {
    v.bmse = css_bmse(n, flat ? prior : css_prior(dphi, n));
    v.label = "css";
  } else if (scheme == "oqi") {
    v.bmse = solve_oqi(n, flat ? prior : css_prior(dphi, n)).bmse;
    v.label = "oqi";
  } else {
    throw ValidationError("scaling.scheme",
                          "expected proposed, varying, fixed-bayes, fixed-bitbybit, css or oqi");
  }
  return v;
}

void cmd_scaling(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "scheme", "versus", "prior", "restarts", "samples", "seed",
                 "max_blocks", "step", "max_steps"});
  const std::vector<int> ns = s.get_ints("n");
  const bool flat = is_flat(s);
  const double dphi = positive(s, "delta_phi", 0.7);
  const std::string scheme = s.get_string("scheme", "proposed");
  const std::string versus = s.get_string("versus", "");
  const bool fixed = scheme == "fixed-bayes" || scheme == "fixed-bitbybit";
  const McOptions mc{static_cast<std::uint64_t>(at_least(s, "samples", 200000, 2)),
                     s.get_seed("seed", 1)};
  const OptimizerConfig oc = optimizer_from(s, 8);
  std::vector<std::string> cols{"n", "scheme", "bmse", "std_error", "reference_bmse",
                                "rbmse_ratio", "css_bmse", "partition"};
  if (fixed) cols.push_back("analytic_ratio");
  if (!versus.empty()) {
    cols.insert(cols.end(), {"versus_bmse", "versus_std_error", "advantage"});
  }
  CsvTable table(cols);
  std::vector<double> ratios, analytic, advantages;
  Json rows = Json::array();
  bool limited = false;
  for (int n : ns) {
    if (n < 1) throw ValidationError("scaling.n", "qubit numbers must be positive");
    const PriorGrid prior = make_prior(flat, dphi, n);
    const SchemeValue v = scheme_value(s, scheme, n, flat, dphi, prior, mc, oc);
    limited = limited || v.budget_limited;
    const double css = css_bmse(n, flat ? prior : css_prior(dphi, n));
    const double ref = reference_bmse(flat, n, dphi);
    const double ratio = std::sqrt(v.bmse / ref);
    ratios.push_back(ratio);
    std::vector<Cell> row{static_cast<long long>(n), scheme, v.bmse, v.std_error, ref, ratio,
                          css, v.label};
    Json jr{{"n", n},           {"bmse", v.bmse},         {"std_error", v.std_error},
            {"reference_bmse", ref}, {"rbmse_ratio", ratio}, {"css_bmse", css},
            {"sub_sql", v.bmse < css}, {"label", v.label}};
    c.summary << "N=" << n << "  " << v.label << "  bmse=" << format_double(v.bmse)
              << "  ratio=" << format_double(ratio);
    if (fixed) {
      const double a = std::sqrt(v.bmse) / fixed_block_analytic_rbmse(n);
      analytic.push_back(a);
      row.push_back(a);
      jr["analytic_ratio"] = a;
      c.summary << "  vs analytic=" << format_double(a);
    }
    if (!versus.empty()) {
      const SchemeValue w = scheme_value(s, versus, n, flat, dphi, prior, mc, oc);
      limited = limited || w.budget_limited;
      const double adv = w.bmse / v.bmse;
      advantages.push_back(adv);
      row.insert(row.end(), {w.bmse, w.std_error, adv});
      jr["versus"] = {{"scheme", versus}, {"bmse", w.bmse}, {"std_error", w.std_error},
                      {"label", w.label}};
      jr["advantage"] = adv;
      jr["advantage_db"] = to_db(adv);
      c.summary << "  " << versus << "/" << scheme << "=" << format_double(adv);
    }
    c.summary << '\n';
    table.add_row(row);
    rows.push_back(jr);
  }
  const double overhead = fit_constant_overhead(ratios);
  c.write_csv("scaling.csv", table);
  c.outcome.result = {{"scheme", scheme},
                      {"prior", flat ? "flat" : "gaussian"},
                      {"delta_phi", dphi},
                      {"reference", flat ? "pi/N" : "oqi"},
                      {"overhead", overhead},
                      {"rows", rows}};
  c.summary << "overhead fit = " << format_double(overhead) << '\n';
  if (fixed) {
    const double a = fit_constant_overhead(analytic);
    c.outcome.result["analytic_overhead"] = a;
    c.summary << "overhead vs analytic curve = " << format_double(a) << '\n';
  }
  if (!versus.empty()) {
    c.outcome.result["versus"] = versus;
    c.outcome.result["advantage"] = fit_constant_overhead(advantages);
  }
  if (limited) c.outcome.exit_code = kExitBudget;
}

void cmd_unwind(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "mode", "samples", "seed", "partition", "l_max", "reuse",
                 "max_l", "restarts", "step", "max_steps", "budget"});
  const std::string mode = s.get_string("mode", "both");
  const bool reuse = s.get_flag("reuse", false);
  if (mode == "rescale") {
    ExtendedPartition ep;
    try {
      ep = ExtendedPartition::parse(s.require_string("partition"), reuse);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ValidationError("unwind.partition", e.what());
    }
    const int l_max = s.get_int("l_max", ep.l_max());
    if (l_max < ep.l_max()) throw ValidationError("unwind.l_max", "below the deepest slow level");
    const double dphi = positive(s, "delta_phi", 0.7 * std::ldexp(1.0, l_max));
    const RescaledFrame f = rescale(ep, l_max);
    c.outcome.result = {{"partition", ep.to_string()},
                        {"n_total", ep.n_total()},
                        {"l_max", l_max},
                        {"rescaled_partition", f.partition.to_string()},
                        {"n_prime", f.n_prime},
                        {"scale_factor", f.scale_factor},
                        {"delta_phi", dphi},
                        {"rescaled_delta_phi", dphi * f.prior_scale}};
    c.summary << ep.to_string() << " (N=" << ep.n_total() << ") -> " << f.partition.to_string()
              << " (N'=" << f.n_prime << ") at delta_phi'=" << format_double(dphi * f.prior_scale)
              << '\n';
    return;
  }
  const std::vector<int> ns = s.get_ints("n");
  const double dphi = positive(s, "delta_phi", 1.4);
  if (mode == "partition") {
    UnwindSearchOptions uo;
    uo.max_l = at_least(s, "max_l", 3, 0);
    uo.optimizer = optimizer_from(s, 4);
    uo.budget = static_cast<std::size_t>(at_least(s, "budget", 4000, 1));
    CsvTable table({"n", "partition", "l_max", "bound", "bmse", "rbmse"});
    Json rows = Json::array();
    bool limited = false;
    for (int n : ns) {
      const UnwindSelection sel = best_unwind_partition(n, dphi, reuse, uo);
      limited = limited || sel.budget_limited;
      table.add_row({static_cast<long long>(n), sel.partition.to_string(),
                     static_cast<long long>(sel.l_max), sel.bound, sel.bmse,
                     std::sqrt(sel.bmse)});
      rows.push_back({{"n", n}, {"partition", sel.partition.to_string()}, {"l_max", sel.l_max},
                      {"bound", sel.bound}, {"bmse", sel.bmse}, {"plan", plan_json(sel.plan)}});
      c.summary << "N=" << n << "  " << sel.partition.to_string() << "  l_max=" << sel.l_max
                << "  bmse=" << format_double(sel.bmse) << '\n';
    }
    c.write_csv("unwind_partition.csv", table);
    c.outcome.result = {{"delta_phi", dphi}, {"reuse", reuse}, {"rows", rows}};
    if (limited) c.outcome.exit_code = kExitBudget;
    return;
  }
  if (mode != "both" && mode != "adaptive" && mode != "nonadaptive") {
    throw ValidationError("unwind.mode",
                          "expected both, adaptive, nonadaptive, partition or rescale");
  }
  AllocationSearch search;
  search.final = {static_cast<std::uint64_t>(at_least(s, "samples", 100000, 2)),
                  s.get_seed("seed", 1)};
  CsvTable table({"n", "method", "bmse", "std_error", "l_max", "atoms_per_level", "k_max",
                  "n_used", "effective_width"});
  Json rows = Json::array();
  for (int n : ns) {
    for (bool adaptive : {true, false}) {
      if (mode == "adaptive" && !adaptive) continue;
      if (mode == "nonadaptive" && adaptive) continue;
      const UnwindResult r = best_unwind_allocation(adaptive, n, dphi, search);
      const std::string method = adaptive ? "adaptive" : "nonadaptive";
      table.add_row({static_cast<long long>(n), method, r.bmse, r.std_error,
                     static_cast<long long>(r.allocation.l_max),
                     static_cast<long long>(r.allocation.atoms_per_level),
                     static_cast<long long>(r.allocation.k_max),
                     static_cast<long long>(r.n_used), r.effective_width});
      rows.push_back({{"n", n}, {"method", method}, {"bmse", r.bmse}, {"std_error", r.std_error},
                      {"l_max", r.allocation.l_max},
                      {"atoms_per_level", r.allocation.atoms_per_level},
                      {"k_max", r.allocation.k_max}, {"n_used", r.n_used},
                      {"effective_width", r.effective_width}});
      c.summary << "N=" << n << "  " << method << "  bmse=" << format_double(r.bmse) << " +- "
                << format_double(r.std_error) << '\n';
    }
  }
  c.write_csv("unwind.csv", table);
  c.outcome.result = {{"delta_phi", dphi}, {"rows", rows}};
}

void cmd_clock(Context& c) {
  const auto& s = c.spec;
  s.check_known({"protocol", "n_atoms", "gamma_ratio", "omega_a", "tau", "seed",
                 "points_per_decade"});
  ClockConfig cfg;
  cfg.n_atoms = at_least(s, "n_atoms", 200, 1);
  cfg.gamma_lo = 1.0;
  cfg.gamma_ind = 1.0 / positive(s, "gamma_ratio", 1e4);
  cfg.omega_a = positive(s, "omega_a", 1.0);
  cfg.points_per_decade = at_least(s, "points_per_decade", 200, 2);
  const std::vector<double> taus =
      s.has("tau") ? s.get_doubles("tau") : parse_number_list("1e-4:1e5:log91", "clock.tau");
  for (double t : taus) {
    if (!(t > 0.0)) throw ValidationError("clock.tau", "must be positive");
  }
  const std::string which = s.get_string("protocol", "all");
  std::vector<ClockProtocol> protocols;
  if (which == "all") {
    protocols = {ClockProtocol::kUncorrelated, ClockProtocol::kGhz,
                 ClockProtocol::kBestClassical, ClockProtocol::kOqc};
  } else {
    try {
      protocols = {parse_clock_protocol(which)};
    } catch (const std::invalid_argument& e) {
      throw ValidationError("clock.protocol", e.what());
    }
  }
  CsvTable table({"tau", "T_opt", "sigma_y", "protocol", "N"});
  Json summary = Json::object();
  for (ClockProtocol p : protocols) {
    cfg.protocol = p;
    const std::vector<AllanPoint> pts = allan_curve(cfg, taus);
    for (const AllanPoint& a : pts) {
      table.add_row({a.tau, a.t_opt, a.sigma_y, to_string(p),
                     static_cast<long long>(cfg.n_atoms)});
    }
    Json entry = {{"first_sigma_y", pts.front().sigma_y}, {"last_sigma_y", pts.back().sigma_y}};
    if (pts.size() >= 2) {
      // Log-log slopes over the first and last pair of total times.
      const auto slope = [](const AllanPoint& a, const AllanPoint& b) {
        return std::log(b.sigma_y / a.sigma_y) / std::log(b.tau / a.tau);
      };
      const std::size_t k = pts.size();
      entry["short_slope"] = slope(pts[0], pts[1]);
      entry["long_slope"] = slope(pts[k - 2], pts[k - 1]);
    }
    summary[to_string(p)] = entry;
  }
  for (double t : taus) {
    table.add_row({t, NAN, fundamental_limit(t, cfg.n_atoms, cfg.gamma_ind, cfg.omega_a),
                   std::string("fundamental"), static_cast<long long>(cfg.n_atoms)});
  }
  c.write_csv("clock.csv", table);
  c.outcome.result = {{"n_atoms", cfg.n_atoms},
                      {"gamma_ratio", 1.0 / cfg.gamma_ind},
                      {"protocols", summary}};
  c.summary << "wrote " << table.rows() << " Allan-deviation rows\n";
}

void cmd_noise(Context& c) {
  const auto& s = c.spec;
  s.check_known({"n", "delta_phi", "p_a", "p_e", "f0", "partition", "restarts", "seed",
                 "f0_sweep", "step", "max_steps"});
  const int n = s.get_int("n", 21);
  if (n < 1) throw ValidationError("noise.n", "must be positive");
  const double dphi = positive(s, "delta_phi", 0.7);
  NoiseModel nm{s.get_double("p_a", 0.0), s.get_double("p_e", 0.0), s.get_double("f0", 1.0)};
  try {
    nm.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError("noise.noise_model", e.what());
  }
  Partition part;
  if (s.has("partition")) {
    try {
      part = Partition::parse(s.require_string("partition"));
    } catch (const std::invalid_argument& e) {
      throw ValidationError("noise.partition", e.what());
    }
    if (part.n_total() != n) throw ValidationError("noise.partition", "does not sum to n");
  } else {
    SelectionOptions so;
    so.optimize = false;
    part = select_best_partition(n, default_gaussian_prior(dphi, n), so).partition;
  }
  const OptimizerConfig oc = optimizer_from(s, 4);
  const PriorGrid prior = plan_prior(dphi, part.measurement_order());
  const double css = css_bmse(n, css_prior(dphi, n));
  const OptimizeResult base = optimize_plan(MeasurementPlan::for_partition(part), prior, oc);

  auto evaluate = [&](const NoiseModel& model) {
    const double fixed = noisy_plan_bmse(base.plan, prior, model);
    const double reopt = optimize_noisy_plan(base.plan, prior, model, oc).bmse;
    return std::pair{fixed, reopt};
  };
  const auto [fixed, reopt] = evaluate(nm);
  c.outcome.result = {{"n", n},
                      {"delta_phi", dphi},
                      {"partition", part.to_string()},
                      {"noise", {{"p_a", nm.p_a}, {"p_e", nm.p_e}, {"f0", nm.f0}}},
                      {"css_bmse", css},
                      {"noiseless_bmse", base.bmse},
                      {"fixed_plan", {{"bmse", fixed}, {"gain", css / fixed},
                                      {"gain_db", to_db(css / fixed)}}},
                      {"reoptimized", {{"bmse", reopt}, {"gain", css / reopt},
                                       {"gain_db", to_db(css / reopt)}}},
                      {"acceptance_mode", "reoptimized"}};
  c.summary << part.to_string() << "  gain fixed-plan=" << format_double(css / fixed)
            << "  gain re-optimized=" << format_double(css / reopt) << '\n';

  if (s.has("f0_sweep")) {
    const std::vector<double> f0s = s.get_doubles("f0_sweep");
    CsvTable table({"f0", "gain_fixed", "gain_reoptimized"});
    std::vector<GainPoint> gf, gr;
    for (double f : f0s) {
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("noise.f0_sweep", "values in (0, 1]");
      NoiseModel m = nm;
      m.f0 = f;
      const auto [bf, br] = evaluate(m);
      table.add_row({f, css / bf, css / br});
      gf.push_back({1.0 - f, css / bf});
      gr.push_back({1.0 - f, css / br});
    }
    c.write_csv("noise_f0_sweep.csv", table);
    if (f0s.size() >= 3) {
      const GainFit a = fit_gain_decay(gf), b = fit_gain_decay(gr);
      c.outcome.result["fit_fixed"] = {{"A", a.A}, {"B", a.B}};
      c.outcome.result["fit_reoptimized"] = {{"A", b.A}, {"B", b.B}};
      c.summary << "decay fit B: fixed-plan=" << format_double(a.B)
                << "  re-optimized=" << format_double(b.B) << '\n';
    }
  }
}

void cmd_plateau(Context& c) {
  const auto& s = c.spec;
  s.check_known({"delta_phi", "n", "seed"});
  const double dphi = positive(s, "delta_phi", 0.7);
  const double hl = plateau_hl(dphi);
  const double sql = plateau_sql(dphi);
  c.outcome.result = {{"delta_phi", dphi}, {"plateau_hl", hl}, {"plateau_sql", sql}};
  c.summary << "plateau_hl=" << format_double(hl) << "  plateau_sql=" << format_double(sql)
            << '\n';
  if (s.has("n")) {
    const int n = required_n(s);
    const double css = css_bmse(n, css_prior(dphi, n));
    const double oqi = solve_oqi(n, css_prior(dphi, n)).bmse;
    c.outcome.result["n"] = n;
    c.outcome.result["css_bmse"] = css;
    c.outcome.result["oqi_bmse"] = oqi;
    c.outcome.result["css_over_sql_plateau"] = css / sql;
    c.outcome.result["oqi_over_hl_plateau"] = oqi / hl;
    c.summary << "N=" << n << "  css/plateau_sql=" << format_double(css / sql)
              << "  oqi/plateau_hl=" << format_double(oqi / hl) << '\n';
  }
}

}  // namespace

RunOutcome run(const ExperimentSpec& spec, const RunOptions& options) {
  Context c{spec, options, {}, {}};
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& cmd = spec.command();
  if (cmd == "partitions") {
    cmd_partitions(c);
  } else if (cmd == "oqi") {
    cmd_oqi(c);
  } else if (cmd == "optimize") {
    cmd_optimize(c);
  } else if (cmd == "sweep-prior") {
    cmd_sweep_prior(c);
  } else if (cmd == "scaling") {
    cmd_scaling(c);
  } else if (cmd == "unwind") {
    cmd_unwind(c);
  } else if (cmd == "clock") {
    cmd_clock(c);
  } else if (cmd == "noise") {
    cmd_noise(c);
  } else if (cmd == "plateau") {
    cmd_plateau(c);
  } else {
    throw ValidationError("command", "unknown command '" + cmd + "'");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json doc;
  doc["command"] = cmd;
  doc["parameters"] = c.header();
  doc["result"] = c.outcome.result;
  doc["budget_limited"] = c.outcome.exit_code == kExitBudget;
  doc["wall_time_s"] = wall;
  c.outcome.result = doc;
  if (options.write_files) write_json(options.out_dir / (cmd + ".json"), doc);
  c.outcome.summary = c.summary.str();
  return c.outcome;
}

int run_and_report(const ExperimentSpec& spec, const RunOptions& options, std::ostream& out,
                   std::ostream& err) {
  try {
    const RunOutcome r = run(spec, options);
    if (options.json) {
      out << r.result.dump(2) << '\n';
    } else {
      out << r.summary;
      if (r.exit_code == kExitBudget) out << "note: result is budget-limited\n";
    }
    return r.exit_code;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace ghzbayes::cli
