// Acceptance harness. Each criterion runs the documented CLI recipes through
// the same entry point as the ghzbayes tool and prints one PASS/FAIL line.
//
//   acceptance                 all criteria
//   acceptance --criterion 4   a single one

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/cli/commands.hpp"
#include "ghzbayes/clock.hpp"
#include "ghzbayes/noise.hpp"
#include "ghzbayes/oqi.hpp"
#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"
#include "ghzbayes/schemes.hpp"
#include "ghzbayes/unwind.hpp"

namespace {

using namespace ghzbayes;
using cli::Json;
constexpr double kPi = std::numbers::pi;

// One measured quantity against its target.
struct Check {
  std::string what;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;

  void expect(const std::string& what, bool pass, const std::string& detail) {
    checks.push_back({what, pass, detail});
  }
  // |value - target| <= tol, tol absolute.
  void near(const std::string& what, double value, double target, double tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.5g (target %.5g +- %.3g)", value, target, tol);
    expect(what, std::abs(value - target) <= tol, buf);
  }
  void near_rel(const std::string& what, double value, double target, double rel) {
    near(what, value, target, rel * target);
  }
  void below(const std::string& what, double value, double limit) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.5g (limit %.5g)", value, limit);
    expect(what, value <= limit, buf);
  }
  bool passed() const {
    for (const Check& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.5g", v);
  return buf;
}

// Runs one CLI recipe in-process and returns the "result" object. The
// equivalent command line is echoed so that each number can be reproduced.
Json recipe(const std::string& command,
            const std::vector<std::pair<std::string, std::string>>& params) {
  cli::ExperimentSpec spec(command);
  std::string line = "ghzbayes " + command;
  for (const auto& [k, v] : params) {
    spec.set(k, v);
    std::string flag = k;
    for (char& ch : flag) {
      if (ch == '_') ch = '-';
    }
    if (v == "false") {
      line += " --no-" + flag;
    } else if (v == "true") {
      line += " --" + flag;
    } else {
      line += " --" + flag + " " + v;
    }
  }
  std::cout << "  $ " << line << std::endl;
  cli::RunOptions options;
  options.write_files = false;
  const cli::RunOutcome out = cli::run(spec, options);
  return out.result["result"];
}

// ---------------------------------------------------------------- criteria

Report criterion_1() {
  Report r;
  const Json res = recipe("optimize", {{"n", "21"}, {"delta_phi", "0.7"}, {"restarts", "16"},
                                       {"step", "0.08"}, {"max_steps", "4000"}});
  std::cout << "  partition " << res["partition"].get<std::string>() << "  css "
            << fmt(res["css_bmse"].get<double>()) << "  proposed " << fmt(res["bmse"].get<double>())
            << '\n';
  r.near_rel("gain", res["gain"].get<double>(), 2.29, 0.05);
  r.near("gain_db", res["gain_db"].get<double>(), 3.59, 0.25);
  return r;
}

Report criterion_2() {
  Report r;
  const Json res = recipe("sweep-prior", {{"n", "21"},
                                          {"delta_phi", "0.01,0.05,0.1,0.2,0.35,0.5,0.7,1.05,1.4,2"},
                                          {"oqi", "false"}});
  const Json& recs = res["records"];
  for (const Json& rec : recs) {
    std::cout << "  delta_phi=" << fmt(rec["delta_phi"].get<double>()) << "  "
              << rec["partition"].get<std::string>() << '\n';
  }
  bool has16 = false;
  for (const Json& b : recs.front()["partition_blocks"]) has16 = has16 || b[0].get<int>() == 4;
  r.expect("smallest width winner has a 16-qubit block", has16,
           recs.front()["partition"].get<std::string>());
  const std::string at105 = recs[7]["partition"].get<std::string>();
  r.expect("winner at 1.05 is 3x4+3x2+3x1", at105 == "3x4+3x2+3x1", at105);
  return r;
}

Report criterion_3() {
  Report r;
  const Json res = recipe("sweep-prior", {{"n", "8,16,24,32"}, {"delta_phi", "0.26,0.53,1.05"}});
  for (const Json& rec : res["records"]) {
    const double ratio = rec["bound"].get<double>() / rec["oqi_bmse"].get<double>();
    r.below("N=" + std::to_string(rec["n"].get<int>()) + " delta_phi=" +
                fmt(rec["delta_phi"].get<double>()) + " " + rec["partition"].get<std::string>() +
                " bound/oqi",
            ratio, 1.03);
  }
  return r;
}

Report criterion_4() {
  Report r;
  const Json res = recipe("scaling", {{"scheme", "varying"}, {"n", "9,26,63"},
                                      {"delta_phi", "0.7"}, {"samples", "200000"}});
  for (const Json& row : res["rows"]) {
    std::cout << "  N=" << row["n"].get<int>() << "  rbmse/oqi="
              << fmt(row["rbmse_ratio"].get<double>()) << '\n';
  }
  r.near("varying-block overhead", res["overhead"].get<double>(), 1.66, 0.10);
  return r;
}

Report criterion_5() {
  Report r;
  const Json over = recipe("scaling", {{"scheme", "proposed"}, {"versus", "varying"},
                                       {"n", "26,63"}, {"delta_phi", "0.7"}, {"restarts", "8"}});
  for (const Json& row : over["rows"]) {
    std::cout << "  N=" << row["n"].get<int>() << "  " << row["label"].get<std::string>()
              << "  rbmse/oqi=" << fmt(row["rbmse_ratio"].get<double>())
              << "  varying/proposed=" << fmt(row["advantage"].get<double>()) << '\n';
  }
  r.near("proposed overhead", over["overhead"].get<double>(), 1.56, 0.15);
  r.near("N=63 advantage at 0.7", over["rows"].back()["advantage"].get<double>(), 1.22, 0.08);
  const Json narrow = recipe("scaling", {{"scheme", "proposed"}, {"versus", "varying"},
                                         {"n", "63"}, {"delta_phi", "0.2"}, {"restarts", "8"}});
  std::cout << "  N=63 delta_phi=0.2  " << narrow["rows"][0]["label"].get<std::string>() << '\n';
  r.near("N=63 advantage at 0.2", narrow["advantage"].get<double>(), 1.57, 0.10);
  return r;
}

Report criterion_6() {
  Report r;
  const FixedBlockConfig cfg = solve_fixed_block_M(2);
  r.expect("M at k_max=2", cfg.copies == 6, "M=" + std::to_string(cfg.copies));
  const Json bayes = recipe("scaling", {{"scheme", "fixed-bayes"}, {"n", "42,120"},
                                        {"delta_phi", "0.7"}, {"samples", "400000"}});
  const Json bit = recipe("scaling", {{"scheme", "fixed-bitbybit"}, {"n", "42"},
                                      {"delta_phi", "0.7"}, {"samples", "400000"}});
  const Json& b42 = bayes["rows"][0];
  const Json& b120 = bayes["rows"][1];
  const Json& t42 = bit["rows"][0];
  r.expect("Bayes sub-SQL at N=42", b42["bmse"].get<double>() < b42["css_bmse"].get<double>(),
           fmt(b42["bmse"].get<double>()) + " < css " + fmt(b42["css_bmse"].get<double>()));
  r.expect("bit-by-bit above SQL at N=42", t42["bmse"].get<double>() > t42["css_bmse"].get<double>(),
           fmt(t42["bmse"].get<double>()) + " > css " + fmt(t42["css_bmse"].get<double>()));
  const double rel_se = b120["std_error"].get<double>() / b120["bmse"].get<double>();
  r.below("N=120 relative standard error", rel_se, 0.01);
  std::cout << "  analytic ratios " << fmt(b42["analytic_ratio"].get<double>()) << ", "
            << fmt(b120["analytic_ratio"].get<double>()) << '\n';
  r.near("overhead vs analytic curve", bayes["analytic_overhead"].get<double>(), 1.38, 0.15);
  return r;
}

Report criterion_7() {
  Report r;
  const Json sql = recipe("plateau", {{"delta_phi", "0.7"}, {"n", "350"}});
  r.near("css(350)/plateau_sql(0.7)", sql["css_over_sql_plateau"].get<double>(), 1.0, 0.02);
  const Json hl = recipe("plateau", {{"delta_phi", "1.05"}, {"n", "350"}});
  r.near("oqi(350)/plateau_hl(1.05)", hl["oqi_over_hl_plateau"].get<double>(), 1.0, 0.02);
  return r;
}

Report criterion_8() {
  Report r;
  for (const auto& [pa, target] : {std::pair{"0.001", 1.85}, std::pair{"0.01", 1.51}}) {
    const Json res = recipe("noise", {{"n", "21"}, {"delta_phi", "0.7"}, {"p_a", pa},
                                      {"partition", "3x4+3x2+3x1"}, {"restarts", "4"}});
    std::cout << "  fixed-plan gain " << fmt(res["fixed_plan"]["gain"].get<double>()) << '\n';
    r.near_rel(std::string("g_D at p_a=") + pa, res["reoptimized"]["gain"].get<double>(), target,
               0.10);
  }
  const std::vector<std::tuple<int, std::string, double>> fits{
      {9, "2x2+5x1", 6.78}, {15, "2x4+2x2+3x1", 13.9}, {18, "3x4+2x2+2x1", 19.3},
      {21, "3x4+3x2+3x1", 18.9}};
  for (const auto& [n, part, target] : fits) {
    const Json res = recipe("noise", {{"n", std::to_string(n)}, {"delta_phi", "0.7"},
                                      {"partition", part}, {"restarts", "4"},
                                      {"f0_sweep", "1,0.99,0.98,0.97,0.96,0.95"}});
    r.near_rel("decay B at N=" + std::to_string(n),
               res["fit_reoptimized"]["B"].get<double>(), target, 0.10);
  }
  return r;
}

// BMSE of a slow-atom plan evaluated directly in the original frame.
double original_frame_bmse(const ExtendedPartition& ep, const MeasurementPlan& rescaled_plan,
                           int l_max, double delta_phi) {
  const MeasurementPlan plan = unrescale_plan(rescaled_plan, l_max);
  const int top = ep.fast().blocks().empty() ? 0 : ep.fast().max_exponent();
  const PriorGrid prior =
      gaussian_prior(delta_phi, suggested_node_count(2 * kGaussianSupportSigmas * delta_phi, std::ldexp(1.0, top), 24.0));
  return bmse(plan, prior);
}

Report criterion_9() {
  Report r;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> copies(1, 3);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> width(0.2, 1.5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int l_max = 1 + trial % 3;
    std::vector<SlowBlock> slow;
    for (int l = 1; l <= l_max; ++l) {
      if (l == l_max || rng() % 2) slow.push_back({l, copies(rng)});
    }
    std::vector<Block> fast;
    for (int k = 0; k <= 2; ++k) {
      if (rng() % 2) fast.push_back({k, copies(rng) % 2 + 1});
    }
    const ExtendedPartition ep(slow, Partition(fast));
    if (ep.block_count() > 10) continue;
    const double dphi_prime = width(rng);
    const RescaledFrame f = rescale(ep, l_max);
    MeasurementPlan plan = MeasurementPlan::for_partition(f.partition);
    for (double& a : plan.rotations) a = angle(rng);
    const PriorGrid pp = gaussian_prior(
        dphi_prime,
        suggested_node_count(2 * kGaussianSupportSigmas * dphi_prime, std::ldexp(1.0, f.partition.max_exponent()), 24.0));
    const double rescaled = f.scale_factor * bmse(plan, pp);
    const double original = original_frame_bmse(ep, plan, l_max, dphi_prime / f.prior_scale);
    worst = std::max(worst, std::abs(rescaled - original) / original);
  }
  r.below("rescaling identity, worst relative error over 50 triples", worst, 1e-10);

  const Json ex = recipe("unwind", {{"mode", "rescale"},
                                    {"partition", "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4"},
                                    {"l_max", "3"},
                                    {"delta_phi", "5.6"}});
  const std::string mapped = ex["rescaled_partition"].get<std::string>();
  r.expect("26-atom example maps to 2x32+3x16+3x8+4x4+2x2+3x1",
           mapped == "2x32+3x16+3x8+4x4+2x2+3x1" && ex["n_total"].get<int>() == 26 &&
               std::abs(ex["rescaled_delta_phi"].get<double>() - 0.7) < 1e-12,
           mapped + " N=" + std::to_string(ex["n_total"].get<int>()) +
               " delta_phi'=" + fmt(ex["rescaled_delta_phi"].get<double>()));

  for (const char* dphi : {"1.4", "2.8"}) {
    const Json res = recipe("unwind", {{"mode", "both"}, {"n", "40,60,100"},
                                       {"delta_phi", dphi}, {"samples", "200000"}});
    const Json& rows = res["rows"];
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
      const double a = rows[i]["bmse"].get<double>();
      const double na = rows[i + 1]["bmse"].get<double>();
      r.expect(std::string("delta_phi=") + dphi + " N=" + std::to_string(rows[i]["n"].get<int>()) +
                   " adaptive <= non-adaptive",
               a <= na, fmt(a) + " vs " + fmt(na));
    }
  }
  return r;
}

Report criterion_10() {
  Report r;
  const Json prop = recipe("scaling", {{"scheme", "proposed"}, {"prior", "flat"}, {"n", "9,26"},
                                       {"restarts", "8"}});
  const Json vary = recipe("scaling", {{"scheme", "varying"}, {"prior", "flat"}, {"n", "9,26"},
                                       {"samples", "200000"}});
  r.near("proposed overhead over pi/N", prop["overhead"].get<double>(), 1.50, 0.10);
  r.near("varying-block overhead over pi/N", vary["overhead"].get<double>(), 1.75, 0.10);
  return r;
}

Report criterion_11() {
  Report r;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  // Branch probabilities sum to one.
  {
    MeasurementPlan plan = MeasurementPlan::for_partition(Partition::parse("1x4+2x2+1x1"));
    for (double& a : plan.rotations) a = angle(rng);
    double worst = 0.0;
    for (double phi : {-2.0, -0.3, 0.0, 0.9, 2.5}) {
      double total = 0.0;
      for (std::uint64_t b = 0; b < (1u << plan.steps()); ++b) {
        total += branch_probability(plan, b, phi);
      }
      worst = std::max(worst, std::abs(total - 1.0));
    }
    r.below("branch-probability completeness", worst, 1e-12);
  }

  // Gradient against central differences.
  {
    MeasurementPlan plan = MeasurementPlan::for_partition(Partition::parse("1x4+1x2+2x1"));
    for (double& a : plan.rotations) a = angle(rng);
    const PriorGrid prior = plan_prior(0.7, plan.order);
    const std::vector<double> g = bmse_gradient(plan, prior);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < plan.rotations.size(); ++i) {
      MeasurementPlan up = plan, dn = plan;
      up.rotations[i] += h;
      dn.rotations[i] -= h;
      const double fd = (bmse(up, prior) - bmse(dn, prior)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]));
    }
    r.below("gradient vs finite difference", worst, 1e-6);
  }

  // OQI iterations never increase the BMSE and beat every partition.
  {
    bool monotone = true;
    double worst_gap = -1.0;
    for (int n : {4, 8, 12, 16, 20, 24}) {
      const PriorGrid prior = css_prior(0.7, n);
      const OqiSolution sol = solve_oqi(n, prior);
      for (std::size_t i = 1; i < sol.history.size(); ++i) {
        monotone = monotone && sol.history[i] <= sol.history[i - 1] + 1e-12;
      }
      for (const Partition& p : enumerate_partitions(n, -1)) {
        worst_gap = std::max(worst_gap, sol.bmse - optimal_measurement_bmse(p, prior));
      }
    }
    r.expect("OQI iterations monotone", monotone, monotone ? "yes" : "no");
    r.below("OQI minus best partition bound, N<=24", worst_gap, 1e-9);
  }

  // Single GHZ state against its closed form.
  {
    double worst = 0.0;
    for (int n : {1, 2, 4, 8}) {
      for (double d : {0.05, 0.2, 0.5}) {
        const PriorGrid prior = css_prior(d, n);
        worst = std::max(worst, std::abs(ghz_parity_bmse_numeric(n, prior) -
                                         ghz_parity_closed_form(n, d)));
      }
    }
    r.below("GHZ closed-form BMSE", worst, 1e-8);
  }

  // Contrast of k independent bit flips equals the binomial parity sum.
  {
    double worst = 0.0;
    for (int k : {1, 2, 5, 8, 16}) {
      for (double p : {0.01, 0.1, 0.3}) {
        double even = 0.0;
        for (int i = 0; i <= k; i += 2) {
          even += std::tgamma(k + 1.0) / (std::tgamma(i + 1.0) * std::tgamma(k - i + 1.0)) *
                  std::pow(p, i) * std::pow(1 - p, k - i);
        }
        worst = std::max(worst, std::abs((2 * even - 1) - bitflip_contrast(k, p)));
      }
    }
    r.below("contrast binomial identity", worst, 1e-12);
  }

  // Slip variance against direct sampling.
  {
    std::mt19937_64 g(5);
    double worst = 0.0;
    for (double d : {1.5, 2.5}) {
      std::normal_distribution<double> normal(0.0, d);
      const int samples = 4000000;
      double acc = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double k = std::round(normal(g) / (2 * kPi));
        acc += 4 * kPi * kPi * k * k;
      }
      const double mc = acc / samples;
      worst = std::max(worst, std::abs(mc - slip_variance(d)) / slip_variance(d));
    }
    r.below("slip variance vs Monte Carlo, relative", worst, 0.01);
  }

  // Allan deviation scaling exponents.
  {
    ClockConfig cfg;
    cfg.protocol = ClockProtocol::kUncorrelated;
    std::vector<double> short_t, long_t;
    for (int i = 0; i <= 10; ++i) {
      short_t.push_back(1e-3 * std::pow(10.0, i / 10.0));
      long_t.push_back(1e2 * std::pow(10.0, i / 10.0));
    }
    const auto a = allan_curve(cfg, short_t);
    const auto b = allan_curve(cfg, long_t);
    r.near("slope for tau << 1/gamma_LO", log_log_slope(a), -1.0, 0.05);
    r.near("slope for tau >> 1/gamma_LO", log_log_slope(b), -0.5, 0.05);
  }

  // Sine state with a QFT readout.
  {
    const QftMoments q = sine_qft_check(200, kPi / 2);
    r.near_rel("sine/QFT variance at N=200", q.variance, 0.25, 0.10);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ghzbayes acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::function<Report()>> all{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3},  {4, criterion_4},
      {5, criterion_5}, {6, criterion_6}, {7, criterion_7},  {8, criterion_8},
      {9, criterion_9}, {10, criterion_10}, {11, criterion_11}};
  int failed = 0;
  for (const auto& [id, fn] : all) {
    if (only != 0 && id != only) continue;
    std::cout << "criterion " << id << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    try {
      rep = fn();
    } catch (const std::exception& e) {
      rep.expect("completed", false, e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const Check& c : rep.checks) {
      std::cout << "  [" << (c.pass ? "ok" : "x ") << "] " << c.what << ": " << c.detail << '\n';
    }
    const bool ok = rep.passed();
    if (!ok) ++failed;
    std::printf("CRITERION %d: %s (%.1f s)\n", id, ok ? "PASS" : "FAIL", secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
