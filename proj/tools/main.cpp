// ghzbayes command line front end. Each subcommand maps its flags onto an
// ExperimentSpec; values from --config fill in anything not given on the
// command line.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ghzbayes/cli/commands.hpp"

namespace {

using ghzbayes::cli::ExperimentSpec;

struct Flag {
  std::string key;   // spec key, underscores
  std::string help;
  bool boolean = false;
};

const std::map<std::string, std::vector<Flag>>& command_flags() {
  static const std::map<std::string, std::vector<Flag>> flags{
      {"partitions",
       {{"n", "total qubit number"},
        {"k_cap", "largest block exponent"},
        {"max_blocks", "largest number of blocks"},
        {"budget", "stop after this many partitions"},
        {"delta_phi", "also rank by optimal-measurement BMSE at this prior width"}}},
      {"oqi",
       {{"n", "total qubit number"},
        {"delta_phi", "prior width (rad)"},
        {"prior", "gaussian or flat"},
        {"tol", "relative convergence tolerance"},
        {"max_iter", "iteration cap"},
        {"random_starts", "extra random starting states"},
        {"curve_points", "points of the MSE curve over [-pi, pi]"},
        {"seed", "random seed"}}},
      {"optimize",
       {{"n", "total qubit number"},
        {"delta_phi", "prior width (rad)"},
        {"prior", "gaussian or flat"},
        {"partition", "fixed partition such as 3x4+3x2+3x1"},
        {"mode", "rank, all or topk"},
        {"top_k", "partitions optimized in topk mode"},
        {"k_cap", "largest block exponent"},
        {"max_blocks", "largest number of blocks"},
        {"budget", "ranking budget"},
        {"restarts", "optimizer restarts"},
        {"step", "Adam step size"},
        {"max_steps", "Adam iterations per restart"},
        {"phi_points", "points of the MSE curve"},
        {"oqi_curve", "include the OQI MSE curve", true},
        {"seed", "random seed"}}},
      {"sweep-prior",
       {{"n", "qubit numbers, list"},
        {"delta_phi", "prior widths, list or lo:hi:logK"},
        {"optimize", "optimize the plan of every winner", true},
        {"oqi", "include OQI reference values", true},
        {"max_blocks", "largest number of blocks"},
        {"budget", "ranking budget"},
        {"restarts", "optimizer restarts"},
        {"step", "Adam step size"},
        {"max_steps", "Adam iterations per restart"},
        {"seed", "random seed"}}},
      {"scaling",
       {{"n", "qubit numbers, list"},
        {"delta_phi", "prior width (rad)"},
        {"scheme", "proposed, varying, fixed-bayes, fixed-bitbybit, css or oqi"},
        {"versus", "second scheme; rows report its BMSE over the first"},
        {"prior", "gaussian or flat"},
        {"samples", "Monte Carlo samples"},
        {"max_blocks", "largest number of blocks"},
        {"restarts", "optimizer restarts"},
        {"step", "Adam step size"},
        {"max_steps", "Adam iterations per restart"},
        {"seed", "random seed"}}},
      {"unwind",
       {{"n", "qubit numbers, list"},
        {"delta_phi", "prior width (rad)"},
        {"mode", "both, adaptive, nonadaptive, partition or rescale"},
        {"samples", "Monte Carlo samples of the final evaluation"},
        {"partition", "slow-atom partition for rescale mode"},
        {"l_max", "rescaling depth"},
        {"reuse", "slow atoms of level l cost 2^-l qubits", true},
        {"max_l", "deepest slow level searched"},
        {"budget", "candidates ranked per depth"},
        {"restarts", "optimizer restarts"},
        {"step", "Adam step size"},
        {"max_steps", "Adam iterations per restart"},
        {"seed", "random seed"}}},
      {"clock",
       {{"protocol", "all, uncorrelated, ghz, best-classical or oqc"},
        {"n_atoms", "atom number"},
        {"gamma_ratio", "gamma_LO / gamma_ind"},
        {"omega_a", "atomic frequency in units of gamma_LO"},
        {"tau", "total times, list or lo:hi:logK"},
        {"points_per_decade", "interrogation-time grid density"},
        {"seed", "random seed"}}},
      {"noise",
       {{"n", "total qubit number"},
        {"delta_phi", "prior width (rad)"},
        {"p_a", "amplitude damping probability"},
        {"p_e", "readout bit-flip probability"},
        {"f0", "preparation fidelity per qubit"},
        {"partition", "partition such as 3x4+3x2+3x1"},
        {"f0_sweep", "fidelities for the gain decay fit"},
        {"restarts", "optimizer restarts"},
        {"step", "Adam step size"},
        {"max_steps", "Adam iterations per restart"},
        {"seed", "random seed"}}},
      {"plateau",
       {{"delta_phi", "prior width (rad)"},
        {"n", "also compare CSS and OQI at this qubit number"},
        {"seed", "random seed"}}},
  };
  return flags;
}

std::string dashed(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian phase estimation with GHZ-block partitions"};
  app.require_subcommand(1);
  std::string config;
  std::string out_dir = ".";
  bool json = false;
  bool no_files = false;
  app.add_option("--config", config, "INI file with [common] and per-command sections");
  app.add_option("--out", out_dir, "output directory for CSV and JSON files");
  app.add_flag("--json", json, "print the JSON result instead of a summary");
  app.add_flag("--no-files", no_files, "do not write output files");

  // Values land here keyed by command then parameter.
  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::map<std::string, bool>> given_flags;
  for (const auto& [command, flags] : command_flags()) {
    CLI::App* sub = app.add_subcommand(command, "run the " + command + " experiment");
    sub->fallthrough();
    for (const Flag& f : flags) {
      if (f.boolean) {
        sub->add_flag("--" + dashed(f.key) + ",!--no-" + dashed(f.key),
                      given_flags[command][f.key], f.help);
      } else {
        sub->add_option("--" + dashed(f.key), given[command][f.key], f.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ghzbayes::cli::kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    ExperimentSpec spec(command);
    if (!config.empty()) {
      for (const auto& [k, v] : ghzbayes::cli::load_config(config, command)) spec.set(k, v);
    }
    for (const Flag& f : command_flags().at(command)) {
      const std::string opt = "--" + dashed(f.key);
      if (sub->count(opt) == 0) continue;
      if (f.boolean) {
        spec.set(f.key, given_flags[command][f.key] ? "true" : "false");
      } else {
        spec.set(f.key, given[command][f.key]);
      }
    }
    ghzbayes::cli::RunOptions options;
    options.out_dir = out_dir;
    options.json = json;
    options.write_files = !no_files;
    return ghzbayes::cli::run_and_report(spec, options, std::cout, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return ghzbayes::cli::kExitValidation;
  }
}
