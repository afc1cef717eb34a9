#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ghzbayes/cli/experiment.hpp"
#include "ghzbayes/cli/output.hpp"

namespace ghzbayes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBudget = 3;

struct RunOptions {
  std::filesystem::path out_dir = ".";
  bool json = false;       // stdout carries the JSON result instead of a summary
  bool write_files = true;
};

struct RunOutcome {
  int exit_code = kExitOk;
  Json result;          // also written to <out_dir>/<command>.json
  std::string summary;  // human-readable lines
};

// Runs one experiment. Throws ValidationError on bad parameters.
RunOutcome run(const ExperimentSpec& spec, const RunOptions& options = {});

// run() plus printing and error mapping; returns the process exit code.
int run_and_report(const ExperimentSpec& spec, const RunOptions& options, std::ostream& out,
                   std::ostream& err);

}  // namespace ghzbayes::cli
