#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghzbayes::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"partitions", "oqi",    "optimize",
                                              "sweep-prior", "scaling", "unwind",
                                              "clock",      "noise",  "plateau"};
  return names;
}

// Rejected input; `field` is the dotted path of the offending parameter.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A command plus its resolved key/value parameters (keys use underscores).
// Values stay textual until a typed getter validates them.
class ExperimentSpec {
 public:
  ExperimentSpec() = default;
  explicit ExperimentSpec(std::string command);

  const std::string& command() const { return command_; }
  const std::map<std::string, std::string>& params() const { return params_; }

  void set(const std::string& key, const std::string& value) { params_[key] = value; }
  bool has(const std::string& key) const { return params_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  int require_int(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;
  // Comma lists "9,26,63" or ranges "lo:hi:logK" / "lo:hi:linK".
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  // Throws ValidationError for keys the command does not know.
  void check_known(const std::vector<std::string>& keys) const;

 private:
  std::string field(const std::string& key) const { return command_ + "." + key; }
  std::string command_;
  std::map<std::string, std::string> params_;
};

// Reads a flat INI file. Keys before any section and in [common] apply to
// every command; keys in [<command>] override them. Dashes in keys become
// underscores.
std::map<std::string, std::string> load_config(const std::string& path,
                                               const std::string& command);

// Parses "lo:hi:logK", "lo:hi:linK" or "a,b,c".
std::vector<double> parse_number_list(const std::string& text, const std::string& field);

}  // namespace ghzbayes::cli
