#include "ghzbayes/cli/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ghzbayes::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

double to_double(const std::string& text, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError(field, "expected a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw ValidationError(field, "expected a number, got '" + text + "'");
  }
  return v;
}

int to_int(const std::string& text, const std::string& field) {
  const double v = to_double(text, field);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw ValidationError(field, "expected an integer, got '" + text + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

ExperimentSpec::ExperimentSpec(std::string command) : command_(std::move(command)) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command_) == names.end()) {
    throw ValidationError("command", "unknown command '" + command_ + "'");
  }
}

std::string ExperimentSpec::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const auto it = params_.find(key);
  return it == params_.end() ? fallback : it->second;
}

std::string ExperimentSpec::require_string(const std::string& key) const {
  const auto it = params_.find(key);
  if (it == params_.end()) throw ValidationError(field(key), "required");
  return it->second;
}

int ExperimentSpec::get_int(const std::string& key, int fallback) const {
  return has(key) ? to_int(params_.at(key), field(key)) : fallback;
}

int ExperimentSpec::require_int(const std::string& key) const {
  return to_int(require_string(key), field(key));
}

double ExperimentSpec::get_double(const std::string& key, double fallback) const {
  return has(key) ? to_double(params_.at(key), field(key)) : fallback;
}

double ExperimentSpec::require_double(const std::string& key) const {
  return to_double(require_string(key), field(key));
}

std::uint64_t ExperimentSpec::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& text = params_.at(key);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != text.size()) throw ValidationError(field(key), "expected an unsigned integer");
  return v;
}

bool ExperimentSpec::get_flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = params_.at(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ValidationError(field(key), "expected a boolean, got '" + v + "'");
}

std::vector<double> ExperimentSpec::get_doubles(const std::string& key) const {
  return parse_number_list(require_string(key), field(key));
}

std::vector<int> ExperimentSpec::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_doubles(key)) {
    if (v != std::floor(v)) throw ValidationError(field(key), "expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void ExperimentSpec::check_known(const std::vector<std::string>& keys) const {
  for (const auto& [k, v] : params_) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ValidationError(field(k), "unknown parameter");
    }
  }
}

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw ValidationError(field, "range must be lo:hi:logK or lo:hi:linK");
    const double lo = to_double(parts[0], field);
    const double hi = to_double(parts[1], field);
    const std::string& kind = parts[2];
    const bool log = kind.rfind("log", 0) == 0;
    if (!log && kind.rfind("lin", 0) != 0) {
      throw ValidationError(field, "range spacing must be log or lin");
    }
    const int count = to_int(kind.substr(3), field);
    if (count < 1) throw ValidationError(field, "range needs at least one point");
    if (log && !(lo > 0.0 && hi > 0.0)) throw ValidationError(field, "log range needs lo, hi > 0");
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      out.push_back(log ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), field));
  if (out.empty()) throw ValidationError(field, "empty list");
  return out;
}

std::map<std::string, std::string> load_config(const std::string& path,
                                               const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  std::map<std::string, std::string> common, specific;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ValidationError("config:" + std::to_string(lineno), "unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config:" + std::to_string(lineno), "expected key = value");
    }
    const std::string key = normalize_key(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty() || section == "common") {
      common[key] = value;
    } else if (section == command) {
      specific[key] = value;
    }
  }
  for (const auto& [k, v] : specific) common[k] = v;
  return common;
}

}  // namespace ghzbayes::cli
