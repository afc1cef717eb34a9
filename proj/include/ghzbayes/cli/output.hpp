#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace ghzbayes::cli {

using Json = nlohmann::ordered_json;
using Cell = std::variant<double, long long, std::string>;

// Formats a double with 17 significant digits ("%.17g").
std::string format_double(double v);
// RFC 4180 quoting: fields with a comma, quote or newline are quoted and
// embedded quotes doubled.
std::string csv_escape(const std::string& field);

// CSV with '#'-prefixed header lines recording the resolved parameters.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  void add_row(std::vector<Cell> row);
  std::size_t rows() const { return rows_.size(); }
  std::string render(const std::map<std::string, std::string>& header) const;
  void write(const std::filesystem::path& path,
             const std::map<std::string, std::string>& header) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

// Index of completed shards of a sweep so interrupted runs can resume. The
// manifest records the parameter fingerprint; a mismatch starts afresh.
class Manifest {
 public:
  Manifest(std::filesystem::path dir, std::string fingerprint);
  bool has(const std::string& shard) const;
  Json load(const std::string& shard) const;
  void store(const std::string& shard, const Json& record);
  std::filesystem::path path() const { return dir_ / "manifest.json"; }

 private:
  void save() const;
  std::filesystem::path dir_;
  std::string fingerprint_;
  std::vector<std::string> done_;
};

}  // namespace ghzbayes::cli
