#include "ghzbayes/cli/output.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ghzbayes::cli {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) throw std::logic_error("CSV row width mismatch");
  rows_.push_back(std::move(row));
}

std::string CsvTable::render(const std::map<std::string, std::string>& header) const {
  std::ostringstream os;
  for (const auto& [k, v] : header) os << "# " << k << '=' << v << "\r\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    os << (i ? "," : "") << csv_escape(columns_[i]);
  }
  os << "\r\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              os << format_double(v);
            } else if constexpr (std::is_same_v<T, long long>) {
              os << v;
            } else {
              os << csv_escape(v);
            }
          },
          row[i]);
    }
    os << "\r\n";
  }
  return os.str();
}

void CsvTable::write(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& header) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render(header);
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return Json::parse(in);
}

Manifest::Manifest(std::filesystem::path dir, std::string fingerprint)
    : dir_(std::move(dir)), fingerprint_(std::move(fingerprint)) {
  std::filesystem::create_directories(dir_ / "shards");
  if (!std::filesystem::exists(path())) return;
  try {
    const Json doc = read_json(path());
    if (doc.value("fingerprint", "") != fingerprint_) return;
    for (const auto& s : doc.at("completed")) {
      const std::string name = s.get<std::string>();
      if (std::filesystem::exists(dir_ / "shards" / (name + ".json"))) done_.push_back(name);
    }
  } catch (const std::exception&) {
    done_.clear();
  }
}

bool Manifest::has(const std::string& shard) const {
  return std::find(done_.begin(), done_.end(), shard) != done_.end();
}

Json Manifest::load(const std::string& shard) const {
  return read_json(dir_ / "shards" / (shard + ".json"));
}

void Manifest::store(const std::string& shard, const Json& record) {
  write_json(dir_ / "shards" / (shard + ".json"), record);
  if (!has(shard)) done_.push_back(shard);
  save();
}

void Manifest::save() const {
  Json doc;
  doc["fingerprint"] = fingerprint_;
  doc["completed"] = done_;
  write_json(path(), doc);
}

}  // namespace ghzbayes::cli
