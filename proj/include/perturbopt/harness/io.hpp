#pragma once

// Output files: versioned CSV tables, JSON documents, instance datasets and
// the run manifest with SHA-256 digests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perturbopt/problems.hpp"

namespace perturbopt::harness {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kCsvSchemaVersion = 1;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Cell formatting: shortest text that reads back to the same double.
std::string format_number(double v);

/// In-memory table written in one go. The first column is always
/// schema_version.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  /// Values are matched to columns by name; missing columns stay empty.
  void add(const std::map<std::string, std::string>& row);
  std::string render() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Collects emitted files and writes them under one directory. Nothing is
/// written until the owning command finishes a file, and the manifest goes
/// last.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);
  const std::filesystem::path& root() const { return root_; }

  void write_text(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& doc);
  void write_csv(const std::string& name, const CsvTable& table);

  const std::map<std::string, std::string>& digests() const { return digests_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> digests_;
};

struct Manifest {
  std::string command;
  std::string config_yaml;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, double> timings_s;
  std::map<std::string, std::string> digests;
  std::map<std::string, std::string> notes;
  unsigned threads = 1;

  nlohmann::json to_json() const;
};

void write_manifest(OutputDir& out, const Manifest& m);

/// One JSON document per line.
std::string instances_to_jsonl(const std::vector<Instance>& xs);
std::vector<Instance> instances_from_jsonl(const std::filesystem::path& path);

}  // namespace perturbopt::harness
