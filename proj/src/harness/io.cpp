#include "perturbopt/harness/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace perturbopt::harness {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> columns) {
  columns_.push_back("schema_version");
  for (auto& c : columns) columns_.push_back(std::move(c));
}

void CsvTable::add(const std::map<std::string, std::string>& row) {
  std::vector<std::string> cells(columns_.size());
  cells[0] = std::to_string(kCsvSchemaVersion);
  for (const auto& [key, value] : row) {
    bool found = false;
    for (std::size_t j = 1; j < columns_.size(); ++j) {
      if (columns_[j] == key) {
        cells[j] = value;
        found = true;
      }
    }
    if (!found) throw InvalidArgument("unknown CSV column " + key);
  }
  rows_.push_back(std::move(cells));
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string CsvTable::render() const {
  std::ostringstream out;
  for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << columns_[j];
  out << '\n';
  for (const auto& r : rows_) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << quote(r[j]);
    out << '\n';
  }
  return out.str();
}

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec || !std::filesystem::is_directory(root_)) {
    throw Error("cannot create output directory " + root_.string());
  }
}

void OutputDir::write_text(const std::string& name, const std::string& content) {
  const auto path = root_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw Error("write failed for " + path.string());
  digests_[name] = sha256_hex(content);
}

void OutputDir::write_json(const std::string& name, const nlohmann::json& doc) {
  write_text(name, doc.dump(2) + "\n");
}

void OutputDir::write_csv(const std::string& name, const CsvTable& table) {
  write_text(name, table.render());
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json seeds_doc = nlohmann::json::object();
  for (const auto& [k, v] : seeds) seeds_doc[k] = std::to_string(v);
  return {{"artifact_version", kArtifactVersion},
          {"csv_schema_version", kCsvSchemaVersion},
          {"command", command},
          {"config", config_yaml},
          {"seeds", seeds_doc},
          {"timings_s", timings_s},
          {"threads", threads},
          {"files", digests},
          {"notes", notes}};
}

void write_manifest(OutputDir& out, const Manifest& m) {
  Manifest full = m;
  full.digests = out.digests();
  const auto path = out.root() / "manifest.json";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << full.to_json().dump(2) << '\n';
}

std::string instances_to_jsonl(const std::vector<Instance>& xs) {
  std::string out;
  for (const auto& x : xs) {
    out += to_json(x).dump();
    out += '\n';
  }
  return out;
}

std::vector<Instance> instances_from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path.string());
  std::vector<Instance> xs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      xs.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return xs;
}

}  // namespace perturbopt::harness
