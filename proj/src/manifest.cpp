#include "unires/manifest.hpp"

#include <fstream>
#include <sstream>

namespace unires {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string relative_text(const std::filesystem::path& p, const std::filesystem::path& base) {
  const auto abs = std::filesystem::weakly_canonical(std::filesystem::absolute(p));
  const auto root = std::filesystem::weakly_canonical(std::filesystem::absolute(base));
  const auto rel = abs.lexically_relative(root);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return abs.generic_string();
}

}  // namespace

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestRecord> records;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 4) {
      throw ManifestError(path.string() + ":" + std::to_string(number) + ": expected 4 tab-separated columns");
    }
    ManifestRecord r;
    r.lq_path = cols[0];
    r.hq_path = cols[1];
    if (r.lq_path.is_relative()) r.lq_path = base / r.lq_path;
    if (r.hq_path.is_relative()) r.hq_path = base / r.hq_path;
    r.kind = cols[2];
    r.recipe_id = cols[3];
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  std::ostringstream out;
  for (const auto& r : records) {
    out << relative_text(r.lq_path, base) << '\t' << relative_text(r.hq_path, base) << '\t' << r.kind << '\t'
        << r.recipe_id << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ManifestError("cannot write manifest " + path.string());
  file << out.str();
}

}  // namespace unires
