#include "coreflow/pointcloud.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "coreflow/config.hpp"
#include "coreflow/hashing.hpp"

namespace coreflow {

std::string format_double(double x) {
  // %.17g guarantees an exact binary round-trip for finite doubles (and in
  // particular preserves 15 significant decimal digits).
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string to_csv(const PointCloud& cloud) {
  std::ostringstream out;
  out << "# " << artifact_version() << "\n";
  for (const auto& [k, v] : cloud.meta) out << "# " << k << " = " << v << "\n";
  if (!cloud.config_block.empty()) {
    out << "# config:\n";
    std::istringstream cfg(cloud.config_block);
    std::string line;
    while (std::getline(cfg, line)) out << "#   " << line << "\n";
  }
  const int d = cloud.d();
  for (int j = 0; j < d; ++j) out << (j ? "," : "") << "c" << j;
  out << "\n";
  for (int i = 0; i < cloud.n(); ++i) {
    for (int j = 0; j < d; ++j) {
      out << (j ? "," : "") << format_double(cloud.points(i, j));
    }
    out << "\n";
  }
  return out.str();
}

PointCloud from_csv(const std::string& text) {
  PointCloud cloud;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  bool in_config = false;
  std::vector<std::vector<double>> rows;
  int d = -1;
  std::ostringstream config;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body = body.substr(1);
      if (body == "config:") {
        in_config = true;
        continue;
      }
      if (in_config && body.rfind("  ", 0) == 0) {
        config << body.substr(2) << "\n";
        continue;
      }
      in_config = false;
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        auto trim = [](std::string s) {
          const auto a = s.find_first_not_of(' ');
          if (a == std::string::npos) return std::string();
          const auto b = s.find_last_not_of(' ');
          return s.substr(a, b - a + 1);
        };
        cloud.meta[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      }
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw std::runtime_error("csv line " + std::to_string(lineno) +
                                 ": bad number: " + cell);
      }
    }
    if (d < 0) d = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != d) {
      throw std::runtime_error("csv line " + std::to_string(lineno) +
                               ": expected " + std::to_string(d) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error("csv: missing column header");
  cloud.config_block = config.str();
  cloud.points.resize(static_cast<int>(rows.size()), d < 0 ? 0 : d);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    for (int j = 0; j < d; ++j) cloud.points(i, j) = rows[i][j];
  }
  return cloud;
}

void save_csv(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << to_csv(cloud);
}

PointCloud load_csv(const std::string& path) { return from_csv(slurp_file(path)); }

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  return hash_hex(slurp_file(path));
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace coreflow
