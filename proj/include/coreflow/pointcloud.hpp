#pragma once
// Point-cloud container and its CSV persistence format.
//
// Layout on disk:
//   # coreflow 0.1.0
//   # key = value            (metadata/provenance lines, one pair per line)
//   # config:
//   #   key = value          (resolved run configuration, indented)
//   c0,c1,...                (column header)
//   1.5,-0.25,...            (one row per point, full double round-trip)
//
// Metadata always includes dataset, n, d, seed; generated clouds add NFE,
// J, L and the hashes of the model/net files they came from.  No
// timestamps anywhere: equal inputs must produce byte-identical files.

#include <map>
#include <string>

#include <Eigen/Core>

namespace coreflow {

struct PointCloud {
  Eigen::MatrixXd points;                       // n x d, row per sample
  std::map<std::string, std::string> meta;      // provenance pairs
  std::string config_block;                     // resolved config (optional)

  int n() const { return static_cast<int>(points.rows()); }
  int d() const { return static_cast<int>(points.cols()); }
};

/// Render a double so that parsing it back returns the same bits.
std::string format_double(double x);

/// Serialize to the CSV format above.
std::string to_csv(const PointCloud& cloud);

/// Parse the CSV format; throws std::runtime_error with the offending line
/// number on malformed input.
PointCloud from_csv(const std::string& text);

void save_csv(const PointCloud& cloud, const std::string& path);
PointCloud load_csv(const std::string& path);

}  // namespace coreflow
