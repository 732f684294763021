#pragma once
// Flat `key = value` run configuration.
//
// Precedence: command-line flags > config file > built-in defaults.  Unknown
// keys are rejected so typos cannot silently fall back to defaults.  The
// fully resolved table is echoed into every output file header, which makes
// any artifact reproducible from its own provenance block.

#include <map>
#include <string>
#include <vector>

namespace coreflow {

class RunConfig {
 public:
  /// Construct with the library-wide defaults (see config.cpp for the table).
  RunConfig();

  /// Parse a config file (lines of `key = value`, `#` comments, blank lines
  /// ignored).  Throws std::runtime_error naming the offending line on
  /// malformed input or unknown keys.
  void load_file(const std::string& path);

  /// Apply one `key=value` override (CLI layer).  Throws on unknown keys.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Resolved table in deterministic (sorted) order, one `key = value` per
  /// line, for embedding into provenance headers.
  std::string render() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Version string stamped into every artifact.
const char* artifact_version();

}  // namespace coreflow
