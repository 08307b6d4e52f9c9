#pragma once

// Batch runs driven by a JSON configuration:
//
//   { "schema_version": 1, "problem": "vi-solve",
//     "material": {"sigma": 0.2, "half_width": 0.1}, "mesh": {"nx": 64, "ny": 16},
//     "series": {"m_max": 200}, "output_dir": "out", "threads": 1, "params": {...} }
//
// Unknown fields are rejected at every level. Every run writes summary.json
// (embedding the resolved configuration) plus problem-specific CSV files.

#include <memory>
#include <string>
#include <vector>

namespace plateobs {

inline constexpr int kSchemaVersion = 1;

/// Command-line style overrides; zero / empty leaves the configuration value.
struct RunOverrides {
  std::string problem;
  std::string output_dir;
  int threads = 0;
  int m_max = 0;
  int nx = 0;
  int ny = 0;
};

struct RunOutcome;

class RunConfig {
 public:
  /// Throws ValidationError on malformed JSON or a non-object document.
  static RunConfig parse(const std::string& json_text);

  /// A problem override that disagrees with an explicit config problem is
  /// reported by validate().
  void apply(const RunOverrides& overrides);

  /// Every invariant violation, without running; empty iff runnable.
  std::vector<std::string> validate() const;

  /// Configuration with all defaults filled in (only meaningful when valid).
  std::string resolved_json() const;

  struct Doc;
  friend RunOutcome run(const RunConfig& config);

 private:
  std::shared_ptr<Doc> doc_;
};

struct RunOutcome {
  std::string summary_json;
  std::vector<std::string> files;  // written paths, in write order
};

/// Validates, runs and writes the artifacts. Throws ValidationError (with all
/// diagnostics joined), IterationLimitError, UnsupportedError or IoError.
RunOutcome run(const RunConfig& config);

}  // namespace plateobs
