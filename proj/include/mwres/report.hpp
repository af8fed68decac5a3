#pragma once

// Human-readable comparison of a run manifest against the configured ground
// truth and published reference values.

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace mwres {

enum class CheckStatus { pass, fail, not_run, info };

struct ReportRow {
  std::string name;
  std::string measured;
  std::string reference;
  CheckStatus status = CheckStatus::info;
  std::string note;
};

struct Report {
  std::vector<ReportRow> rows;

  bool passed() const;
  std::vector<std::string> failing() const;
};

Report build_report(const nlohmann::json& manifest);

/// Prints the table and returns the CLI exit status: 0 when every check
/// passes, 4 otherwise.
int emit_report(const nlohmann::json& manifest, std::ostream& out);

}  // namespace mwres
