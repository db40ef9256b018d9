#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <fstream>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

/// Comma-separated rows with surrounding whitespace trimmed; blank lines are skipped.
/// No quoting: every field in the supported files is numeric or a bare name.
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);

/// Whole-field decimal number; nullopt for anything else (including NA).
std::optional<double> parse_number(std::string_view field);

/// Shortest text that reads back to the same double; "NA" for NaN.
std::string format_number(double value);

/// Applied-mode subject file: header `id,time,event,treatment,x1..xp`.
struct CohortFile {
  Cohort cohort;
  std::vector<std::string> covariate_names;
};

/// Throws DataError naming the offending line for any schema violation.
CohortFile read_cohort_csv(const std::filesystem::path& path);

void write_cohort_csv(const std::filesystem::path& path, const Cohort& cohort,
                      const std::vector<std::string>& covariate_names);

/// Opens `path` for writing, creating parent directories; throws Error with the path.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace iptwsurv
