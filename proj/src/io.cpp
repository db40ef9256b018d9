#include "iptwsurv/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace iptwsurv {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::string_view view = line;
    if (first && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    first = false;
    if (trim(view).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      fields.emplace_back(trim(view.substr(start, comma == std::string_view::npos ? view.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::optional<double> parse_number(std::string_view field) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || end != field.data() + field.size()) return std::nullopt;
  return value;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, end);
}

CohortFile read_cohort_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw DataError(path.string() + ": empty file");
  const auto& header = rows.front();
  const std::vector<std::string> required{"id", "time", "event", "treatment"};
  if (header.size() < required.size() || !std::equal(required.begin(), required.end(), header.begin())) {
    throw DataError(path.string() + ": header must start with id,time,event,treatment");
  }
  CohortFile out;
  out.covariate_names.assign(header.begin() + 4, header.end());
  const std::size_t width = header.size();
  const auto p = static_cast<Index>(width - 4);
  const auto n = static_cast<Index>(rows.size() - 1);
  std::vector<std::int64_t> ids;
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXi z(n), event(n);
  Eigen::VectorXd time(n);
  std::set<std::int64_t> seen;
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i + 1)];
    const auto where = [&](const std::string& what) {
      return DataError(path.string() + ": line " + std::to_string(i + 2) + ": " + what);
    };
    if (row.size() != width) {
      throw where("expected " + std::to_string(width) + " fields, found " + std::to_string(row.size()));
    }
    std::int64_t id = 0;
    const auto& id_text = row[0];
    const auto [end, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (id_text.empty() || ec != std::errc() || end != id_text.data() + id_text.size()) {
      throw where("id '" + id_text + "' is not an integer");
    }
    if (!seen.insert(id).second) throw where("duplicate id " + id_text);
    ids.push_back(id);
    const auto t = parse_number(row[1]);
    if (!t || !std::isfinite(*t) || *t < 0.0) throw where("time '" + row[1] + "' must be a finite number >= 0");
    time[i] = *t;
    const auto flag = [&](const std::string& field, const char* name) {
      if (field != "0" && field != "1") throw where(std::string(name) + " '" + field + "' must be 0 or 1");
      return field == "1" ? 1 : 0;
    };
    event[i] = flag(row[2], "event");
    z[i] = flag(row[3], "treatment");
    for (Index k = 0; k < p; ++k) {
      const auto& field = row[static_cast<std::size_t>(k + 4)];
      const auto v = parse_number(field);
      if (!v || !std::isfinite(*v)) {
        throw where("covariate " + out.covariate_names[static_cast<std::size_t>(k)] + " '" + field +
                    "' is not a finite number");
      }
      x(i, k) = *v;
    }
  }
  out.cohort = Cohort(std::move(ids), std::move(x), std::move(z), std::move(time), std::move(event));
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_cohort_csv(const std::filesystem::path& path, const Cohort& cohort,
                      const std::vector<std::string>& covariate_names) {
  if (static_cast<Index>(covariate_names.size()) != cohort.n_covariates()) {
    throw InvalidArgument("write_cohort_csv: covariate names do not match the cohort");
  }
  auto out = open_output(path);
  out << "id,time,event,treatment";
  for (const auto& name : covariate_names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < cohort.size(); ++i) {
    out << cohort.ids()[static_cast<std::size_t>(i)] << ',' << format_number(cohort.time()[i]) << ','
        << cohort.event()[i] << ',' << cohort.treatment()[i];
    for (Index k = 0; k < cohort.n_covariates(); ++k) out << ',' << format_number(cohort.covariates()(i, k));
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace iptwsurv
