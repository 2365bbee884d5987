#include "rmst/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rmst/error.hpp"

namespace rmst {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InsufficientEvents: return "InsufficientEvents";
    case ErrorKind::SingleArm: return "SingleArm";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::NonFiniteTarget: return "NonFiniteTarget";
    case ErrorKind::TooFewDraws: return "TooFewDraws";
    case ErrorKind::UnknownParameter: return "UnknownParameter";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::Unachievable: return "Unachievable";
    case ErrorKind::TooFewConverged: return "TooFewConverged";
    case ErrorKind::InputError: return "InputError";
  }
  return "Unknown";
}

std::size_t Dataset::event_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.event; }));
}

std::size_t Dataset::arm_count(int arm) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [arm](const auto& r) { return r.arm == arm; }));
}

double Dataset::max_time_in_arm(int arm) const {
  double best = -1.0;
  for (const auto& r : records) {
    if (r.arm == arm) best = std::max(best, r.time);
  }
  return best;
}

Dataset Dataset::subset_arm(int arm) const {
  Dataset out;
  out.covariate_names = covariate_names;
  for (const auto& r : records) {
    if (r.arm == arm) out.records.push_back(r);
  }
  return out;
}

int Dataset::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  return it == covariate_names.end() ? -1 : static_cast<int>(it - covariate_names.begin());
}

void check_structure(const Dataset& data) {
  const auto p = data.covariate_names.size();
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    if (!std::isfinite(r.time) || r.time < 0.0) {
      throw Error(ErrorKind::InvalidSpec, "record " + std::to_string(i) + ": time must be finite and >= 0");
    }
    if (r.arm != 0 && r.arm != 1) {
      throw Error(ErrorKind::InvalidSpec, "record " + std::to_string(i) + ": arm must be 0 or 1");
    }
    if (r.covariates.size() != p) {
      throw Error(ErrorKind::InvalidSpec, "record " + std::to_string(i) + ": expected " + std::to_string(p) +
                                              " covariates, got " + std::to_string(r.covariates.size()));
    }
    for (double z : r.covariates) {
      if (!std::isfinite(z)) {
        throw Error(ErrorKind::InvalidSpec, "record " + std::to_string(i) + ": non-finite covariate");
      }
    }
  }
}

void validate_for_analysis(const Dataset& data) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no records");
  check_structure(data);
  if (data.event_count() < 2) {
    throw Error(ErrorKind::InsufficientEvents, "at least two observed events are required");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "na" || cell == "."; }

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
  std::istringstream ss(cell);
  ss.imbue(std::locale::classic());
  double v = 0.0;
  ss >> v;
  if (ss.fail() || !ss.eof()) {
    throw Error(ErrorKind::InputError,
                "line " + std::to_string(line_no) + ", column '" + column + "': cannot parse '" + cell + "'");
  }
  return v;
}

}  // namespace

CsvReadResult read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  // skip blank lines and a UTF-8 BOM before the header
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorKind::InputError, "missing CSV header");

  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  int time_col = -1, event_col = -1, arm_col = -1;
  std::vector<int> cov_cols;
  CsvReadResult result;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == "time") {
      time_col = c;
    } else if (header[c] == "event") {
      event_col = c;
    } else if (header[c] == "arm") {
      arm_col = c;
    } else {
      if (header[c].empty()) throw Error(ErrorKind::InputError, "empty column name in header");
      cov_cols.push_back(c);
      result.data.covariate_names.push_back(header[c]);
    }
  }
  if (time_col < 0 || event_col < 0 || arm_col < 0) {
    throw Error(ErrorKind::InputError, "header must contain time, event and arm columns");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::InputError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " cells, got " +
                                             std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);

    bool missing = false;
    for (int c : cov_cols) missing = missing || is_missing(cells[c]);
    if (missing) {
      ++result.rejected_rows;
      continue;
    }
    for (int c : {time_col, event_col, arm_col}) {
      if (is_missing(cells[c])) {
        throw Error(ErrorKind::InputError,
                    "line " + std::to_string(line_no) + ": missing value in column '" + header[c] + "'");
      }
    }

    SurvivalRecord rec;
    rec.time = parse_number(cells[time_col], line_no, "time");
    double ev = parse_number(cells[event_col], line_no, "event");
    double arm = parse_number(cells[arm_col], line_no, "arm");
    if (ev != 0.0 && ev != 1.0) {
      throw Error(ErrorKind::InputError, "line " + std::to_string(line_no) + ": event must be 0 or 1");
    }
    if (arm != 0.0 && arm != 1.0) {
      throw Error(ErrorKind::InputError, "line " + std::to_string(line_no) + ": arm must be 0 or 1");
    }
    if (!std::isfinite(rec.time) || rec.time < 0.0) {
      throw Error(ErrorKind::InputError, "line " + std::to_string(line_no) + ": time must be finite and >= 0");
    }
    rec.event = ev == 1.0;
    rec.arm = static_cast<int>(arm);
    rec.covariates.reserve(cov_cols.size());
    for (int c : cov_cols) rec.covariates.push_back(parse_number(cells[c], line_no, header[c]));
    result.data.records.push_back(std::move(rec));
  }
  return result;
}

CsvReadResult read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InputError, "cannot open '" + path + "'");
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "time,event,arm";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  char buf[64];
  for (const auto& r : data.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.time);
    out << buf << ',' << (r.event ? 1 : 0) << ',' << r.arm;
    for (double z : r.covariates) {
      std::snprintf(buf, sizeof buf, "%.17g", z);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InputError, "cannot write '" + path + "'");
  write_dataset_csv(out, data);
}

}  // namespace rmst
