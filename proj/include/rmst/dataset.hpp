#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace rmst {

struct SurvivalRecord {
  double time = 0.0;  // observed min(event time, censoring time), years
  bool event = false;
  int arm = 0;  // 1 = experimental, 0 = control
  std::vector<double> covariates;
};

struct Dataset {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t event_count() const;
  std::size_t arm_count(int arm) const;
  // Largest observed time (event or censored) among records of one arm.
  // Returns -1 if the arm is absent.
  double max_time_in_arm(int arm) const;
  Dataset subset_arm(int arm) const;
  int covariate_index(const std::string& name) const;  // -1 when absent
};

// Structural checks: finite non-negative times, arms in {0,1}, covariate
// vectors matching covariate_names. Throws Error(InvalidSpec).
void check_structure(const Dataset& data);

// Structural checks plus the analysis requirement of at least two events.
void validate_for_analysis(const Dataset& data);

struct CsvReadResult {
  Dataset data;
  std::size_t rejected_rows = 0;  // rows with a missing covariate cell
};

// Header-driven reader: `time`, `event` and `arm` columns are required and
// every other column is a covariate, kept in file order. Empty cells and
// `NA` mark a missing value; such rows are dropped and counted.
CsvReadResult read_dataset_csv(std::istream& in);
CsvReadResult read_dataset_csv(const std::string& path);

void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace rmst
