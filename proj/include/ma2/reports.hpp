#pragma once

#include <string>
#include <vector>

#include "ma2/policy.hpp"

namespace ma2 {

// One evaluated (task, variant, sampler) condition.
struct ResultsRow {
  std::string task;
  std::string variant;
  std::string sampler;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_stages = 0.0;
  double latency_ms = 0.0;
  long params = 0;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
};

// Fixed CSV schema; floats use shortest round-trip formatting so emission
// is byte-stable.
std::string results_csv(const ResultsTable& table);
void write_results_csv(const ResultsTable& table, const std::string& path);
ResultsTable read_results_csv(const std::string& path);

// Display names used in the plain-text success table, in its fixed row
// order: DP, DP-HistAct, TF-DP (trace), TF-DP.
std::string variant_display_name(const std::string& variant);
const std::vector<std::string>& variant_row_order();

// Plain-text success-rate table: one row per variant, one column per task
// (in the given order), percentages at 2 decimals, average column last.
std::string success_rate_table(const ResultsTable& table,
                               const std::vector<std::string>& tasks);

}  // namespace ma2
