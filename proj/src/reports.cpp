#include "ma2/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ma2/config.hpp"

namespace ma2 {

namespace {
const char* kHeader =
    "task,variant,sampler,trials,successes,success_rate,mean_stages,"
    "latency_ms,params";
}

std::string results_csv(const ResultsTable& table) {
  std::string out = kHeader;
  out += '\n';
  for (const auto& row : table.rows) {
    out += row.task + ',' + row.variant + ',' + row.sampler + ',' +
           std::to_string(row.trials) + ',' + std::to_string(row.successes) +
           ',' + format_double(row.success_rate) + ',' +
           format_double(row.mean_stages) + ',' + format_double(row.latency_ms) +
           ',' + std::to_string(row.params) + '\n';
  }
  return out;
}

void write_results_csv(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write results: " + path);
  out << results_csv(table);
  if (!out) throw ConfigError("write failed: " + path);
}

ResultsTable read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read results: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ConfigError("bad results header in " + path);
  }
  ResultsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw ConfigError("bad results row in " + path);
    ResultsRow row;
    row.task = cells[0];
    row.variant = cells[1];
    row.sampler = cells[2];
    row.trials = std::stoi(cells[3]);
    row.successes = std::stoi(cells[4]);
    row.success_rate = std::stod(cells[5]);
    row.mean_stages = std::stod(cells[6]);
    row.latency_ms = std::stod(cells[7]);
    row.params = std::stol(cells[8]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string variant_display_name(const std::string& variant) {
  if (variant == "dp") return "DP";
  if (variant == "dp_histact") return "DP-HistAct";
  if (variant == "tf_trace") return "TF-DP (trace)";
  if (variant == "tf_full") return "TF-DP";
  return variant;
}

const std::vector<std::string>& variant_row_order() {
  static const std::vector<std::string> order = {"dp", "dp_histact", "tf_trace",
                                                 "tf_full"};
  return order;
}

std::string success_rate_table(const ResultsTable& table,
                               const std::vector<std::string>& tasks) {
  auto find_rate = [&](const std::string& variant, const std::string& task,
                       double* rate) {
    for (const auto& row : table.rows) {
      if (row.variant == variant && row.task == task) {
        *rate = row.success_rate;
        return true;
      }
    }
    return false;
  };

  const int name_width = 14;
  const int cell_width = 18;
  std::ostringstream out;
  out << std::string(name_width, ' ');
  for (const auto& task : tasks) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%*s", cell_width, task.c_str());
    out << buf;
  }
  {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%*s", cell_width, "average");
    out << buf;
  }
  out << '\n';

  for (const auto& variant : variant_row_order()) {
    double sum = 0.0;
    int found = 0;
    std::vector<std::string> cells;
    for (const auto& task : tasks) {
      double rate = 0.0;
      if (find_rate(variant, task, &rate)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * rate);
        cells.emplace_back(buf);
        sum += rate;
        ++found;
      } else {
        cells.emplace_back("-");
      }
    }
    if (found == 0) continue;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-*s", name_width,
                  variant_display_name(variant).c_str());
    out << buf;
    for (const auto& cell : cells) {
      std::snprintf(buf, sizeof(buf), "%*s", cell_width, cell.c_str());
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * sum / found);
    std::string avg(buf);
    std::snprintf(buf, sizeof(buf), "%*s", cell_width, avg.c_str());
    out << buf << '\n';
  }
  return out.str();
}

}  // namespace ma2
