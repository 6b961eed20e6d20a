// SPDX-License-Identifier: Apache-2.0
#include "crossyield/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace crossyield {

namespace {

constexpr const char* kHeader = "inbred,tester,location,genetic_group,year,yield";

[[noreturn]] void csv_fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw InputError(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

struct RawRow {
  std::string inbred, tester, location, group;
  int year;
  double yield;
};

int index_of(const std::vector<std::string>& sorted_ids, const std::string& id) {
  auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
  return static_cast<int>(it - sorted_ids.begin());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t Dataset::tested_combination_count() const {
  std::set<std::pair<int, int>> combos;
  for (const auto& o : observations) combos.emplace(o.inbred, o.tester);
  return combos.size();
}

void Dataset::resolve_modal_groups() {
  // counts[b][g] over observations; modal with smallest-index tie-break.
  std::vector<std::map<int, std::size_t>> counts(n_inbreds);
  for (const auto& o : observations) counts[o.inbred][o.genetic_group]++;
  inbred_modal_group.assign(n_inbreds, 0);
  for (int b = 0; b < n_inbreds; ++b) {
    std::size_t best_count = 0;
    int best_group = 0;
    for (const auto& [g, c] : counts[b]) {
      if (c > best_count) {
        best_count = c;
        best_group = g;
      }
    }
    inbred_modal_group[b] = best_group;
  }
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("load_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    csv_fail(path, 1, "header must be exactly `" + std::string(kHeader) + "`, got `" + line + "`");
  }

  std::vector<RawRow> rows;
  std::set<std::string> inbreds, testers, locations, groups;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 6) {
      csv_fail(path, lineno, "expected 6 columns, got " + std::to_string(fields.size()));
    }
    for (int i = 0; i < 4; ++i) {
      if (fields[i].empty()) csv_fail(path, lineno, "empty ID field");
    }
    RawRow row;
    row.inbred = fields[0];
    row.tester = fields[1];
    row.location = fields[2];
    row.group = fields[3];
    {
      auto res = std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(), row.year);
      if (res.ec != std::errc{} || res.ptr != fields[4].data() + fields[4].size()) {
        csv_fail(path, lineno, "non-integer year `" + fields[4] + "`");
      }
    }
    {
      auto res = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), row.yield);
      if (res.ec != std::errc{} || res.ptr != fields[5].data() + fields[5].size()) {
        csv_fail(path, lineno, "non-numeric yield `" + fields[5] + "`");
      }
      if (!std::isfinite(row.yield)) csv_fail(path, lineno, "non-finite yield");
    }
    inbreds.insert(row.inbred);
    testers.insert(row.tester);
    locations.insert(row.location);
    groups.insert(row.group);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("load_csv: " + path + " has no data rows");

  Dataset ds;
  ds.inbred_ids.assign(inbreds.begin(), inbreds.end());
  ds.tester_ids.assign(testers.begin(), testers.end());
  ds.location_ids.assign(locations.begin(), locations.end());
  ds.group_ids.assign(groups.begin(), groups.end());
  ds.n_inbreds = static_cast<int>(ds.inbred_ids.size());
  ds.n_testers = static_cast<int>(ds.tester_ids.size());
  ds.n_locations = static_cast<int>(ds.location_ids.size());
  ds.n_groups = static_cast<int>(ds.group_ids.size());

  ds.observations.reserve(rows.size());
  for (const auto& row : rows) {
    CrossObservation o;
    o.inbred = index_of(ds.inbred_ids, row.inbred);
    o.tester = index_of(ds.tester_ids, row.tester);
    o.location = index_of(ds.location_ids, row.location);
    o.genetic_group = index_of(ds.group_ids, row.group);
    o.year = row.year;
    o.yield = row.yield;
    ds.observations.push_back(o);
  }
  ds.resolve_modal_groups();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("write_csv: cannot open " + path + " for writing");
  out << kHeader << "\n";
  for (const auto& o : ds.observations) {
    out << ds.inbred_ids[o.inbred] << ',' << ds.tester_ids[o.tester] << ','
        << ds.location_ids[o.location] << ',' << ds.group_ids[o.genetic_group] << ',' << o.year
        << ',' << format_double(o.yield) << "\n";
  }
  if (!out) throw InputError("write_csv: write failed for " + path);
}

CensusSummary census(const Dataset& ds) {
  if (ds.observations.empty()) throw InputError("census: empty dataset");
  CensusSummary s;
  s.n_inbreds = ds.n_inbreds;
  s.n_testers = ds.n_testers;
  s.n_locations = ds.n_locations;
  s.n_groups = ds.n_groups;
  s.observation_count = ds.observations.size();
  s.tested_combinations = ds.tested_combination_count();
  s.tested_fraction = static_cast<double>(s.tested_combinations) /
                      (static_cast<double>(ds.n_inbreds) * static_cast<double>(ds.n_testers));
  double sum = 0.0;
  for (const auto& o : ds.observations) sum += o.yield;
  s.yield_mean = sum / static_cast<double>(ds.observations.size());
  double ss = 0.0;
  for (const auto& o : ds.observations) {
    double d = o.yield - s.yield_mean;
    ss += d * d;
  }
  s.yield_std = std::sqrt(ss / static_cast<double>(ds.observations.size()));
  return s;
}

}  // namespace crossyield
