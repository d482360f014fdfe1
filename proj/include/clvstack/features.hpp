#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clvstack/core.hpp"
#include "clvstack/csv.hpp"
#include "clvstack/ingest.hpp"
#include "clvstack/timestamp.hpp"

namespace clvstack {

struct WindowSpec {
  Timestamp cutoff;               // exclusive end of the observation window
  std::int64_t target_horizon_days = 90;
  std::int64_t recent_window_days = 90;  // defines freq_3m
};

struct WindowSplit {
  std::map<std::int64_t, std::vector<PurchaseEvent>> observation;  // [data start, cutoff)
  std::map<std::int64_t, std::vector<PurchaseEvent>> target;       // [cutoff, cutoff + horizon)
};

struct FeatureRow {
  std::int64_t customer_id = 0;
  std::int64_t latetime = 0;   // days since last observed purchase
  std::int64_t earlytime = 0;  // days since first observed purchase
  std::int64_t freq = 0;       // distinct observed invoices
  std::int64_t freq_3m = 0;    // distinct observed invoices in the recent window
  std::int64_t target = 0;     // distinct invoices in the target window

  bool operator==(const FeatureRow&) const = default;
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"latetime", "earlytime", "freq", "freq_3m"};
  return names;
}

struct DesignMatrix {
  Matrix x;
  std::vector<std::string> feature_names;
  std::vector<double> target;
  std::vector<std::int64_t> customer_ids;

  std::size_t rows() const noexcept { return x.rows(); }

  DesignMatrix select_rows(std::span<const std::size_t> indices) const {
    return {x.select_rows(indices), feature_names, gather<double>(target, indices),
            gather<std::int64_t>(customer_ids, indices)};
  }
};

// The final calendar day of data is the last day of the target window:
// cutoff = (midnight after the last event) - horizon.
inline Timestamp default_cutoff(const CustomerLedger& ledger, std::int64_t horizon_days = 90) {
  auto range = ledger.date_range();
  require(range.has_value(), "cannot derive a cutoff from an empty ledger");
  return range->second.start_of_day().plus_days(1 - horizon_days);
}

inline WindowSplit split_windows(const CustomerLedger& ledger, const WindowSpec& spec) {
  require(spec.target_horizon_days > 0, "target_horizon_days must be positive");
  require(spec.recent_window_days > 0, "recent_window_days must be positive");
  auto range = ledger.date_range();
  require(range.has_value(), "split_windows: ledger has no events");
  require(spec.cutoff >= range->first && spec.cutoff <= range->second,
          "cutoff " + spec.cutoff.to_string() + " lies outside the data range " + range->first.to_string() + " .. " +
              range->second.to_string());

  const Timestamp target_end = spec.cutoff.plus_days(spec.target_horizon_days);
  WindowSplit split;
  for (const auto& [id, account] : ledger.accounts) {
    for (const auto& e : account.events) {
      if (e.time < spec.cutoff)
        split.observation[id].push_back(e);
      else if (e.time < target_end)
        split.target[id].push_back(e);
    }
  }
  return split;
}

inline std::vector<FeatureRow> featurize(const WindowSplit& windows, const WindowSpec& spec) {
  const Timestamp recent_start = spec.cutoff.plus_days(-spec.recent_window_days);
  std::vector<FeatureRow> rows;
  rows.reserve(windows.observation.size());
  for (const auto& [id, events] : windows.observation) {
    if (events.empty()) continue;
    Timestamp first = events.front().time, last = events.front().time;
    std::set<std::string_view> invoices, recent;
    for (const auto& e : events) {
      first = std::min(first, e.time);
      last = std::max(last, e.time);
      invoices.insert(e.invoice);
      if (e.time >= recent_start) recent.insert(e.invoice);
    }
    FeatureRow row;
    row.customer_id = id;
    row.latetime = floor_days_between(last, spec.cutoff);
    row.earlytime = floor_days_between(first, spec.cutoff);
    row.freq = static_cast<std::int64_t>(invoices.size());
    row.freq_3m = static_cast<std::int64_t>(recent.size());
    if (auto it = windows.target.find(id); it != windows.target.end()) {
      std::set<std::string_view> future;
      for (const auto& e : it->second) future.insert(e.invoice);
      row.target = static_cast<std::int64_t>(future.size());
    }
    rows.push_back(row);
  }
  return rows;
}

// Columns [latetime, earlytime, freq, freq_3m], rows by ascending customer id.
inline DesignMatrix to_matrix(std::vector<FeatureRow> rows) {
  require(!rows.empty(), "to_matrix: no feature rows");
  std::sort(rows.begin(), rows.end(),
            [](const FeatureRow& a, const FeatureRow& b) { return a.customer_id < b.customer_id; });
  DesignMatrix dm;
  dm.x = Matrix(rows.size(), 4);
  dm.feature_names = feature_names();
  dm.target.reserve(rows.size());
  dm.customer_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    dm.x(i, 0) = static_cast<double>(r.latetime);
    dm.x(i, 1) = static_cast<double>(r.earlytime);
    dm.x(i, 2) = static_cast<double>(r.freq);
    dm.x(i, 3) = static_cast<double>(r.freq_3m);
    dm.target.push_back(static_cast<double>(r.target));
    dm.customer_ids.push_back(r.customer_id);
  }
  return dm;
}

inline void write_features_csv(std::ostream& out, std::span<const FeatureRow> rows) {
  out << "customer_id,latetime,earlytime,freq,freq_3m,target\n";
  for (const auto& r : rows) {
    out << r.customer_id << ',' << r.latetime << ',' << r.earlytime << ',' << r.freq << ',' << r.freq_3m << ','
        << r.target << '\n';
  }
}

inline std::vector<FeatureRow> read_features_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> fields;
  const std::vector<std::string> expected{"customer_id", "latetime", "earlytime", "freq", "freq_3m", "target"};
  require(reader.next(fields), "feature file is empty");
  for (auto& f : fields) f = std::string(detail::trim(f));
  require(fields == expected, "feature file header must be customer_id,latetime,earlytime,freq,freq_3m,target");

  std::vector<FeatureRow> rows;
  std::size_t line = 1;
  while (reader.next(fields)) {
    ++line;
    if (csv::is_blank(fields)) continue;
    require(fields.size() == expected.size(), "feature file line " + std::to_string(line) + ": wrong field count");
    std::int64_t values[6];
    for (std::size_t i = 0; i < 6; ++i) {
      auto v = detail::parse_integer(fields[i]);
      require(v.has_value(), "feature file line " + std::to_string(line) + ": bad integer '" + fields[i] + "'");
      values[i] = *v;
    }
    rows.push_back({values[0], values[1], values[2], values[3], values[4], values[5]});
  }
  return rows;
}

}  // namespace clvstack
