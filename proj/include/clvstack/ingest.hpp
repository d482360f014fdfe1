#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/csv.hpp"
#include "clvstack/money.hpp"
#include "clvstack/timestamp.hpp"

namespace clvstack {

// Header names for the eight retail columns.
struct ColumnMapping {
  std::string invoice = "Invoice";
  std::string stock_code = "StockCode";
  std::string description = "Description";
  std::string quantity = "Quantity";
  std::string invoice_date = "InvoiceDate";
  std::string price = "Price";
  std::string customer_id = "Customer ID";
  std::string country = "Country";
};

struct RawRecord {
  std::string invoice;
  std::string stock_code;
  std::optional<std::string> description;
  std::int64_t quantity = 0;
  Timestamp invoice_datetime;
  Money unit_price;
  std::optional<std::int64_t> customer_id;
  std::string country;
};

struct ParseError {
  std::size_t row = 0;  // 1-based data row, header excluded
  std::string reason;
};

struct ParseResult {
  std::vector<RawRecord> records;
  std::vector<ParseError> errors;
};

// A retained line item. Invariants: quantity > 0, unit_price > 0, not a
// cancellation, revenue == quantity * unit_price exactly.
struct Transaction {
  std::string invoice;
  std::string stock_code;
  std::optional<std::string> description;
  std::int64_t quantity = 0;
  Timestamp invoice_datetime;
  Money unit_price;
  std::int64_t customer_id = 0;
  std::string country;
  Money revenue;

  RawRecord to_raw() const {
    return {invoice, stock_code, description, quantity, invoice_datetime, unit_price, customer_id, country};
  }
};

struct CleanReport {
  std::size_t cancellation = 0;
  std::size_t non_positive_price = 0;
  std::size_t non_positive_quantity = 0;
  std::size_t missing_customer = 0;
  std::size_t unparseable = 0;
  std::size_t retained = 0;

  std::size_t removed() const noexcept {
    return cancellation + non_positive_price + non_positive_quantity + missing_customer + unparseable;
  }
  std::size_t input_rows() const noexcept { return removed() + retained; }
};

inline void to_json(nlohmann::json& j, const CleanReport& r) {
  j = nlohmann::json{{"input_rows", r.input_rows()},
                     {"retained", r.retained},
                     {"removed",
                      {{"cancellation", r.cancellation},
                       {"non_positive_price", r.non_positive_price},
                       {"non_positive_quantity", r.non_positive_quantity},
                       {"missing_customer", r.missing_customer},
                       {"unparseable", r.unparseable}}}};
}

struct CleanResult {
  std::vector<Transaction> transactions;
  CleanReport report;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Integer, also accepting an integral decimal such as "13085.0" (spreadsheet
// exports write ids that way).
inline std::optional<std::int64_t> parse_integer(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    auto frac = text.substr(dot + 1);
    if (!std::all_of(frac.begin(), frac.end(), [](char c) { return c == '0'; })) return std::nullopt;
    text = text.substr(0, dot);
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline bool is_cancellation(std::string_view invoice) {
  invoice = trim(invoice);
  return !invoice.empty() && (invoice.front() == 'C' || invoice.front() == 'c');
}

}  // namespace detail

// Parses a retail CSV. Throws InputError if the header lacks a mapped
// column; every malformed data row is reported in `errors`.
inline ParseResult parse_transactions(std::istream& source, const ColumnMapping& mapping = {}) {
  csv::Reader reader(source);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw InputError("input has no header row");

  std::map<std::string, std::size_t, std::less<>> header;
  for (std::size_t i = 0; i < fields.size(); ++i) header.emplace(std::string(detail::trim(fields[i])), i);
  auto column = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) throw InputError("missing required column '" + name + "' in header");
    return it->second;
  };
  const std::size_t c_invoice = column(mapping.invoice);
  const std::size_t c_stock = column(mapping.stock_code);
  const std::size_t c_desc = column(mapping.description);
  const std::size_t c_qty = column(mapping.quantity);
  const std::size_t c_date = column(mapping.invoice_date);
  const std::size_t c_price = column(mapping.price);
  const std::size_t c_customer = column(mapping.customer_id);
  const std::size_t c_country = column(mapping.country);
  const std::size_t width = fields.size();

  ParseResult result;
  std::size_t row = 0;
  while (reader.next(fields)) {
    ++row;
    if (csv::is_blank(fields)) continue;
    if (fields.size() != width) {
      result.errors.push_back({row, "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size())});
      continue;
    }
    RawRecord rec;
    rec.invoice = std::string(detail::trim(fields[c_invoice]));
    rec.stock_code = std::string(detail::trim(fields[c_stock]));
    if (!fields[c_desc].empty()) rec.description = fields[c_desc];
    rec.country = fields[c_country];

    auto qty = detail::parse_integer(fields[c_qty]);
    if (!qty) {
      result.errors.push_back({row, "unparseable quantity '" + fields[c_qty] + "'"});
      continue;
    }
    rec.quantity = *qty;
    auto when = parse_timestamp(fields[c_date]);
    if (!when) {
      result.errors.push_back({row, "unparseable timestamp '" + fields[c_date] + "'"});
      continue;
    }
    rec.invoice_datetime = *when;
    auto price = Money::parse(fields[c_price]);
    if (!price) {
      result.errors.push_back({row, "unparseable price '" + fields[c_price] + "'"});
      continue;
    }
    rec.unit_price = *price;
    if (!detail::trim(fields[c_customer]).empty()) {
      auto id = detail::parse_integer(fields[c_customer]);
      if (!id) {
        result.errors.push_back({row, "unparseable customer id '" + fields[c_customer] + "'"});
        continue;
      }
      rec.customer_id = *id;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

// Filters records to valid transactions. Rules are checked in order and a
// record is counted under the first one it fails.
inline CleanResult clean(std::span<const RawRecord> records, std::size_t unparseable_rows = 0) {
  CleanResult out;
  out.report.unparseable = unparseable_rows;
  out.transactions.reserve(records.size());
  for (const auto& r : records) {
    if (detail::is_cancellation(r.invoice)) {
      ++out.report.cancellation;
    } else if (r.unit_price <= Money{}) {
      ++out.report.non_positive_price;
    } else if (r.quantity <= 0) {
      ++out.report.non_positive_quantity;
    } else if (!r.customer_id) {
      ++out.report.missing_customer;
    } else {
      out.transactions.push_back({r.invoice, r.stock_code, r.description, r.quantity, r.invoice_datetime,
                                  r.unit_price, *r.customer_id, r.country, r.unit_price.times(r.quantity)});
    }
  }
  out.report.retained = out.transactions.size();
  return out;
}

inline CleanResult clean(const ParseResult& parsed) { return clean(parsed.records, parsed.errors.size()); }

// Ingest output: the input columns plus Revenue.
inline void write_cleaned_csv(std::ostream& out, std::span<const Transaction> transactions,
                              const ColumnMapping& mapping = {}) {
  csv::write_row(out, {mapping.invoice, mapping.stock_code, mapping.description, mapping.quantity,
                       mapping.invoice_date, mapping.price, mapping.customer_id, mapping.country, "Revenue"});
  for (const auto& t : transactions) {
    csv::write_row(out, {t.invoice, t.stock_code, t.description.value_or(""), std::to_string(t.quantity),
                         t.invoice_datetime.to_string(), t.unit_price.to_string(), std::to_string(t.customer_id),
                         t.country, t.revenue.to_string()});
  }
}

struct PurchaseEvent {
  std::string invoice;
  Timestamp time;
  Money revenue;
};

struct CustomerAccount {
  std::vector<PurchaseEvent> events;  // one per invoice, ascending by (time, invoice)
  std::size_t invoice_count = 0;
  Money revenue;
};

struct CustomerLedger {
  std::map<std::int64_t, CustomerAccount> accounts;  // ascending customer id

  std::size_t size() const noexcept { return accounts.size(); }
  bool empty() const noexcept { return accounts.empty(); }

  std::optional<std::pair<Timestamp, Timestamp>> date_range() const {
    std::optional<std::pair<Timestamp, Timestamp>> range;
    for (const auto& [id, account] : accounts) {
      if (account.events.empty()) continue;
      const auto lo = account.events.front().time;
      const auto hi = account.events.back().time;
      if (!range) {
        range.emplace(lo, hi);
      } else {
        range->first = std::min(range->first, lo);
        range->second = std::max(range->second, hi);
      }
    }
    return range;
  }
};

// Groups line items by customer and then by invoice. An invoice's event time
// is the earliest timestamp among its lines; its revenue is their exact sum.
inline CustomerLedger build_ledger(std::span<const Transaction> transactions) {
  std::map<std::int64_t, std::map<std::string, PurchaseEvent, std::less<>>> grouped;
  for (const auto& t : transactions) {
    auto& invoices = grouped[t.customer_id];
    auto [it, inserted] = invoices.try_emplace(t.invoice, PurchaseEvent{t.invoice, t.invoice_datetime, t.revenue});
    if (!inserted) {
      it->second.time = std::min(it->second.time, t.invoice_datetime);
      it->second.revenue += t.revenue;
    }
  }

  CustomerLedger ledger;
  for (auto& [customer, invoices] : grouped) {
    CustomerAccount account;
    account.events.reserve(invoices.size());
    for (auto& [code, event] : invoices) {
      account.revenue += event.revenue;
      account.events.push_back(std::move(event));
    }
    std::sort(account.events.begin(), account.events.end(), [](const PurchaseEvent& a, const PurchaseEvent& b) {
      return a.time != b.time ? a.time < b.time : a.invoice < b.invoice;
    });
    account.invoice_count = account.events.size();
    ledger.accounts.emplace(customer, std::move(account));
  }
  return ledger;
}

struct DatasetStats {
  std::size_t n_customers = 0;
  std::size_t n_transactions = 0;
  Timestamp date_min;
  Timestamp date_max;
  double mean_customer_revenue = 0.0;
  double median_customer_revenue = 0.0;
};

inline void to_json(nlohmann::json& j, const DatasetStats& s) {
  j = nlohmann::json{{"n_customers", s.n_customers},
                     {"n_transactions", s.n_transactions},
                     {"date_min", s.date_min.to_string()},
                     {"date_max", s.date_max.to_string()},
                     {"mean_customer_revenue", s.mean_customer_revenue},
                     {"median_customer_revenue", s.median_customer_revenue}};
}

// Summary over per-customer total revenue. n_transactions counts line items.
inline DatasetStats dataset_stats(const CustomerLedger& ledger, std::span<const Transaction> transactions) {
  require(!ledger.empty() && !transactions.empty(), "dataset_stats: empty input");
  DatasetStats stats;
  stats.n_customers = ledger.size();
  stats.n_transactions = transactions.size();
  stats.date_min = stats.date_max = transactions.front().invoice_datetime;
  for (const auto& t : transactions) {
    stats.date_min = std::min(stats.date_min, t.invoice_datetime);
    stats.date_max = std::max(stats.date_max, t.invoice_datetime);
  }

  std::vector<std::int64_t> totals;
  totals.reserve(ledger.size());
  Money grand;
  for (const auto& [id, account] : ledger.accounts) {
    totals.push_back(account.revenue.micros());
    grand += account.revenue;
  }
  std::sort(totals.begin(), totals.end());
  const auto n = totals.size();
  const double scale = static_cast<double>(Money::kScale);
  stats.mean_customer_revenue = static_cast<double>(grand.micros()) / scale / static_cast<double>(n);
  stats.median_customer_revenue =
      n % 2 ? static_cast<double>(totals[n / 2]) / scale
            : (static_cast<double>(totals[n / 2 - 1]) + static_cast<double>(totals[n / 2])) / (2.0 * scale);
  return stats;
}

}  // namespace clvstack
