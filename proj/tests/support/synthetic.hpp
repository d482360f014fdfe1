#pragma once

// Synthetic retail exports for tests. Customers buy as a Poisson process with
// a per-customer rate and lifetime, so recency and frequency carry signal
// about the next 90 days, much like the real data.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "clvstack/core.hpp"
#include "clvstack/timestamp.hpp"

namespace clvstack::testkit {

struct SyntheticRetail {
  std::size_t customers = 400;
  int start_year = 2009, start_month = 12, start_day = 1;
  std::int64_t span_days = 730;
  double cancellation_rate = 0.02;
  double missing_customer_rate = 0.05;
  double bad_price_rate = 0.005;
  std::size_t malformed_rows = 3;
  bool day_first_dates = false;  // "DD-MM-YYYY HH:MM" instead of ISO
  std::uint64_t seed = 1;
};

inline std::string generate_retail_csv(const SyntheticRetail& cfg) {
  Rng rng(cfg.seed);
  const Timestamp origin = *Timestamp::from_civil(cfg.start_year, static_cast<unsigned>(cfg.start_month),
                                                 static_cast<unsigned>(cfg.start_day), 0, 0);
  const double span = static_cast<double>(cfg.span_days);

  std::ostringstream out;
  out << "Invoice,StockCode,Description,Quantity,InvoiceDate,Price,Customer ID,Country\n";
  std::size_t invoice_no = 489434;

  auto stamp = [&](Timestamp t) {
    if (!cfg.day_first_dates) return t.to_string() + ":00";
    const auto s = t.to_string();  // YYYY-MM-DD HH:MM
    return s.substr(8, 2) + "-" + s.substr(5, 2) + "-" + s.substr(0, 4) + s.substr(10);
  };

  for (std::size_t c = 0; c < cfg.customers; ++c) {
    const std::int64_t id = 12346 + static_cast<std::int64_t>(c);
    const double rate = std::exp(rng.normal() * 1.0 - 3.3);  // invoices per day
    const double first = rng.uniform(0.0, span * 0.9);
    const double lifetime = -std::log(1.0 - rng.uniform()) * span * 0.8;
    const double last = std::min(span - 1e-3, first + lifetime);
    const double basket = std::exp(rng.normal() * 0.6 + 2.5);
    const char* country = rng.below(5) == 0 ? "Germany" : "United Kingdom";

    double t = first;
    while (t < last) {
      const auto when = origin.plus_minutes(static_cast<std::int64_t>(t * 1440.0));
      const std::size_t lines = 1 + rng.below(4);
      const bool cancelled = rng.uniform() < cfg.cancellation_rate;
      const bool anonymous = rng.uniform() < cfg.missing_customer_rate;
      const std::string invoice = (cancelled ? "C" : "") + std::to_string(invoice_no++);
      for (std::size_t l = 0; l < lines; ++l) {
        long long qty = 1 + static_cast<long long>(rng.below(12));
        if (cancelled) qty = -qty;
        double price = std::round(basket / static_cast<double>(lines) * rng.uniform(0.5, 1.5) * 100.0) / 100.0;
        if (price <= 0.0) price = 0.01;
        if (rng.uniform() < cfg.bad_price_rate) price = 0.0;
        char price_buf[32];
        std::snprintf(price_buf, sizeof price_buf, "%.2f", price);
        out << invoice << ',' << (85000 + rng.below(900)) << ",\"ITEM " << l << ", assorted\"," << qty << ','
            << stamp(when) << ',' << price_buf << ',' << (anonymous ? std::string{} : std::to_string(id)) << ','
            << country << '\n';
      }
      t += -std::log(1.0 - rng.uniform()) / rate;
    }
  }
  for (std::size_t m = 0; m < cfg.malformed_rows; ++m)
    out << "999" << m << ",X,broken row,not-a-number,2010-01-01 10:00:00,1.00,12346,United Kingdom\n";
  return out.str();
}

}  // namespace clvstack::testkit
