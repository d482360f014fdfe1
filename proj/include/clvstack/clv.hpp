#pragma once

#include <cstddef>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "clvstack/core.hpp"
#include "clvstack/ingest.hpp"

namespace clvstack {

// Aggregate historical CLV:
//   clv = (average_sales * purchase_frequency / churn) * profit_margin
// with average_sales = sales / orders, purchase_frequency = orders / customers,
// retention_rate = repeat_customers / customers, churn = 1 - retention_rate.

struct ClvInputs {
  double total_sales = 0.0;
  std::size_t total_order_number = 0;
  std::size_t total_unique_customers = 0;
  std::size_t customers_with_multiple_orders = 0;
  double profit_margin = 0.0;
};

struct ClvBreakdown {
  double average_sales = 0.0;
  double purchase_frequency = 0.0;
  double retention_rate = 0.0;
  double churn = 0.0;
  double clv = 0.0;
};

// Thrown when every customer repeats: the CLV formula divides by churn = 0.
class ZeroChurnError : public std::domain_error {
 public:
  ZeroChurnError()
      : std::domain_error(
            "CLV undefined: churn is 0 because every customer has more than one order; "
            "clv = average_sales * purchase_frequency / churn * profit_margin divides by churn") {}
};

inline ClvBreakdown compute_clv(const ClvInputs& in) {
  if (in.total_order_number == 0) throw std::domain_error("CLV: total order number must be positive");
  if (in.total_unique_customers == 0) throw std::domain_error("CLV: total unique customers must be positive");
  if (in.customers_with_multiple_orders > in.total_unique_customers)
    throw std::domain_error("CLV: repeat customers exceed unique customers");

  ClvBreakdown out;
  const auto orders = static_cast<double>(in.total_order_number);
  const auto customers = static_cast<double>(in.total_unique_customers);
  out.average_sales = in.total_sales / orders;
  out.purchase_frequency = orders / customers;
  if (in.customers_with_multiple_orders == in.total_unique_customers) throw ZeroChurnError();
  out.retention_rate = static_cast<double>(in.customers_with_multiple_orders) / customers;
  // From the integer counts, so 1 - retention is rounded once, not twice.
  out.churn = static_cast<double>(in.total_unique_customers - in.customers_with_multiple_orders) / customers;
  out.clv = (out.average_sales * out.purchase_frequency / out.churn) * in.profit_margin;
  return out;
}

inline ClvInputs clv_inputs_from_ledger(const CustomerLedger& ledger, double profit_margin) {
  if (ledger.empty()) throw std::domain_error("CLV: ledger has no customers");
  ClvInputs in;
  Money sales;
  for (const auto& [id, account] : ledger.accounts) {
    sales += account.revenue;
    in.total_order_number += account.invoice_count;
    if (account.invoice_count > 1) ++in.customers_with_multiple_orders;
  }
  in.total_sales = sales.to_double();
  in.total_unique_customers = ledger.size();
  in.profit_margin = profit_margin;
  return in;
}

inline ClvBreakdown clv_from_ledger(const CustomerLedger& ledger, double profit_margin) {
  return compute_clv(clv_inputs_from_ledger(ledger, profit_margin));
}

inline void to_json(nlohmann::json& j, const ClvBreakdown& b) {
  j = nlohmann::json{{"average_sales", b.average_sales},
                     {"purchase_frequency", b.purchase_frequency},
                     {"retention_rate", b.retention_rate},
                     {"churn", b.churn},
                     {"clv", b.clv}};
}

}  // namespace clvstack
