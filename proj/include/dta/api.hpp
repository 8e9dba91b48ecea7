#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dta/corpus.hpp"

namespace dta {

// Back-end calls known to the bike-rental after-sale domain.
inline constexpr std::array<std::string_view, 4> kApiInventory = {
    "check_order_status", "lock_bike", "reduce_fee", "query_refund"};

bool is_known_api(std::string_view name);

// Thrown by an executor when a call cannot be served.
class ApiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ApiExecutor {
 public:
  virtual ~ApiExecutor() = default;
  virtual std::string execute(const std::string& name,
                              const std::map<std::string, std::string>& args) = 0;
};

struct OrderRecord {
  std::string order_id;
  bool locked = false;
  int fee_cents = 0;
  bool fee_reduced = false;
  bool refund_issued = false;

  bool operator==(const OrderRecord&) const = default;
};

// Deterministic state machine over a single order, one per session.
class MockApiExecutor final : public ApiExecutor {
 public:
  explicit MockApiExecutor(OrderRecord order) : order_(std::move(order)) {}

  std::string execute(const std::string& name,
                      const std::map<std::string, std::string>& args) override;

  const OrderRecord& order() const { return order_; }

  // Arguments for a call against this executor's order.
  std::map<std::string, std::string> default_args() const { return {{"order_id", order_.order_id}}; }

 private:
  std::string serialize() const;

  OrderRecord order_;
};

}  // namespace dta
