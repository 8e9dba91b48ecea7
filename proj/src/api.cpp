#include "dta/api.hpp"

#include <algorithm>
#include <cstdio>

namespace dta {

bool is_known_api(std::string_view name) {
  return std::find(kApiInventory.begin(), kApiInventory.end(), name) != kApiInventory.end();
}

std::string MockApiExecutor::serialize() const {
  char fee[32];
  std::snprintf(fee, sizeof fee, "%d.%02d", order_.fee_cents / 100, order_.fee_cents % 100);
  return "order " + order_.order_id + " status " + (order_.locked ? "locked" : "unlocked") +
         " fee " + fee + " reduced " + (order_.fee_reduced ? "yes" : "no");
}

std::string MockApiExecutor::execute(const std::string& name,
                                     const std::map<std::string, std::string>& args) {
  if (!is_known_api(name)) throw ApiError("unknown api '" + name + "'");
  if (auto it = args.find("order_id"); it != args.end() && it->second != order_.order_id)
    throw ApiError("unknown order '" + it->second + "'");

  if (name == "check_order_status") return serialize();
  if (name == "lock_bike") {
    if (order_.locked) return "already_locked";
    order_.locked = true;
    return "locked";
  }
  if (name == "reduce_fee") {
    if (order_.fee_reduced) return "already_reduced";
    order_.fee_reduced = true;
    order_.fee_cents /= 2;
    return "reduced";
  }
  // query_refund
  if (order_.refund_issued) return "refund already_issued";
  order_.refund_issued = true;
  return "refund issued";
}

}  // namespace dta
