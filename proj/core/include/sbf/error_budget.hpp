#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sbf {

/// One systematic effect on p: the correction to apply and its asymmetric bounds.
struct BudgetRow {
  std::string label;
  double shift = 0.0;
  double plus = 0.0;   // >= 0
  double minus = 0.0;  // >= 0
};

struct ErrorBudget {
  std::vector<BudgetRow> rows;

  /// Shifts summed, bounds summed linearly.
  BudgetRow total() const;
  const BudgetRow& row(const std::string& label) const;
  bool has_row(const std::string& label) const;
  /// Order-independent hash of the row contents.
  std::uint64_t hash() const;
};

}  // namespace sbf
