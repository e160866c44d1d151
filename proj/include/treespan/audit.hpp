#pragma once

#include <string>
#include <vector>

namespace treespan {

// One checked structural clause: what was measured against which bound.
struct ClauseAudit {
  std::string name;
  bool ok = false;
  double observed = 0.0;
  double bound = 0.0;
};

inline bool all_ok(const std::vector<ClauseAudit>& audits) {
  for (const auto& a : audits)
    if (!a.ok) return false;
  return true;
}

}  // namespace treespan
