#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace treespan {

// All knobs of the pipeline. The asymptotic hierarchy
// 0 < eta << eps << d << nu << gamma < 1/4 is checked as ratio links
// (each at most hierarchy_ratio times the next); feasible operating points at
// n <= 20000 must break some links, so broken links are warnings unless
// strict_hierarchy is set.
struct Constants {
  int D = 3;               // max tree degree
  double gamma = 0.01;     // non-extremality margin
  double nu = 0.0002;      // min-degree slack: delta(G) >= (1/2 - nu) n
  double d = 0.4;          // density floor for cluster pairs
  double eps = 0.95;       // regularity parameter
  double eta = 0.0;        // tree component cap fraction; 0 = derive 20 D^2 / K_T
  double hierarchy_ratio = 0.25;
  bool strict_hierarchy = false;

  int min_cluster = 200;        // smallest allowed cluster size
  int max_K = 8;                // cap on the number of cluster pairs
  int exceptional_budget = -1;  // cap on |V0|; -1 = audit-only (<= 2 eps^2 n)
  double buffer_frac = 0.2;     // vacancy share reserved for the matching finisher
  int retries = 5;              // embedding attempts per instance
  int audit_trials = 64;        // sampled regularity/extremality probes per check
  double decomp_audit_eps = 0.3;  // epsilon for auditing cluster pairs
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool paper_certified = false;  // gamma <= 1/100 and nu <= gamma/50
  bool ok() const { return errors.empty(); }
};

ValidationReport validate(const Constants& c);

void to_json(nlohmann::json& j, const Constants& c);
void from_json(const nlohmann::json& j, Constants& c);

}  // namespace treespan
