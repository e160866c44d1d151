#include "treespan/constants.hpp"

#include <sstream>

namespace treespan {

ValidationReport validate(const Constants& c) {
  ValidationReport rep;
  auto err = [&](const std::string& m) { rep.errors.push_back(m); };

  if (c.D < 2) err("D must be at least 2");
  auto frac = [&](double v, const char* name, bool allow_zero) {
    if (v < 0.0 || v >= 1.0 || (!allow_zero && v == 0.0)) {
      std::ostringstream os;
      os << name << " = " << v << " must lie in " << (allow_zero ? "[0, 1)" : "(0, 1)");
      err(os.str());
    }
  };
  frac(c.gamma, "gamma", false);
  frac(c.nu, "nu", false);
  frac(c.d, "d", false);
  frac(c.eps, "eps", false);
  frac(c.eta, "eta", true);
  frac(c.buffer_frac, "buffer_frac", true);
  frac(c.decomp_audit_eps, "decomp_audit_eps", false);
  if (c.gamma >= 0.25) err("gamma must be below 1/4");
  if (c.hierarchy_ratio <= 0.0 || c.hierarchy_ratio >= 1.0) err("hierarchy_ratio must lie in (0, 1)");
  if (c.min_cluster < 4) err("min_cluster must be at least 4");
  if (c.max_K < 1) err("max_K must be at least 1");
  if (c.exceptional_budget < -1) err("exceptional_budget must be -1 (audit-only) or nonnegative");
  if (c.retries < 0) err("retries must be nonnegative");
  if (c.audit_trials < 1) err("audit_trials must be positive");

  auto link = [&](double lo, const char* lo_name, double hi, const char* hi_name) {
    if (lo <= 0.0 || hi <= 0.0) return;  // range errors already reported
    if (lo <= c.hierarchy_ratio * hi) return;
    std::ostringstream os;
    os << lo_name << " = " << lo << " exceeds " << c.hierarchy_ratio << " * " << hi_name << " = "
       << c.hierarchy_ratio * hi << " (hierarchy link " << lo_name << " << " << hi_name << ")";
    if (c.strict_hierarchy)
      rep.errors.push_back(os.str());
    else
      rep.warnings.push_back(os.str());
  };
  if (c.eta > 0.0) link(c.eta, "eta", c.eps, "eps");
  link(c.eps, "eps", c.d, "d");
  link(c.d, "d", c.nu, "nu");
  link(c.nu, "nu", c.gamma, "gamma");

  rep.paper_certified = c.gamma <= 0.01 + 1e-12 && c.nu <= c.gamma / 50.0 + 1e-12;
  return rep;
}

void to_json(nlohmann::json& j, const Constants& c) {
  j = nlohmann::json{{"D", c.D},
                     {"gamma", c.gamma},
                     {"nu", c.nu},
                     {"d", c.d},
                     {"eps", c.eps},
                     {"eta", c.eta},
                     {"hierarchy_ratio", c.hierarchy_ratio},
                     {"strict_hierarchy", c.strict_hierarchy},
                     {"min_cluster", c.min_cluster},
                     {"max_K", c.max_K},
                     {"exceptional_budget", c.exceptional_budget},
                     {"buffer_frac", c.buffer_frac},
                     {"retries", c.retries},
                     {"audit_trials", c.audit_trials},
                     {"decomp_audit_eps", c.decomp_audit_eps}};
}

void from_json(const nlohmann::json& j, Constants& c) {
  Constants defaults;
  c.D = j.value("D", defaults.D);
  c.gamma = j.value("gamma", defaults.gamma);
  c.nu = j.value("nu", defaults.nu);
  c.d = j.value("d", defaults.d);
  c.eps = j.value("eps", defaults.eps);
  c.eta = j.value("eta", defaults.eta);
  c.hierarchy_ratio = j.value("hierarchy_ratio", defaults.hierarchy_ratio);
  c.strict_hierarchy = j.value("strict_hierarchy", defaults.strict_hierarchy);
  c.min_cluster = j.value("min_cluster", defaults.min_cluster);
  c.max_K = j.value("max_K", defaults.max_K);
  c.exceptional_budget = j.value("exceptional_budget", defaults.exceptional_budget);
  c.buffer_frac = j.value("buffer_frac", defaults.buffer_frac);
  c.retries = j.value("retries", defaults.retries);
  c.audit_trials = j.value("audit_trials", defaults.audit_trials);
  c.decomp_audit_eps = j.value("decomp_audit_eps", defaults.decomp_audit_eps);
}

}  // namespace treespan
