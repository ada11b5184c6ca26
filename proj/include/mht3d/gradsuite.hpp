#pragma once

#include <string>
#include <vector>

namespace mht {

struct GradSuiteEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::string worst_param;
  bool ok = false;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  bool all_ok = false;
  double seconds = 0.0;
};

// Central-finite-difference checks over every learned block: history encoder,
// prediction head, motion embedding, appearance attention stack, global/local
// interaction, both heads, and the full scoring network end to end.
GradSuiteReport run_gradient_suite(double eps = 1e-5, double tol = 1e-4);

}  // namespace mht
