// SPDX-License-Identifier: Apache-2.0
//
// The verification suite: every pinned oracle, invariant and end-to-end
// claim as a pass/fail check. The `verify` CLI subcommand and the
// acceptance test binary both run through here.

#ifndef NGRPO_VERIFY_HPP_
#define NGRPO_VERIFY_HPP_

#include <string>
#include <vector>

namespace ngrpo {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string details;
  double seconds = 0.0;
};

struct VerifyOptions {
  bool include_slow = true;      // end-to-end training checks (9-11)
  std::string out_dir = "out/verify";
};

std::vector<CheckResult> run_verification(const VerifyOptions& opts);

// Prints one line per check; returns the number of failures.
int report_checks(const std::vector<CheckResult>& checks);

}  // namespace ngrpo

#endif  // NGRPO_VERIFY_HPP_
