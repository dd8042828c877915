// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every verification check, one pass/fail line per
// criterion, nonzero exit on any failure.

#include <cstdio>

#include "ngrpo/verify.hpp"

int main() {
  ngrpo::VerifyOptions opts;
  opts.include_slow = true;
  opts.out_dir = "acceptance_out";
  const auto checks = ngrpo::run_verification(opts);
  const int failures = ngrpo::report_checks(checks);
  return failures == 0 ? 0 : 1;
}
