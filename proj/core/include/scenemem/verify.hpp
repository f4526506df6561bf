#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <scenemem/config.hpp>

namespace scenemem {

// Outcome of one self-check suite. `detail` is a short human-readable
// summary (workload sizes, worst observed error) and, on failure, the
// first discrepancy found.
struct VerifySuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifySuiteResult> suites;
  bool passed = false;  // conjunction over suites
};

// Runs the built-in consistency suites against the shipped implementation.
// Each suite rebuilds its expected values from scratch with local,
// deliberately naive reference code (brute-force scans, central
// differences, direct trigonometry) so a regression in the optimised path
// cannot hide behind shared helpers.
//
//   cull_equality              indexed visibility culling vs a brute-force
//                              per-point predicate, exact id-set equality
//   replay_idempotence         integrating the same frame twice leaves the
//                              point multiset unchanged
//   incremental_equals_rebuild instance and zone features maintained
//                              incrementally match a from-scratch
//                              re-aggregation after a dynamic replay
//   gradient_checks            analytic loss and network gradients vs
//                              central finite differences
//   codec_round_trip           action text codec parse/format round trip
//                              plus malformed-input rejection
//   token_geometry             panorama ray directions and relative
//                              position features vs direct trigonometry
//
// `inject_cull_fault` flips the distance inequality inside the local
// reference predicate of cull_equality (implementation untouched). The
// suite must then fail; it exercises the harness's ability to detect a
// real mismatch.
//
// Geometric and merge parameters come from `config`; feature dimensions
// are suite-local so the checks stay fast at any configured width.
VerifyReport run_verify_suites(const EngineConfig& config, std::uint64_t seed,
                               bool inject_cull_fault = false);

// JSON document: {"format": "scenemem-verify-report", "version": 1,
// "passed": bool, "suites": [{"name", "passed", "detail"}, ...]}.
std::string verify_report_json(const VerifyReport& report);

}  // namespace scenemem
