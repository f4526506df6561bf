#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include <json.hpp>

#include <scenemem/config.hpp>
#include <scenemem/verify.hpp>

using namespace scenemem;

namespace {

const char* kSuiteNames[] = {
    "cull_equality",     "replay_idempotence", "incremental_equals_rebuild",
    "gradient_checks",   "codec_round_trip",   "token_geometry",
};

}  // namespace

TEST_CASE("clean run passes every suite exactly once") {
  EngineConfig cfg;
  const VerifyReport report = run_verify_suites(cfg, 41);
  CHECK(report.passed);
  REQUIRE(report.suites.size() == 6);
  std::multiset<std::string> names;
  for (const VerifySuiteResult& s : report.suites) {
    CHECK(s.passed);
    CHECK_FALSE(s.detail.empty());
    names.insert(s.name);
  }
  for (const char* name : kSuiteNames) CHECK(names.count(name) == 1);
}

TEST_CASE("injected cull fault is caught and stays isolated") {
  EngineConfig cfg;
  const VerifyReport report = run_verify_suites(cfg, 41, true);
  CHECK_FALSE(report.passed);
  REQUIRE(report.suites.size() == 6);
  for (const VerifySuiteResult& s : report.suites) {
    if (s.name == "cull_equality") {
      CHECK_FALSE(s.passed);
      // the detail must point at the mismatch, not just say "failed"
      CHECK(s.detail.find("flags") != std::string::npos);
    } else {
      CHECK(s.passed);
    }
  }
}

TEST_CASE("report json carries the schema and is deterministic per seed") {
  EngineConfig cfg;
  const std::string text = verify_report_json(run_verify_suites(cfg, 7));
  const std::string again = verify_report_json(run_verify_suites(cfg, 7));
  CHECK(text == again);

  const nlohmann::json doc = nlohmann::json::parse(text);
  CHECK(doc.at("format") == "scenemem-verify-report");
  CHECK(doc.at("version") == 1);
  CHECK(doc.at("passed").is_boolean());
  REQUIRE(doc.at("suites").is_array());
  REQUIRE(doc.at("suites").size() == 6);
  for (const auto& row : doc.at("suites")) {
    CHECK(row.at("name").is_string());
    CHECK(row.at("passed").is_boolean());
    CHECK(row.at("detail").is_string());
  }
}

TEST_CASE("suites hold under non-default geometry parameters") {
  EngineConfig cfg;
  cfg.cull_delta = 0.1;
  cfg.cull_max_distance = 8.0;
  cfg.cell_size = 0.4;
  cfg.zone_size = 2.0;
  const VerifyReport report = run_verify_suites(cfg, 97);
  for (const VerifySuiteResult& s : report.suites) {
    INFO(s.name, ": ", s.detail);
    CHECK(s.passed);
  }
}
