#pragma once

#include <cstdint>

#include "nhred/models.hpp"

namespace nhred {

inline constexpr const char* kToolVersion = "0.1.0";

struct CheckResult {
  std::string name;       // suite.check
  std::string id;         // stable reference id for what is being verified
  int samples = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::string tool_version = kToolVersion;
  std::string model;
  std::uint64_t seed = 0;
  int samples = 0;
  std::string generated_at;  // excluded from determinism comparisons
  std::vector<CheckResult> checks;

  [[nodiscard]] bool overall_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct VerifyOptions {
  std::vector<std::string> suites;  // empty = all applicable
  int samples = 100;
  std::uint64_t seed = 42;
  bool substitute_pi_nh = false;  // momentum residual demonstration mode
  std::map<std::string, double> tolerance_overrides;
};

VerificationReport run_suites(const ModelDescriptor& md, const VerifyOptions& opt);

std::string report_to_json(const VerificationReport& rep);
VerificationReport report_from_json(const std::string& text);

/// One line per check, plus an overall verdict line.
std::string report_summary(const VerificationReport& rep);

}  // namespace nhred
