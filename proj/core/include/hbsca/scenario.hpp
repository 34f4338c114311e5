// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented scenario scripts: one step per line, space-separated fields,
// '#' comments. Scripts drive a SimWorld and check expectations against the
// event log, the last verdict / recovery plan, and verifier outcomes. Reports
// are deterministic: running a scenario twice yields identical text.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hbsca/sim.hpp"

namespace hbsca {

struct ScenarioStep {
  std::size_t line = 0;
  std::string op;
  std::vector<std::string> args;
  std::string raw;
};

struct Scenario {
  std::string name;
  std::vector<ScenarioStep> steps;

  static Scenario parse(const std::string& name, std::string_view text);
  static Scenario load(const std::filesystem::path& file);
};

struct ScenarioReport {
  std::string name;
  bool passed = false;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<std::string> lines;
  std::vector<std::pair<int, std::uint32_t>> signed_indices;

  std::string text() const;
};

/// Runs one scenario in (a subdirectory of) `workdir`. Script errors (unknown
/// ops, bad arguments) throw before any step executes.
ScenarioReport run_scenario(const Scenario& scenario,
                            const std::filesystem::path& workdir);

/// The built-in suite covering the fault and attack analyses.
const std::map<std::string, std::string>& builtin_scenarios();

/// Duplicate-index audit over one or more runs; the all-scenarios safety net.
struct SignatureAudit {
  std::size_t total = 0;
  std::vector<std::uint32_t> duplicates;
  bool clean() const { return duplicates.empty(); }
};
SignatureAudit audit_signed_indices(
    const std::vector<std::pair<int, std::uint32_t>>& signed_indices);

}  // namespace hbsca
