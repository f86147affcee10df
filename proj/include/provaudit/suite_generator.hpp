#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace provaudit {

struct SuiteLayout {
  std::string manifest_path;
  std::string policy_path;
  int scenario_count = 0;
  std::map<std::string, int> family_histogram;
};

/// Deterministically emits a scenario pack under out_dir: policy.yaml,
/// manifest.json, and per-scenario trace files plus mock-judge scripts.
/// Positive families cover canary, lexical, paraphrase, long-document
/// fragment, implicit-control, and cross-session propagation; negative
/// controls cover non-propagating, clean, topical-overlap, and
/// prior-knowledge scenarios. Same seed, same bytes.
SuiteLayout generate_mini_suite(std::uint64_t seed, const std::string& out_dir);

}  // namespace provaudit
