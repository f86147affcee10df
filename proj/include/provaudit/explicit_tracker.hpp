#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "provaudit/embedding.hpp"
#include "provaudit/trace_model.hpp"

namespace provaudit {

enum class Tier { Canary, Lcs, Semantic, Coverage, None };

const char* tier_name(Tier tier);

struct TierResult {
  Tier tier = Tier::None;
  double score = 0.0;
  std::optional<std::string> matched_fragment;
  double threshold_used = 0.0;

  bool fired() const { return tier != Tier::None; }
};

inline constexpr const char* kCanaryPrefix = "NT-";
/// Sinks shorter than this never fire the LCS tier.
inline constexpr std::size_t kLcsMinLength = 8;

/// Issues canary tokens of the form NT-xxxx-xxxx (8 random hex chars).
/// Tokens are unique within one minter; collisions re-draw.
class CanaryMinter {
 public:
  CanaryMinter();
  explicit CanaryMinter(std::uint64_t seed);

  std::string mint();
  /// Appends a fresh token after a single space; returns (augmented, token).
  std::pair<std::string, std::string> inject(const std::string& source_text);

 private:
  std::mt19937_64 rng_;
  std::set<std::string> issued_;
  std::mutex mutex_;
};

/// Last token in the text matching NT-[0-9a-f]{4}-[0-9a-f]{4}, if any.
std::optional<std::string> find_canary(const std::string& text);
std::string strip_canaries(const std::string& text);

/// Character-level longest common subsequence length (rolling DP rows).
std::size_t lcs_length(std::string_view a, std::string_view b);
/// |LCS| / min(|a|, |b|) over normalized text; 0 when either side is empty.
double lcs_ratio(const std::string& a, const std::string& b);

/// Consecutive groups of `per_chunk` sentences, each normalized. Joining the
/// chunks with single spaces reconstructs the normalized input.
std::vector<std::string> chunk_text(const std::string& text, int per_chunk);

TierResult tier1_canary(const TaintLabel& label, const std::string& sink_text);
TierResult tier2_lcs(const std::string& source_text, const std::string& sink_text,
                     double threshold);
TierResult tier3_semantic(const std::string& source_text, const std::string& sink_text,
                          EmbeddingProvider& provider, double threshold);
TierResult tier4_coverage(const std::string& source_text, const std::string& sink_text,
                          EmbeddingProvider& provider, double semantic_threshold,
                          double coverage_threshold, int chunk_sentences);

struct CascadeFlags {
  bool is_rag_lineage = false;
  bool is_trusted_source = false;
};

struct CascadeOutcome {
  TierResult result;
  bool degraded = false;
  std::string degraded_reason;
};

/// Evaluates tiers 1 -> 4 in order against every sink text variant, returning
/// the first tier that fires (best-scoring variant within that tier). Tiers 3
/// and 4 use the RAG threshold for memory-crossing lineage and the safe
/// threshold for trusted sources; a missing or failing provider skips them and
/// marks the outcome degraded.
CascadeOutcome run_cascade(const TaintLabel& label, const std::string& source_text,
                           const std::vector<std::string>& sink_texts,
                           EmbeddingProvider* provider, const ThresholdProfile& profile,
                           CascadeFlags flags, int chunk_sentences = 3);

CascadeOutcome run_cascade(const TaintLabel& label, const std::string& source_text,
                           const std::string& sink_text, EmbeddingProvider* provider,
                           const ThresholdProfile& profile, CascadeFlags flags,
                           int chunk_sentences = 3);

}  // namespace provaudit
