#include "provaudit/explicit_tracker.hpp"

#include <algorithm>
#include <cmath>

#include "provaudit/errors.hpp"
#include "provaudit/text.hpp"

namespace provaudit {

namespace {

bool is_hex_lower(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

// Matches NT-xxxx-xxxx starting at `pos`.
bool canary_at(const std::string& text, std::size_t pos) {
  if (pos + 12 > text.size()) return false;
  if (text.compare(pos, 3, kCanaryPrefix) != 0) return false;
  for (std::size_t i = 3; i < 7; ++i) {
    if (!is_hex_lower(text[pos + i])) return false;
  }
  if (text[pos + 7] != '-') return false;
  for (std::size_t i = 8; i < 12; ++i) {
    if (!is_hex_lower(text[pos + i])) return false;
  }
  return true;
}

double clamp01(double value) { return std::clamp(value, 0.0, 1.0); }

}  // namespace

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::Canary: return "canary";
    case Tier::Lcs: return "lcs";
    case Tier::Semantic: return "semantic";
    case Tier::Coverage: return "coverage";
    case Tier::None: return "none";
  }
  return "none";
}

CanaryMinter::CanaryMinter() : rng_(std::random_device{}()) {}
CanaryMinter::CanaryMinter(std::uint64_t seed) : rng_(seed) {}

std::string CanaryMinter::mint() {
  static const char* digits = "0123456789abcdef";
  std::lock_guard<std::mutex> lock(mutex_);
  while (true) {
    std::uint64_t bits = rng_();
    std::string token = kCanaryPrefix;
    for (int i = 0; i < 8; ++i) {
      if (i == 4) token.push_back('-');
      token.push_back(digits[bits & 0xF]);
      bits >>= 4;
    }
    if (issued_.insert(token).second) return token;
  }
}

std::pair<std::string, std::string> CanaryMinter::inject(const std::string& source_text) {
  std::string token = mint();
  return {source_text + " " + token, token};
}

std::optional<std::string> find_canary(const std::string& text) {
  std::optional<std::string> found;
  for (std::size_t pos = 0; pos + 12 <= text.size(); ++pos) {
    if (canary_at(text, pos)) {
      found = text.substr(pos, 12);
      pos += 11;
    }
  }
  return found;
}

std::string strip_canaries(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    if (canary_at(text, pos)) {
      pos += 12;
      continue;
    }
    out.push_back(text[pos]);
    ++pos;
  }
  return out;
}

std::size_t lcs_length(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return 0;
  if (b.size() > a.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

double lcs_ratio(const std::string& a, const std::string& b) {
  std::string na = normalize_text(a);
  std::string nb = normalize_text(b);
  std::size_t shorter = std::min(na.size(), nb.size());
  if (shorter == 0) return 0.0;
  return static_cast<double>(lcs_length(na, nb)) / static_cast<double>(shorter);
}

std::vector<std::string> chunk_text(const std::string& text, int per_chunk) {
  if (per_chunk < 1) per_chunk = 1;
  std::vector<std::string> sentences = split_sentences(text);
  std::vector<std::string> chunks;
  for (std::size_t start = 0; start < sentences.size();
       start += static_cast<std::size_t>(per_chunk)) {
    std::string chunk;
    std::size_t end = std::min(sentences.size(), start + static_cast<std::size_t>(per_chunk));
    for (std::size_t i = start; i < end; ++i) {
      if (!chunk.empty()) chunk.push_back(' ');
      chunk += sentences[i];
    }
    std::string normalized = normalize_text(chunk);
    if (!normalized.empty()) chunks.push_back(std::move(normalized));
  }
  return chunks;
}

TierResult tier1_canary(const TaintLabel& label, const std::string& sink_text) {
  TierResult result;
  result.threshold_used = 1.0;
  if (!label.canary) return result;
  if (sink_text.find(*label.canary) != std::string::npos) {
    result.tier = Tier::Canary;
    result.score = 1.0;
    result.matched_fragment = *label.canary;
  }
  return result;
}

TierResult tier2_lcs(const std::string& source_text, const std::string& sink_text,
                     double threshold) {
  TierResult result;
  result.threshold_used = threshold;
  std::string src = normalize_text(source_text);
  std::string sink = normalize_text(sink_text);
  std::size_t shorter = std::min(src.size(), sink.size());
  if (shorter == 0) return result;
  double ratio = static_cast<double>(lcs_length(src, sink)) / static_cast<double>(shorter);
  result.score = ratio;
  if (ratio >= threshold && shorter >= kLcsMinLength) {
    result.tier = Tier::Lcs;
  }
  return result;
}

TierResult tier3_semantic(const std::string& source_text, const std::string& sink_text,
                          EmbeddingProvider& provider, double threshold) {
  TierResult result;
  result.threshold_used = threshold;
  if (source_text.empty() || sink_text.empty()) return result;
  double score = clamp01(cosine(provider.embed(source_text), provider.embed(sink_text)));
  result.score = score;
  if (score >= threshold) result.tier = Tier::Semantic;
  return result;
}

TierResult tier4_coverage(const std::string& source_text, const std::string& sink_text,
                          EmbeddingProvider& provider, double semantic_threshold,
                          double coverage_threshold, int chunk_sentences) {
  TierResult result;
  result.threshold_used = semantic_threshold;
  std::vector<std::string> chunks = chunk_text(source_text, chunk_sentences);
  if (chunks.empty() || sink_text.empty()) return result;

  EmbeddingVector sink_vector = provider.embed(sink_text);
  std::size_t matching = 0;
  double best_score = 0.0;
  const std::string* best_chunk = nullptr;
  for (const std::string& chunk : chunks) {
    double score = clamp01(cosine(provider.embed(chunk), sink_vector));
    if (score >= semantic_threshold) ++matching;
    if (score > best_score || best_chunk == nullptr) {
      best_score = score;
      best_chunk = &chunk;
    }
  }
  result.score = best_score;
  double coverage = static_cast<double>(matching) / static_cast<double>(chunks.size());
  if (matching >= 1 && coverage >= coverage_threshold) {
    result.tier = Tier::Coverage;
    result.matched_fragment = *best_chunk;
  }
  return result;
}

CascadeOutcome run_cascade(const TaintLabel& label, const std::string& source_text,
                           const std::vector<std::string>& sink_texts,
                           EmbeddingProvider* provider, const ThresholdProfile& profile,
                           CascadeFlags flags, int chunk_sentences) {
  CascadeOutcome outcome;
  if (sink_texts.empty()) return outcome;

  double semantic_threshold = profile.semantic;
  if (flags.is_rag_lineage) semantic_threshold = profile.rag_semantic;
  if (flags.is_trusted_source) semantic_threshold = profile.safe_semantic;

  auto best_of = [](const TierResult& a, const TierResult& b) {
    return b.fired() && (!a.fired() || b.score > a.score) ? b : a;
  };

  // Tier 1 sees the raw sink text; later tiers see canary-stripped text so the
  // injected token never inflates lexical or semantic scores.
  TierResult best;
  for (const std::string& sink : sink_texts) {
    best = best_of(best, tier1_canary(label, sink));
  }
  if (best.fired()) return {best, false, ""};

  std::string source = strip_canaries(source_text);
  std::vector<std::string> sinks;
  sinks.reserve(sink_texts.size());
  for (const std::string& sink : sink_texts) sinks.push_back(strip_canaries(sink));

  best = TierResult{};
  for (const std::string& sink : sinks) {
    best = best_of(best, tier2_lcs(source, sink, profile.string_match));
  }
  if (best.fired()) return {best, false, ""};

  if (provider == nullptr) {
    return {TierResult{}, true, "embedding provider unavailable; semantic tiers skipped"};
  }

  try {
    best = TierResult{};
    for (const std::string& sink : sinks) {
      if (sink.empty()) continue;
      best = best_of(best, tier3_semantic(source, sink, *provider, semantic_threshold));
    }
    if (best.fired()) return {best, false, ""};

    best = TierResult{};
    for (const std::string& sink : sinks) {
      if (sink.empty()) continue;
      best = best_of(best, tier4_coverage(source, sink, *provider, semantic_threshold,
                                          profile.coverage, chunk_sentences));
    }
    if (best.fired()) return {best, false, ""};
  } catch (const Error& ex) {
    if (ex.code() != ErrorCode::ProviderUnavailable) throw;
    return {TierResult{}, true, ex.what()};
  }
  return outcome;
}

CascadeOutcome run_cascade(const TaintLabel& label, const std::string& source_text,
                           const std::string& sink_text, EmbeddingProvider* provider,
                           const ThresholdProfile& profile, CascadeFlags flags,
                           int chunk_sentences) {
  return run_cascade(label, source_text, std::vector<std::string>{sink_text}, provider, profile,
                     flags, chunk_sentences);
}

}  // namespace provaudit
