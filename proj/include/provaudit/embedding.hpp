#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace provaudit {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  double norm() const;

  bool operator==(const EmbeddingVector&) const = default;
};

/// Standard cosine, clamped to [-1, 1]. Zero-norm inputs compare as 0.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual std::size_t dimension() const = 0;
};

inline constexpr std::size_t kHashedBagDimension = 256;

/// Deterministic local provider: lowercased alphanumeric tokens hashed with
/// 64-bit FNV-1a into 256 bins, counts L2-normalized. Empty text maps to the
/// zero vector.
class HashedBagProvider final : public EmbeddingProvider {
 public:
  EmbeddingVector embed(const std::string& text) override;
  std::size_t dimension() const override { return kHashedBagDimension; }

  static std::size_t bin_for_token(const std::string& token);
};

struct RemoteProviderConfig {
  std::string endpoint;      // embedding.endpoint
  int timeout_ms = 10000;    // embedding.timeout_ms
  int max_in_flight = 4;
};

/// JSON-over-HTTP provider: POST {"texts": [...]} -> {"vectors": [[...]],
/// "dimension": n}. In-flight requests are bounded by max_in_flight.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteProviderConfig config);

  EmbeddingVector embed(const std::string& text) override;
  std::size_t dimension() const override;

 private:
  RemoteProviderConfig config_;
  std::string host_;
  int port_ = 0;
  std::string path_prefix_;
  mutable std::mutex mutex_;
  std::size_t locked_dimension_ = 0;
  std::atomic<int> in_flight_{0};
};

/// Counts calls that reach the wrapped provider.
class CountingProvider final : public EmbeddingProvider {
 public:
  explicit CountingProvider(EmbeddingProvider& inner) : inner_(inner) {}

  EmbeddingVector embed(const std::string& text) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.embed(text);
  }
  std::size_t dimension() const override { return inner_.dimension(); }
  long calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  EmbeddingProvider& inner_;
  std::atomic<long> calls_{0};
};

/// Per-run text -> vector memo in front of another provider.
class MemoizingProvider final : public EmbeddingProvider {
 public:
  explicit MemoizingProvider(EmbeddingProvider& inner) : inner_(inner) {}

  EmbeddingVector embed(const std::string& text) override;
  std::size_t dimension() const override { return inner_.dimension(); }

 private:
  EmbeddingProvider& inner_;
  std::mutex mutex_;
  std::map<std::string, EmbeddingVector> memo_;
};

}  // namespace provaudit
