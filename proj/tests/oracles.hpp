#pragma once

// Independent reference implementations used to freeze expected values.
// These deliberately avoid the library's own code paths: the LCS oracle keeps
// the full DP matrix, the reachability oracle is a Floyd-Warshall closure,
// and the embedding oracle re-derives tokenization, hashing, and
// normalization from scratch.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracles {

inline std::size_t lcs_full_matrix(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1,
                                           std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        dp[i][j] = dp[i - 1][j - 1] + 1;
      } else {
        dp[i][j] = dp[i - 1][j] > dp[i][j - 1] ? dp[i - 1][j] : dp[i][j - 1];
      }
    }
  }
  return dp[a.size()][b.size()];
}

// Reachability closure over an edge list: reachable[u] holds every node with a
// directed path (>= 1 edge) from u.
inline std::map<std::string, std::set<std::string>> transitive_closure(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::set<std::string> nodes;
  for (const auto& [from, to] : edges) {
    nodes.insert(from);
    nodes.insert(to);
  }
  std::map<std::string, std::set<std::string>> reach;
  for (const auto& [from, to] : edges) reach[from].insert(to);
  for (const std::string& mid : nodes) {
    for (const std::string& from : nodes) {
      if (!reach[from].count(mid)) continue;
      for (const std::string& to : reach[mid]) reach[from].insert(to);
    }
  }
  return reach;
}

inline std::uint64_t fnv64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  }
  if (!word.empty()) out.push_back(word);
  return out;
}

inline std::size_t token_bin(const std::string& token, std::size_t bins) {
  return static_cast<std::size_t>(fnv64(token) % bins);
}

inline std::vector<double> hashed_bag_embedding(const std::string& text, std::size_t bins) {
  std::vector<double> vec(bins, 0.0);
  for (const std::string& token : words(text)) {
    vec[token_bin(token, bins)] += 1.0;
  }
  double norm = 0.0;
  for (double v : vec) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : vec) v /= norm;
  }
  return vec;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace oracles
