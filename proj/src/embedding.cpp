#include "provaudit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "provaudit/errors.hpp"
#include "provaudit/text.hpp"

namespace provaudit {

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    raise(ErrorCode::DimensionMismatch, "cosine over dimensions " + std::to_string(a.dimension()) +
                                            " and " + std::to_string(b.dimension()));
  }
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  double value = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
  return std::clamp(value, -1.0, 1.0);
}

std::size_t HashedBagProvider::bin_for_token(const std::string& token) {
  return static_cast<std::size_t>(fnv1a64(token) % kHashedBagDimension);
}

EmbeddingVector HashedBagProvider::embed(const std::string& text) {
  EmbeddingVector out;
  out.values.assign(kHashedBagDimension, 0.0);
  for (const std::string& token : tokenize(text)) {
    out.values[bin_for_token(token)] += 1.0;
  }
  double norm = out.norm();
  if (norm > 0.0) {
    for (double& v : out.values) v /= norm;
  }
  return out;
}

namespace {

// Splits "http://host:port/prefix" into client coordinates.
void parse_endpoint(const std::string& endpoint, std::string& host, int& port, std::string& path) {
  std::string rest = endpoint;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
  std::size_t slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  path = slash == std::string::npos ? "" : rest.substr(slash);
  std::size_t colon = authority.rfind(':');
  if (colon == std::string::npos) {
    host = authority;
    port = 80;
  } else {
    host = authority.substr(0, colon);
    port = std::stoi(authority.substr(colon + 1));
  }
  if (host.empty()) raise(ErrorCode::ProviderUnavailable, "empty embedding endpoint host");
}

}  // namespace

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteProviderConfig config)
    : config_(std::move(config)) {
  parse_endpoint(config_.endpoint, host_, port_, path_prefix_);
  if (path_prefix_.empty()) path_prefix_ = "/";
}

std::size_t RemoteEmbeddingProvider::dimension() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return locked_dimension_;
}

EmbeddingVector RemoteEmbeddingProvider::embed(const std::string& text) {
  // max_in_flight bounds concurrent requests against the endpoint.
  while (true) {
    int current = in_flight_.load();
    if (current < config_.max_in_flight &&
        in_flight_.compare_exchange_weak(current, current + 1)) {
      break;
    }
    std::this_thread::yield();
  }
  struct Release {
    std::atomic<int>& counter;
    ~Release() { counter.fetch_sub(1); }
  } release{in_flight_};

  httplib::Client client(host_, port_);
  client.set_connection_timeout(0, config_.timeout_ms * 1000);
  client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

  nlohmann::json request;
  request["texts"] = nlohmann::json::array({text});
  auto response = client.Post(path_prefix_, request.dump(), "application/json");
  if (!response || response->status != 200) {
    raise(ErrorCode::ProviderUnavailable,
          "embedding endpoint " + config_.endpoint +
              (response ? " returned status " + std::to_string(response->status)
                        : " is unreachable"));
  }

  nlohmann::json body = nlohmann::json::parse(response->body, nullptr, false);
  if (body.is_discarded() || !body.contains("vectors") || !body["vectors"].is_array() ||
      body["vectors"].size() != 1 || !body["vectors"][0].is_array() ||
      !body.contains("dimension") || !body["dimension"].is_number_integer()) {
    raise(ErrorCode::DimensionMismatch, "malformed embedding response");
  }

  EmbeddingVector out;
  for (const auto& component : body["vectors"][0]) {
    if (!component.is_number()) raise(ErrorCode::DimensionMismatch, "non-numeric vector component");
    double value = component.get<double>();
    if (!std::isfinite(value)) raise(ErrorCode::DimensionMismatch, "non-finite vector component");
    out.values.push_back(value);
  }
  auto declared = body["dimension"].get<std::size_t>();
  if (declared != out.values.size()) {
    raise(ErrorCode::DimensionMismatch,
          "declared dimension " + std::to_string(declared) + " != vector size " +
              std::to_string(out.values.size()));
  }

  std::lock_guard<std::mutex> lock(mutex_);
  if (locked_dimension_ == 0) {
    locked_dimension_ = declared;
  } else if (locked_dimension_ != declared) {
    raise(ErrorCode::DimensionMismatch,
          "provider changed dimension from " + std::to_string(locked_dimension_) + " to " +
              std::to_string(declared));
  }
  return out;
}

EmbeddingVector MemoizingProvider::embed(const std::string& text) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(text);
    if (it != memo_.end()) return it->second;
  }
  EmbeddingVector vector = inner_.embed(text);
  std::lock_guard<std::mutex> lock(mutex_);
  return memo_.emplace(text, std::move(vector)).first->second;
}

}  // namespace provaudit
