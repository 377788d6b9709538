#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace claimcheck {

struct EmbeddingVector {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  double dot(const EmbeddingVector& other) const;
  double norm() const;
};

struct ProviderConfig {
  std::string base_url;
  std::string embed_model;
  std::string chat_model;
  std::string api_key_env = "OPENAI_API_KEY";  // key is read from the environment only
  int max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};
  double temperature = 0.0;
};

/// Raw text-model backend: one embeddings call, one chat call. Implementations
/// must be safe to call from multiple threads.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::vector<std::vector<double>> embed(
      const std::string& model, const std::vector<std::string>& texts) = 0;
  virtual std::string complete(const std::string& model, const std::string& system_msg,
                               const std::string& user_msg, double temperature) = 0;
};

struct MockOptions {
  std::uint64_t seed = 0;
  int dim = 32;
  /// completion = value of the longest key that is a substring of
  /// system + "\n" + user; a fixed fallback sentence otherwise
  std::map<std::string, std::string> script;
  /// exact-text overrides returned instead of the hashed vector
  std::map<std::string, std::vector<double>> vector_overrides;
  /// prompts containing any of these substrings fail with ProviderError
  std::vector<std::string> fail_keys;
  std::chrono::milliseconds latency{0};
};

/// Deterministic offline stand-in: embeddings are seeded hashes of the text
/// expanded to a fixed-dim unit vector, generations come from the script.
/// Instrumented so tests can observe call counts and peak concurrency.
class MockProvider : public Provider {
 public:
  explicit MockProvider(MockOptions opts);

  std::vector<std::vector<double>> embed(const std::string& model,
                                         const std::vector<std::string>& texts) override;
  std::string complete(const std::string& model, const std::string& system_msg,
                       const std::string& user_msg, double temperature) override;

  std::uint64_t embed_calls() const;
  std::uint64_t texts_embedded() const;
  std::uint64_t generate_calls() const;
  int max_observed_in_flight() const;

  /// The unit vector the mock would return for `text` (override or hash).
  std::vector<double> vector_for(const std::string& text) const;

  static constexpr const char* kFallbackCompletion =
      "No relevant information was found.";

 private:
  struct FlightGuard;

  MockOptions opts_;
  mutable std::mutex mu_;
  std::uint64_t embed_calls_ = 0;
  std::uint64_t texts_embedded_ = 0;
  std::uint64_t generate_calls_ = 0;
  int in_flight_ = 0;
  int max_in_flight_seen_ = 0;
};

/// OpenAI-compatible HTTP backend: POST {base_url}/v1/embeddings and
/// {base_url}/v1/chat/completions with a bearer token taken from the
/// environment variable named in the config.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig cfg);

  std::vector<std::vector<double>> embed(const std::string& model,
                                         const std::vector<std::string>& texts) override;
  std::string complete(const std::string& model, const std::string& system_msg,
                       const std::string& user_msg, double temperature) override;

 private:
  std::string api_key() const;

  ProviderConfig cfg_;
};

struct GatewayStats {
  std::uint64_t embed_requests = 0;   // provider batches sent
  std::uint64_t texts_embedded = 0;   // texts inside those batches
  std::uint64_t cache_hits = 0;       // input texts served without a send
  std::uint64_t generate_requests = 0;
};

/// Front door the pipeline talks to. Owns the embedding cache (memory plus an
/// optional line-delimited disk file), normalises every vector to unit L2
/// norm, bounds concurrent provider calls to max_in_flight, and deduplicates
/// concurrent requests for the same text so no remote work is repeated.
class Gateway {
 public:
  Gateway(ProviderConfig cfg, std::shared_ptr<Provider> provider,
          std::filesystem::path cache_file = {});

  /// One embedding per input text, in input order. Cached results are
  /// returned bitwise-identically. Throws on empty input or empty texts.
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts);

  /// Trimmed completion for one chat turn. Throws EmptyCompletion when the
  /// provider answers with only whitespace.
  std::string generate_text(const std::string& system_msg, const std::string& user_msg);

  GatewayStats stats() const;
  const ProviderConfig& config() const { return cfg_; }

  /// Hex digest used as the cache key component for a text.
  static std::string content_hash(const std::string& text);

 private:
  struct Pending;

  std::string cache_key(const std::string& hash) const;
  void load_cache_file();
  void append_cache_records(const std::vector<std::pair<std::string, std::vector<double>>>& rows);

  ProviderConfig cfg_;
  std::shared_ptr<Provider> provider_;
  std::filesystem::path cache_file_;

  mutable std::mutex mu_;  // guards cache_, pending_, expected_dim_, stats_
  std::unordered_map<std::string, std::vector<double>> cache_;
  std::unordered_map<std::string, std::shared_ptr<Pending>> pending_;
  int expected_dim_ = -1;
  GatewayStats stats_;

  std::mutex file_mu_;

  // simple counting semaphore so max_in_flight is a runtime value
  std::mutex sem_mu_;
  std::condition_variable sem_cv_;
  int slots_;
};

}  // namespace claimcheck
