#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "claimcheck/provider.hpp"
#include "claimcheck/reranker.hpp"
#include "claimcheck/sparse.hpp"

namespace claimcheck {

inline constexpr const char* kToolVersion = "claimcheck 0.1.0";

struct RunConfig {
  std::filesystem::path documents_path;
  std::filesystem::path train_claims_path;
  std::filesystem::path test_claims_path;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;

  std::vector<std::string> classes;
  std::string fallback_class;
  int m_hat = 20;      // sparse candidates per claim
  int m = 5;           // evidence kept after reranking
  int k = 10;          // demonstration cap
  double threshold = 0.5;
  std::uint64_t seed = 0;

  Bm25Params bm25;
  RerankConfig rerank;

  std::string provider_kind = "mock";  // "mock" or "http"
  ProviderConfig provider;
  MockOptions mock;

  nlohmann::json raw;  // config file snapshot for the manifest

  void validate() const;  // ConfigError
};

/// Parse and validate the single JSON config file. A CLI-level seed override
/// replaces the file's seed (and the rerank seed unless the file pinned one).
RunConfig load_config(const std::filesystem::path& path,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

/// Artifact locations inside cfg.output_dir / cfg.cache_dir.
namespace artifacts {
std::filesystem::path index(const RunConfig& cfg);
std::filesystem::path adapter(const RunConfig& cfg);
std::filesystem::path loss_trace(const RunConfig& cfg);
std::filesystem::path demos(const RunConfig& cfg);
std::filesystem::path retrieval_report(const RunConfig& cfg);
std::filesystem::path verdicts(const RunConfig& cfg);
std::filesystem::path classification_report(const RunConfig& cfg);
std::filesystem::path manifest(const RunConfig& cfg);
std::filesystem::path embedding_cache(const RunConfig& cfg);
}  // namespace artifacts

/// Pipeline commands. Each throws Error on failure, refuses to overwrite its
/// artifacts unless `force` is set, and updates the manifest last. Artifact
/// bytes are deterministic for a fixed config, seed, and mock provider.
void cmd_index_build(const RunConfig& cfg, bool force);
void cmd_rerank_train(const RunConfig& cfg, bool force);
void cmd_eval_retrieval(const RunConfig& cfg, bool force);
void cmd_demos_prepare(const RunConfig& cfg, bool force);
void cmd_verify_run(const RunConfig& cfg, bool force);

}  // namespace claimcheck
