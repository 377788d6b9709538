#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "claimcheck/corpus.hpp"
#include "claimcheck/provider.hpp"
#include "claimcheck/sparse.hpp"

namespace claimcheck {

/// Square projection applied to both sides of the cosine. A fresh adapter is
/// the identity, so an untrained re-ranker scores plain cosine similarity.
struct AdapterParams {
  Eigen::MatrixXd W;
  std::int64_t step_count = 0;
  std::uint64_t seed = 0;

  static AdapterParams identity(int dim, std::uint64_t seed = 0);
};

struct RerankConfig {
  int l = 4;              // positives per pair; negatives match it
  double tau = 0.1;       // margin of the hinge term
  double lambda = 1.0;    // weight of the contrastive term
  double temp = 0.05;     // softmax temperature
  double lr = 0.01;
  double momentum = 0.9;
  int steps = 1000;
  int pool_size = 200;    // candidate pool drawn per training claim
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct TrainingPair {
  Claim claim;
  std::string gold_doc_id;
  std::vector<std::string> positives;  // l high-ranked non-gold candidates
  std::vector<std::string> negatives;  // l drawn from the pool's bottom half
};

/// Embeddings keyed by claim_id or doc_id (the pipeline keeps those spaces
/// disjoint).
struct EmbeddingStore {
  std::unordered_map<std::string, EmbeddingVector> vectors;

  void put(const std::string& id, EmbeddingVector v) { vectors[id] = std::move(v); }
  bool contains(const std::string& id) const { return vectors.count(id) > 0; }
  const EmbeddingVector& require(const std::string& id) const;  // MissingEmbedding
};

/// cosine(W x, W d). Throws DimensionMismatch / DegenerateProjection.
double score_pair(const AdapterParams& params, const EmbeddingVector& e_x,
                  const EmbeddingVector& e_d);

/// Draw one training pair for a claim whose gold document is known. The
/// candidate pool is the BM25 top `pool_size`; gold is removed, the top l
/// become positives, and l negatives are drawn without replacement from the
/// pool's bottom half with probability proportional to
/// (1 + rank_from_bottom)^-1, so the weakest BM25 matches are most likely.
/// Throws InsufficientPool when fewer than 2l candidates remain.
TrainingPair sample_training_pair(const InvertedIndex& index, const Claim& claim,
                                  const std::string& gold_doc_id,
                                  const RerankConfig& cfg, std::mt19937_64& rng,
                                  const Bm25Params& bm25 = {});

struct LossGrad {
  double loss = 0.0;
  double hinge = 0.0;
  double contrastive = 0.0;
  Eigen::MatrixXd grad;
};

/// Loss for one pair:
///   max(0, max_i f(x, p_i) - f(x, d) + tau)
///     - lambda * exp(f(x,d)/T) / (exp(f(x,d)/T) + sum over positives and
///       negatives of exp(f(x,c_i)/T))
/// together with the exact gradient with respect to W. At the hinge kink the
/// subgradient 0 is used; argmax ties resolve to the smallest index.
LossGrad loss_and_grad(const AdapterParams& params, const TrainingPair& pair,
                       const EmbeddingStore& embeddings, const RerankConfig& cfg);

struct TrainResult {
  AdapterParams params;
  std::vector<double> loss_trace;  // one entry per optimisation step
};

/// Optional hook that redraws the training pairs at the start of each epoch
/// after the first; receives the epoch number and the training RNG.
using PairResampler =
    std::function<std::vector<TrainingPair>(int epoch, std::mt19937_64& rng)>;

/// Gradient descent with momentum from the identity, visiting the pairs in a
/// seeded shuffled order that is reshuffled every epoch. Throws NonFiniteLoss
/// (with the step number) if the loss leaves the reals.
TrainResult train(std::vector<TrainingPair> pairs, const EmbeddingStore& embeddings,
                  const RerankConfig& cfg, const PairResampler& resample = {});

/// Score the claim against every candidate and keep the top m
/// (score descending, doc_id ascending on ties), ranks 1-based,
/// stage Stage::dense.
std::vector<ScoredDocument> rerank(const AdapterParams& params, const Claim& claim,
                                   const std::vector<ScoredDocument>& candidates,
                                   int m, const EmbeddingStore& embeddings);

/// Shared ordering rule for scored lists; exposed so ordering-invariance
/// properties can drive it directly.
std::vector<ScoredDocument> top_m_by_score(const std::vector<std::string>& doc_ids,
                                           const std::vector<double>& scores, int m,
                                           Stage stage);

/// Decimal-text persistence (dim, seed, step count, then W row by row at full
/// round-trip precision).
void save_adapter(const AdapterParams& params, const std::filesystem::path& path);
AdapterParams load_adapter(const std::filesystem::path& path);

/// Mean loss of one epoch within a trace produced by train().
double epoch_mean_loss(const std::vector<double>& trace, std::size_t pairs_per_epoch,
                       std::size_t epoch);

}  // namespace claimcheck
