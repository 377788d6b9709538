#pragma once

#include <optional>
#include <string>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/provider.hpp"

namespace claimcheck {

struct DemoEntry {
  Claim claim;  // always labeled
  EmbeddingVector embedding;
  std::optional<std::string> supporting_arg;
  std::optional<std::string> refuting_arg;

  const std::string& label() const { return *claim.label; }
};

struct DemoIndex {
  std::vector<DemoEntry> entries;  // in split order
  std::string source_split;
};

struct Demonstration {
  Claim claim;
  std::string label;
  double similarity = 0.0;
  std::optional<std::string> supporting_arg;
  std::optional<std::string> refuting_arg;
};

/// Embed every train claim once (cache-backed) and keep the entries in split
/// order. Throws MissingLabel if any claim is unlabeled.
DemoIndex build_demo_index(const DatasetSplit& train, Gateway& gateway);

/// Demonstrations whose cosine similarity to the query claim reaches
/// `threshold`, the query itself excluded by claim_id, ordered by similarity
/// descending (claim_id ascending on ties) and truncated to k. k = 0 or an
/// empty result means the caller falls back to zero-shot prompting.
std::vector<Demonstration> select_demonstrations(const DemoIndex& index,
                                                 const Claim& query, int k,
                                                 double threshold, Gateway& gateway);

}  // namespace claimcheck
