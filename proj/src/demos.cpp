#include "claimcheck/demos.hpp"

#include <algorithm>

#include "claimcheck/error.hpp"

namespace claimcheck {

DemoIndex build_demo_index(const DatasetSplit& train, Gateway& gateway) {
  DemoIndex index;
  index.source_split = train.name;
  if (train.claims.empty()) return index;

  std::vector<std::string> texts;
  texts.reserve(train.claims.size());
  for (const auto& c : train.claims) {
    if (!c.label) raise("MissingLabel", c.claim_id);
    texts.push_back(c.text);
  }
  auto vectors = gateway.embed_texts(texts);

  index.entries.reserve(train.claims.size());
  for (std::size_t i = 0; i < train.claims.size(); ++i) {
    index.entries.push_back({train.claims[i], std::move(vectors[i]), {}, {}});
  }
  return index;
}

std::vector<Demonstration> select_demonstrations(const DemoIndex& index,
                                                 const Claim& query, int k,
                                                 double threshold, Gateway& gateway) {
  if (k < 0) raise("ConfigError", "k must be non-negative");
  if (k == 0 || index.entries.empty()) return {};

  const EmbeddingVector query_vec = gateway.embed_texts({query.text})[0];

  std::vector<Demonstration> picked;
  for (const auto& entry : index.entries) {
    if (entry.claim.claim_id == query.claim_id) continue;
    // vectors arrive unit-normalised from the gateway, so the dot product is
    // already the cosine
    const double sim = query_vec.dot(entry.embedding);
    if (sim >= threshold) {
      picked.push_back({entry.claim, entry.label(), sim, entry.supporting_arg,
                        entry.refuting_arg});
    }
  }

  std::sort(picked.begin(), picked.end(), [](const Demonstration& a, const Demonstration& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.claim.claim_id < b.claim.claim_id;
  });
  if (picked.size() > static_cast<std::size_t>(k)) {
    picked.resize(static_cast<std::size_t>(k));
  }
  return picked;
}

}  // namespace claimcheck
