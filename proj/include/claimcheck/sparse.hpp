#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "claimcheck/corpus.hpp"

namespace claimcheck {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t ordinal;  // position of the document in corpus order
  std::uint32_t tf;
};

struct InvertedIndex {
  // postings lists are sorted by ordinal (construction order guarantees it)
  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::vector<std::uint32_t> doc_lengths;
  std::vector<std::string> doc_ids;
  double avg_doc_length = 0.0;

  std::size_t doc_count() const { return doc_ids.size(); }
};

enum class Stage { sparse, dense };

struct ScoredDocument {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based
  Stage stage = Stage::sparse;
};

/// Lowercased maximal runs of ASCII alphanumeric characters; every other
/// byte separates tokens. "COVID-19 vaccine." -> ["covid", "19", "vaccine"].
std::vector<std::string> tokenize(const std::string& text);

/// Index the composite text (title + body) of every document, in input order.
/// Throws EmptyCorpus when docs is empty.
InvertedIndex build_index(const std::vector<Document>& docs);

/// Okapi BM25 score of one document for the query's distinct terms, taken in
/// first-occurrence order. idf(t) = ln(1 + (n - df + 0.5) / (df + 0.5)), so
/// scores are never negative. Throws OrdinalOutOfRange.
double bm25_score(const InvertedIndex& index,
                  const std::vector<std::string>& query_terms,
                  std::uint32_t doc_ordinal, const Bm25Params& params = {});

/// Top `m_hat` documents for the claim text. Documents with a positive score
/// come first (score descending, doc_id ascending on ties); zero-score
/// documents pad the tail, in ascending doc_id order, until m_hat or the
/// corpus is exhausted. Ranks are 1-based, stage is Stage::sparse.
std::vector<ScoredDocument> retrieve_candidates(const InvertedIndex& index,
                                                const Claim& claim, int m_hat,
                                                const Bm25Params& params = {});

/// Cache-style persistence (line-delimited JSON with a version header).
/// Rebuildable from the corpus, so the format is internal.
void save_index(const InvertedIndex& index, const std::filesystem::path& path);
InvertedIndex load_index(const std::filesystem::path& path);

}  // namespace claimcheck
