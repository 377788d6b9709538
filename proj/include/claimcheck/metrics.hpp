#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace claimcheck {

struct RetrievalJudgment {
  std::string claim_id;
  std::vector<std::string> ranked_doc_ids;  // no duplicates
  std::set<std::string> relevant_doc_ids;   // non-empty

  void validate() const;  // DuplicateId / EmptyInput
};

/// Binary-relevance NDCG@k: DCG = sum of rel_i / log2(i + 1) over the first k
/// ranks, divided by the ideal DCG for this judgment. 0 when nothing relevant
/// was retrieved in the top k.
double ndcg_at_k(const RetrievalJudgment& judgment, int k);

/// |top-k intersect relevant| / |relevant|.
double recall_at_k(const RetrievalJudgment& judgment, int k);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct ClassificationReport {
  std::map<std::string, ClassScores> per_class;  // every configured class
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // confusion[gold][predicted]
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
};

/// Macro-averaged precision/recall/F1 over the full configured class list.
/// Zero-denominator cases score 0 and zero-support classes still count in
/// the macro means; macro F1 is the unweighted mean of the per-class F1s.
/// Throws LengthMismatch and UnknownLabel.
ClassificationReport macro_prf(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted,
                               const std::vector<std::string>& classes);

nlohmann::json classification_report_json(const ClassificationReport& report);

}  // namespace claimcheck
