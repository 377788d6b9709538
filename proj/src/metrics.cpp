#include "claimcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "claimcheck/error.hpp"

namespace claimcheck {

void RetrievalJudgment::validate() const {
  if (relevant_doc_ids.empty()) {
    raise("EmptyInput", claim_id + ": judgment without relevant documents");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ranked_doc_ids) {
    if (!seen.insert(id).second) {
      raise("DuplicateId", claim_id + ": ranked list repeats " + id);
    }
  }
}

double ndcg_at_k(const RetrievalJudgment& judgment, int k) {
  judgment.validate();
  if (k <= 0) return 0.0;

  const std::size_t depth =
      std::min<std::size_t>(static_cast<std::size_t>(k), judgment.ranked_doc_ids.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (judgment.relevant_doc_ids.count(judgment.ranked_doc_ids[i])) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  if (dcg == 0.0) return 0.0;

  const std::size_t ideal_hits = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                       judgment.relevant_doc_ids.size());
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal_hits; ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

double recall_at_k(const RetrievalJudgment& judgment, int k) {
  judgment.validate();
  if (k <= 0) return 0.0;

  const std::size_t depth =
      std::min<std::size_t>(static_cast<std::size_t>(k), judgment.ranked_doc_ids.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (judgment.relevant_doc_ids.count(judgment.ranked_doc_ids[i])) ++hits;
  }
  return static_cast<double>(hits) /
         static_cast<double>(judgment.relevant_doc_ids.size());
}

ClassificationReport macro_prf(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted,
                               const std::vector<std::string>& classes) {
  if (gold.size() != predicted.size()) {
    raise("LengthMismatch", "gold has " + std::to_string(gold.size()) +
                                " labels, predictions have " +
                                std::to_string(predicted.size()));
  }
  std::unordered_set<std::string> known(classes.begin(), classes.end());
  for (const auto& g : gold) {
    if (!known.count(g)) raise("UnknownLabel", "gold label '" + g + "'");
  }
  for (const auto& p : predicted) {
    if (!known.count(p)) raise("UnknownLabel", "predicted label '" + p + "'");
  }

  ClassificationReport report;
  for (const auto& a : classes) {
    for (const auto& b : classes) report.confusion[a][b] = 0;
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++report.confusion[gold[i]][predicted[i]];
  }

  for (const auto& c : classes) {
    std::size_t tp = report.confusion[c][c];
    std::size_t fp = 0, fn = 0;
    for (const auto& other : classes) {
      if (other == c) continue;
      fp += report.confusion[other][c];
      fn += report.confusion[c][other];
    }
    ClassScores scores;
    scores.support = tp + fn;
    scores.precision =
        (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    scores.recall =
        (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    scores.f1 = (scores.precision + scores.recall > 0.0)
                    ? 2.0 * scores.precision * scores.recall /
                          (scores.precision + scores.recall)
                    : 0.0;
    report.per_class[c] = scores;

    report.macro_precision += scores.precision;
    report.macro_recall += scores.recall;
    report.macro_f1 += scores.f1;
  }
  const double n = static_cast<double>(classes.size());
  report.macro_precision /= n;
  report.macro_recall /= n;
  report.macro_f1 /= n;
  return report;
}

nlohmann::json classification_report_json(const ClassificationReport& report) {
  nlohmann::json out;
  for (const auto& [name, scores] : report.per_class) {
    out["per_class"][name] = {{"precision", scores.precision},
                              {"recall", scores.recall},
                              {"f1", scores.f1},
                              {"support", scores.support}};
  }
  out["macro_precision"] = report.macro_precision;
  out["macro_recall"] = report.macro_recall;
  out["macro_f1"] = report.macro_f1;
  for (const auto& [g, row] : report.confusion) {
    for (const auto& [p, count] : row) out["confusion"][g][p] = count;
  }
  return out;
}

}  // namespace claimcheck
