#include "claimcheck/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "claimcheck/error.hpp"

namespace claimcheck {
namespace {

using nlohmann::json;

constexpr const char* kIndexFormat = "claimcheck-index-v1";

/// Distinct terms in first-occurrence order. Scoring iterates terms in this
/// order both here and in bm25_score, so per-document sums accumulate in the
/// same sequence and the two code paths agree bit-for-bit.
std::vector<std::string> distinct_terms(const std::vector<std::string>& terms) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : terms) {
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

double idf(std::size_t n, std::size_t df) {
  return std::log(1.0 + (static_cast<double>(n) - static_cast<double>(df) + 0.5) /
                            (static_cast<double>(df) + 0.5));
}

double tf_component(std::uint32_t tf, std::uint32_t dl, double avgdl,
                    const Bm25Params& p) {
  const double tfd = static_cast<double>(tf);
  const double norm = 1.0 - p.b + p.b * static_cast<double>(dl) / avgdl;
  return tfd * (p.k1 + 1.0) / (tfd + p.k1 * norm);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                       (c >= 'A' && c <= 'Z');
    if (alnum) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

InvertedIndex build_index(const std::vector<Document>& docs) {
  if (docs.empty()) raise("EmptyCorpus", "no documents to index");

  InvertedIndex index;
  index.doc_ids.reserve(docs.size());
  index.doc_lengths.reserve(docs.size());

  std::uint64_t total_len = 0;
  for (std::uint32_t ord = 0; ord < docs.size(); ++ord) {
    const auto tokens = tokenize(docs[ord].composite_text());
    index.doc_ids.push_back(docs[ord].doc_id);
    index.doc_lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_len += tokens.size();

    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      index.postings[term].push_back({ord, count});
    }
  }
  // per-term postings were appended in ascending ordinal order already, but
  // the unordered_map iteration above inserts ordinals one document at a
  // time, so each list is sorted by construction
  index.avg_doc_length =
      static_cast<double>(total_len) / static_cast<double>(docs.size());
  return index;
}

double bm25_score(const InvertedIndex& index,
                  const std::vector<std::string>& query_terms,
                  std::uint32_t doc_ordinal, const Bm25Params& params) {
  if (doc_ordinal >= index.doc_count()) {
    raise("OrdinalOutOfRange", std::to_string(doc_ordinal));
  }
  const std::size_t n = index.doc_count();
  const std::uint32_t dl = index.doc_lengths[doc_ordinal];

  double score = 0.0;
  for (const auto& term : distinct_terms(query_terms)) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const auto& plist = it->second;
    auto pit = std::lower_bound(plist.begin(), plist.end(), doc_ordinal,
                                [](const Posting& p, std::uint32_t ord) {
                                  return p.ordinal < ord;
                                });
    if (pit == plist.end() || pit->ordinal != doc_ordinal) continue;
    score += idf(n, plist.size()) *
             tf_component(pit->tf, dl, index.avg_doc_length, params);
  }
  return score;
}

std::vector<ScoredDocument> retrieve_candidates(const InvertedIndex& index,
                                                const Claim& claim, int m_hat,
                                                const Bm25Params& params) {
  if (index.doc_count() == 0) raise("EmptyCorpus", "index holds no documents");
  if (m_hat < 0) raise("ConfigError", "m_hat must be non-negative");

  const std::size_t n = index.doc_count();
  std::vector<double> scores(n, 0.0);
  for (const auto& term : distinct_terms(tokenize(claim.text))) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double term_idf = idf(n, it->second.size());
    for (const Posting& p : it->second) {
      scores[p.ordinal] += term_idf * tf_component(p.tf, index.doc_lengths[p.ordinal],
                                                   index.avg_doc_length, params);
    }
  }

  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.doc_ids[a] < index.doc_ids[b];
  });
  // scores are never negative, so the zero-score documents that pad the tail
  // land after every positive-score hit, ordered among themselves by doc_id

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m_hat), n);
  std::vector<ScoredDocument> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({index.doc_ids[order[i]], scores[order[i]],
                   static_cast<int>(i) + 1, Stage::sparse});
  }
  return out;
}

void save_index(const InvertedIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise("MissingFile", "cannot write " + path.string());

  json header;
  header["format"] = kIndexFormat;
  header["doc_count"] = index.doc_count();
  header["avg_doc_length"] = index.avg_doc_length;
  out << header.dump() << '\n';

  for (std::size_t i = 0; i < index.doc_count(); ++i) {
    json rec;
    rec["doc_id"] = index.doc_ids[i];
    rec["length"] = index.doc_lengths[i];
    out << rec.dump() << '\n';
  }

  std::vector<std::string> terms;
  terms.reserve(index.postings.size());
  for (const auto& [term, _] : index.postings) terms.push_back(term);
  std::sort(terms.begin(), terms.end());
  for (const auto& term : terms) {
    json rec;
    rec["term"] = term;
    json plist = json::array();
    for (const Posting& p : index.postings.at(term)) {
      plist.push_back(json::array({p.ordinal, p.tf}));
    }
    rec["postings"] = std::move(plist);
    out << rec.dump() << '\n';
  }
}

InvertedIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise("MissingFile", path.string());

  std::string line;
  if (!std::getline(in, line)) raise("MalformedRecord", path.string() + ": empty file");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != kIndexFormat) {
    raise("MalformedRecord", path.string() + ": bad index header");
  }

  InvertedIndex index;
  index.avg_doc_length = header.at("avg_doc_length").get<double>();
  const std::size_t doc_count = header.at("doc_count").get<std::size_t>();

  std::size_t line_no = 1;
  for (std::size_t i = 0; i < doc_count; ++i) {
    if (!std::getline(in, line)) {
      raise("MalformedRecord", path.string() + ": truncated document table");
    }
    ++line_no;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("doc_id") || !rec.contains("length")) {
      raise("MalformedRecord", path.string() + ":" + std::to_string(line_no));
    }
    index.doc_ids.push_back(rec["doc_id"].get<std::string>());
    index.doc_lengths.push_back(rec["length"].get<std::uint32_t>());
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("term") || !rec.contains("postings")) {
      raise("MalformedRecord", path.string() + ":" + std::to_string(line_no));
    }
    std::vector<Posting> plist;
    for (const auto& p : rec["postings"]) {
      plist.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    }
    index.postings.emplace(rec["term"].get<std::string>(), std::move(plist));
  }
  return index;
}

}  // namespace claimcheck
