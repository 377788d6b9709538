#include "claimcheck/corpus.hpp"

#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "claimcheck/error.hpp"

namespace claimcheck {
namespace {

using nlohmann::json;

bool is_blank(const std::string& line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

json parse_line(const std::string& line, const std::filesystem::path& path,
                std::size_t line_no) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded() || !rec.is_object()) {
    raise("MalformedRecord",
          path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
  }
  return rec;
}

std::string require_string(const json& rec, const char* key,
                           const std::filesystem::path& path, std::size_t line_no) {
  if (!rec.contains(key) || !rec[key].is_string()) {
    raise("MalformedRecord", path.string() + ":" + std::to_string(line_no) +
                                 ": missing string field '" + key + "'");
  }
  return rec[key].get<std::string>();
}

bool text_is_empty(const std::string& s) { return is_blank(s); }

}  // namespace

std::string Document::composite_text() const {
  if (title && !title->empty()) return *title + " " + text;
  return text;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise("MissingFile", path.string());

  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json rec = parse_line(line, path, line_no);
    Document d;
    d.doc_id = require_string(rec, "doc_id", path, line_no);
    d.text = require_string(rec, "text", path, line_no);
    if (text_is_empty(d.text)) {
      raise("MalformedRecord",
            path.string() + ":" + std::to_string(line_no) + ": empty text");
    }
    if (rec.contains("title")) {
      if (!rec["title"].is_string()) {
        raise("MalformedRecord", path.string() + ":" + std::to_string(line_no) +
                                     ": 'title' must be a string");
      }
      d.title = rec["title"].get<std::string>();
    }
    if (!seen.insert(d.doc_id).second) raise("DuplicateId", d.doc_id);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::optional<std::string> canonical_class(const std::string& label,
                                           const std::vector<std::string>& classes) {
  const std::string needle = lower(label);
  for (const auto& c : classes) {
    if (lower(c) == needle) return c;
  }
  return std::nullopt;
}

DatasetSplit load_claims(const std::filesystem::path& path,
                         const std::vector<std::string>& classes,
                         const std::string& split_name) {
  std::ifstream in(path);
  if (!in) raise("MissingFile", path.string());

  DatasetSplit split;
  split.name = split_name;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json rec = parse_line(line, path, line_no);
    Claim c;
    c.claim_id = require_string(rec, "claim_id", path, line_no);
    c.text = require_string(rec, "text", path, line_no);
    if (text_is_empty(c.text)) {
      raise("MalformedRecord",
            path.string() + ":" + std::to_string(line_no) + ": empty text");
    }
    if (rec.contains("label")) {
      if (!rec["label"].is_string()) {
        raise("MalformedRecord", path.string() + ":" + std::to_string(line_no) +
                                     ": 'label' must be a string");
      }
      const std::string raw = rec["label"].get<std::string>();
      auto canon = canonical_class(raw, classes);
      if (!canon) raise("UnknownLabel", c.claim_id + ": '" + raw + "'");
      c.label = *canon;
    }
    if (rec.contains("gold_doc_ids")) {
      if (!rec["gold_doc_ids"].is_array()) {
        raise("MalformedRecord", path.string() + ":" + std::to_string(line_no) +
                                     ": 'gold_doc_ids' must be an array");
      }
      std::vector<std::string> ids;
      for (const auto& v : rec["gold_doc_ids"]) {
        if (!v.is_string()) {
          raise("MalformedRecord", path.string() + ":" + std::to_string(line_no) +
                                       ": gold_doc_ids entries must be strings");
        }
        ids.push_back(v.get<std::string>());
      }
      c.gold_doc_ids = std::move(ids);
    }
    if (!seen.insert(c.claim_id).second) raise("DuplicateId", c.claim_id);
    split.claims.push_back(std::move(c));
  }
  return split;
}

std::vector<LinkViolation> validate_links(const DatasetSplit& split,
                                          const std::vector<Document>& docs) {
  std::unordered_set<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.insert(d.doc_id);

  std::vector<LinkViolation> out;
  for (const auto& c : split.claims) {
    if (!c.gold_doc_ids) continue;
    for (const auto& g : *c.gold_doc_ids) {
      if (!ids.count(g)) out.push_back({c.claim_id, g});
    }
  }
  return out;
}

void check_split_disjoint(const DatasetSplit& a, const DatasetSplit& b) {
  std::unordered_set<std::string> ids;
  for (const auto& c : a.claims) ids.insert(c.claim_id);
  for (const auto& c : b.claims) {
    if (ids.count(c.claim_id)) {
      raise("DuplicateId", c.claim_id + " appears in both '" + a.name + "' and '" +
                               b.name + "'");
    }
  }
}

void save_documents(const std::vector<Document>& docs,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise("MissingFile", "cannot write " + path.string());
  for (const auto& d : docs) {
    json rec;
    rec["doc_id"] = d.doc_id;
    rec["text"] = d.text;
    if (d.title) rec["title"] = *d.title;
    out << rec.dump() << '\n';
  }
}

void save_claims(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise("MissingFile", "cannot write " + path.string());
  for (const auto& c : split.claims) {
    json rec;
    rec["claim_id"] = c.claim_id;
    rec["text"] = c.text;
    if (c.label) rec["label"] = *c.label;
    if (c.gold_doc_ids) rec["gold_doc_ids"] = *c.gold_doc_ids;
    out << rec.dump() << '\n';
  }
}

}  // namespace claimcheck
