#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace claimcheck {

struct Document {
  std::string doc_id;
  std::optional<std::string> title;
  std::string text;

  /// Title and body joined with a single space; this is the text that gets
  /// indexed and embedded, so retrieval sees titles too.
  std::string composite_text() const;
};

struct Claim {
  std::string claim_id;
  std::string text;
  std::optional<std::string> label;
  std::optional<std::vector<std::string>> gold_doc_ids;
};

struct DatasetSplit {
  std::string name;  // "train" or "test"
  std::vector<Claim> claims;
};

struct LinkViolation {
  std::string claim_id;
  std::string missing_doc_id;
};

/// Load line-delimited JSON documents. Blank lines are skipped.
/// Throws Error codes: MissingFile, MalformedRecord (with line number),
/// DuplicateId.
std::vector<Document> load_documents(const std::filesystem::path& path);

/// Load line-delimited JSON claims for one split. Labels are validated
/// case-insensitively against `classes` and normalised to the canonical
/// casing from that list. Throws MissingFile, MalformedRecord, DuplicateId,
/// UnknownLabel.
DatasetSplit load_claims(const std::filesystem::path& path,
                         const std::vector<std::string>& classes,
                         const std::string& split_name);

/// Every gold_doc_id that does not resolve to a loaded document, in claim
/// order. Empty result means the split is fully linked.
std::vector<LinkViolation> validate_links(const DatasetSplit& split,
                                          const std::vector<Document>& docs);

/// Throws DuplicateId if any claim_id appears in both splits.
void check_split_disjoint(const DatasetSplit& a, const DatasetSplit& b);

/// Serialisers for the same line-delimited format the loaders accept.
/// Optional fields that were absent stay absent, so load/save round-trips
/// are field-identical.
void save_documents(const std::vector<Document>& docs,
                    const std::filesystem::path& path);
void save_claims(const DatasetSplit& split, const std::filesystem::path& path);

/// Case-insensitive match of `label` against `classes`; returns the canonical
/// spelling or nullopt if no class matches.
std::optional<std::string> canonical_class(
    const std::string& label, const std::vector<std::string>& classes);

}  // namespace claimcheck
