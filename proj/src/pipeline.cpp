#include "claimcheck/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/demos.hpp"
#include "claimcheck/error.hpp"
#include "claimcheck/metrics.hpp"
#include "claimcheck/verifier.hpp"

namespace claimcheck {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void bad_config(const std::string& msg) { raise("ConfigError", msg); }

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null())
    bad_config(std::string("config: missing required field '") + key + "'");
  return *it;
}

std::string need_string(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_string() || v.get<std::string>().empty())
    bad_config(std::string("config: field '") + key + "' must be a non-empty string");
  return v.get<std::string>();
}

std::string opt_string(const json& j, const char* key, std::string dflt) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return dflt;
  if (!it->is_string())
    bad_config(std::string("config: field '") + key + "' must be a string");
  return it->get<std::string>();
}

double opt_number(const json& j, const char* key, double dflt) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return dflt;
  if (!it->is_number())
    bad_config(std::string("config: field '") + key + "' must be a number");
  return it->get<double>();
}

int opt_int(const json& j, const char* key, int dflt) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return dflt;
  if (!it->is_number_integer())
    bad_config(std::string("config: field '") + key + "' must be an integer");
  return it->get<int>();
}

std::uint64_t opt_uint(const json& j, const char* key, std::uint64_t dflt) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return dflt;
  if (!it->is_number_integer() || (it->is_number_integer() && it->get<std::int64_t>() < 0))
    bad_config(std::string("config: field '") + key + "' must be a non-negative integer");
  return it->get<std::uint64_t>();
}

const json* opt_object(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  if (!it->is_object())
    bad_config(std::string("config: field '") + key + "' must be an object");
  return &*it;
}

std::string lower_copy(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void guard_artifact(const fs::path& p, bool force) {
  if (!force && fs::exists(p))
    raise("ArtifactExists", p.string() + " already exists (use --force to overwrite)");
}

void write_text_atomic(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise("MissingFile", "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) raise("MissingFile", "failed writing " + tmp.string());
  }
  fs::rename(tmp, p);
}

json stats_json(const GatewayStats& s) {
  return json{{"embed_requests", s.embed_requests},
              {"texts_embedded", s.texts_embedded},
              {"cache_hits", s.cache_hits},
              {"generate_requests", s.generate_requests}};
}

json manifest_entry(const RunConfig& cfg, const std::vector<fs::path>& arts,
                    const GatewayStats* stats) {
  json paths = json::array();
  for (const auto& p : arts) paths.push_back(p.string());
  return json{{"completed_at", iso_now()},
              {"seed", cfg.seed},
              {"config", cfg.raw},
              {"artifacts", paths},
              {"provider_calls", stats_json(stats ? *stats : GatewayStats{})}};
}

// The manifest is read-modify-write and always the last artifact touched, so
// its presence for a command means that command finished.
void update_manifest(const RunConfig& cfg, const std::string& command, json entry) {
  fs::path path = artifacts::manifest(cfg);
  json m = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    try {
      m = json::parse(in);
      if (!m.is_object()) m = json::object();
    } catch (const json::exception&) {
      m = json::object();  // a corrupt manifest is rebuilt, not fatal
    }
  }
  m["tool"] = kToolVersion;
  m["commands"][command] = std::move(entry);
  write_text_atomic(path, m.dump(2) + "\n");
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg) {
  std::shared_ptr<Provider> provider;
  if (cfg.provider_kind == "mock")
    provider = std::make_shared<MockProvider>(cfg.mock);
  else
    provider = std::make_shared<HttpProvider>(cfg.provider);
  fs::create_directories(cfg.cache_dir);
  return std::make_unique<Gateway>(cfg.provider, std::move(provider),
                                   artifacts::embedding_cache(cfg));
}

std::unordered_map<std::string, const Document*> index_by_id(
    const std::vector<Document>& docs) {
  std::unordered_map<std::string, const Document*> by_id;
  by_id.reserve(docs.size());
  for (const auto& d : docs) by_id.emplace(d.doc_id, &d);
  return by_id;
}

// Claim ids share an embedding store with doc ids, so the spaces must not
// collide.
void check_id_spaces_disjoint(const DatasetSplit& split,
                              const std::unordered_map<std::string, const Document*>& docs) {
  for (const auto& c : split.claims)
    if (docs.count(c.claim_id) > 0)
      raise("DuplicateId", "claim id '" + c.claim_id + "' in split '" + split.name +
                               "' collides with a document id");
}

void require_links(const DatasetSplit& split, const std::vector<Document>& docs) {
  auto violations = validate_links(split, docs);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "claim '" << violations.front().claim_id << "' references unknown document '"
      << violations.front().missing_doc_id << "'";
  if (violations.size() > 1) msg << " (and " << violations.size() - 1 << " more)";
  raise("LinkViolation", msg.str());
}

InvertedIndex load_index_artifact(const RunConfig& cfg,
                                  const std::unordered_map<std::string, const Document*>& docs) {
  fs::path path = artifacts::index(cfg);
  if (!fs::exists(path))
    raise("MissingFile", path.string() + " (run 'index build' first)");
  InvertedIndex index = load_index(path);
  if (index.doc_count() != docs.size())
    bad_config("index holds " + std::to_string(index.doc_count()) +
               " documents but the documents file has " + std::to_string(docs.size()) +
               " (rebuild the index)");
  for (const auto& id : index.doc_ids)
    if (docs.count(id) == 0)
      bad_config("index references unknown document '" + id + "' (rebuild the index)");
  return index;
}

AdapterParams load_adapter_artifact(const RunConfig& cfg) {
  fs::path path = artifacts::adapter(cfg);
  if (!fs::exists(path))
    raise("MissingFile", path.string() + " (run 'rerank train' first)");
  return load_adapter(path);
}

DatasetSplit load_split(const RunConfig& cfg, const fs::path& path, const char* field,
                        const std::string& name) {
  if (path.empty())
    bad_config(std::string("config: '") + field + "' is required for this command");
  return load_claims(path, cfg.classes, name);
}

// One batched embedding request covering every claim text and candidate
// document for the given claims. Keys are claim_id / doc_id.
void prefetch_embeddings(Gateway& gw, EmbeddingStore& store,
                         const std::vector<const Claim*>& claims,
                         const std::vector<std::vector<ScoredDocument>>& candidates,
                         const std::vector<std::string>& extra_doc_ids,
                         const std::unordered_map<std::string, const Document*>& docs) {
  std::vector<std::string> keys;
  std::vector<std::string> texts;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& key, std::string text) {
    if (seen.insert(key).second) {
      keys.push_back(key);
      texts.push_back(std::move(text));
    }
  };
  for (std::size_t i = 0; i < claims.size(); ++i) {
    add(claims[i]->claim_id, claims[i]->text);
    for (const auto& c : candidates[i]) add(c.doc_id, docs.at(c.doc_id)->composite_text());
  }
  for (const auto& id : extra_doc_ids) add(id, docs.at(id)->composite_text());
  if (keys.empty()) return;
  auto vectors = gw.embed_texts(texts);
  for (std::size_t i = 0; i < keys.size(); ++i) store.put(keys[i], std::move(vectors[i]));
}

std::vector<Document> gather_documents(
    const std::vector<ScoredDocument>& ranked,
    const std::unordered_map<std::string, const Document*>& docs) {
  std::vector<Document> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(*docs.at(r.doc_id));
  return out;
}

// Runs work(0..n-1) on a small thread pool but calls commit strictly in input
// order, so artifact streams stay deterministic regardless of scheduling.
template <typename Result, typename Work, typename Commit>
void run_ordered(std::size_t n, int workers, Work&& work, Commit&& commit) {
  if (n == 0) return;
  int pool_size = std::max(1, std::min(workers, static_cast<int>(n)));
  if (pool_size == 1) {
    for (std::size_t i = 0; i < n; ++i) commit(i, work(i));
    return;
  }
  std::mutex mu;
  std::vector<std::optional<Result>> ready(n);
  std::size_t next_job = 0;
  std::size_t next_commit = 0;
  std::exception_ptr first_error;
  auto body = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (first_error || next_job >= n) return;
        i = next_job++;
      }
      std::optional<Result> result;
      try {
        result.emplace(work(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      ready[i] = std::move(result);
      try {
        while (next_commit < n && ready[next_commit]) {
          commit(next_commit, std::move(*ready[next_commit]));
          ready[next_commit].reset();
          ++next_commit;
        }
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(pool_size));
  for (int t = 0; t < pool_size; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string rstrip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void RunConfig::validate() const {
  if (documents_path.empty()) bad_config("config: 'documents' must be set");
  if (cache_dir.empty()) bad_config("config: 'cache_dir' must be set");
  if (output_dir.empty()) bad_config("config: 'output_dir' must be set");
  if (classes.empty()) bad_config("config: 'classes' must be a non-empty array");
  std::unordered_set<std::string> seen;
  for (const auto& c : classes) {
    if (c.empty()) bad_config("config: class names must be non-empty");
    if (!seen.insert(lower_copy(c)).second)
      bad_config("config: duplicate class '" + c + "' (names are case-insensitive)");
  }
  if (!canonical_class(fallback_class, classes))
    bad_config("config: 'fallback_class' (" + fallback_class + ") is not one of the classes");
  if (m_hat < 1) bad_config("config: 'm_hat' must be at least 1");
  if (m < 1 || m > m_hat) bad_config("config: 'm' must be between 1 and m_hat");
  if (k < 0) bad_config("config: 'k' must be non-negative");
  if (threshold < -1.0 || threshold > 1.0)
    bad_config("config: 'threshold' must lie in [-1, 1]");
  if (bm25.k1 < 0.0) bad_config("config: 'bm25.k1' must be non-negative");
  if (bm25.b < 0.0 || bm25.b > 1.0) bad_config("config: 'bm25.b' must lie in [0, 1]");
  rerank.validate();
  if (provider_kind != "mock" && provider_kind != "http")
    bad_config("config: 'provider.kind' must be \"mock\" or \"http\"");
  if (provider.max_in_flight < 1)
    bad_config("config: 'provider.max_in_flight' must be at least 1");
  if (provider.timeout.count() <= 0)
    bad_config("config: 'provider.timeout_ms' must be positive");
  if (provider.temperature < 0.0)
    bad_config("config: 'provider.temperature' must be non-negative");
  if (provider.embed_model.empty() || provider.chat_model.empty())
    bad_config("config: provider model names must be non-empty");
  if (provider_kind == "http") {
    if (provider.base_url.empty()) bad_config("config: 'provider.base_url' is required for http");
    if (provider.api_key_env.empty())
      bad_config("config: 'provider.api_key_env' must name an environment variable");
  } else {
    if (mock.dim < 1) bad_config("config: 'provider.mock.dim' must be at least 1");
    if (mock.latency.count() < 0) bad_config("config: 'provider.mock.latency_ms' must be non-negative");
  }
}

RunConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  if (!fs::exists(path)) raise("MissingFile", path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) raise("MissingFile", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad_config(path.string() + ": " + e.what());
  }
  if (!j.is_object()) bad_config(path.string() + ": top-level value must be an object");

  RunConfig cfg;
  cfg.raw = j;
  cfg.documents_path = need_string(j, "documents");
  cfg.train_claims_path = opt_string(j, "train_claims", "");
  cfg.test_claims_path = opt_string(j, "test_claims", "");
  cfg.cache_dir = need_string(j, "cache_dir");
  cfg.output_dir = need_string(j, "output_dir");

  const json& classes = need(j, "classes");
  if (!classes.is_array() || classes.empty())
    bad_config("config: 'classes' must be a non-empty array");
  for (const auto& c : classes) {
    if (!c.is_string() || c.get<std::string>().empty())
      bad_config("config: 'classes' must contain non-empty strings");
    cfg.classes.push_back(c.get<std::string>());
  }
  cfg.fallback_class = need_string(j, "fallback_class");
  if (auto canon = canonical_class(cfg.fallback_class, cfg.classes))
    cfg.fallback_class = *canon;

  cfg.m_hat = opt_int(j, "m_hat", cfg.m_hat);
  cfg.m = opt_int(j, "m", cfg.m);
  cfg.k = opt_int(j, "k", cfg.k);
  cfg.threshold = opt_number(j, "threshold", cfg.threshold);
  std::uint64_t file_seed = opt_uint(j, "seed", 0);
  cfg.seed = seed_override ? *seed_override : file_seed;

  if (const json* b = opt_object(j, "bm25")) {
    cfg.bm25.k1 = opt_number(*b, "k1", cfg.bm25.k1);
    cfg.bm25.b = opt_number(*b, "b", cfg.bm25.b);
  }

  bool rerank_seed_pinned = false;
  if (const json* r = opt_object(j, "rerank")) {
    cfg.rerank.l = opt_int(*r, "l", cfg.rerank.l);
    cfg.rerank.tau = opt_number(*r, "tau", cfg.rerank.tau);
    cfg.rerank.lambda = opt_number(*r, "lambda", cfg.rerank.lambda);
    cfg.rerank.temp = opt_number(*r, "temperature", cfg.rerank.temp);
    cfg.rerank.lr = opt_number(*r, "learning_rate", cfg.rerank.lr);
    cfg.rerank.momentum = opt_number(*r, "momentum", cfg.rerank.momentum);
    cfg.rerank.steps = opt_int(*r, "steps", cfg.rerank.steps);
    cfg.rerank.pool_size = opt_int(*r, "pool_size", cfg.rerank.pool_size);
    if (r->contains("seed")) {
      cfg.rerank.seed = opt_uint(*r, "seed", 0);
      rerank_seed_pinned = true;
    }
  }
  if (!rerank_seed_pinned) cfg.rerank.seed = cfg.seed;

  bool mock_seed_pinned = false;
  if (const json* p = opt_object(j, "provider")) {
    cfg.provider_kind = opt_string(*p, "kind", cfg.provider_kind);
    cfg.provider.base_url = opt_string(*p, "base_url", "");
    cfg.provider.embed_model = opt_string(*p, "embed_model", "");
    cfg.provider.chat_model = opt_string(*p, "chat_model", "");
    cfg.provider.api_key_env = opt_string(*p, "api_key_env", cfg.provider.api_key_env);
    cfg.provider.max_in_flight = opt_int(*p, "max_in_flight", cfg.provider.max_in_flight);
    cfg.provider.timeout = std::chrono::milliseconds(
        opt_int(*p, "timeout_ms", static_cast<int>(cfg.provider.timeout.count())));
    cfg.provider.temperature = opt_number(*p, "temperature", cfg.provider.temperature);
    if (const json* mk = opt_object(*p, "mock")) {
      if (mk->contains("seed")) {
        cfg.mock.seed = opt_uint(*mk, "seed", 0);
        mock_seed_pinned = true;
      }
      cfg.mock.dim = opt_int(*mk, "dim", cfg.mock.dim);
      cfg.mock.latency = std::chrono::milliseconds(opt_int(*mk, "latency_ms", 0));
      if (const json* script = opt_object(*mk, "script"))
        for (auto it = script->begin(); it != script->end(); ++it) {
          if (!it.value().is_string())
            bad_config("config: 'provider.mock.script' values must be strings");
          cfg.mock.script[it.key()] = it.value().get<std::string>();
        }
      if (const json* overrides = opt_object(*mk, "vector_overrides"))
        for (auto it = overrides->begin(); it != overrides->end(); ++it) {
          if (!it.value().is_array())
            bad_config("config: 'provider.mock.vector_overrides' values must be arrays");
          std::vector<double> v;
          for (const auto& x : it.value()) {
            if (!x.is_number())
              bad_config("config: 'provider.mock.vector_overrides' entries must be numbers");
            v.push_back(x.get<double>());
          }
          cfg.mock.vector_overrides[it.key()] = std::move(v);
        }
      if (auto it = mk->find("fail_keys"); it != mk->end() && !it->is_null()) {
        if (!it->is_array()) bad_config("config: 'provider.mock.fail_keys' must be an array");
        for (const auto& x : *it) {
          if (!x.is_string()) bad_config("config: 'provider.mock.fail_keys' must hold strings");
          cfg.mock.fail_keys.push_back(x.get<std::string>());
        }
      }
    }
  }
  if (!mock_seed_pinned) cfg.mock.seed = cfg.seed;
  if (cfg.provider_kind == "mock") {
    // Seed and dim are baked into the default model name so a shared cache
    // directory never serves vectors from a differently-seeded mock.
    if (cfg.provider.embed_model.empty())
      cfg.provider.embed_model =
          "mock-embed-s" + std::to_string(cfg.mock.seed) + "-d" + std::to_string(cfg.mock.dim);
    if (cfg.provider.chat_model.empty()) cfg.provider.chat_model = "mock-chat";
  }

  cfg.validate();
  return cfg;
}

namespace artifacts {
fs::path index(const RunConfig& cfg) { return cfg.output_dir / "index.jsonl"; }
fs::path adapter(const RunConfig& cfg) { return cfg.output_dir / "adapter.txt"; }
fs::path loss_trace(const RunConfig& cfg) { return cfg.output_dir / "loss_trace.jsonl"; }
fs::path demos(const RunConfig& cfg) { return cfg.output_dir / "demos.jsonl"; }
fs::path retrieval_report(const RunConfig& cfg) {
  return cfg.output_dir / "retrieval_metrics.json";
}
fs::path verdicts(const RunConfig& cfg) { return cfg.output_dir / "verdicts.jsonl"; }
fs::path classification_report(const RunConfig& cfg) {
  return cfg.output_dir / "classification_report.json";
}
fs::path manifest(const RunConfig& cfg) { return cfg.output_dir / "manifest.json"; }
fs::path embedding_cache(const RunConfig& cfg) { return cfg.cache_dir / "embeddings.jsonl"; }
}  // namespace artifacts

void cmd_index_build(const RunConfig& cfg, bool force) {
  fs::path out = artifacts::index(cfg);
  guard_artifact(out, force);
  auto docs = load_documents(cfg.documents_path);
  InvertedIndex index = build_index(docs);
  fs::create_directories(cfg.output_dir);
  save_index(index, out);
  json entry = manifest_entry(cfg, {out}, nullptr);
  entry["documents"] = docs.size();
  entry["terms"] = index.postings.size();
  update_manifest(cfg, "index build", std::move(entry));
}

void cmd_rerank_train(const RunConfig& cfg, bool force) {
  fs::path adapter_path = artifacts::adapter(cfg);
  fs::path trace_path = artifacts::loss_trace(cfg);
  guard_artifact(adapter_path, force);
  guard_artifact(trace_path, force);

  auto docs = load_documents(cfg.documents_path);
  auto by_id = index_by_id(docs);
  DatasetSplit train_split =
      load_split(cfg, cfg.train_claims_path, "train_claims", "train");
  check_id_spaces_disjoint(train_split, by_id);
  require_links(train_split, docs);
  InvertedIndex index = load_index_artifact(cfg, by_id);

  std::vector<const Claim*> eligible;
  std::vector<std::string> skipped;
  for (const auto& c : train_split.claims) {
    if (c.gold_doc_ids && !c.gold_doc_ids->empty())
      eligible.push_back(&c);
    else
      skipped.push_back(c.claim_id);
  }
  if (eligible.empty())
    raise("NoTrainingData", "no claim in '" + cfg.train_claims_path.string() +
                                "' carries a gold document id");

  auto gateway = make_gateway(cfg);
  EmbeddingStore store;
  {
    std::vector<std::vector<ScoredDocument>> pools;
    std::vector<std::string> golds;
    pools.reserve(eligible.size());
    for (const Claim* c : eligible) {
      pools.push_back(retrieve_candidates(index, *c, cfg.rerank.pool_size, cfg.bm25));
      golds.push_back(c->gold_doc_ids->front());
    }
    prefetch_embeddings(*gateway, store, eligible, pools, golds, by_id);
  }

  auto draw_pairs = [&](std::mt19937_64& rng) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(eligible.size());
    for (const Claim* c : eligible)
      pairs.push_back(sample_training_pair(index, *c, c->gold_doc_ids->front(),
                                           cfg.rerank, rng, cfg.bm25));
    return pairs;
  };
  std::mt19937_64 sample_rng(cfg.rerank.seed);
  std::vector<TrainingPair> pairs = draw_pairs(sample_rng);
  TrainResult result = train(std::move(pairs), store, cfg.rerank,
                             [&](int, std::mt19937_64& rng) { return draw_pairs(rng); });

  fs::create_directories(cfg.output_dir);
  save_adapter(result.params, adapter_path);
  std::ostringstream trace;
  std::size_t per_epoch = eligible.size();
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    json row{{"step", i},
             {"epoch", i / per_epoch},
             {"loss", result.loss_trace[i]}};
    trace << row.dump() << '\n';
  }
  write_text_atomic(trace_path, trace.str());

  GatewayStats stats = gateway->stats();
  json entry = manifest_entry(cfg, {adapter_path, trace_path}, &stats);
  entry["pairs_per_epoch"] = per_epoch;
  entry["steps"] = result.loss_trace.size();
  entry["skipped_claims"] = skipped;
  update_manifest(cfg, "rerank train", std::move(entry));
}

void cmd_eval_retrieval(const RunConfig& cfg, bool force) {
  fs::path out = artifacts::retrieval_report(cfg);
  guard_artifact(out, force);

  auto docs = load_documents(cfg.documents_path);
  auto by_id = index_by_id(docs);
  DatasetSplit split = load_split(cfg, cfg.test_claims_path, "test_claims", "test");
  check_id_spaces_disjoint(split, by_id);
  InvertedIndex index = load_index_artifact(cfg, by_id);

  std::vector<const Claim*> evaluated;
  std::vector<std::string> skipped;
  for (const auto& c : split.claims) {
    if (c.gold_doc_ids && !c.gold_doc_ids->empty())
      evaluated.push_back(&c);
    else
      skipped.push_back(c.claim_id);
  }
  if (evaluated.empty())
    raise("EmptyInput", "no claim in '" + cfg.test_claims_path.string() +
                            "' carries gold document ids");
  {
    DatasetSplit gold_only{split.name, {}};
    for (const Claim* c : evaluated) gold_only.claims.push_back(*c);
    require_links(gold_only, docs);
  }

  auto gateway = make_gateway(cfg);
  EmbeddingStore store;
  std::vector<std::vector<ScoredDocument>> candidates;
  candidates.reserve(evaluated.size());
  for (const Claim* c : evaluated)
    candidates.push_back(retrieve_candidates(index, *c, cfg.m_hat, cfg.bm25));
  prefetch_embeddings(*gateway, store, evaluated, candidates, {}, by_id);

  bool trained = fs::exists(artifacts::adapter(cfg));
  AdapterParams params = trained
                             ? load_adapter(artifacts::adapter(cfg))
                             : AdapterParams::identity(store.require(evaluated.front()->claim_id).dim());

  double n1 = 0.0, n3 = 0.0, r3 = 0.0, n5 = 0.0, r5 = 0.0;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    const Claim& claim = *evaluated[i];
    auto ranked = rerank(params, claim, candidates[i], cfg.m, store);
    RetrievalJudgment judgment;
    judgment.claim_id = claim.claim_id;
    for (const auto& r : ranked) judgment.ranked_doc_ids.push_back(r.doc_id);
    judgment.relevant_doc_ids.insert(claim.gold_doc_ids->begin(), claim.gold_doc_ids->end());
    n1 += ndcg_at_k(judgment, 1);
    n3 += ndcg_at_k(judgment, 3);
    r3 += recall_at_k(judgment, 3);
    n5 += ndcg_at_k(judgment, 5);
    r5 += recall_at_k(judgment, 5);
  }
  double n = static_cast<double>(evaluated.size());
  json report{{"retrieval",
               {{"ndcg_at_1", n1 / n},
                {"ndcg_at_3", n3 / n},
                {"recall_at_3", r3 / n},
                {"ndcg_at_5", n5 / n},
                {"recall_at_5", r5 / n}}},
              {"claims_evaluated", evaluated.size()},
              {"claims_skipped", skipped.size()},
              {"adapter", trained ? "trained" : "identity"},
              {"adapter_steps", params.step_count}};
  write_text_atomic(out, report.dump(2) + "\n");

  GatewayStats stats = gateway->stats();
  json entry = manifest_entry(cfg, {out}, &stats);
  entry["skipped_claims"] = skipped;
  update_manifest(cfg, "eval retrieval", std::move(entry));
}

namespace {

struct DemoOutcome {
  std::string claim_id;
  std::string line;   // empty when the claim failed
  std::string error;  // empty when the claim succeeded
};

}  // namespace

void cmd_demos_prepare(const RunConfig& cfg, bool force) {
  fs::path out = artifacts::demos(cfg);

  auto docs = load_documents(cfg.documents_path);
  auto by_id = index_by_id(docs);
  DatasetSplit train = load_split(cfg, cfg.train_claims_path, "train_claims", "train");
  check_id_spaces_disjoint(train, by_id);
  for (const auto& c : train.claims)
    if (!c.label)
      raise("MissingLabel", "claim '" + c.claim_id + "' in split 'train' has no label");
  InvertedIndex index = load_index_artifact(cfg, by_id);
  AdapterParams params = load_adapter_artifact(cfg);

  // Records persisted by earlier runs are kept verbatim; a claim whose text
  // changed (hash mismatch) is recomputed.
  std::unordered_map<std::string, std::string> existing;
  if (!force && fs::exists(out)) {
    std::ifstream in(out, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = rstrip_cr(line);
      if (line.empty()) continue;
      try {
        json rec = json::parse(line);
        existing[rec.at("claim_id").get<std::string>()] = line;
      } catch (const json::exception& e) {
        raise("MalformedRecord", out.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  auto is_current = [&](const Claim& c) {
    auto it = existing.find(c.claim_id);
    if (it == existing.end()) return false;
    json rec = json::parse(it->second);
    return rec.value("embedding_hash", "") == Gateway::content_hash(c.text);
  };

  std::vector<const Claim*> todo;
  std::size_t resumed = 0;
  for (const auto& c : train.claims) {
    if (is_current(c))
      ++resumed;
    else
      todo.push_back(&c);
  }

  auto gateway = make_gateway(cfg);
  EmbeddingStore store;
  std::vector<std::vector<ScoredDocument>> candidates;
  candidates.reserve(todo.size());
  for (const Claim* c : todo)
    candidates.push_back(retrieve_candidates(index, *c, cfg.m_hat, cfg.bm25));
  prefetch_embeddings(*gateway, store, todo, candidates, {}, by_id);

  fs::create_directories(cfg.output_dir);
  std::ofstream live(out, std::ios::binary | (force ? std::ios::trunc : std::ios::app));
  if (!live) raise("MissingFile", "cannot open " + out.string() + " for writing");

  std::unordered_map<std::string, std::string> fresh;
  std::vector<json> failures;
  auto work = [&](std::size_t i) -> DemoOutcome {
    const Claim& claim = *todo[i];
    auto ranked = rerank(params, claim, candidates[i], cfg.m, store);
    auto evidence = gather_documents(ranked, by_id);
    DemoOutcome outcome;
    outcome.claim_id = claim.claim_id;
    try {
      std::string supporting = generate_argument(claim, evidence, Stance::supporting, *gateway);
      std::string refuting = generate_argument(claim, evidence, Stance::refuting, *gateway);
      json ids = json::array();
      for (const auto& r : ranked) ids.push_back(r.doc_id);
      json rec{{"claim_id", claim.claim_id},
               {"text", claim.text},
               {"label", *claim.label},
               {"embedding_hash", Gateway::content_hash(claim.text)},
               {"supporting_arg", supporting},
               {"refuting_arg", refuting},
               {"evidence_doc_ids", ids}};
      outcome.line = rec.dump();
    } catch (const Error& e) {
      if (e.code() == "ProviderUnreachable") throw;
      outcome.error = e.what();
    }
    return outcome;
  };
  auto commit = [&](std::size_t, DemoOutcome&& o) {
    if (!o.error.empty()) {
      failures.push_back(json{{"claim_id", o.claim_id}, {"error", o.error}});
      return;
    }
    live << o.line << '\n';
    live.flush();  // an interrupted run keeps every committed record
    fresh[o.claim_id] = std::move(o.line);
  };
  run_ordered<DemoOutcome>(todo.size(), cfg.provider.max_in_flight, work, commit);
  live.close();

  // Canonical rewrite in split order (resume appends can interleave).
  std::ostringstream content;
  std::size_t written = 0;
  for (const auto& c : train.claims) {
    auto it = fresh.find(c.claim_id);
    if (it == fresh.end()) {
      it = existing.find(c.claim_id);
      if (it == existing.end() || !is_current(c)) continue;
    }
    content << it->second << '\n';
    ++written;
  }
  write_text_atomic(out, content.str());

  GatewayStats stats = gateway->stats();
  json entry = manifest_entry(cfg, {out}, &stats);
  entry["records"] = written;
  entry["prepared"] = fresh.size();
  entry["resumed"] = resumed;
  entry["failed_claims"] = failures;
  update_manifest(cfg, "demos prepare", std::move(entry));
}

namespace {

struct VerifyOutcome {
  json row;
  bool provider_failure = false;
  bool parse_fallback = false;
  std::string error;
};

}  // namespace

void cmd_verify_run(const RunConfig& cfg, bool force) {
  fs::path out = artifacts::verdicts(cfg);
  fs::path report_path = artifacts::classification_report(cfg);
  guard_artifact(out, force);
  guard_artifact(report_path, force);

  auto docs = load_documents(cfg.documents_path);
  auto by_id = index_by_id(docs);
  DatasetSplit test = load_split(cfg, cfg.test_claims_path, "test_claims", "test");
  check_id_spaces_disjoint(test, by_id);
  InvertedIndex index = load_index_artifact(cfg, by_id);
  AdapterParams params = load_adapter_artifact(cfg);

  fs::path demos_path = artifacts::demos(cfg);
  if (!fs::exists(demos_path))
    raise("MissingFile", demos_path.string() + " (run 'demos prepare' first)");

  auto gateway = make_gateway(cfg);

  DemoIndex demo_index;
  demo_index.source_split = "train";
  {
    std::ifstream in(demos_path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> texts;
    while (std::getline(in, line)) {
      ++line_no;
      line = rstrip_cr(line);
      if (line.empty()) continue;
      try {
        json rec = json::parse(line);
        DemoEntry entry;
        entry.claim.claim_id = rec.at("claim_id").get<std::string>();
        entry.claim.text = rec.at("text").get<std::string>();
        entry.claim.label = rec.at("label").get<std::string>();
        entry.supporting_arg = rec.at("supporting_arg").get<std::string>();
        entry.refuting_arg = rec.at("refuting_arg").get<std::string>();
        if (rec.value("embedding_hash", "") != Gateway::content_hash(entry.claim.text))
          raise("MalformedRecord",
                demos_path.string() + ":" + std::to_string(line_no) +
                    ": embedding hash does not match the claim text (re-run "
                    "'demos prepare' with --force)");
        if (!canonical_class(*entry.claim.label, cfg.classes))
          raise("UnknownLabel", demos_path.string() + ":" + std::to_string(line_no) +
                                    ": label '" + *entry.claim.label + "'");
        demo_index.entries.push_back(std::move(entry));
        texts.push_back(demo_index.entries.back().claim.text);
      } catch (const json::exception& e) {
        raise("MalformedRecord",
              demos_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (!texts.empty()) {
      auto vectors = gateway->embed_texts(texts);
      for (std::size_t i = 0; i < vectors.size(); ++i)
        demo_index.entries[i].embedding = std::move(vectors[i]);
    }
  }

  EmbeddingStore store;
  std::vector<const Claim*> claims;
  claims.reserve(test.claims.size());
  for (const auto& c : test.claims) claims.push_back(&c);
  std::vector<std::vector<ScoredDocument>> candidates;
  candidates.reserve(claims.size());
  for (const Claim* c : claims)
    candidates.push_back(retrieve_candidates(index, *c, cfg.m_hat, cfg.bm25));
  prefetch_embeddings(*gateway, store, claims, candidates, {}, by_id);

  fs::create_directories(cfg.output_dir);
  std::ofstream live(out, std::ios::binary | std::ios::trunc);
  if (!live) raise("MissingFile", "cannot open " + out.string() + " for writing");

  std::vector<std::string> gold;
  std::vector<std::string> predicted;
  std::vector<json> failures;
  std::size_t provider_fallbacks = 0;
  std::size_t parse_fallbacks = 0;

  auto work = [&](std::size_t i) -> VerifyOutcome {
    const Claim& claim = *claims[i];
    auto demos = select_demonstrations(demo_index, claim, cfg.k, cfg.threshold, *gateway);
    auto ranked = rerank(params, claim, candidates[i], cfg.m, store);
    auto evidence = gather_documents(ranked, by_id);
    std::vector<std::string> evidence_ids;
    for (const auto& r : ranked) evidence_ids.push_back(r.doc_id);
    std::vector<std::string> demo_ids;
    for (const auto& d : demos) demo_ids.push_back(d.claim.claim_id);

    VerifyOutcome outcome;
    json row{{"claim_id", claim.claim_id},
             {"evidence_doc_ids", evidence_ids},
             {"demonstrations_used", demo_ids}};
    if (claim.label) row["label"] = *claim.label;
    try {
      ArgumentPair args;
      args.supporting = generate_argument(claim, evidence, Stance::supporting, *gateway);
      args.refuting = generate_argument(claim, evidence, Stance::refuting, *gateway);
      args.evidence_doc_ids = evidence_ids;
      Verdict verdict = predict_verdict(claim, demos, args, cfg.classes,
                                        cfg.fallback_class, *gateway);
      verdict.explanation =
          generate_explanation(claim, args, verdict.predicted_label, *gateway);
      row["predicted_label"] = verdict.predicted_label;
      row["parse_status"] = verdict.parse_status == ParseStatus::matched ? "matched" : "fallback";
      row["supporting_arg"] = args.supporting;
      row["refuting_arg"] = args.refuting;
      row["explanation"] = verdict.explanation;
      row["raw_completion"] = verdict.raw_completion;
      outcome.parse_fallback = verdict.parse_status == ParseStatus::fallback;
    } catch (const Error& e) {
      if (e.code() == "ProviderUnreachable") throw;
      row["predicted_label"] = cfg.fallback_class;
      row["parse_status"] = "fallback";
      row["supporting_arg"] = "";
      row["refuting_arg"] = "";
      row["explanation"] = "";
      row["raw_completion"] = "";
      row["error"] = e.what();
      outcome.provider_failure = true;
      outcome.error = e.what();
    }
    outcome.row = std::move(row);
    return outcome;
  };
  auto commit = [&](std::size_t i, VerifyOutcome&& o) {
    live << o.row.dump() << '\n';
    live.flush();
    if (claims[i]->label) {
      gold.push_back(*claims[i]->label);
      predicted.push_back(o.row.at("predicted_label").get<std::string>());
    }
    if (o.provider_failure) {
      ++provider_fallbacks;
      failures.push_back(json{{"claim_id", claims[i]->claim_id}, {"error", o.error}});
    }
    if (o.parse_fallback) ++parse_fallbacks;
  };
  run_ordered<VerifyOutcome>(claims.size(), cfg.provider.max_in_flight, work, commit);
  live.close();

  std::vector<fs::path> arts{out};
  json entry_extra;
  if (!gold.empty()) {
    ClassificationReport report = macro_prf(gold, predicted, cfg.classes);
    write_text_atomic(report_path, classification_report_json(report).dump(2) + "\n");
    arts.push_back(report_path);
    entry_extra["labeled_claims"] = gold.size();
  } else {
    entry_extra["classification_report"] = "omitted (no labels in test split)";
  }

  GatewayStats stats = gateway->stats();
  json entry = manifest_entry(cfg, arts, &stats);
  entry["claims"] = claims.size();
  entry["provider_fallbacks"] = provider_fallbacks;
  entry["parse_fallbacks"] = parse_fallbacks;
  entry["failed_claims"] = failures;
  for (auto it = entry_extra.begin(); it != entry_extra.end(); ++it)
    entry[it.key()] = it.value();
  update_manifest(cfg, "verify run", std::move(entry));
}

}  // namespace claimcheck
