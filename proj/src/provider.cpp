#include "claimcheck/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "claimcheck/error.hpp"

namespace claimcheck {
namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

double l2_norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

void normalize_in_place(std::vector<double>& v) {
  const double norm = l2_norm(v);
  if (norm < 1e-12) raise("ProviderError", "zero-norm embedding");
  for (double& x : v) x /= norm;
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string snippet(const std::string& s, std::size_t limit = 200) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "...";
}

}  // namespace

double EmbeddingVector::dot(const EmbeddingVector& other) const {
  double sum = 0.0;
  const std::size_t n = std::min(values.size(), other.values.size());
  for (std::size_t i = 0; i < n; ++i) sum += values[i] * other.values[i];
  return sum;
}

double EmbeddingVector::norm() const { return l2_norm(values); }

// --- MockProvider -----------------------------------------------------------

struct MockProvider::FlightGuard {
  explicit FlightGuard(MockProvider& m) : mock(m) {
    std::lock_guard<std::mutex> lock(mock.mu_);
    ++mock.in_flight_;
    mock.max_in_flight_seen_ = std::max(mock.max_in_flight_seen_, mock.in_flight_);
  }
  ~FlightGuard() {
    std::lock_guard<std::mutex> lock(mock.mu_);
    --mock.in_flight_;
  }
  MockProvider& mock;
};

MockProvider::MockProvider(MockOptions opts) : opts_(std::move(opts)) {}

std::vector<double> MockProvider::vector_for(const std::string& text) const {
  auto it = opts_.vector_overrides.find(text);
  if (it != opts_.vector_overrides.end()) return it->second;

  std::uint64_t state = opts_.seed ^ fnv1a64(text);
  std::vector<double> v(static_cast<std::size_t>(opts_.dim));
  for (double& x : v) x = 2.0 * unit_interval(splitmix64(state)) - 1.0;
  const double norm = l2_norm(v);
  if (norm < 1e-12) {
    v.assign(v.size(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<std::vector<double>> MockProvider::embed(
    const std::string& model, const std::vector<std::string>& texts) {
  (void)model;
  FlightGuard guard(*this);
  if (opts_.latency.count() > 0) std::this_thread::sleep_for(opts_.latency);
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++embed_calls_;
    texts_embedded_ += texts.size();
  }
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vector_for(t));
  return out;
}

std::string MockProvider::complete(const std::string& model,
                                   const std::string& system_msg,
                                   const std::string& user_msg, double temperature) {
  (void)model;
  (void)temperature;
  FlightGuard guard(*this);
  if (opts_.latency.count() > 0) std::this_thread::sleep_for(opts_.latency);
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++generate_calls_;
  }
  const std::string prompt = system_msg + "\n" + user_msg;
  for (const auto& bad : opts_.fail_keys) {
    if (prompt.find(bad) != std::string::npos) {
      raise("ProviderError", "scripted failure for key '" + bad + "'");
    }
  }
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [key, completion] : opts_.script) {
    if (key.size() >= best_len && prompt.find(key) != std::string::npos) {
      // strictly longer wins; equal length falls back to map order (sorted)
      if (key.size() > best_len || best == nullptr) {
        best = &completion;
        best_len = key.size();
      }
    }
  }
  return best ? *best : kFallbackCompletion;
}

std::uint64_t MockProvider::embed_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return embed_calls_;
}
std::uint64_t MockProvider::texts_embedded() const {
  std::lock_guard<std::mutex> lock(mu_);
  return texts_embedded_;
}
std::uint64_t MockProvider::generate_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return generate_calls_;
}
int MockProvider::max_observed_in_flight() const {
  std::lock_guard<std::mutex> lock(mu_);
  return max_in_flight_seen_;
}

// --- HttpProvider -----------------------------------------------------------

HttpProvider::HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpProvider::api_key() const {
  if (cfg_.api_key_env.empty()) return {};
  const char* value = std::getenv(cfg_.api_key_env.c_str());
  return value ? value : "";
}

namespace {

httplib::Result post_json(const ProviderConfig& cfg, const std::string& key,
                          const std::string& path, const std::string& body) {
  httplib::Client client(cfg.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  client.set_connection_timeout(secs.count(), 0);
  client.set_read_timeout(secs.count(), 0);
  client.set_write_timeout(secs.count(), 0);
  httplib::Headers headers;
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
  return client.Post(path, headers, body, "application/json");
}

json parse_response(const httplib::Result& res, const std::string& what) {
  if (!res) {
    raise("ProviderUnreachable", what + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    raise("ProviderError",
          what + ": status " + std::to_string(res->status) + ": " + snippet(res->body));
  }
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) {
    raise("ProviderError", what + ": response is not JSON: " + snippet(res->body));
  }
  return body;
}

}  // namespace

std::vector<std::vector<double>> HttpProvider::embed(
    const std::string& model, const std::vector<std::string>& texts) {
  json payload;
  payload["model"] = model;
  payload["input"] = texts;

  auto res = post_json(cfg_, api_key(), "/v1/embeddings", payload.dump());
  json body = parse_response(res, "embeddings");

  if (!body.contains("data") || !body["data"].is_array() ||
      body["data"].size() != texts.size()) {
    raise("ProviderError", "embeddings: response 'data' does not match input size");
  }
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& item : body["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      raise("ProviderError", "embeddings: item without 'embedding' array");
    }
    out.push_back(item["embedding"].get<std::vector<double>>());
  }
  return out;
}

std::string HttpProvider::complete(const std::string& model,
                                   const std::string& system_msg,
                                   const std::string& user_msg, double temperature) {
  json payload;
  payload["model"] = model;
  payload["messages"] = json::array({
      json{{"role", "system"}, {"content", system_msg}},
      json{{"role", "user"}, {"content", user_msg}},
  });
  payload["temperature"] = temperature;

  auto res = post_json(cfg_, api_key(), "/v1/chat/completions", payload.dump());
  json body = parse_response(res, "chat");

  if (!body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty()) {
    raise("ProviderError", "chat: response without choices");
  }
  const auto& first = body["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    raise("ProviderError", "chat: choice without message content");
  }
  return first["message"]["content"].get<std::string>();
}

// --- Gateway ----------------------------------------------------------------

struct Gateway::Pending {
  std::mutex m;
  std::condition_variable cv;
  bool done = false;
  std::vector<double> value;
  std::exception_ptr error;

  void fulfill(std::vector<double> v) {
    std::lock_guard<std::mutex> lock(m);
    value = std::move(v);
    done = true;
    cv.notify_all();
  }
  void fail(std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(m);
    error = std::move(e);
    done = true;
    cv.notify_all();
  }
  std::vector<double> wait() {
    std::unique_lock<std::mutex> lock(m);
    cv.wait(lock, [this] { return done; });
    if (error) std::rethrow_exception(error);
    return value;
  }
};

namespace {

struct SemaphoreGuard {
  SemaphoreGuard(std::mutex& mu, std::condition_variable& cv, int& slots)
      : mu_(mu), cv_(cv), slots_(slots) {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  ~SemaphoreGuard() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& slots_;
};

}  // namespace

Gateway::Gateway(ProviderConfig cfg, std::shared_ptr<Provider> provider,
                 std::filesystem::path cache_file)
    : cfg_(std::move(cfg)),
      provider_(std::move(provider)),
      cache_file_(std::move(cache_file)),
      slots_(cfg_.max_in_flight) {
  if (cfg_.max_in_flight < 1) raise("ConfigError", "max_in_flight must be >= 1");
  if (!cache_file_.empty()) load_cache_file();
}

std::string Gateway::content_hash(const std::string& text) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string Gateway::cache_key(const std::string& hash) const {
  return cfg_.embed_model + '\0' + hash;
}

void Gateway::load_cache_file() {
  std::ifstream in(cache_file_);
  if (!in) return;  // cache starts empty; the file appears on first write
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("model") || !rec.contains("hash") ||
        !rec.contains("vector")) {
      continue;  // a torn or foreign line never poisons the cache
    }
    if (rec["model"].get<std::string>() != cfg_.embed_model) continue;
    auto vec = rec["vector"].get<std::vector<double>>();
    if (expected_dim_ < 0) {
      expected_dim_ = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != expected_dim_) {
      raise("DimensionMismatch",
            "cache file holds " + std::to_string(vec.size()) + "-dim vectors, expected " +
                std::to_string(expected_dim_));
    }
    cache_[cache_key(rec["hash"].get<std::string>())] = std::move(vec);
  }
}

void Gateway::append_cache_records(
    const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  if (cache_file_.empty() || rows.empty()) return;
  std::lock_guard<std::mutex> lock(file_mu_);
  std::filesystem::create_directories(cache_file_.parent_path());
  std::ofstream out(cache_file_, std::ios::app);
  if (!out) return;
  for (const auto& [hash, vec] : rows) {
    json rec;
    rec["model"] = cfg_.embed_model;
    rec["hash"] = hash;
    rec["vector"] = vec;
    out << rec.dump() << '\n';
  }
}

std::vector<EmbeddingVector> Gateway::embed_texts(const std::vector<std::string>& texts) {
  if (texts.empty()) raise("EmptyInput", "embed_texts called with no texts");
  for (const auto& t : texts) {
    if (t.empty()) raise("EmptyInput", "embed_texts called with an empty text");
  }

  std::vector<std::string> keys(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = cache_key(content_hash(texts[i]));
  }

  // classify each distinct key: already cached, in flight elsewhere, or ours
  std::unordered_map<std::string, std::vector<double>> local;
  std::unordered_map<std::string, std::shared_ptr<Pending>> waits;
  std::vector<std::string> miss_keys;
  std::vector<std::string> miss_texts;
  std::size_t served_from_cache = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto& key = keys[i];
      if (local.count(key) || waits.count(key)) continue;
      auto cached = cache_.find(key);
      if (cached != cache_.end()) {
        local.emplace(key, cached->second);
        continue;
      }
      auto pending = pending_.find(key);
      if (pending != pending_.end()) {
        waits.emplace(key, pending->second);
        continue;
      }
      auto mine = std::make_shared<Pending>();
      pending_.emplace(key, mine);
      waits.emplace(key, mine);  // we fulfil it, then read it back like any waiter
      miss_keys.push_back(key);
      miss_texts.push_back(texts[i]);
    }
    for (const auto& key : keys) {
      if (local.count(key)) ++served_from_cache;
    }
    stats_.cache_hits += served_from_cache;
  }

  if (!miss_texts.empty()) {
    std::vector<std::vector<double>> fresh;
    try {
      SemaphoreGuard sem(sem_mu_, sem_cv_, slots_);
      {
        std::lock_guard<std::mutex> lock(mu_);
        ++stats_.embed_requests;
        stats_.texts_embedded += miss_texts.size();
      }
      fresh = provider_->embed(cfg_.embed_model, miss_texts);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& key : miss_keys) {
        auto it = pending_.find(key);
        if (it != pending_.end()) {
          it->second->fail(std::current_exception());
          pending_.erase(it);
        }
      }
      throw;
    }

    std::vector<std::pair<std::string, std::vector<double>>> rows;
    try {
      if (fresh.size() != miss_texts.size()) {
        raise("ProviderError", "provider returned " + std::to_string(fresh.size()) +
                                   " embeddings for " + std::to_string(miss_texts.size()) +
                                   " texts");
      }
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        normalize_in_place(fresh[i]);
        if (expected_dim_ < 0) {
          expected_dim_ = static_cast<int>(fresh[i].size());
        } else if (static_cast<int>(fresh[i].size()) != expected_dim_) {
          raise("DimensionMismatch",
                "provider returned a " + std::to_string(fresh[i].size()) +
                    "-dim vector, expected " + std::to_string(expected_dim_));
        }
        cache_[miss_keys[i]] = fresh[i];
        rows.emplace_back(content_hash(miss_texts[i]), fresh[i]);
        auto it = pending_.find(miss_keys[i]);
        if (it != pending_.end()) {
          it->second->fulfill(std::move(fresh[i]));
          pending_.erase(it);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& key : miss_keys) {
        auto it = pending_.find(key);
        if (it != pending_.end()) {
          it->second->fail(std::current_exception());
          pending_.erase(it);
        }
      }
      throw;
    }
    append_cache_records(rows);
  }

  for (auto& [key, pending] : waits) {
    if (!local.count(key)) local.emplace(key, pending->wait());
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& key : keys) out.push_back(EmbeddingVector{local.at(key)});
  return out;
}

std::string Gateway::generate_text(const std::string& system_msg,
                                   const std::string& user_msg) {
  if (user_msg.empty()) raise("EmptyInput", "generate_text called with an empty prompt");
  std::string completion;
  {
    SemaphoreGuard sem(sem_mu_, sem_cv_, slots_);
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++stats_.generate_requests;
    }
    completion = provider_->complete(cfg_.chat_model, system_msg, user_msg,
                                     cfg_.temperature);
  }
  completion = trim_copy(completion);
  if (completion.empty()) raise("EmptyCompletion", "provider returned only whitespace");
  return completion;
}

GatewayStats Gateway::stats() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stats_;
}

}  // namespace claimcheck
