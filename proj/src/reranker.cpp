#include "claimcheck/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "claimcheck/error.hpp"

namespace claimcheck {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const VectorXd> as_vector(const EmbeddingVector& e) {
  return Eigen::Map<const VectorXd>(e.values.data(),
                                    static_cast<Eigen::Index>(e.values.size()));
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct Projection {
  VectorXd v;
  double norm = 0.0;
};

Projection project(const MatrixXd& W, const EmbeddingVector& e) {
  if (e.dim() != W.cols()) {
    raise("DimensionMismatch", "embedding dim " + std::to_string(e.dim()) +
                                   " vs adapter dim " + std::to_string(W.cols()));
  }
  Projection p;
  p.v = W * as_vector(e);
  p.norm = p.v.norm();
  if (p.norm < 1e-12) raise("DegenerateProjection", "projected vector has zero norm");
  return p;
}

double cosine(const Projection& a, const Projection& b) {
  return std::clamp(a.v.dot(b.v) / (a.norm * b.norm), -1.0, 1.0);
}

}  // namespace

AdapterParams AdapterParams::identity(int dim, std::uint64_t seed) {
  AdapterParams p;
  p.W = MatrixXd::Identity(dim, dim);
  p.seed = seed;
  return p;
}

void RerankConfig::validate() const {
  if (l < 1) raise("ConfigError", "rerank l must be >= 1");
  if (tau < 0.0) raise("ConfigError", "rerank tau must be >= 0");
  if (lambda < 0.0) raise("ConfigError", "rerank lambda must be >= 0");
  if (temp <= 0.0) raise("ConfigError", "rerank temp must be > 0");
  if (lr <= 0.0) raise("ConfigError", "rerank lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    raise("ConfigError", "rerank momentum must be in [0, 1)");
  }
  if (steps < 0) raise("ConfigError", "rerank steps must be >= 0");
  if (pool_size < 2 * l + 1) {
    raise("ConfigError", "rerank pool_size must be at least 2*l + 1");
  }
}

const EmbeddingVector& EmbeddingStore::require(const std::string& id) const {
  auto it = vectors.find(id);
  if (it == vectors.end()) raise("MissingEmbedding", id);
  return it->second;
}

double score_pair(const AdapterParams& params, const EmbeddingVector& e_x,
                  const EmbeddingVector& e_d) {
  const Projection u = project(params.W, e_x);
  const Projection v = project(params.W, e_d);
  return cosine(u, v);
}

TrainingPair sample_training_pair(const InvertedIndex& index, const Claim& claim,
                                  const std::string& gold_doc_id,
                                  const RerankConfig& cfg, std::mt19937_64& rng,
                                  const Bm25Params& bm25) {
  cfg.validate();
  auto pool = retrieve_candidates(index, claim, cfg.pool_size, bm25);
  std::vector<std::string> remaining;
  remaining.reserve(pool.size());
  for (const auto& sd : pool) {
    if (sd.doc_id != gold_doc_id) remaining.push_back(sd.doc_id);
  }

  const std::size_t r = remaining.size();
  const std::size_t l = static_cast<std::size_t>(cfg.l);
  if (r < 2 * l) {
    raise("InsufficientPool", claim.claim_id + ": pool holds " + std::to_string(r) +
                                  " candidates after exclusions, need " +
                                  std::to_string(2 * l));
  }

  TrainingPair pair;
  pair.claim = claim;
  pair.gold_doc_id = gold_doc_id;
  pair.positives.assign(remaining.begin(), remaining.begin() + static_cast<long>(l));

  // bottom half of the pool, weighted towards the very weakest matches
  const std::size_t half = r / 2;
  struct Entry {
    std::string doc_id;
    double weight;
  };
  std::vector<Entry> bottom;
  bottom.reserve(half);
  for (std::size_t j = r - half; j < r; ++j) {
    const std::size_t rank_from_bottom = r - 1 - j;
    bottom.push_back({remaining[j], 1.0 / (1.0 + static_cast<double>(rank_from_bottom))});
  }

  for (std::size_t draw = 0; draw < l; ++draw) {
    double total = 0.0;
    for (const auto& e : bottom) total += e.weight;
    const double target = uniform01(rng) * total;
    double cum = 0.0;
    std::size_t chosen = bottom.size() - 1;
    for (std::size_t i = 0; i < bottom.size(); ++i) {
      cum += bottom[i].weight;
      if (target < cum) {
        chosen = i;
        break;
      }
    }
    pair.negatives.push_back(bottom[chosen].doc_id);
    bottom.erase(bottom.begin() + static_cast<long>(chosen));
  }
  return pair;
}

LossGrad loss_and_grad(const AdapterParams& params, const TrainingPair& pair,
                       const EmbeddingStore& embeddings, const RerankConfig& cfg) {
  if (pair.positives.empty()) {
    raise("EmptyInput", "training pair has no positives");
  }
  const EmbeddingVector& xe = embeddings.require(pair.claim.claim_id);
  const EmbeddingVector& de = embeddings.require(pair.gold_doc_id);

  const Projection u = project(params.W, xe);

  std::vector<const EmbeddingVector*> cands;
  for (const auto& id : pair.positives) cands.push_back(&embeddings.require(id));
  for (const auto& id : pair.negatives) cands.push_back(&embeddings.require(id));

  const Projection vd = project(params.W, de);
  const double f_d = cosine(u, vd);

  std::vector<Projection> vc;
  std::vector<double> f_c;
  vc.reserve(cands.size());
  f_c.reserve(cands.size());
  for (const auto* e : cands) {
    vc.push_back(project(params.W, *e));
    f_c.push_back(cosine(u, vc.back()));
  }

  // hinge over the positives; ties pick the smallest index, and the kink
  // itself contributes the zero subgradient
  std::size_t best = 0;
  for (std::size_t i = 1; i < pair.positives.size(); ++i) {
    if (f_c[i] > f_c[best]) best = i;
  }
  const double margin = f_c[best] - f_d + cfg.tau;
  const bool hinge_active = margin > 0.0;
  const double hinge = hinge_active ? margin : 0.0;

  // softmax attraction of the gold document against the whole candidate set
  double contrastive = 0.0;
  double w_d = hinge_active ? -1.0 : 0.0;
  std::vector<double> w_c(cands.size(), 0.0);
  if (hinge_active) w_c[best] += 1.0;

  if (cfg.lambda != 0.0) {
    const double inv_t = 1.0 / cfg.temp;
    double max_logit = f_d * inv_t;
    for (double f : f_c) max_logit = std::max(max_logit, f * inv_t);
    const double e_d = std::exp(f_d * inv_t - max_logit);
    double denom = e_d;
    std::vector<double> e_c(f_c.size());
    for (std::size_t i = 0; i < f_c.size(); ++i) {
      e_c[i] = std::exp(f_c[i] * inv_t - max_logit);
      denom += e_c[i];
    }
    const double p = e_d / denom;
    contrastive = -cfg.lambda * p;
    w_d += -cfg.lambda * p * (1.0 - p) * inv_t;
    for (std::size_t i = 0; i < f_c.size(); ++i) {
      w_c[i] += cfg.lambda * p * (e_c[i] / denom) * inv_t;
    }
  }

  LossGrad out;
  out.hinge = hinge;
  out.contrastive = contrastive;
  out.loss = hinge + contrastive;
  out.grad = MatrixXd::Zero(params.W.rows(), params.W.cols());

  const auto x = as_vector(xe);
  auto accumulate = [&](double weight, const Projection& v,
                        Eigen::Map<const VectorXd> b, double f) {
    if (weight == 0.0) return;
    const VectorXd du = v.v / (u.norm * v.norm) - (f / (u.norm * u.norm)) * u.v;
    const VectorXd dv = u.v / (u.norm * v.norm) - (f / (v.norm * v.norm)) * v.v;
    out.grad.noalias() += weight * (du * x.transpose());
    out.grad.noalias() += weight * (dv * b.transpose());
  };

  accumulate(w_d, vd, as_vector(de), f_d);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    accumulate(w_c[i], vc[i], as_vector(*cands[i]), f_c[i]);
  }
  return out;
}

TrainResult train(std::vector<TrainingPair> pairs, const EmbeddingStore& embeddings,
                  const RerankConfig& cfg, const PairResampler& resample) {
  cfg.validate();
  if (pairs.empty()) raise("NoTrainingData", "no training pairs");

  const int dim = embeddings.require(pairs.front().claim.claim_id).dim();
  TrainResult result;
  result.params = AdapterParams::identity(dim, cfg.seed);
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));

  MatrixXd velocity = MatrixXd::Zero(dim, dim);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order;
  std::size_t pos_in_epoch = 0;
  int epoch = -1;

  for (int step = 0; step < cfg.steps; ++step) {
    if (pos_in_epoch == 0) {
      ++epoch;
      if (epoch > 0 && resample) {
        pairs = resample(epoch, rng);
        if (pairs.empty()) raise("NoTrainingData", "resampler returned no pairs");
      }
      order = shuffled_indices(pairs.size(), rng);
    }

    const TrainingPair& pair = pairs[order[pos_in_epoch]];
    LossGrad lg = loss_and_grad(result.params, pair, embeddings, cfg);
    if (!std::isfinite(lg.loss)) {
      raise("NonFiniteLoss", "step " + std::to_string(step));
    }
    result.loss_trace.push_back(lg.loss);

    velocity = cfg.momentum * velocity - cfg.lr * lg.grad;
    result.params.W += velocity;
    ++result.params.step_count;

    ++pos_in_epoch;
    if (pos_in_epoch == pairs.size()) pos_in_epoch = 0;
  }
  return result;
}

std::vector<ScoredDocument> top_m_by_score(const std::vector<std::string>& doc_ids,
                                           const std::vector<double>& scores, int m,
                                           Stage stage) {
  if (doc_ids.size() != scores.size()) {
    raise("LengthMismatch", "ids and scores differ in length");
  }
  if (m < 0) raise("ConfigError", "m must be non-negative");

  std::vector<std::size_t> order(doc_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids[a] < doc_ids[b];
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m), order.size());
  std::vector<ScoredDocument> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({doc_ids[order[i]], scores[order[i]], static_cast<int>(i) + 1, stage});
  }
  return out;
}

std::vector<ScoredDocument> rerank(const AdapterParams& params, const Claim& claim,
                                   const std::vector<ScoredDocument>& candidates,
                                   int m, const EmbeddingStore& embeddings) {
  const EmbeddingVector& xe = embeddings.require(claim.claim_id);
  std::vector<std::string> ids;
  std::vector<double> scores;
  ids.reserve(candidates.size());
  scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    ids.push_back(c.doc_id);
    scores.push_back(score_pair(params, xe, embeddings.require(c.doc_id)));
  }
  return top_m_by_score(ids, scores, m, Stage::dense);
}

void save_adapter(const AdapterParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise("MissingFile", "cannot write " + path.string());

  out << "claimcheck-adapter-v1\n";
  out << "dim " << params.W.rows() << "\n";
  out << "seed " << params.seed << "\n";
  out << "steps " << params.step_count << "\n";
  char buf[40];
  for (Eigen::Index r = 0; r < params.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.W.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", params.W(r, c));
      if (c > 0) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

AdapterParams load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise("MissingFile", path.string());

  std::string line;
  if (!std::getline(in, line) || line != "claimcheck-adapter-v1") {
    raise("MalformedRecord", path.string() + ": bad adapter header");
  }

  auto read_field = [&](const std::string& name) -> long long {
    if (!std::getline(in, line)) {
      raise("MalformedRecord", path.string() + ": missing field " + name);
    }
    std::istringstream ss(line);
    std::string key;
    long long value = 0;
    if (!(ss >> key >> value) || key != name) {
      raise("MalformedRecord", path.string() + ": expected field " + name);
    }
    return value;
  };

  const long long dim = read_field("dim");
  const long long seed = read_field("seed");
  const long long steps = read_field("steps");
  if (dim <= 0) raise("MalformedRecord", path.string() + ": non-positive dim");

  AdapterParams params;
  params.seed = static_cast<std::uint64_t>(seed);
  params.step_count = steps;
  params.W.resize(dim, dim);
  for (long long r = 0; r < dim; ++r) {
    if (!std::getline(in, line)) {
      raise("MalformedRecord", path.string() + ": truncated matrix");
    }
    std::istringstream ss(line);
    for (long long c = 0; c < dim; ++c) {
      double v = 0.0;
      if (!(ss >> v)) {
        raise("MalformedRecord",
              path.string() + ": row " + std::to_string(r) + " is too short");
      }
      params.W(r, c) = v;
    }
  }
  return params;
}

double epoch_mean_loss(const std::vector<double>& trace, std::size_t pairs_per_epoch,
                       std::size_t epoch) {
  if (pairs_per_epoch == 0) raise("EmptyInput", "pairs_per_epoch must be positive");
  const std::size_t begin = epoch * pairs_per_epoch;
  const std::size_t end = std::min(trace.size(), begin + pairs_per_epoch);
  if (begin >= end) raise("EmptyInput", "trace holds no steps for that epoch");
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += trace[i];
  return sum / static_cast<double>(end - begin);
}

}  // namespace claimcheck
