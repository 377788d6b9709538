#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "claimcheck/error.hpp"
#include "claimcheck/reranker.hpp"
#include "claimcheck/sparse.hpp"
#include "test_util.hpp"

using namespace claimcheck;
using testutil::TempDir;
using testutil::error_code_of;

namespace {

EmbeddingVector unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return EmbeddingVector{std::move(v)};
}

EmbeddingVector random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  return unit(std::move(v));
}

double plain_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::uint64_t bits_of(double x) {
  std::uint64_t u = 0;
  std::memcpy(&u, &x, sizeof(u));
  return u;
}

}  // namespace

TEST_CASE("identity adapter scores plain cosine") {
  std::mt19937_64 rng(11);
  auto params = AdapterParams::identity(6);
  for (int t = 0; t < 20; ++t) {
    auto a = random_unit(6, rng);
    auto b = random_unit(6, rng);
    CHECK(score_pair(params, a, b) == doctest::Approx(plain_cosine(a, b)).epsilon(1e-10));
    CHECK(score_pair(params, a, b) == score_pair(params, b, a));
  }
  auto x = random_unit(6, rng);
  CHECK(score_pair(params, x, x) == 1.0);  // clamped despite rounding
}

TEST_CASE("general adapter scores cosine of the projected vectors") {
  std::mt19937_64 rng(12);
  const int dim = 5;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> W(dim, std::vector<double>(dim));
  AdapterParams params = AdapterParams::identity(dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      W[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = g(rng);
      params.W(r, c) = W[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  auto project = [&](const EmbeddingVector& e) {
    std::vector<double> out(dim, 0.0);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        out[static_cast<std::size_t>(r)] +=
            W[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *
            e.values[static_cast<std::size_t>(c)];
    return EmbeddingVector{out};
  };
  for (int t = 0; t < 10; ++t) {
    auto a = random_unit(dim, rng);
    auto b = random_unit(dim, rng);
    CHECK(score_pair(params, a, b) ==
          doctest::Approx(plain_cosine(project(a), project(b))).epsilon(1e-12));
  }
}

TEST_CASE("score_pair rejects bad shapes and degenerate projections") {
  auto params = AdapterParams::identity(3);
  EmbeddingVector a = unit({1, 0, 0});
  EmbeddingVector wrong = unit({1, 0});
  CHECK(error_code_of([&] { score_pair(params, a, wrong); }) == "DimensionMismatch");

  AdapterParams zero = AdapterParams::identity(3);
  zero.W.setZero();
  CHECK(error_code_of([&] { score_pair(zero, a, a); }) == "DegenerateProjection");
}

// ---- training pair sampling ------------------------------------------------

namespace {

struct SamplingWorld {
  std::vector<Document> docs;
  InvertedIndex index;
  Claim claim;

  explicit SamplingWorld(int n_docs) {
    for (int i = 0; i < n_docs; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "d-%02d", i);
      // tf of the shared term decreases with i, so BM25 order follows doc id
      std::string text;
      for (int t = 0; t < n_docs - i; ++t) text += "shared ";
      text += "pad" + std::to_string(i);
      docs.push_back(Document{id, std::nullopt, text});
    }
    index = build_index(docs);
    claim = Claim{"c-query", "shared", std::nullopt, std::nullopt};
  }

  std::vector<std::string> pool_without(const std::string& gold,
                                        const RerankConfig& cfg) const {
    std::vector<std::string> out;
    for (const auto& sd : retrieve_candidates(index, claim, cfg.pool_size))
      if (sd.doc_id != gold) out.push_back(sd.doc_id);
    return out;
  }
};

}  // namespace

TEST_CASE("sampling takes the top of the pool as positives and the bottom half as negatives") {
  SamplingWorld world(12);
  RerankConfig cfg;
  cfg.l = 3;
  cfg.pool_size = 12;

  const std::string gold = "d-01";
  auto remaining = world.pool_without(gold, cfg);
  REQUIRE(remaining.size() == 11);

  std::mt19937_64 rng(5);
  auto pair = sample_training_pair(world.index, world.claim, gold, cfg, rng);

  CHECK(pair.gold_doc_id == gold);
  REQUIRE(pair.positives.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pair.positives[i] == remaining[i]);

  // negatives: three distinct draws from the bottom floor(11/2) = 5 entries
  std::vector<std::string> bottom(remaining.end() - 5, remaining.end());
  REQUIRE(pair.negatives.size() == 3);
  for (const auto& n : pair.negatives) {
    CHECK(std::count(bottom.begin(), bottom.end(), n) == 1);
    CHECK(std::count(pair.positives.begin(), pair.positives.end(), n) == 0);
  }
  auto sorted = pair.negatives;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());

  std::mt19937_64 rng2(5);
  auto pair2 = sample_training_pair(world.index, world.claim, gold, cfg, rng2);
  CHECK(pair2.positives == pair.positives);
  CHECK(pair2.negatives == pair.negatives);
}

TEST_CASE("sampling boundary: exactly 2l remaining is fine, one less is not") {
  RerankConfig cfg;
  cfg.l = 2;
  cfg.pool_size = 5;

  SamplingWorld enough(5);  // gold excluded leaves 4 == 2l
  std::mt19937_64 rng(1);
  CHECK_NOTHROW(sample_training_pair(enough.index, enough.claim, "d-00", cfg, rng));

  SamplingWorld short_world(4);  // leaves 3 < 2l
  try {
    sample_training_pair(short_world.index, short_world.claim, "d-00", cfg, rng);
    FAIL("expected InsufficientPool");
  } catch (const Error& e) {
    CHECK(e.code() == "InsufficientPool");
    CHECK(std::string(e.what()).find("pool holds 3 candidates after exclusions, need 4") !=
          std::string::npos);
  }
}

TEST_CASE("negative sampling favours the weakest candidates") {
  SamplingWorld world(7);
  RerankConfig cfg;
  cfg.l = 1;
  cfg.pool_size = 7;
  const std::string gold = "d-00";
  auto remaining = world.pool_without(gold, cfg);  // 6 entries, bottom half = last 3
  REQUIRE(remaining.size() == 6);

  std::map<std::string, int> counts;
  for (std::uint64_t trial = 0; trial < 2000; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    auto pair = sample_training_pair(world.index, world.claim, gold, cfg, rng);
    counts[pair.negatives.at(0)]++;
  }
  // weights 1/3, 1/2, 1 over remaining[3..5]: expect about 364 / 545 / 1091
  const int c3 = counts[remaining[3]];
  const int c4 = counts[remaining[4]];
  const int c5 = counts[remaining[5]];
  CHECK(c3 + c4 + c5 == 2000);
  CHECK(c5 > c4);
  CHECK(c4 > c3);
  CHECK(c5 > 800);
}

// ---- loss and gradient -----------------------------------------------------

namespace {

struct Instance {
  AdapterParams params;
  TrainingPair pair;
  EmbeddingStore store;
  RerankConfig cfg;
};

Instance random_instance(std::mt19937_64& rng, int dim, int l, double lambda) {
  Instance inst;
  inst.cfg.l = l;
  inst.cfg.pool_size = 2 * l + 1;
  inst.cfg.lambda = lambda;
  inst.cfg.temp = 0.05 + 0.2 * std::generate_canonical<double, 53>(rng);

  inst.params = AdapterParams::identity(dim);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) inst.params.W(r, c) += 0.1 * g(rng);

  inst.pair.claim = Claim{"x", "query", std::nullopt, std::nullopt};
  inst.pair.gold_doc_id = "gold";
  inst.store.put("x", random_unit(dim, rng));
  inst.store.put("gold", random_unit(dim, rng));
  for (int i = 0; i < l; ++i) {
    auto id = "p" + std::to_string(i);
    inst.pair.positives.push_back(id);
    inst.store.put(id, random_unit(dim, rng));
  }
  for (int i = 0; i < l; ++i) {
    auto id = "n" + std::to_string(i);
    inst.pair.negatives.push_back(id);
    inst.store.put(id, random_unit(dim, rng));
  }
  return inst;
}

double margin_of(const Instance& inst) {
  const auto& x = inst.store.require("x");
  double f_d = score_pair(inst.params, x, inst.store.require(inst.pair.gold_doc_id));
  double best = -2.0;
  for (const auto& id : inst.pair.positives) {
    best = std::max(best, score_pair(inst.params, x, inst.store.require(id)));
  }
  return best - f_d + inst.cfg.tau;
}

}  // namespace

TEST_CASE("with lambda zero the loss is exactly the hinge") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    auto inst = random_instance(rng, 6, 2, 0.0);
    auto lg = loss_and_grad(inst.params, inst.pair, inst.store, inst.cfg);
    CHECK(lg.contrastive == 0.0);
    CHECK(lg.loss == lg.hinge);
    const double margin = margin_of(inst);
    if (margin > 0.0) {
      CHECK(lg.loss == margin);  // same expression, bitwise
    } else {
      CHECK(lg.loss == 0.0);
      CHECK(lg.grad.norm() == 0.0);  // satisfied margin moves nothing
    }
  }
}

TEST_CASE("the contrastive part stays within its bounds") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 30; ++t) {
    auto inst = random_instance(rng, 6, 2, 1.5);
    auto lg = loss_and_grad(inst.params, inst.pair, inst.store, inst.cfg);
    CHECK(lg.contrastive > -inst.cfg.lambda);
    CHECK(lg.contrastive < 0.0);
    CHECK(lg.loss == lg.hinge + lg.contrastive);
    CHECK(lg.hinge >= 0.0);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(23);
  const double h = 1e-5;
  int done = 0;
  int attempts = 0;
  while (done < 10 && attempts < 400) {
    ++attempts;
    const int dim = 3 + static_cast<int>(rng() % 6);
    const int l = 1 + static_cast<int>(rng() % 3);
    const double lambda = (done % 3 == 0) ? 0.0 : (done % 3 == 1 ? 1.0 : 0.5);
    auto inst = random_instance(rng, dim, l, lambda);
    if (std::abs(margin_of(inst)) < 1e-3) continue;  // stay away from the kink

    auto lg = loss_and_grad(inst.params, inst.pair, inst.store, inst.cfg);
    Eigen::MatrixXd numeric = Eigen::MatrixXd::Zero(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        auto plus = inst.params;
        plus.W(r, c) += h;
        auto minus = inst.params;
        minus.W(r, c) -= h;
        const double lp = loss_and_grad(plus, inst.pair, inst.store, inst.cfg).loss;
        const double lm = loss_and_grad(minus, inst.pair, inst.store, inst.cfg).loss;
        numeric(r, c) = (lp - lm) / (2.0 * h);
      }
    }
    const double denom = std::max(1e-12, lg.grad.norm() + numeric.norm());
    const double rel = (lg.grad - numeric).norm() / denom;
    INFO("instance ", done, " dim ", dim, " l ", l, " lambda ", lambda, " rel ", rel);
    CHECK(rel < 1e-4);
    ++done;
  }
  CHECK(done == 10);
}

TEST_CASE("loss raises on missing embeddings and empty positives") {
  std::mt19937_64 rng(24);
  auto inst = random_instance(rng, 4, 1, 1.0);
  inst.store.vectors.erase("n0");
  try {
    loss_and_grad(inst.params, inst.pair, inst.store, inst.cfg);
    FAIL("expected MissingEmbedding");
  } catch (const Error& e) {
    CHECK(e.code() == "MissingEmbedding");
    CHECK(std::string(e.what()).find("n0") != std::string::npos);
  }

  auto inst2 = random_instance(rng, 4, 1, 1.0);
  inst2.pair.positives.clear();
  CHECK(error_code_of([&] {
          loss_and_grad(inst2.params, inst2.pair, inst2.store, inst2.cfg);
        }) == "EmptyInput");
}

// ---- training loop ---------------------------------------------------------

namespace {

struct TrainWorld {
  std::vector<TrainingPair> pairs;
  EmbeddingStore store;
  RerankConfig cfg;
};

TrainWorld make_train_world(int n_pairs, int dim, std::uint64_t seed) {
  TrainWorld w;
  w.cfg.l = 2;
  w.cfg.pool_size = 5;
  w.cfg.steps = 4 * n_pairs;
  w.cfg.seed = seed;
  std::mt19937_64 rng(seed * 977 + 13);
  for (int p = 0; p < n_pairs; ++p) {
    TrainingPair pair;
    pair.claim = Claim{"c" + std::to_string(p), "q", std::nullopt, std::nullopt};
    pair.gold_doc_id = "g" + std::to_string(p);
    w.store.put(pair.claim.claim_id, random_unit(dim, rng));
    w.store.put(pair.gold_doc_id, random_unit(dim, rng));
    for (int i = 0; i < 2; ++i) {
      auto pid = "p" + std::to_string(p) + "_" + std::to_string(i);
      auto nid = "n" + std::to_string(p) + "_" + std::to_string(i);
      pair.positives.push_back(pid);
      pair.negatives.push_back(nid);
      w.store.put(pid, random_unit(dim, rng));
      w.store.put(nid, random_unit(dim, rng));
    }
    w.pairs.push_back(std::move(pair));
  }
  return w;
}

}  // namespace

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  auto w = make_train_world(6, 8, 3);
  auto r1 = train(w.pairs, w.store, w.cfg);
  auto r2 = train(w.pairs, w.store, w.cfg);
  REQUIRE(r1.loss_trace.size() == static_cast<std::size_t>(w.cfg.steps));
  CHECK(r1.loss_trace == r2.loss_trace);
  CHECK(r1.params.W == r2.params.W);
  CHECK(r1.params.step_count == w.cfg.steps);
  CHECK(r1.params.seed == w.cfg.seed);

  auto cfg2 = w.cfg;
  cfg2.seed = 4;
  auto r3 = train(w.pairs, w.store, cfg2);
  CHECK(r3.loss_trace != r1.loss_trace);  // the shuffle actually depends on the seed
}

TEST_CASE("zero steps trains nothing and empty input refuses to train") {
  auto w = make_train_world(2, 4, 9);
  auto cfg = w.cfg;
  cfg.steps = 0;
  auto r = train(w.pairs, w.store, cfg);
  CHECK(r.loss_trace.empty());
  CHECK(r.params.step_count == 0);
  CHECK(r.params.W == Eigen::MatrixXd::Identity(4, 4));

  CHECK(error_code_of([&] { train({}, w.store, w.cfg); }) == "NoTrainingData");
}

TEST_CASE("the resampler runs once per epoch after the first") {
  auto w = make_train_world(3, 6, 5);
  auto cfg = w.cfg;
  cfg.steps = 3 * 3 + 1;  // three full epochs plus one step of a fourth
  std::vector<int> epochs_seen;
  auto resample = [&](int epoch, std::mt19937_64& rng) {
    epochs_seen.push_back(epoch);
    (void)rng();  // consuming the stream must be allowed
    return w.pairs;
  };
  auto r = train(w.pairs, w.store, cfg, resample);
  CHECK(epochs_seen == std::vector<int>{1, 2, 3});
  CHECK(r.loss_trace.size() == static_cast<std::size_t>(cfg.steps));

  auto empty_resample = [](int, std::mt19937_64&) { return std::vector<TrainingPair>{}; };
  CHECK(error_code_of([&] { train(w.pairs, w.store, cfg, empty_resample); }) ==
        "NoTrainingData");
}

TEST_CASE("a runaway learning rate is reported with its step") {
  auto w = make_train_world(2, 4, 1);
  auto cfg = w.cfg;
  cfg.lr = 1e160;
  cfg.lambda = 1.0;
  cfg.steps = 10;
  try {
    train(w.pairs, w.store, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == "NonFiniteLoss");
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("epoch_mean_loss averages the right slice") {
  std::vector<double> trace{1, 2, 3, 4, 5, 6};
  CHECK(epoch_mean_loss(trace, 2, 0) == doctest::Approx(1.5));
  CHECK(epoch_mean_loss(trace, 2, 2) == doctest::Approx(5.5));
  CHECK(epoch_mean_loss(trace, 4, 1) == doctest::Approx(5.5));  // partial epoch
  CHECK(error_code_of([&] { epoch_mean_loss(trace, 0, 0); }) == "EmptyInput");
  CHECK(error_code_of([&] { epoch_mean_loss(trace, 2, 3); }) == "EmptyInput");
}

// ---- ranking ---------------------------------------------------------------

TEST_CASE("top_m_by_score matches a reference sort with ties") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      ids.push_back("doc" + std::to_string(rng() % 30));
      scores.push_back(static_cast<double>(rng() % 5));  // few levels force ties
    }
    const int m = static_cast<int>(rng() % (n + 3));
    auto got = top_m_by_score(ids, scores, m, Stage::dense);

    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return ids[a] < ids[b];
    });
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m), ids.size());
    REQUIRE(got.size() == take);
    for (std::size_t i = 0; i < take; ++i) {
      CHECK(got[i].doc_id == ids[order[i]]);
      CHECK(got[i].score == scores[order[i]]);
      CHECK(got[i].rank == static_cast<int>(i) + 1);
      CHECK(got[i].stage == Stage::dense);
    }
  }
}

TEST_CASE("rank order survives monotonic score transforms") {
  std::mt19937_64 rng(32);
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (int i = 0; i < 15; ++i) {
    ids.push_back("d" + std::to_string(i));
    scores.push_back(std::generate_canonical<double, 53>(rng));
  }
  auto before = top_m_by_score(ids, scores, 15, Stage::sparse);
  std::vector<double> transformed;
  for (double s : scores) transformed.push_back(3.0 * s + 7.0);
  auto after = top_m_by_score(ids, transformed, 15, Stage::sparse);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].doc_id == after[i].doc_id);
  }
}

TEST_CASE("top_m_by_score validates its inputs") {
  CHECK(error_code_of([&] { top_m_by_score({"a"}, {1.0, 2.0}, 1, Stage::dense); }) ==
        "LengthMismatch");
  CHECK(error_code_of([&] { top_m_by_score({"a"}, {1.0}, -1, Stage::dense); }) ==
        "ConfigError");
  CHECK(top_m_by_score({"a"}, {1.0}, 0, Stage::dense).empty());
}

TEST_CASE("rerank with the identity adapter orders by plain cosine") {
  std::mt19937_64 rng(33);
  const int dim = 7;
  EmbeddingStore store;
  Claim claim{"c-r", "q", std::nullopt, std::nullopt};
  store.put("c-r", random_unit(dim, rng));
  std::vector<ScoredDocument> candidates;
  for (int i = 0; i < 10; ++i) {
    auto id = "d" + std::to_string(i);
    store.put(id, random_unit(dim, rng));
    candidates.push_back({id, static_cast<double>(10 - i), i + 1, Stage::sparse});
  }
  auto params = AdapterParams::identity(dim);
  auto got = rerank(params, claim, candidates, 4, store);
  REQUIRE(got.size() == 4);

  std::vector<std::pair<double, std::string>> expected;
  for (const auto& c : candidates) {
    expected.push_back({-plain_cosine(store.require("c-r"), store.require(c.doc_id)),
                        c.doc_id});
  }
  std::sort(expected.begin(), expected.end());
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(got[i].doc_id == expected[i].second);
    CHECK(got[i].rank == static_cast<int>(i) + 1);
    CHECK(got[i].stage == Stage::dense);
  }

  store.vectors.erase("d3");
  CHECK(error_code_of([&] { rerank(params, claim, candidates, 4, store); }) ==
        "MissingEmbedding");
}

// ---- persistence -----------------------------------------------------------

TEST_CASE("adapter files round-trip bitwise including awkward doubles") {
  TempDir tmp;
  AdapterParams params = AdapterParams::identity(4, 77);
  params.step_count = 123;
  params.W(0, 0) = 1.0000000000000002;
  params.W(0, 1) = -0.0;
  params.W(1, 2) = 1e-300;
  params.W(2, 3) = -3.141592653589793;
  params.W(3, 0) = 2.2250738585072014e-308;  // smallest normal
  params.W(3, 3) = 1e308;

  auto path = tmp.path / "adapter.txt";
  save_adapter(params, path);
  auto loaded = load_adapter(path);

  CHECK(loaded.seed == 77);
  CHECK(loaded.step_count == 123);
  REQUIRE(loaded.W.rows() == 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      CHECK(bits_of(loaded.W(r, c)) == bits_of(params.W(r, c)));
    }
}

TEST_CASE("adapter loading reports missing and malformed files") {
  TempDir tmp;
  CHECK(error_code_of([&] { load_adapter(tmp.path / "absent.txt"); }) == "MissingFile");

  auto bad_header = tmp.path / "bad.txt";
  testutil::write_file(bad_header, "some-other-format\n");
  CHECK(error_code_of([&] { load_adapter(bad_header); }) == "MalformedRecord");

  auto truncated = tmp.path / "trunc.txt";
  testutil::write_file(truncated,
                       "claimcheck-adapter-v1\ndim 3\nseed 0\nsteps 0\n1 0 0\n0 1 0\n");
  CHECK(error_code_of([&] { load_adapter(truncated); }) == "MalformedRecord");

  auto short_row = tmp.path / "short.txt";
  testutil::write_file(short_row,
                       "claimcheck-adapter-v1\ndim 2\nseed 0\nsteps 0\n1 0\n0\n");
  CHECK(error_code_of([&] { load_adapter(short_row); }) == "MalformedRecord");
}

TEST_CASE("rerank config validation bounds every field") {
  RerankConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = [](auto mutate) {
    RerankConfig cfg;
    mutate(cfg);
    return error_code_of([&] { cfg.validate(); });
  };
  CHECK(bad([](RerankConfig& c) { c.l = 0; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.tau = -0.1; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.lambda = -1.0; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.temp = 0.0; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.lr = 0.0; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.momentum = 1.0; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.steps = -1; }) == "ConfigError");
  CHECK(bad([](RerankConfig& c) { c.pool_size = 8; c.l = 4; }) == "ConfigError");
}
