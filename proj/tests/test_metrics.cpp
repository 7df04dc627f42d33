#include "vexpl/metrics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace vexpl {
namespace {

Words words(const std::string& s) { return tokenize(s); }

std::vector<Words> doc(std::initializer_list<const char*> sentences) {
  std::vector<Words> out;
  for (const char* s : sentences) out.push_back(words(s));
  return out;
}

NgramStats stats_of(const std::vector<std::vector<Words>>& docs) {
  return NgramStats::from_documents(docs);
}

// Straightforward re-derivation with ordered maps and vectors of strings as keys.
using Gram = std::vector<std::string>;

std::map<Gram, int> grams(const Words& w, int n) {
  std::map<Gram, int> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= w.size(); ++i) {
    ++out[Gram(w.begin() + static_cast<long>(i), w.begin() + static_cast<long>(i) + n)];
  }
  return out;
}

double oracle_cider(const Words& cand, const std::vector<Words>& refs,
                    const std::vector<std::vector<Words>>& docs) {
  const double n_docs = static_cast<double>(docs.size());
  auto idf = [&](const Gram& g, int n) {
    int df = 0;
    for (const auto& d : docs) {
      bool found = false;
      for (const auto& s : d) found = found || grams(s, n).count(g) > 0;
      df += found;
    }
    return std::log(n_docs / std::max(1, df));
  };
  double total = 0;
  for (int n = 1; n <= 4; ++n) {
    std::map<Gram, double> c;
    for (const auto& [g, k] : grams(cand, n)) c[g] = k * idf(g, n);
    double cn = 0;
    for (const auto& [g, v] : c) cn += v * v;
    cn = std::sqrt(cn);
    double per_n = 0;
    for (const auto& ref : refs) {
      std::map<Gram, double> r;
      for (const auto& [g, k] : grams(ref, n)) r[g] = k * idf(g, n);
      double rn = 0;
      for (const auto& [g, v] : r) rn += v * v;
      rn = std::sqrt(rn);
      double dot = 0;
      for (const auto& [g, v] : c) {
        auto it = r.find(g);
        if (it != r.end()) dot += std::min(v, it->second) * it->second;
      }
      if (cn > 0 && rn > 0) per_n += dot / (cn * rn);
    }
    total += per_n / static_cast<double>(refs.size());
  }
  return 10.0 * total / 4;
}

TEST(Cider, IdenticalSentenceScoresTen) {
  const std::vector<std::vector<Words>> docs{doc({"the red bird sings loudly"}), doc({"a blue fish"}),
                                             doc({"green leaves fall"})};
  const auto st = stats_of(docs);
  const Words c = words("the red bird sings loudly");
  const std::vector<Words> refs{c};
  EXPECT_NEAR(cider(c, refs, st), 10.0, 1e-9);
}

TEST(Cider, DisjointSentenceScoresZero) {
  const std::vector<std::vector<Words>> docs{doc({"a b c"}), doc({"d e f"})};
  const auto st = stats_of(docs);
  const std::vector<Words> refs{words("a b c")};
  EXPECT_EQ(cider(words("d e f"), refs, st), 0.0);
}

TEST(Cider, HandWorkedFixture) {
  const std::vector<std::vector<Words>> docs{doc({"a b", "a c"}), doc({"b c"}), doc({"c d"})};
  const auto st = stats_of(docs);
  const double l3 = std::log(3.0), l15 = std::log(1.5);
  const double cross = l3 / std::sqrt(l3 * l3 + l15 * l15);

  // Unigrams: 1 against "a b", cross against "a c" (c has zero idf); bigrams: 1 and 0.
  const double expected = 10.0 * ((1 + cross) / 2 + 0.5) / 4;
  EXPECT_NEAR(cider(words("a b"), docs[0], st), expected, 1e-12);
  EXPECT_NEAR(cider(words("a b"), docs[0], st), oracle_cider(words("a b"), docs[0], docs), 1e-12);

  // Candidate counts are clipped by the reference: "a a" has twice the weight of "a".
  const std::vector<Words> ref{words("a b")};
  const double clipped_unigram = l3 / (2 * std::sqrt(l3 * l3 + l15 * l15));
  EXPECT_NEAR(cider(words("a a"), ref, st), 10.0 * clipped_unigram / 4, 1e-12);
}

TEST(Cider, EdgeCases) {
  const std::vector<std::vector<Words>> docs{doc({"a b"}), doc({"c"})};
  const auto st = stats_of(docs);
  const std::vector<Words> refs{words("a b")};
  EXPECT_EQ(cider({}, refs, st), 0.0);
  EXPECT_THROW(cider(words("a"), std::span<const Words>{}, st), std::invalid_argument);
  EXPECT_THROW(NgramStats{}.idf(1, "a"), std::invalid_argument);
  // Unseen grams get the maximum idf instead of dividing by zero.
  EXPECT_NEAR(st.idf(1, "zzz"), std::log(2.0), 1e-15);
}

std::vector<Words> random_sentences(Rng& rng, std::size_t count) {
  static const char* lexicon[] = {"a", "b", "c", "d", "e", "f"};
  std::vector<Words> out;
  for (std::size_t i = 0; i < count; ++i) {
    Words w;
    const auto len = 1 + rng.index(6);
    for (std::size_t k = 0; k < len; ++k) w.emplace_back(lexicon[rng.index(6)]);
    out.push_back(w);
  }
  return out;
}

TEST(Cider, MatchesIndependentImplementation) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<Words>> docs;
    for (int d = 0; d < 4; ++d) docs.push_back(random_sentences(rng, 1 + rng.index(3)));
    const auto st = stats_of(docs);
    const Words cand = random_sentences(rng, 1)[0];
    const auto& refs = docs[rng.index(docs.size())];
    const double got = cider(cand, refs, st);
    EXPECT_NEAR(got, oracle_cider(cand, refs, docs), 1e-12);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 10.0 + 1e-12);
  }
}

TEST(Cider, ReferenceOrderDoesNotMatter) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<Words>> docs;
    for (int d = 0; d < 3; ++d) docs.push_back(random_sentences(rng, 3));
    const auto st = stats_of(docs);
    const Words cand = random_sentences(rng, 1)[0];
    auto refs = docs[0];
    const double before = cider(cand, refs, st);
    std::reverse(refs.begin(), refs.end());
    std::rotate(refs.begin(), refs.begin() + 1, refs.end());
    EXPECT_NEAR(cider(cand, refs, st), before, 1e-12);
  }
}

ClassPools three_pools() {
  return {doc({"red bird sings", "red bird flies"}), doc({"blue fish swims"}), doc({"green frog jumps"})};
}

NgramStats pool_stats() {
  return stats_of({doc({"red bird sings", "red bird flies"}), doc({"blue fish swims"}),
                   doc({"green frog jumps"}), doc({"a bird"})});
}

TEST(ClassSimilarity, IsCiderAgainstThePool) {
  const auto pools = three_pools();
  const auto st = pool_stats();
  const Words g = words("red bird sings");
  EXPECT_EQ(class_similarity(g, 0, pools, st), cider(g, pools[0], st));
  EXPECT_GT(class_similarity(g, 0, pools, st), class_similarity(g, 1, pools, st));
  EXPECT_EQ(class_similarity(g, 2, pools, st), 0.0);
  EXPECT_THROW(class_similarity(g, 3, pools, st), std::invalid_argument);
  EXPECT_THROW(class_similarity(g, -1, pools, st), std::invalid_argument);
  ClassPools with_empty = pools;
  with_empty[1].clear();
  EXPECT_THROW(class_similarity(g, 1, with_empty, st), std::invalid_argument);
}

TEST(ClassRank, BestAndWorst) {
  const auto pools = three_pools();
  const auto st = pool_stats();
  EXPECT_EQ(class_rank(words("red bird sings"), 0, pools, st), 1);
  EXPECT_EQ(class_rank(words("blue fish swims"), 0, pools, st), 3);
  // Every class ties at zero: ties rank ahead of the true class.
  EXPECT_EQ(class_rank(words("purple"), 1, pools, st), 3);
  EXPECT_THROW(class_rank(words("red"), 3, pools, st), std::invalid_argument);
  const ClassPools one{pools[0]};
  EXPECT_THROW(class_rank(words("red"), 0, one, st), std::invalid_argument);
}

TEST(ClassRank, AlwaysWithinRange) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    ClassPools pools;
    for (int k = 0; k < 4; ++k) pools.push_back(random_sentences(rng, 2));
    const auto st = stats_of(pools);
    const Words cand = random_sentences(rng, 1)[0];
    const int r = class_rank(cand, static_cast<int>(rng.index(4)), pools, st);
    EXPECT_GE(r, 1);
    EXPECT_LE(r, 4);
  }
}

TEST(Ngrams, CountsAndKeys) {
  const auto c = ngram_counts(words("a b a b"), 2);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.at(std::string("a\x1f" "b")), 2);
  EXPECT_EQ(c.at(std::string("b\x1f" "a")), 1);
  EXPECT_TRUE(ngram_counts(words("a b"), 3).empty());
}

struct EvalFixture {
  ClassifierModel classifier;
  GeneratorModel model;
  std::vector<EvalInstance> test;
  ClassPools pools;
  NgramStats stats;
};

EvalFixture eval_fixture() {
  EvalFixture f;
  f.model = testing::random_generator(3, AblationMode::Explanation, 4, 5, 2.0);
  Rng rng(3);
  f.classifier = make_classifier(f.model.vocab, 3, 3, 4, rng);
  f.pools = {doc({"w0 w1", "w1"}), doc({"w2 w3"}), doc({"w3"})};
  f.stats = stats_of(f.pools);
  for (int i = 0; i < 6; ++i) {
    EvalInstance inst;
    inst.id = "img" + std::to_string(i);
    inst.image_feature = testing::random_vector(3, rng);
    inst.label = inst.conditioning_label = i % 3;
    inst.references = f.pools[static_cast<std::size_t>(i % 3)];
    f.test.push_back(inst);
  }
  return f;
}

TEST(EvaluateModels, IdenticalModelsGiveIdenticalRows) {
  const auto f = eval_fixture();
  const GeneratorModel copy = f.model;
  const std::vector<NamedModel> models{{"a", &f.model}, {"b", &copy}};
  const auto r = evaluate_models(models, f.test, f.pools, f.stats, f.classifier, 6);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.row("a").cider, r.row("b").cider);
  EXPECT_EQ(r.row("a").class_rank, r.row("b").class_rank);
  EXPECT_EQ(r.row("a").classifier_accuracy, r.row("b").classifier_accuracy);
  EXPECT_EQ(r.row("a").per_image.size(), 6u);
  EXPECT_THROW(r.row("c"), std::out_of_range);
  for (const auto& s : r.row("a").per_image) {
    EXPECT_GE(s.class_rank, 1);
    EXPECT_LE(s.class_rank, 3);
  }
}

TEST(EvaluateModels, DeterministicOutputs) {
  const auto f = eval_fixture();
  const std::vector<NamedModel> models{{"m", &f.model}};
  const auto a = evaluate_models(models, f.test, f.pools, f.stats, f.classifier, 6);
  const auto b = evaluate_models(models, f.test, f.pools, f.stats, f.classifier, 6);
  EXPECT_EQ(a.table(), b.table());
  EXPECT_EQ(a.summary_jsonl(), b.summary_jsonl());
  EXPECT_EQ(a.per_image_jsonl(), b.per_image_jsonl());
  EXPECT_NE(a.table().find("METEOR not computed"), std::string::npos);
}

TEST(EvaluateModels, Errors) {
  const auto f = eval_fixture();
  const std::vector<NamedModel> models{{"m", &f.model}};
  EXPECT_THROW(evaluate_models(models, {}, f.pools, f.stats, f.classifier, 6), std::invalid_argument);
  const std::vector<NamedModel> null_model{{"n", nullptr}};
  EXPECT_THROW(evaluate_models(null_model, f.test, f.pools, f.stats, f.classifier, 6),
               std::invalid_argument);
}

}  // namespace
}  // namespace vexpl
