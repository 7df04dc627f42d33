#include "vexpl/data.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

namespace vexpl {
namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.num_classes = 3;
  s.vocab_size = 20;
  s.instances_per_class = 6;
  s.val_per_class = 1;
  s.test_per_class = 2;
  s.feature_dim = 4;
  return s;
}

/// Class of the planted token in the sentence, or -1.
int planted_class(const std::string& sentence, const SynthSpec& spec) {
  for (const auto& w : tokenize(sentence)) {
    for (int k = 0; k < spec.num_classes; ++k) {
      for (int j = 0; j < spec.planted_per_class; ++j) {
        if (w == planted_token(k, j, spec.planted_per_class)) return k;
      }
    }
  }
  return -1;
}

TEST(Synth, EverySentenceCarriesExactlyOnePlantedTokenOfItsClass) {
  for (int planted : {1, 2}) {
    auto spec = small_spec();
    spec.planted_per_class = planted;
    const Corpus c = generate_synth(spec);
    for (const auto& inst : c.instances) {
      ASSERT_EQ(inst.sentences.size(), static_cast<std::size_t>(spec.sentences_per_instance));
      for (const auto& s : inst.sentences) {
        int planted_words = 0;
        for (const auto& w : tokenize(s)) planted_words += w[0] == 't';
        EXPECT_EQ(planted_words, 1) << s;
        EXPECT_EQ(planted_class(s, spec), inst.label) << s;
        const auto n = tokenize(s).size();
        EXPECT_GE(n, static_cast<std::size_t>(spec.min_fillers + 1));
        EXPECT_LE(n, static_cast<std::size_t>(spec.max_fillers + 1));
      }
    }
  }
}

TEST(Synth, PlantedUnigramRuleIsPerfect) {
  // A classifier that only looks up the planted token is always right, on every split.
  const auto spec = small_spec();
  const Corpus c = generate_synth(spec);
  std::size_t right = 0, total = 0;
  for (const auto& inst : c.instances) {
    for (const auto& s : inst.sentences) {
      right += planted_class(s, spec) == inst.label;
      ++total;
    }
  }
  EXPECT_EQ(right, total);
}

TEST(Synth, DeterministicUnderSeed) {
  const auto spec = small_spec();
  EXPECT_EQ(generate_synth(spec), generate_synth(spec));
  auto other = spec;
  other.seed = spec.seed + 1;
  EXPECT_NE(generate_synth(spec), generate_synth(other));
}

TEST(Synth, ZeroNoiseGivesClassMeans) {
  auto spec = small_spec();
  spec.feature_noise = 0;
  const Corpus c = generate_synth(spec);
  for (const auto& inst : c.instances) {
    EXPECT_EQ(inst.feature, c.instances[static_cast<std::size_t>(inst.label * spec.instances_per_class)].feature);
  }
}

TEST(Synth, SplitSizesPerClass) {
  const auto spec = small_spec();
  const Corpus c = generate_synth(spec);
  EXPECT_NO_THROW(c.validate());
  for (int k = 0; k < spec.num_classes; ++k) {
    int train = 0, val = 0, test = 0;
    for (const auto& inst : c.instances) {
      if (inst.label != k) continue;
      train += inst.split == Split::Train;
      val += inst.split == Split::Val;
      test += inst.split == Split::Test;
    }
    EXPECT_EQ(test, spec.test_per_class);
    EXPECT_EQ(val, spec.val_per_class);
    EXPECT_EQ(train, spec.instances_per_class - spec.val_per_class - spec.test_per_class);
  }
  EXPECT_EQ(c.split(Split::Test).size(), static_cast<std::size_t>(spec.num_classes * spec.test_per_class));
}

TEST(Synth, InvalidSpecsThrow) {
  auto bad = [](auto mutate) {
    auto s = small_spec();
    mutate(s);
    return s;
  };
  EXPECT_THROW(bad([](SynthSpec& s) { s.num_classes = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SynthSpec& s) { s.vocab_size = 5; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SynthSpec& s) { s.max_fillers = 1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SynthSpec& s) { s.feature_noise = -1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SynthSpec& s) { s.test_per_class = 6; }).validate(), std::invalid_argument);
  EXPECT_THROW(generate_synth(bad([](SynthSpec& s) { s.feature_dim = 0; })), std::invalid_argument);
}

const char* kTwoRecords =
    R"({"format":"vexpl-corpus","version":1,"num_classes":1,"feature_dim":2}
{"id":"x","class":0,"feature":[1,2],"sentences":["A red bird.","red bird"],"split":"train"}

{"id":"y","class":0,"feature":[3,4],"sentences":["blue fish"],"split":"test"}
)";

TEST(Loader, ParsesRecords) {
  std::istringstream in(kTwoRecords);
  const Corpus c = parse_corpus(in, "mem");
  ASSERT_EQ(c.instances.size(), 2u);
  EXPECT_EQ(c.num_classes, 1);
  EXPECT_EQ(c.instances[1].id, "y");
  EXPECT_EQ(c.instances[1].split, Split::Test);
  EXPECT_EQ(c.instances[0].feature(1), 2.0);
  // Vocabulary comes from training sentences only.
  EXPECT_TRUE(c.vocab.contains("red"));
  EXPECT_FALSE(c.vocab.contains("fish"));
}

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_corpus(in, "file.jsonl");
  } catch (const CorpusError& e) {
    return e.what();
  }
  return "";
}

TEST(Loader, ErrorsNameTheProblem) {
  const std::string header = R"({"format":"vexpl-corpus","version":1,"num_classes":1,"feature_dim":2})" "\n";
  const auto wrong_dim = error_of(header + R"({"id":"img7","class":0,"feature":[1],"sentences":["a"],"split":"train"})");
  EXPECT_NE(wrong_dim.find("img7"), std::string::npos) << wrong_dim;
  EXPECT_NE(wrong_dim.find("file.jsonl:2"), std::string::npos) << wrong_dim;

  const auto malformed = error_of(header + "\n" + "{not json");
  EXPECT_NE(malformed.find("file.jsonl:3"), std::string::npos) << malformed;

  const auto no_header = error_of(R"({"id":"a"})");
  EXPECT_NE(no_header.find("header"), std::string::npos) << no_header;

  EXPECT_NE(error_of("").find("empty"), std::string::npos);

  const auto bad_split = error_of(header + R"({"id":"a","class":0,"feature":[1,2],"sentences":["a"],"split":"dev"})");
  EXPECT_NE(bad_split.find("dev"), std::string::npos) << bad_split;

  const std::string two = R"({"format":"vexpl-corpus","version":1,"num_classes":2,"feature_dim":1})" "\n";
  const auto missing = error_of(two + R"({"id":"a","class":0,"feature":[1],"sentences":["a"],"split":"train"})" "\n" +
                                R"({"id":"b","class":1,"feature":[1],"sentences":["b"],"split":"test"})");
  EXPECT_NE(missing.find("class 1 has no training instance"), std::string::npos) << missing;

  const auto dup = error_of(header + R"({"id":"a","class":0,"feature":[1,2],"sentences":["a"],"split":"train"})" "\n" +
                            R"({"id":"a","class":0,"feature":[1,2],"sentences":["b"],"split":"train"})");
  EXPECT_NE(dup.find("duplicate"), std::string::npos) << dup;

  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), CorpusError);
}

TEST(Loader, SaveLoadRoundTrip) {
  const Corpus c = generate_synth(small_spec());
  const auto path = testing::temp_dir("corpus") / "c.jsonl";
  save_corpus(c, path);
  EXPECT_EQ(load_corpus(path), c);
}

TEST(Loader, PredictedLabels) {
  const auto dir = testing::temp_dir("labels");
  std::ofstream(dir / "ok.txt") << "# predictions\nx 1\n\ny 0  # trailing comment\n";
  const LabelMap labels = load_labels(dir / "ok.txt", 2);
  EXPECT_EQ(labels, (LabelMap{{"x", 1}, {"y", 0}}));

  std::vector<EvalInstance> insts(2);
  insts[0].id = "x";
  insts[1].id = "y";
  apply_predicted_labels(insts, labels);
  EXPECT_EQ(insts[0].conditioning_label, 1);
  EXPECT_EQ(insts[0].label, 0);
  insts.push_back(EvalInstance{});
  insts.back().id = "z";
  try {
    apply_predicted_labels(insts, labels);
    FAIL() << "expected an error";
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos) << e.what();
  }

  std::ofstream(dir / "range.txt") << "x 5\n";
  EXPECT_THROW(load_labels(dir / "range.txt", 2), CorpusError);
  std::ofstream(dir / "dup.txt") << "x 1\nx 0\n";
  EXPECT_THROW(load_labels(dir / "dup.txt", 2), CorpusError);
  std::ofstream(dir / "bad.txt") << "x one\n";
  try {
    load_labels(dir / "bad.txt", 2);
    FAIL() << "expected an error";
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt:1"), std::string::npos) << e.what();
  }
}

TEST(Vocabulary, BuildOrdersByCountThenName) {
  const std::vector<std::string> sentences{"b a c", "a b", "a d"};
  const auto v = build_vocabulary(sentences);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<s>", "</s>", "<unk>", "a", "b", "c", "d"}));
  const auto pruned = build_vocabulary(sentences, 2);
  EXPECT_EQ(pruned.tokens(), (std::vector<std::string>{"<s>", "</s>", "<unk>", "a", "b"}));
  EXPECT_EQ(pruned.id("c"), Vocabulary::kUnk);
}

TEST(Vocabulary, EncodeDecodeAndTruncate) {
  const Vocabulary v({"red", "bird"});
  bool truncated = true;
  EXPECT_EQ(v.encode({"red", "bird"}, 5, &truncated), (TokenSequence{3, 4, Vocabulary::kEos}));
  EXPECT_FALSE(truncated);
  EXPECT_EQ(v.encode({"red", "bird", "red"}, 3, &truncated), (TokenSequence{3, 4, Vocabulary::kEos}));
  EXPECT_TRUE(truncated);
  EXPECT_EQ(v.encode({"owl"}, 3), (TokenSequence{Vocabulary::kUnk, Vocabulary::kEos}));
  EXPECT_EQ(v.decode({3, 4, Vocabulary::kEos, 3}), (std::vector<std::string>{"red", "bird"}));
  EXPECT_THROW(v.encode({"red"}, 0), std::invalid_argument);
  EXPECT_THROW(Vocabulary({"red", "red"}), std::invalid_argument);
}

TEST(Text, Tokenize) {
  EXPECT_EQ(tokenize("  This bird's WING, is red!  "),
            (std::vector<std::string>{"this", "birds", "wing", "is", "red"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(Text, ValidateSequence) {
  EXPECT_NO_THROW(validate_sequence({3, 1}, 5, 2));
  EXPECT_THROW(validate_sequence({}, 5, 2), DimensionError);
  EXPECT_THROW(validate_sequence({3, 4, 1}, 5, 2), DimensionError);
  EXPECT_THROW(validate_sequence({1, 1}, 5, 3), DimensionError);
  EXPECT_THROW(validate_sequence({7, 1}, 5, 3), DimensionError);
  EXPECT_THROW(validate_sequence({3, 4}, 5, 3), DimensionError);
}

TEST(Views, ExamplesAndPools) {
  const auto spec = small_spec();
  const Corpus c = generate_synth(spec);
  const auto cls = classifier_examples(c, Split::Train, 20);
  EXPECT_EQ(cls.size(), c.split(Split::Train).size() * static_cast<std::size_t>(spec.sentences_per_instance));
  for (const auto& ex : cls) validate_sequence(ex.tokens, c.vocab.size(), 20);

  const auto pools = class_pools(c, Split::Test);
  ASSERT_EQ(pools.size(), static_cast<std::size_t>(spec.num_classes));
  for (const auto& pool : pools) {
    EXPECT_EQ(pool.size(), static_cast<std::size_t>(spec.test_per_class * spec.sentences_per_instance));
  }
  const auto eval = eval_instances(c, Split::Test);
  EXPECT_EQ(eval.size(), c.split(Split::Test).size());
  for (const auto& e : eval) EXPECT_EQ(e.label, e.conditioning_label);

  const auto st = ngram_stats(c, Split::Test);
  EXPECT_EQ(st.documents, static_cast<int>(eval.size()));

  const auto lm = language_model_examples(c, Split::Train, 4);
  for (const auto& ex : lm) EXPECT_LE(ex.tokens.size(), 4u);
}

}  // namespace
}  // namespace vexpl
