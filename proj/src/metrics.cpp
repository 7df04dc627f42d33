#include "vexpl/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vexpl {
namespace {

using GramVector = std::unordered_map<std::string, Real>;

GramVector tfidf(const Words& words, int n, const NgramStats& stats) {
  GramVector v;
  for (const auto& [gram, count] : ngram_counts(words, n)) {
    v[gram] = static_cast<Real>(count) * stats.idf(n, gram);
  }
  return v;
}

Real norm(const GramVector& v) {
  Real s = 0;
  for (const auto& [g, x] : v) s += x * x;
  return std::sqrt(s);
}

Real clipped_cosine(const GramVector& cand, Real cand_norm, const GramVector& ref) {
  const Real ref_norm = norm(ref);
  if (cand_norm == 0 || ref_norm == 0) return 0;
  Real dot = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) dot += std::min(c, it->second) * it->second;
  }
  return dot / (cand_norm * ref_norm);
}

}  // namespace

std::unordered_map<std::string, int> ngram_counts(const Words& words, int n) {
  std::unordered_map<std::string, int> counts;
  if (n < 1 || words.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    std::string key = words[i];
    for (int k = 1; k < n; ++k) {
      key += '\x1f';
      key += words[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

NgramStats NgramStats::from_documents(std::span<const std::vector<Words>> documents) {
  NgramStats st;
  st.documents = static_cast<int>(documents.size());
  for (const auto& doc : documents) {
    for (int n = 1; n <= kMaxN; ++n) {
      std::set<std::string> present;
      for (const auto& ref : doc) {
        for (const auto& [gram, c] : ngram_counts(ref, n)) present.insert(gram);
      }
      for (const auto& gram : present) ++st.document_frequency[static_cast<std::size_t>(n - 1)][gram];
    }
  }
  return st;
}

Real NgramStats::idf(int n, const std::string& gram) const {
  if (documents < 1) throw std::invalid_argument("NgramStats: no documents");
  const auto& df = document_frequency[static_cast<std::size_t>(n - 1)];
  auto it = df.find(gram);
  const Real count = it == df.end() ? 1.0 : std::max(1, it->second);
  return std::log(static_cast<Real>(documents) / count);
}

Real cider(const Words& candidate, std::span<const Words> references, const NgramStats& stats) {
  if (references.empty()) throw std::invalid_argument("cider: references must be nonempty");
  if (candidate.empty()) return 0;
  Real total = 0;
  for (int n = 1; n <= NgramStats::kMaxN; ++n) {
    const GramVector cand = tfidf(candidate, n, stats);
    const Real cand_norm = norm(cand);
    Real per_n = 0;
    for (const auto& ref : references) per_n += clipped_cosine(cand, cand_norm, tfidf(ref, n, stats));
    total += per_n / static_cast<Real>(references.size());
  }
  return 10.0 * total / NgramStats::kMaxN;
}

Real class_similarity(const Words& generated, int class_id, const ClassPools& pools,
                      const NgramStats& stats) {
  if (class_id < 0 || class_id >= static_cast<int>(pools.size())) {
    throw std::invalid_argument("class_similarity: unknown class " + std::to_string(class_id));
  }
  const auto& pool = pools[static_cast<std::size_t>(class_id)];
  if (pool.empty()) {
    throw std::invalid_argument("class_similarity: class " + std::to_string(class_id) +
                                " has no reference sentences");
  }
  return cider(generated, pool, stats);
}

int class_rank(const Words& generated, int true_class, const ClassPools& pools,
               const NgramStats& stats) {
  const int k = static_cast<int>(pools.size());
  if (k < 2) throw std::invalid_argument("class_rank: need at least two classes");
  if (true_class < 0 || true_class >= k) {
    throw std::invalid_argument("class_rank: unknown class " + std::to_string(true_class));
  }
  const Real own = class_similarity(generated, true_class, pools, stats);
  int rank = 1;
  for (int c = 0; c < k; ++c) {
    if (c != true_class && class_similarity(generated, c, pools, stats) >= own) ++rank;
  }
  return rank;
}

const ModelMetrics& MetricReport::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("report has no row '" + name + "'");
}

std::string MetricReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(20) << "model" << std::right << std::setw(10) << "CIDEr"
      << std::setw(12) << "Similarity" << std::setw(10) << "Rank" << std::setw(12) << "Accuracy"
      << "\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << r.name << std::right << std::setprecision(3)
        << std::setw(10) << r.cider << std::setw(12) << r.class_similarity << std::setw(10)
        << r.class_rank << std::setw(11) << std::setprecision(2) << 100.0 * r.classifier_accuracy
        << "%\n";
  }
  out << "(rank is 1-" << num_classes << ", lower is better; METEOR not computed)\n";
  return out.str();
}

std::string MetricReport::summary_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j{{"model", r.name},
                     {"cider", r.cider},
                     {"class_similarity", r.class_similarity},
                     {"class_rank", r.class_rank},
                     {"classifier_accuracy", r.classifier_accuracy},
                     {"images", r.per_image.size()},
                     {"num_classes", num_classes}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string MetricReport::per_image_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    for (const auto& s : r.per_image) {
      nlohmann::json j{{"model", r.name},      {"id", s.id},
                       {"class", s.label},     {"generated", s.generated},
                       {"cider", s.cider},     {"class_similarity", s.class_similarity},
                       {"class_rank", s.class_rank}, {"classifier_correct", s.classifier_correct}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

MetricReport evaluate_models(std::span<const NamedModel> models, std::span<const EvalInstance> test,
                             const ClassPools& pools, const NgramStats& stats,
                             const ClassifierModel& classifier, int max_len) {
  if (test.empty()) throw std::invalid_argument("evaluate_models: empty test set");
  MetricReport report;
  report.num_classes = static_cast<int>(pools.size());
  for (const auto& nm : models) {
    if (nm.model == nullptr) throw std::invalid_argument("evaluate_models: null model " + nm.name);
    ModelMetrics row;
    row.name = nm.name;
    std::size_t correct = 0;
    for (const auto& inst : test) {
      const Conditioning cond = nm.model->condition(inst.image_feature, inst.conditioning_label);
      const TokenSequence tokens = greedy_decode(*nm.model, cond, max_len);
      const Words words = nm.model->vocab.decode(tokens);
      ImageScore s;
      s.id = inst.id;
      s.label = inst.label;
      s.generated = join(words);
      s.cider = cider(words, inst.references, stats);
      s.class_similarity = class_similarity(words, inst.label, pools, stats);
      s.class_rank = class_rank(words, inst.label, pools, stats);
      const TokenSequence for_classifier =
          classifier.vocab.encode(words, static_cast<int>(words.size()) + 1);
      s.classifier_correct = predict(classifier, for_classifier) == inst.label;
      correct += s.classifier_correct ? 1 : 0;
      row.cider += s.cider;
      row.class_similarity += s.class_similarity;
      row.class_rank += s.class_rank;
      row.per_image.push_back(std::move(s));
    }
    const auto n = static_cast<Real>(test.size());
    row.cider /= n;
    row.class_similarity /= n;
    row.class_rank /= n;
    row.classifier_accuracy = static_cast<Real>(correct) / n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace vexpl
