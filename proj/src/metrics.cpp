#include "metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kgen {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (std::size_t j = 1; j < n; ++j) gram += " " + tokens[i + j];
    ++counts[gram];
  }
  return counts;
}

// Clipped n-gram matches against the maximum reference count.
std::size_t clipped_matches(const std::map<std::string, std::size_t>& cand,
                            const std::vector<std::map<std::string, std::size_t>>& refs) {
  std::size_t matched = 0;
  for (const auto& [gram, count] : cand) {
    std::size_t best = 0;
    for (const auto& ref : refs) {
      auto it = ref.find(gram);
      if (it != ref.end()) best = std::max(best, it->second);
    }
    matched += std::min(count, best);
  }
  return matched;
}

}  // namespace

std::string normalize_text(const std::string& s) {
  std::string kept;
  kept.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      kept += static_cast<char>(std::tolower(c));
    } else if (std::isspace(c) || std::ispunct(c)) {
      // Punctuation separates words rather than gluing neighbours together.
      kept += ' ';
    }
  }
  std::vector<std::string> words = split_ws(kept);
  if (!words.empty() && words.front() == "to") words.erase(words.begin());
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out;
}

std::map<std::string, MetricValue> recall_at_k(const std::vector<EvalRecord>& records,
                                               std::size_t k) {
  struct Acc { double sum = 0.0; std::size_t n = 0; std::size_t skipped = 0; };
  std::map<std::string, Acc> acc;
  for (const EvalRecord& rec : records) {
    Acc& a = acc[rec.relation];
    if (rec.gold.empty()) {
      ++a.skipped;
      continue;
    }
    std::size_t hit = 0;
    const std::size_t top = std::min(k, rec.generated.size());
    for (std::size_t i = 0; i < top; ++i)
      if (rec.gold.count(rec.generated[i])) ++hit;
    a.sum += static_cast<double>(hit) / static_cast<double>(rec.gold.size());
    ++a.n;
  }
  std::map<std::string, MetricValue> out;
  for (const auto& [rel, a] : acc) {
    MetricValue mv;
    mv.records = a.n;
    mv.skipped = a.skipped;
    mv.value = a.n == 0 ? 0.0 : 100.0 * a.sum / static_cast<double>(a.n);
    out[rel] = mv;
  }
  return out;
}

double bleu2_sentence(const std::string& candidate,
                      const std::vector<std::string>& references) {
  const std::vector<std::string> cand = split_ws(candidate);
  if (cand.empty() || references.empty()) return 0.0;

  std::vector<std::vector<std::string>> refs;
  for (const std::string& r : references) refs.push_back(split_ws(r));

  // Unigram precision, clipped.
  std::vector<std::map<std::string, std::size_t>> ref_uni, ref_bi;
  for (const auto& r : refs) {
    ref_uni.push_back(ngram_counts(r, 1));
    ref_bi.push_back(ngram_counts(r, 2));
  }
  const auto cand_uni = ngram_counts(cand, 1);
  const auto cand_bi = ngram_counts(cand, 2);

  const std::size_t uni_total = cand.size();
  const std::size_t uni_match = clipped_matches(cand_uni, ref_uni);
  if (uni_match == 0) return 0.0;
  const double p1 = static_cast<double>(uni_match) / static_cast<double>(uni_total);

  // Add-one smoothing on the bigram counts.
  const std::size_t bi_total = cand.size() >= 2 ? cand.size() - 1 : 0;
  const std::size_t bi_match = clipped_matches(cand_bi, ref_bi);
  const double p2 = (static_cast<double>(bi_match) + 1.0) /
                    (static_cast<double>(bi_total) + 1.0);

  // Brevity penalty against the closest reference length (shorter wins ties).
  std::size_t closest = refs[0].size();
  for (const auto& r : refs) {
    const auto diff = [&](std::size_t len) {
      return len > cand.size() ? len - cand.size() : cand.size() - len;
    };
    if (diff(r.size()) < diff(closest) ||
        (diff(r.size()) == diff(closest) && r.size() < closest))
      closest = r.size();
  }
  double bp = 1.0;
  if (cand.size() < closest)
    bp = std::exp(1.0 - static_cast<double>(closest) / static_cast<double>(cand.size()));

  return bp * std::sqrt(p1 * p2);
}

std::map<std::string, MetricValue> bleu2_at_k(const std::vector<EvalRecord>& records,
                                              std::size_t k) {
  struct Acc { double sum = 0.0; std::size_t n = 0; std::size_t skipped = 0; };
  std::map<std::string, Acc> acc;
  for (const EvalRecord& rec : records) {
    Acc& a = acc[rec.relation];
    if (rec.gold.empty()) {
      ++a.skipped;
      continue;
    }
    const std::vector<std::string> refs(rec.gold.begin(), rec.gold.end());
    const std::size_t top = std::min(k, rec.generated.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < top; ++i) sum += bleu2_sentence(rec.generated[i], refs);
    a.sum += top == 0 ? 0.0 : sum / static_cast<double>(top);
    ++a.n;
  }
  std::map<std::string, MetricValue> out;
  for (const auto& [rel, a] : acc) {
    MetricValue mv;
    mv.records = a.n;
    mv.skipped = a.skipped;
    mv.value = a.n == 0 ? 0.0 : 100.0 * a.sum / static_cast<double>(a.n);
    out[rel] = mv;
  }
  return out;
}

namespace {

double macro(const std::map<std::string, MetricValue>& per_relation) {
  if (per_relation.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [_, mv] : per_relation) sum += mv.value;
  return sum / static_cast<double>(per_relation.size());
}

double micro(const std::map<std::string, MetricValue>& per_relation) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [_, mv] : per_relation) {
    sum += mv.value * static_cast<double>(mv.records);
    n += mv.records;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

double EvalReport::macro_recall() const { return macro(recall); }
double EvalReport::macro_bleu2() const { return macro(bleu2); }
double EvalReport::micro_recall() const { return micro(recall); }
double EvalReport::micro_bleu2() const { return micro(bleu2); }

EvalReport evaluate_records(const std::vector<EvalRecord>& records, std::size_t k) {
  EvalReport report;
  report.k = k;
  report.recall = recall_at_k(records, k);
  report.bleu2 = bleu2_at_k(records, k);
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json obj;
  obj["k"] = report.k;
  nlohmann::json rels = nlohmann::json::object();
  for (const auto& [rel, mv] : report.recall) {
    nlohmann::json row;
    row["recall_at_k"] = mv.value;
    row["records"] = mv.records;
    row["skipped_empty_gold"] = mv.skipped;
    auto it = report.bleu2.find(rel);
    row["bleu2_at_k"] = it == report.bleu2.end() ? 0.0 : it->second.value;
    rels[rel] = row;
  }
  obj["relations"] = rels;
  obj["macro"] = {{"recall_at_k", report.macro_recall()},
                  {"bleu2_at_k", report.macro_bleu2()}};
  obj["micro"] = {{"recall_at_k", report.micro_recall()},
                  {"bleu2_at_k", report.micro_bleu2()}};
  return obj.dump(2);
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path);
  out << eval_report_json(report) << "\n";
}

}  // namespace kgen
