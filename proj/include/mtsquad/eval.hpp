#pragma once

// SQuAD-style exact match and token-bag F1 with optional lemma/root
// normalization of the compared words.

#include "mtsquad/dataset.hpp"
#include "mtsquad/errors.hpp"
#include "mtsquad/morph.hpp"
#include "mtsquad/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mtsquad {

/// How answer text is split into words before comparison.
enum class Tokenization {
  /// Letter/digit runs; every other character separates words.
  word_runs,
  /// The reference SQuAD script: lowercase, delete ASCII punctuation, split
  /// on whitespace. "U.S." stays one word ("us").
  squad_reference,
};

struct EvalConfig {
  NormMode mode = NormMode::raw;
  std::vector<std::string> articles;
  Tokenization tokenization = Tokenization::word_runs;
  std::shared_ptr<const LemmaLexicon> lexicon;
  std::shared_ptr<const DerivationForest> forest;
  /// F1 of a prediction and a gold that both normalize to nothing. The
  /// reference script scores that 0 (while its EM is 1); 1 otherwise.
  double empty_pair_f1 = 1.0;

  /// Settings under which raw-mode scores reproduce the reference SQuAD
  /// evaluation script.
  static EvalConfig english() {
    EvalConfig c;
    c.articles = {"a", "an", "the"};
    c.tokenization = Tokenization::squad_reference;
    c.empty_pair_f1 = 0.0;
    return c;
  }

  Normalizer normalizer() const { return Normalizer(mode, lexicon, forest); }
};

namespace detail {

inline bool is_ascii_punct(char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

inline std::vector<std::string> reference_words(std::string_view text,
                                                const std::vector<std::string>& articles) {
  std::string lowered = unicode::full_lower(text);
  std::string stripped;
  stripped.reserve(lowered.size());
  for (char c : lowered)
    if (!is_ascii_punct(c)) stripped += c;

  // Articles are removed only as whole \w-runs, like re.sub(r'\b(a|an|the)\b', ' ', s).
  std::string spaced;
  spaced.reserve(stripped.size());
  std::string_view sv(stripped);
  for (std::size_t i = 0; i < sv.size();) {
    std::size_t b = i;
    char32_t c = unicode::next(sv, i);
    if (!unicode::is_py_word(c)) {
      spaced.append(sv.substr(b, i - b));
      continue;
    }
    std::size_t e = i;
    while (e < sv.size()) {
      std::size_t probe = e;
      if (!unicode::is_py_word(unicode::next(sv, probe))) break;
      e = probe;
    }
    auto run = sv.substr(b, e - b);
    bool is_article = std::find(articles.begin(), articles.end(), run) != articles.end();
    if (is_article)
      spaced += ' ';
    else
      spaced.append(run);
    i = e;
  }

  std::vector<std::string> words;
  std::string cur;
  std::string_view sp(spaced);
  for (std::size_t i = 0; i < sp.size();) {
    std::size_t b = i;
    char32_t c = unicode::next(sp, i);
    if (unicode::is_py_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.append(sp.substr(b, i - b));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail

/// Normalized comparison words of an answer. Throws ConfigError when the
/// mode needs resources that `cfg` lacks.
inline std::vector<std::string> normalize_answer(std::string_view text, const EvalConfig& cfg,
                                                 const Normalizer& n) {
  std::vector<std::string> out;
  if (cfg.tokenization == Tokenization::squad_reference) {
    for (auto& w : detail::reference_words(text, cfg.articles))
      out.push_back(cfg.mode == NormMode::raw ? std::move(w) : n.word(w));
    return out;
  }
  for (const auto& t : tokenize(unicode::fold_case(text))) {
    if (!t.is_word) continue;
    if (std::find(cfg.articles.begin(), cfg.articles.end(), t.surface) != cfg.articles.end())
      continue;
    out.push_back(n.word(t.surface));
  }
  return out;
}

inline std::vector<std::string> normalize_answer(std::string_view text, const EvalConfig& cfg) {
  return normalize_answer(text, cfg, cfg.normalizer());
}

struct QuestionScore {
  std::string id;
  int em = 0;
  double f1 = 0.0;
  bool missing = false;
};

/// Token-bag F1 over the multiset intersection; two empty bags score 1.
inline double bag_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string_view, int> counts;
  for (const auto& g : gold) ++counts[g];
  int common = 0;
  for (const auto& p : pred) {
    auto it = counts.find(p);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

struct ScorePair {
  int em = 0;
  double f1 = 0.0;
};

/// Unanswerable questions score 1 only for an empty normalized prediction.
/// Otherwise EM compares word sequences and F1 takes the best gold.
inline ScorePair score_question(std::string_view pred, const std::vector<std::string>& golds,
                                bool unanswerable, const EvalConfig& cfg, const Normalizer& n) {
  auto p = normalize_answer(pred, cfg, n);
  if (unanswerable) return p.empty() ? ScorePair{1, 1.0} : ScorePair{0, 0.0};
  ScorePair best;
  for (const auto& g : golds) {
    auto gw = normalize_answer(g, cfg, n);
    if (gw == p) best.em = 1;
    best.f1 = std::max(best.f1, p.empty() && gw.empty() ? cfg.empty_pair_f1 : bag_f1(p, gw));
  }
  return best;
}

inline ScorePair score_question(std::string_view pred, const std::vector<std::string>& golds,
                                bool unanswerable, const EvalConfig& cfg) {
  return score_question(pred, golds, unanswerable, cfg, cfg.normalizer());
}

struct EvalReport {
  double exact_match = 0.0;  // percent
  double f1 = 0.0;           // percent
  std::size_t total = 0;
  std::size_t missing = 0;
  std::vector<std::string> unknown_ids;  // predictions naming no question
  std::vector<QuestionScore> per_question;
};

/// Scores every question of `d`. Missing predictions score zero and are
/// counted; predictions for unknown ids are listed and otherwise ignored.
inline EvalReport evaluate(const Dataset& d, const Predictions& preds, const EvalConfig& cfg,
                           std::size_t jobs = 1) {
  const Normalizer n = cfg.normalizer();
  std::vector<const Question*> questions;
  for (const auto& a : d.articles)
    for (const auto& p : a.paragraphs)
      for (const auto& q : p.questions) questions.push_back(&q);

  EvalReport r;
  r.total = questions.size();
  r.per_question.resize(questions.size());
  detail::parallel_for(questions.size(), jobs, [&](std::size_t i) {
    const auto& q = *questions[i];
    auto& s = r.per_question[i];
    s.id = q.id;
    auto it = preds.find(q.id);
    if (it == preds.end()) {
      s.missing = true;
      return;
    }
    std::vector<std::string> golds;
    for (const auto& a : q.answers) golds.push_back(a.text);
    auto sc = score_question(it->second, golds, q.unanswerable, cfg, n);
    s.em = sc.em;
    s.f1 = sc.f1;
  });

  double em = 0.0, f1 = 0.0;
  for (const auto& s : r.per_question) {
    em += s.em;
    f1 += s.f1;
    r.missing += s.missing ? 1 : 0;
  }
  if (r.total > 0) {
    r.exact_match = 100.0 * em / static_cast<double>(r.total);
    r.f1 = 100.0 * f1 / static_cast<double>(r.total);
  }
  r.unknown_ids = unknown_prediction_ids(d, preds);
  return r;
}

inline std::string format_report(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "exact_match\t%.4f\nf1\t%.4f\ntotal\t%zu\nmissing\t%zu\n",
                r.exact_match, r.f1, r.total, r.missing);
  return buf;
}

/// `id<TAB>em<TAB>f1` per question, dataset order.
inline std::string per_question_tsv(const EvalReport& r) {
  std::string out;
  char buf[64];
  for (const auto& s : r.per_question) {
    std::snprintf(buf, sizeof buf, "\t%d\t%.6f\n", s.em, s.f1);
    out += s.id;
    out += buf;
  }
  return out;
}

}  // namespace mtsquad
