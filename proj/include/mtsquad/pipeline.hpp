#pragma once

// Dataset construction through machine translation, retention accounting,
// and the translate-answer-translate-back evaluation flow.

#include "mtsquad/dataset.hpp"
#include "mtsquad/locate.hpp"
#include "mtsquad/morph.hpp"
#include "mtsquad/translate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mtsquad {

/// Percentage kept, rounded to one decimal; nullopt for an empty source.
inline std::optional<double> percent_kept(std::size_t kept, std::size_t source) {
  if (source == 0) return std::nullopt;
  return std::round(static_cast<double>(kept) * 1000.0 / static_cast<double>(source)) / 10.0;
}

/// "73.2%", or "n/a" for an empty source.
inline std::string format_percent(std::size_t kept, std::size_t source) {
  auto p = percent_kept(kept, source);
  if (!p) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *p);
  return buf;
}

/// 107088 -> "107,088"
inline std::string with_thousands(std::size_t n) {
  std::string digits = std::to_string(n), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

struct DropRecord {
  std::string id;
  DropReason reason;
  bool operator==(const DropRecord&) const = default;
};

struct RetentionStats {
  std::string split;
  std::size_t source_answerable = 0;
  std::size_t kept_answerable = 0;
  std::size_t source_unanswerable = 0;
  std::size_t kept_unanswerable = 0;
  std::vector<DropRecord> drops;  // in dataset order

  std::size_t source_questions() const { return source_answerable + source_unanswerable; }
  std::size_t kept_questions() const { return kept_answerable + kept_unanswerable; }
  std::size_t dropped(DropReason r) const {
    return static_cast<std::size_t>(
        std::count_if(drops.begin(), drops.end(), [r](const auto& d) { return d.reason == r; }));
  }
  bool operator==(const RetentionStats&) const = default;
};

/// Stats for a split known only by its published totals.
inline RetentionStats published_stats(std::string split, std::size_t source, std::size_t kept) {
  RetentionStats s;
  s.split = std::move(split);
  s.source_answerable = source;
  s.kept_answerable = kept;
  return s;
}

/// Renders a per-split retention table followed by a breakdown of each split.
inline std::string report_stats(const std::vector<RetentionStats>& splits) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %18s %18s %10s\n", "Split", "Source questions",
                "Kept questions", "Kept");
  out << line;
  for (const auto& s : splits) {
    std::snprintf(line, sizeof line, "%-12s %18s %18s %10s\n", s.split.c_str(),
                  with_thousands(s.source_questions()).c_str(),
                  with_thousands(s.kept_questions()).c_str(),
                  format_percent(s.kept_questions(), s.source_questions()).c_str());
    out << line;
  }
  for (const auto& s : splits) {
    out << "\n[" << s.split << "]\n";
    out << "  answerable:   " << with_thousands(s.kept_answerable) << " / "
        << with_thousands(s.source_answerable) << " ("
        << format_percent(s.kept_answerable, s.source_answerable) << ")\n";
    out << "  unanswerable: " << with_thousands(s.kept_unanswerable) << " / "
        << with_thousands(s.source_unanswerable) << " ("
        << format_percent(s.kept_unanswerable, s.source_unanswerable) << ")\n";
    out << "  dropped, " << to_string(DropReason::no_candidate) << ": "
        << with_thousands(s.dropped(DropReason::no_candidate)) << "\n";
    out << "  dropped, " << to_string(DropReason::empty_answer_normalization) << ": "
        << with_thousands(s.dropped(DropReason::empty_answer_normalization)) << "\n";
  }
  return out.str();
}

/// `id<TAB>reason` per dropped question.
inline std::string drops_tsv(const RetentionStats& s) {
  std::string out;
  for (const auto& d : s.drops) out += d.id + '\t' + to_string(d.reason) + '\n';
  return out;
}

struct BuildConfig {
  std::string split = "dataset";
  std::string src_lang = "en";
  std::string tgt_lang = "cs";
  std::size_t jobs = 1;
};

struct BuildResult {
  Dataset dataset;
  RetentionStats stats;
};

namespace detail {

struct ParagraphRef {
  std::size_t article;
  std::size_t paragraph;
};

inline std::vector<ParagraphRef> paragraph_refs(const Dataset& d) {
  std::vector<ParagraphRef> refs;
  for (std::size_t a = 0; a < d.articles.size(); ++a)
    for (std::size_t p = 0; p < d.articles[a].paragraphs.size(); ++p) refs.push_back({a, p});
  return refs;
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. If any call throws,
/// the exception of the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < std::min(std::max<std::size_t>(jobs, 1), n); ++t)
    pool.emplace_back(worker);
  worker();
  pool.clear();
  if (err) std::rethrow_exception(err);
}

[[noreturn]] inline void rethrow_at_paragraph(std::size_t index, const ParagraphRef& ref) {
  std::string where = "paragraph " + std::to_string(index) + " (data[" +
                      std::to_string(ref.article) + "].paragraphs[" +
                      std::to_string(ref.paragraph) + "])";
  try {
    throw;
  } catch (const TranslationError& e) {
    throw TranslationError(where + ": " + e.what(), e.status(), e.first(), e.last());
  } catch (const ProtocolError& e) {
    throw ProtocolError(where + ": " + e.what());
  }
}

inline std::vector<std::string> translate_checked(TranslationProvider& provider,
                                                  const std::vector<std::string>& sources,
                                                  const std::string& src, const std::string& tgt) {
  auto out = provider.translate_batch(sources, src, tgt);
  if (out.size() != sources.size())
    throw ProtocolError("provider returned " + std::to_string(out.size()) + " translations for " +
                        std::to_string(sources.size()) + " sources");
  return out;
}

}  // namespace detail

/// Translates every context, question and answer of `src` and projects each
/// question onto its translated paragraph. Dropped questions are left out,
/// and so are paragraphs and articles that end up empty.
inline BuildResult build_target_dataset(const Dataset& src, TranslationProvider& provider,
                                        const Normalizer& normalizer, const BuildConfig& cfg = {}) {
  require_valid(src);
  const auto refs = detail::paragraph_refs(src);

  struct Outcome {
    Paragraph paragraph;
    std::vector<Projection> projections;
  };
  std::vector<Outcome> outcomes(refs.size());

  detail::parallel_for(refs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& par = src.articles[refs[i].article].paragraphs[refs[i].paragraph];
    try {
      std::vector<std::string> sources{par.context};
      for (const auto& q : par.questions) sources.push_back(q.question);
      for (const auto& q : par.questions)
        for (const auto& a : q.answers) sources.push_back(a.text);
      auto translated = detail::translate_checked(provider, sources, cfg.src_lang, cfg.tgt_lang);
      if (translated[0].empty()) throw TranslationError("empty translation of the context");

      ContextIndex ctx(translated[0], normalizer);
      const std::size_t src_len = unicode::length(par.context);
      auto& out = outcomes[i];
      out.paragraph.context = translated[0];
      std::size_t next_answer = 1 + par.questions.size();
      for (std::size_t q = 0; q < par.questions.size(); ++q) {
        const auto& sq = par.questions[q];
        std::vector<std::string> answers(translated.begin() + static_cast<std::ptrdiff_t>(next_answer),
                                         translated.begin() + static_cast<std::ptrdiff_t>(next_answer + sq.answers.size()));
        next_answer += sq.answers.size();
        auto proj = project_question(sq, translated[1 + q], ctx, answers, src_len, normalizer);
        if (proj.question) out.paragraph.questions.push_back(*proj.question);
        out.projections.push_back(std::move(proj));
      }
    } catch (const TranslationError&) {
      detail::rethrow_at_paragraph(i, refs[i]);
    } catch (const ProtocolError&) {
      detail::rethrow_at_paragraph(i, refs[i]);
    }
  });

  BuildResult result;
  result.dataset.version = src.version;
  result.dataset.version_tag = src.version_tag;
  result.dataset.extra = src.extra;
  result.stats.split = cfg.split;
  std::size_t i = 0;
  for (const auto& art : src.articles) {
    Article out_art;
    out_art.title = art.title;
    out_art.extra = art.extra;
    for (const auto& par : art.paragraphs) {
      auto& oc = outcomes[i++];
      for (std::size_t q = 0; q < par.questions.size(); ++q) {
        const auto& sq = par.questions[q];
        const auto& proj = oc.projections[q];
        auto& source = sq.unanswerable ? result.stats.source_unanswerable : result.stats.source_answerable;
        auto& kept = sq.unanswerable ? result.stats.kept_unanswerable : result.stats.kept_answerable;
        ++source;
        if (proj.question)
          ++kept;
        else
          result.stats.drops.push_back({sq.id, proj.reason});
      }
      if (!oc.paragraph.questions.empty()) out_art.paragraphs.push_back(std::move(oc.paragraph));
    }
    if (!out_art.paragraphs.empty()) result.dataset.articles.push_back(std::move(out_art));
  }
  require_valid(result.dataset);
  return result;
}

/// Forward half of the round trip: contexts and questions are translated to
/// the pivot language and answers are emptied, giving a prediction input for
/// a pivot-language model. Unanswerable flags and ids are kept.
inline Dataset round_trip_forward(const Dataset& dev, TranslationProvider& provider,
                                  const std::string& src_lang, const std::string& pivot_lang,
                                  std::size_t jobs = 1) {
  require_valid(dev, {.require_answers = false});
  const auto refs = detail::paragraph_refs(dev);
  Dataset out = dev;
  detail::parallel_for(refs.size(), jobs, [&](std::size_t i) {
    auto& par = out.articles[refs[i].article].paragraphs[refs[i].paragraph];
    try {
      std::vector<std::string> sources{par.context};
      for (const auto& q : par.questions) sources.push_back(q.question);
      auto translated = detail::translate_checked(provider, sources, src_lang, pivot_lang);
      par.context = std::move(translated[0]);
      for (std::size_t q = 0; q < par.questions.size(); ++q) {
        par.questions[q].question = std::move(translated[1 + q]);
        par.questions[q].answers.clear();
      }
    } catch (const TranslationError&) {
      detail::rethrow_at_paragraph(i, refs[i]);
    } catch (const ProtocolError&) {
      detail::rethrow_at_paragraph(i, refs[i]);
    }
  });
  require_valid(out, {.require_answers = false});
  return out;
}

using Predictions = std::map<std::string, std::string>;

/// Back half of the round trip: non-empty pivot-language answers are
/// translated to the target language; empty (no-answer) predictions pass
/// through unchanged.
inline Predictions round_trip_back(const Predictions& predictions, TranslationProvider& provider,
                                   const std::string& pivot_lang, const std::string& tgt_lang) {
  std::vector<std::string> sources;
  for (const auto& [id, text] : predictions)
    if (!text.empty()) sources.push_back(text);
  auto translated = detail::translate_checked(provider, sources, pivot_lang, tgt_lang);
  Predictions out;
  std::size_t k = 0;
  for (const auto& [id, text] : predictions) out[id] = text.empty() ? std::string() : translated[k++];
  return out;
}

/// Every prediction id must name a question of `dev`; returns the strays.
inline std::vector<std::string> unknown_prediction_ids(const Dataset& dev, const Predictions& p) {
  std::unordered_set<std::string> ids;
  for (const auto& a : dev.articles)
    for (const auto& par : a.paragraphs)
      for (const auto& q : par.questions) ids.insert(q.id);
  std::vector<std::string> stray;
  for (const auto& [id, unused] : p)
    if (!ids.count(id)) stray.push_back(id);
  return stray;
}

/// Prediction files: a JSON object mapping question id to answer text.
inline Predictions parse_predictions(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("invalid prediction JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("$", "predictions must be a JSON object");
  Predictions p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) throw ParseError("$." + it.key(), "expected a string");
    p[it.key()] = it.value().get<std::string>();
  }
  return p;
}

inline std::string serialize_predictions(const Predictions& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, text] : p) j[id] = text;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

}  // namespace mtsquad
