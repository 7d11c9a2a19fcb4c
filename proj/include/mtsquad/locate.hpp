#pragma once

// Answer projection: find a translated answer inside an independently
// translated context as a window of word tokens whose normalized roots equal
// the answer's as a multiset, preferring the window whose relative position
// is closest to the source answer's.

#include "mtsquad/dataset.hpp"
#include "mtsquad/morph.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtsquad {

struct LocateQuery {
  std::string_view context;
  std::string_view answer;
  double original_rel_pos = 0.0;  // source answer start / source context length
};

struct Span {
  std::size_t start = 0;  // code points, half-open
  std::size_t end = 0;
  std::string text;
  bool operator==(const Span&) const = default;
};

enum class LocateStatus { found, no_candidate, empty_answer };

struct LocateResult {
  LocateStatus status = LocateStatus::no_candidate;
  std::optional<Span> span;

  bool found() const { return status == LocateStatus::found; }
  bool operator==(const LocateResult&) const = default;
};

/// A context tokenized and normalized once, for locating several answers.
class ContextIndex {
 public:
  ContextIndex(std::string_view context, const Normalizer& n)
      : context_(context), length_(unicode::length(context)) {
    for (auto& t : tokenize(context))
      if (t.is_word) {
        t.root = n.word(t.surface);
        words_.push_back(std::move(t));
      }
  }

  std::string_view context() const { return context_; }
  std::size_t length() const { return length_; }
  const std::vector<Token>& words() const { return words_; }

 private:
  std::string context_;
  std::size_t length_;
  std::vector<Token> words_;
};

/// Relative position of a span start, in [0, 1].
inline double relative_position(std::size_t start, std::size_t context_length) {
  return context_length == 0 ? 0.0 : static_cast<double>(start) / static_cast<double>(context_length);
}

inline LocateResult locate_answer(const ContextIndex& ctx, std::string_view answer,
                                  double original_rel_pos, const Normalizer& n) {
  const auto roots = normalize_text(answer, n);
  const std::size_t k = roots.size();
  if (k == 0) return {LocateStatus::empty_answer, std::nullopt};
  const auto& words = ctx.words();
  if (words.size() < k) return {LocateStatus::no_candidate, std::nullopt};

  // Intern the answer roots; context words outside the answer get -1.
  std::unordered_map<std::string_view, int> ids;
  std::vector<int> need;
  for (const auto& r : roots) {
    auto [it, inserted] = ids.try_emplace(r, static_cast<int>(need.size()));
    if (inserted) need.push_back(0);
    ++need[static_cast<std::size_t>(it->second)];
  }
  std::vector<int> word_id(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto it = ids.find(words[i].root);
    word_id[i] = it == ids.end() ? -1 : it->second;
  }

  // `off` counts distinct ids whose window count differs from `need`, plus
  // foreign words in the window; the window matches iff it is zero.
  std::vector<int> have(need.size(), 0);
  std::size_t foreign = 0;
  std::size_t off = need.size();
  auto add = [&](std::size_t i, int delta) {
    int id = word_id[i];
    if (id < 0) {
      foreign = delta > 0 ? foreign + 1 : foreign - 1;
      return;
    }
    auto u = static_cast<std::size_t>(id);
    bool was_ok = have[u] == need[u];
    have[u] += delta;
    bool is_ok = have[u] == need[u];
    if (was_ok && !is_ok) ++off;
    if (!was_ok && is_ok) --off;
  };

  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    add(i, +1);
    if (i >= k) add(i - k, -1);
    if (i + 1 < k || off != 0 || foreign != 0) continue;
    std::size_t first = i + 1 - k;
    double dist = std::fabs(relative_position(words[first].start, ctx.length()) - original_rel_pos);
    if (!best || dist < best_dist) {
      best = first;
      best_dist = dist;
    }
  }
  if (!best) return {LocateStatus::no_candidate, std::nullopt};

  const auto& a = words[*best];
  const auto& b = words[*best + k - 1];
  Span span{a.start, b.end,
            std::string(ctx.context().substr(a.byte_start, b.byte_end - a.byte_start))};
  return {LocateStatus::found, std::move(span)};
}

inline LocateResult locate_answer(const LocateQuery& q, const Normalizer& n) {
  return locate_answer(ContextIndex(q.context, n), q.answer, q.original_rel_pos, n);
}

enum class DropReason { none, no_candidate, empty_answer_normalization };

inline const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::none: return "kept";
    case DropReason::no_candidate: return "no-candidate";
    case DropReason::empty_answer_normalization: return "empty-answer-normalization";
  }
  return "?";
}

struct Projection {
  std::optional<Question> question;  // nullopt when dropped
  DropReason reason = DropReason::none;
};

/// Projects one source question onto a translated paragraph. Unanswerable
/// questions are always kept. Each gold answer is located on its own; the
/// question survives if at least one does.
inline Projection project_question(const Question& src, std::string translated_question,
                                   const ContextIndex& translated_context,
                                   const std::vector<std::string>& translated_answers,
                                   std::size_t src_context_length, const Normalizer& n) {
  Question out;
  out.id = src.id;
  out.question = std::move(translated_question);
  out.unanswerable = src.unanswerable;
  if (src.unanswerable) return {std::move(out), DropReason::none};

  bool any_roots = false;
  for (std::size_t i = 0; i < src.answers.size() && i < translated_answers.size(); ++i) {
    double rel = relative_position(src.answers[i].start, src_context_length);
    auto r = locate_answer(translated_context, translated_answers[i], rel, n);
    any_roots = any_roots || r.status != LocateStatus::empty_answer;
    if (r.found()) {
      Answer a;
      a.text = std::move(r.span->text);
      a.start = r.span->start;
      out.answers.push_back(std::move(a));
    }
  }
  if (out.answers.empty())
    return {std::nullopt, any_roots ? DropReason::no_candidate : DropReason::empty_answer_normalization};
  return {std::move(out), DropReason::none};
}

}  // namespace mtsquad
