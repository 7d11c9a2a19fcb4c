#pragma once

// Seeded generators for synthetic morphology resources, locator instances
// and SQuAD-shaped corpora.

#include "mtsquad/dataset.hpp"
#include "mtsquad/morph.hpp"
#include "mtsquad/unicode.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace synth {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

/// Ten derivation families. Each root has derived lemmas (a chain in the
/// forest) and inflected forms of every lemma (lexicon entries).
struct Morphology {
  std::map<std::string, std::string> form_to_root;  // lowercase surface -> root
  std::map<std::string, std::string> parent;        // forest rows
  std::vector<std::string> lexicon_rows;            // form<TAB>lemma
  std::vector<std::vector<std::string>> forms_of_root;
  std::vector<std::string> roots;

  std::shared_ptr<const mtsquad::LemmaLexicon> lexicon() const {
    std::istringstream in(join(lexicon_rows));
    return std::make_shared<mtsquad::LemmaLexicon>(mtsquad::LemmaLexicon::load(in));
  }
  std::shared_ptr<const mtsquad::DerivationForest> forest() const {
    std::vector<std::pair<std::string, std::string>> rows(parent.begin(), parent.end());
    return std::make_shared<mtsquad::DerivationForest>(mtsquad::DerivationForest::from_pairs(rows));
  }
  mtsquad::Normalizer normalizer() const {
    return mtsquad::Normalizer(mtsquad::NormMode::root, lexicon(), forest());
  }

 private:
  static std::string join(const std::vector<std::string>& rows) {
    std::string s;
    for (const auto& r : rows) s += r + "\n";
    return s;
  }
};

inline Morphology czech_like_morphology(std::size_t nroots = 10) {
  static const std::vector<std::string> stems = {"učit", "psát", "vod", "dům",  "les",
                                                 "hor",  "řek",  "neb", "pol",  "knih"};
  static const std::vector<std::string> derivations = {"", "el", "elka"};
  static const std::vector<std::string> endings = {"", "a", "y", "ou", "ě", "ům"};
  Morphology m;
  for (std::size_t r = 0; r < nroots && r < stems.size(); ++r) {
    const auto& root = stems[r];
    m.roots.push_back(root);
    m.forms_of_root.emplace_back();
    std::string prev;
    for (const auto& der : derivations) {
      std::string lemma = root + der;
      m.parent[lemma] = prev;
      prev = lemma;
      for (const auto& end : endings) {
        std::string form = lemma + end;
        if (m.form_to_root.count(form)) continue;
        m.form_to_root[form] = root;
        m.lexicon_rows.push_back(form + "\t" + lemma);
        m.forms_of_root.back().push_back(form);
      }
    }
  }
  return m;
}

struct LocateInstance {
  std::string context;
  std::string answer;
  std::vector<std::string> answer_roots;
  std::vector<oracle::PlacedWord> words;
  std::size_t context_length = 0;
  double rel = 0.0;
};

inline std::string maybe_capitalize(Rng& rng, const std::string& w) {
  if (uniform(rng, 0, 4) != 0) return w;
  auto cps = mtsquad::unicode::decode(w);
  cps[0] = static_cast<char32_t>(u_toupper(static_cast<UChar32>(cps[0])));
  return mtsquad::unicode::encode(cps);
}

/// Context of up to 20 words over `m`'s roots; the answer (up to 4 words) is
/// a shuffled, re-inflected window of the context or random words.
inline LocateInstance locate_instance(Rng& rng, const Morphology& m, std::size_t vocab) {
  static const std::vector<std::string> seps = {" ", " ", " ", ", ", " - ", "; ", " (", ") ", ". ", " „", "“ "};
  LocateInstance inst;
  const std::size_t nwords = uniform(rng, 0, 20);
  std::size_t cp = 0;
  if (uniform(rng, 0, 2) == 0) {
    inst.context += "»";
    ++cp;
  }
  for (std::size_t i = 0; i < nwords; ++i) {
    if (i > 0) {
      const auto& s = pick(rng, seps);
      inst.context += s;
      cp += mtsquad::unicode::length(s);
    }
    std::size_t r = uniform(rng, 0, vocab - 1);
    auto w = maybe_capitalize(rng, pick(rng, m.forms_of_root[r]));
    std::size_t len = mtsquad::unicode::length(w);
    inst.words.push_back({m.roots[r], cp, cp + len});
    inst.context += w;
    cp += len;
  }
  if (uniform(rng, 0, 1) == 0) {
    inst.context += ".";
    ++cp;
  }
  inst.context_length = cp;

  const std::size_t k = uniform(rng, 1, 4);
  std::vector<std::size_t> answer_root_ids;
  if (nwords >= k && uniform(rng, 0, 3) != 0) {
    std::size_t first = uniform(rng, 0, nwords - k);
    for (std::size_t j = first; j < first + k; ++j)
      answer_root_ids.push_back(static_cast<std::size_t>(
          std::find(m.roots.begin(), m.roots.end(), inst.words[j].root) - m.roots.begin()));
    std::shuffle(answer_root_ids.begin(), answer_root_ids.end(), rng);
    inst.rel = uniform(rng, 0, 1) == 0 ? double(inst.words[first].start) / double(cp)
                                       : std::uniform_real_distribution<double>(0, 1)(rng);
  } else {
    for (std::size_t j = 0; j < k; ++j) answer_root_ids.push_back(uniform(rng, 0, vocab - 1));
    inst.rel = std::uniform_real_distribution<double>(0, 1)(rng);
  }
  for (std::size_t j = 0; j < answer_root_ids.size(); ++j) {
    if (j > 0) inst.answer += uniform(rng, 0, 3) == 0 ? ", " : " ";
    inst.answer += maybe_capitalize(rng, pick(rng, m.forms_of_root[answer_root_ids[j]]));
    inst.answer_roots.push_back(m.roots[answer_root_ids[j]]);
  }
  return inst;
}

// English-like corpora --------------------------------------------------

inline const std::vector<std::string>& english_words() {
  static const std::vector<std::string> w = {
      "the", "a", "an", "The", "A", "An", "of", "in", "to", "and", "was", "is", "for", "by",
      "Normandy", "Normans", "France", "river", "century", "king", "army", "U.S.", "Dr.",
      "don't", "it's", "1,000", "1990", "3.5", "co-operate", "well-known", "e-mail",
      "café", "Zürich", "naïve", "São", "Paulo", "Straße", "İstanbul", "Ωmega", "東京",
      "“quoted”", "(1066)", "[citation]", "rock'n'roll", "50%", "$20", "#1", "x_y",
      "north", "south", "Paris", "London", "theatre", "another", "anthem", "Anna",
      "–", "—", "…", "a.m.", "St.", "Mr.", "O'Neil", "won", "lost", "battle", "treaty"};
  return w;
}

struct CorpusOptions {
  std::size_t articles = 20;
  std::size_t paragraphs_per_article = 5;
  std::size_t questions_per_paragraph = 5;
  std::size_t context_words = 80;
  bool v2 = false;
  double unanswerable_share = 0.33;
  /// Share of answers that start or end inside punctuation rather than on a
  /// word boundary (e.g. "(1066" or "U.S").
  double ragged_share = 0.02;
  /// Answers begin and end on a plain word ("Paris", not "(1066)"), apart
  /// from the deliberately ragged ones above.
  bool word_aligned = false;
};

inline bool plain_word(const std::string& w) {
  auto t = mtsquad::tokenize(w);
  return t.size() == 1 && t[0].is_word && t[0].surface == w;
}

/// A SQuAD-shaped dataset whose answers are exact context substrings.
inline mtsquad::Dataset english_corpus(Rng& rng, const CorpusOptions& o) {
  using namespace mtsquad;
  Dataset d;
  d.version = o.v2 ? SquadVersion::v2_0 : SquadVersion::v1_1;
  d.version_tag = o.v2 ? "v2.0" : "1.1";
  std::size_t qid = 0;
  const auto& vocab = english_words();
  for (std::size_t a = 0; a < o.articles; ++a) {
    Article art;
    art.title = "Article_" + std::to_string(a);
    for (std::size_t p = 0; p < o.paragraphs_per_article; ++p) {
      Paragraph par;
      std::vector<std::size_t> starts, ends;  // code points per word
      std::vector<std::string> words;
      std::size_t cp = 0;
      std::size_t n = uniform(rng, o.context_words / 2, o.context_words);
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
          std::string sep = uniform(rng, 0, 9) == 0 ? ", " : " ";
          par.context += sep;
          cp += sep.size();
        }
        const auto& w = pick(rng, vocab);
        words.push_back(w);
        starts.push_back(cp);
        par.context += w;
        cp += unicode::length(w);
        ends.push_back(cp);
      }
      for (std::size_t q = 0; q < o.questions_per_paragraph; ++q) {
        Question qa;
        qa.id = "q" + std::to_string(qid++);
        qa.question = "What about " + pick(rng, vocab) + " " + pick(rng, vocab) + "?";
        if (o.v2 && std::uniform_real_distribution<double>(0, 1)(rng) < o.unanswerable_share) {
          qa.unanswerable = true;
        } else {
          std::size_t golds = uniform(rng, 1, 3);
          for (std::size_t g = 0; g < golds; ++g) {
            std::size_t first = uniform(rng, 0, n - 1);
            std::size_t last = std::min(n - 1, first + uniform(rng, 0, 4));
            for (int tries = 0; o.word_aligned && tries < 100 &&
                                !(plain_word(words[first]) && plain_word(words[last]));
                 ++tries) {
              first = uniform(rng, 0, n - 1);
              last = std::min(n - 1, first + uniform(rng, 0, 4));
            }
            std::size_t s = starts[first], e = ends[last];
            if (std::uniform_real_distribution<double>(0, 1)(rng) < o.ragged_share && e - s > 2) {
              if (uniform(rng, 0, 1) == 0)
                ++s;
              else
                --e;
            }
            Answer ans;
            ans.start = s;
            ans.text = unicode::substr(par.context, s, e - s);
            qa.answers.push_back(std::move(ans));
          }
        }
        par.questions.push_back(std::move(qa));
      }
      art.paragraphs.push_back(std::move(par));
    }
    d.articles.push_back(std::move(art));
  }
  return d;
}

}  // namespace synth
