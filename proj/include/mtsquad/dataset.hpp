#pragma once

// SQuAD 1.1 / 2.0 interchange files: parsing, validation, serialization and
// split statistics.

#include "mtsquad/errors.hpp"
#include "mtsquad/unicode.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mtsquad {

using Json = nlohmann::ordered_json;

enum class SquadVersion { v1_1, v2_0 };

// Every node carries `extra`: a JSON object with the fields this library does
// not interpret, re-emitted after the known ones.

struct Answer {
  std::string text;
  std::size_t start = 0;  // code points into the enclosing context
  Json extra = Json::object();
  bool operator==(const Answer&) const = default;
};

struct Question {
  std::string id;
  std::string question;
  std::vector<Answer> answers;
  bool unanswerable = false;
  Json extra = Json::object();
  bool operator==(const Question&) const = default;
};

struct Paragraph {
  std::string context;
  std::vector<Question> questions;
  Json extra = Json::object();
  bool operator==(const Paragraph&) const = default;
};

struct Article {
  std::string title;
  std::vector<Paragraph> paragraphs;
  Json extra = Json::object();
  bool operator==(const Article&) const = default;
};

struct Dataset {
  SquadVersion version = SquadVersion::v1_1;
  std::string version_tag;  // as written in the file ("1.1", "v2.0", ...)
  std::vector<Article> articles;
  Json extra = Json::object();
  bool operator==(const Dataset&) const = default;
};

struct SplitStats {
  std::size_t articles = 0;
  std::size_t paragraphs = 0;
  std::size_t questions = 0;
  std::size_t answerable = 0;
  std::size_t unanswerable = 0;
  bool operator==(const SplitStats&) const = default;
};

struct Issue {
  std::string where;  // JSON path of the offending node
  std::string id;     // question id, empty for non-question nodes
  std::string message;
};

inline const char* to_string(SquadVersion v) { return v == SquadVersion::v1_1 ? "1.1" : "2.0"; }

namespace detail {

inline const Json& require(const Json& node, const char* key, const std::string& path) {
  if (!node.is_object()) throw ParseError(path, "expected an object");
  auto it = node.find(key);
  if (it == node.end()) throw ParseError(path + "." + key, "missing required field");
  return *it;
}

inline std::string require_string(const Json& node, const char* key, const std::string& path) {
  const auto& v = require(node, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline const Json& require_array(const Json& node, const char* key, const std::string& path) {
  const auto& v = require(node, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key, "expected an array");
  return v;
}

inline Json extras(const Json& node, std::initializer_list<std::string_view> known) {
  Json out = Json::object();
  for (auto it = node.begin(); it != node.end(); ++it) {
    bool is_known = false;
    for (auto k : known) is_known = is_known || it.key() == k;
    if (!is_known) out[it.key()] = it.value();
  }
  return out;
}

inline void append_extras(Json& node, const Json& extra) {
  if (!extra.is_object()) return;
  for (auto it = extra.begin(); it != extra.end(); ++it) node[it.key()] = it.value();
}

/// Resolves a file's `answer_start` to code points. Files in the wild count
/// code points (Python), UTF-16 units (JavaScript) or bytes; the first
/// convention under which the answer text sits at the offset wins.
inline std::optional<std::size_t> resolve_offset(const std::string& context,
                                                 const std::vector<std::size_t>& cps,
                                                 const std::string& text, std::size_t start) {
  const std::size_t ncp = cps.size() - 1;
  const std::size_t text_cp = unicode::length(text);
  if (start <= ncp && start + text_cp <= ncp &&
      std::string_view(context).substr(cps[start], cps[start + text_cp] - cps[start]) == text)
    return start;

  // UTF-16 units
  std::size_t units = 0;
  for (std::size_t k = 0; k < ncp; ++k) {
    if (units == start) {
      if (k + text_cp <= ncp &&
          std::string_view(context).substr(cps[k], cps[k + text_cp] - cps[k]) == text)
        return k;
      break;
    }
    if (units > start) break;
    std::size_t b = cps[k];
    units += unicode::next(context, b) > 0xFFFF ? 2 : 1;
  }

  // bytes, only when the offset lands on a code point boundary
  if (start + text.size() <= context.size() && context.compare(start, text.size(), text) == 0) {
    auto it = std::lower_bound(cps.begin(), cps.end(), start);
    if (it != cps.end() && *it == start) return static_cast<std::size_t>(it - cps.begin());
  }
  return std::nullopt;
}

}  // namespace detail

struct ValidateOptions {
  /// Off for prediction inputs, whose answerable questions carry no answers.
  bool require_answers = true;
};

/// Checks every dataset invariant and returns all violations found.
inline std::vector<Issue> validate(const Dataset& d, ValidateOptions opts = {}) {
  std::vector<Issue> issues;
  std::unordered_set<std::string> seen;
  for (std::size_t a = 0; a < d.articles.size(); ++a) {
    const auto& art = d.articles[a];
    std::string apath = "data[" + std::to_string(a) + "]";
    if (art.paragraphs.empty()) issues.push_back({apath, "", "article has no paragraphs"});
    for (std::size_t p = 0; p < art.paragraphs.size(); ++p) {
      const auto& par = art.paragraphs[p];
      std::string ppath = apath + ".paragraphs[" + std::to_string(p) + "]";
      if (par.context.empty()) issues.push_back({ppath, "", "empty context"});
      const auto cps = unicode::boundaries(par.context);
      const std::size_t ncp = cps.size() - 1;
      for (std::size_t q = 0; q < par.questions.size(); ++q) {
        const auto& qa = par.questions[q];
        std::string qpath = ppath + ".qas[" + std::to_string(q) + "]";
        if (!seen.insert(qa.id).second) issues.push_back({qpath, qa.id, "duplicate question id"});
        if (qa.unanswerable && d.version == SquadVersion::v1_1)
          issues.push_back({qpath, qa.id, "unanswerable question in a 1.1 dataset"});
        if (opts.require_answers && !qa.unanswerable && qa.answers.empty())
          issues.push_back({qpath, qa.id, "answerable question without answers"});
        for (std::size_t k = 0; k < qa.answers.size(); ++k) {
          const auto& ans = qa.answers[k];
          std::size_t len = unicode::length(ans.text);
          bool ok = ans.start + len <= ncp &&
                    std::string_view(par.context)
                            .substr(cps[ans.start], cps[ans.start + len] - cps[ans.start]) ==
                        ans.text;
          if (!ok)
            issues.push_back({qpath + ".answers[" + std::to_string(k) + "]", qa.id,
                              "answer text does not match context at offset " +
                                  std::to_string(ans.start)});
        }
      }
    }
  }
  return issues;
}

inline void require_valid(const Dataset& d, ValidateOptions opts = {}) {
  auto issues = validate(d, opts);
  if (issues.empty()) return;
  std::vector<std::string> ids;
  std::ostringstream msg;
  msg << issues.size() << " dataset invariant violation(s):";
  for (const auto& i : issues) {
    ids.push_back(i.id.empty() ? i.where : i.id);
    msg << "\n  " << i.where << (i.id.empty() ? "" : " [" + i.id + "]") << ": " << i.message;
  }
  throw ValidationError(msg.str(), std::move(ids));
}

struct ParseOptions {
  bool validate = true;
  bool require_answers = true;
};

/// Parses SQuAD JSON. Offsets are normalized to code points; questions whose
/// answer cannot be found at its offset under any counting convention are
/// reported together in a ValidationError.
inline Dataset parse_dataset(std::string_view serialized, ParseOptions opts = {}) {
  Json root;
  try {
    root = Json::parse(serialized.begin(), serialized.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("$", "expected an object");

  Dataset d;
  d.version_tag = detail::require_string(root, "version", "$");
  d.version = d.version_tag.find('2') != std::string::npos ? SquadVersion::v2_0 : SquadVersion::v1_1;
  d.extra = detail::extras(root, {"version", "data"});
  const auto& data = detail::require_array(root, "data", "$");

  for (std::size_t a = 0; a < data.size(); ++a) {
    std::string apath = "data[" + std::to_string(a) + "]";
    const auto& ja = data[a];
    Article art;
    art.title = detail::require_string(ja, "title", apath);
    art.extra = detail::extras(ja, {"title", "paragraphs"});
    const auto& jps = detail::require_array(ja, "paragraphs", apath);
    for (std::size_t p = 0; p < jps.size(); ++p) {
      std::string ppath = apath + ".paragraphs[" + std::to_string(p) + "]";
      const auto& jp = jps[p];
      Paragraph par;
      par.context = detail::require_string(jp, "context", ppath);
      par.extra = detail::extras(jp, {"context", "qas"});
      const auto cps = unicode::boundaries(par.context);
      const auto& jqs = detail::require_array(jp, "qas", ppath);
      for (std::size_t q = 0; q < jqs.size(); ++q) {
        std::string qpath = ppath + ".qas[" + std::to_string(q) + "]";
        const auto& jq = jqs[q];
        Question qa;
        qa.id = detail::require_string(jq, "id", qpath);
        qa.question = detail::require_string(jq, "question", qpath);
        qa.extra = detail::extras(jq, {"id", "question", "answers", "is_impossible"});
        if (auto it = jq.find("is_impossible"); it != jq.end()) {
          if (!it->is_boolean()) throw ParseError(qpath + ".is_impossible", "expected a boolean");
          qa.unanswerable = it->get<bool>();
          d.version = SquadVersion::v2_0;
        }
        const auto& jans = detail::require_array(jq, "answers", qpath);
        for (std::size_t k = 0; k < jans.size(); ++k) {
          std::string kpath = qpath + ".answers[" + std::to_string(k) + "]";
          Answer ans;
          ans.text = detail::require_string(jans[k], "text", kpath);
          const auto& js = detail::require(jans[k], "answer_start", kpath);
          if (!js.is_number_integer() || js.get<long long>() < 0)
            throw ParseError(kpath + ".answer_start", "expected a non-negative integer");
          ans.extra = detail::extras(jans[k], {"text", "answer_start"});
          auto raw = static_cast<std::size_t>(js.get<long long>());
          if (auto resolved = detail::resolve_offset(par.context, cps, ans.text, raw)) {
            ans.start = *resolved;
          } else {
            ans.start = raw;  // left for validation to report
          }
          qa.answers.push_back(std::move(ans));
        }
        par.questions.push_back(std::move(qa));
      }
      art.paragraphs.push_back(std::move(par));
    }
    d.articles.push_back(std::move(art));
  }
  if (opts.validate) require_valid(d, {opts.require_answers});
  return d;
}

inline Json to_json(const Dataset& d) {
  const bool v2 = d.version == SquadVersion::v2_0;
  Json root = Json::object();
  root["version"] = d.version_tag.empty() ? (v2 ? "v2.0" : "1.1") : d.version_tag;
  Json data = Json::array();
  for (const auto& art : d.articles) {
    Json ja = Json::object();
    ja["title"] = art.title;
    Json jps = Json::array();
    for (const auto& par : art.paragraphs) {
      Json jp = Json::object();
      jp["context"] = par.context;
      Json jqs = Json::array();
      for (const auto& qa : par.questions) {
        Json jq = Json::object();
        jq["id"] = qa.id;
        jq["question"] = qa.question;
        Json jans = Json::array();
        for (const auto& ans : qa.answers) {
          Json jn = Json::object();
          jn["text"] = ans.text;
          jn["answer_start"] = ans.start;
          detail::append_extras(jn, ans.extra);
          jans.push_back(std::move(jn));
        }
        jq["answers"] = std::move(jans);
        if (v2) jq["is_impossible"] = qa.unanswerable;
        detail::append_extras(jq, qa.extra);
        jqs.push_back(std::move(jq));
      }
      jp["qas"] = std::move(jqs);
      detail::append_extras(jp, par.extra);
      jps.push_back(std::move(jp));
    }
    ja["paragraphs"] = std::move(jps);
    detail::append_extras(ja, art.extra);
    data.push_back(std::move(ja));
  }
  root["data"] = std::move(data);
  detail::append_extras(root, d.extra);
  return root;
}

/// Deterministic compact JSON. Refuses datasets that break an invariant.
inline std::string serialize_dataset(const Dataset& d, ValidateOptions opts = {}) {
  require_valid(d, opts);
  return to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

inline SplitStats dataset_stats(const Dataset& d) {
  SplitStats s;
  s.articles = d.articles.size();
  for (const auto& art : d.articles) {
    s.paragraphs += art.paragraphs.size();
    for (const auto& par : art.paragraphs)
      for (const auto& qa : par.questions) {
        ++s.questions;
        ++(qa.unanswerable ? s.unanswerable : s.answerable);
      }
  }
  return s;
}

inline std::string read_file(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_file(const std::string& path, std::string_view content) {
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path, ParseOptions opts = {}) {
  return parse_dataset(read_file(path), opts);
}

inline void save_dataset(const std::string& path, const Dataset& d, ValidateOptions opts = {}) {
  write_file(path, serialize_dataset(d, opts));
}

}  // namespace mtsquad
