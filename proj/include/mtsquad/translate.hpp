#pragma once

// Machine translation behind a small provider interface, with a persistent
// TSV cache so that reruns never touch the network.

#include "mtsquad/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mtsquad {

class TranslationProvider {
 public:
  virtual ~TranslationProvider() = default;

  /// Returns one translation per source, in input order.
  virtual std::vector<std::string> translate_batch(const std::vector<std::string>& sources,
                                                   const std::string& src_lang,
                                                   const std::string& tgt_lang) = 0;
};

/// Returns its input; stands in for a perfect translator in self-alignment runs.
class IdentityProvider final : public TranslationProvider {
 public:
  std::vector<std::string> translate_batch(const std::vector<std::string>& sources,
                                           const std::string&, const std::string&) override {
    return sources;
  }
};

// Cache file escaping: backslash, tab, CR and LF become \\, \t, \r, \n.

inline std::string tsv_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tsv_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw ParseError("", "dangling backslash in cache field");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw ParseError("", std::string("unknown escape \\") + s[i]);
    }
  }
  return out;
}

enum class Provenance { cache, remote };

/// Append-only (src_lang, tgt_lang, source) -> target table. When attached
/// to a file, every new remote pair is appended immediately as
/// `src_lang<TAB>tgt_lang<TAB>source<TAB>target`.
class TranslationTable {
 public:
  struct Entry {
    std::string target;
    Provenance provenance;
  };
  using Key = std::tuple<std::string, std::string, std::string>;

  TranslationTable() = default;
  TranslationTable(const TranslationTable&) = delete;
  TranslationTable& operator=(const TranslationTable&) = delete;

  /// Loads a cache file. Four-column rows carry their language pair;
  /// two-column rows (`source<TAB>target`) take `default_src`/`default_tgt`.
  void load(std::istream& in, const std::string& default_src = "",
            const std::string& default_tgt = "", const std::string& source_name = "cache") {
    std::lock_guard lock(mu_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string_view> cols;
      std::string_view rest(line);
      for (auto tab = rest.find('\t'); tab != std::string_view::npos; tab = rest.find('\t')) {
        cols.push_back(rest.substr(0, tab));
        rest.remove_prefix(tab + 1);
      }
      cols.push_back(rest);
      std::string where = source_name + ":" + std::to_string(lineno);
      try {
        if (cols.size() == 4)
          insert_locked(std::string(cols[0]), std::string(cols[1]), tsv_unescape(cols[2]),
                        tsv_unescape(cols[3]), Provenance::cache);
        else if (cols.size() == 2)
          insert_locked(default_src, default_tgt, tsv_unescape(cols[0]), tsv_unescape(cols[1]),
                        Provenance::cache);
        else
          throw ParseError(where, "expected 2 or 4 tab-separated columns");
      } catch (const ParseError& e) {
        if (e.path().empty()) throw ParseError(where, e.what());
        throw;
      }
    }
  }

  void load_file(const std::string& path, const std::string& default_src = "",
                 const std::string& default_tgt = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;  // a missing cache is an empty cache
    load(in, default_src, default_tgt, path);
  }

  /// Subsequent remote inserts are appended to `path`.
  void attach(const std::string& path) {
    std::lock_guard lock(mu_);
    sink_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
    if (!*sink_) throw std::runtime_error("cannot open cache for append: " + path);
  }

  std::optional<std::string> lookup(const std::string& src_lang, const std::string& tgt_lang,
                                    const std::string& source) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({src_lang, tgt_lang, source});
    if (it == entries_.end()) return std::nullopt;
    return it->second.target;
  }

  /// Inserts a pair; existing keys are left untouched (append-only).
  void insert(const std::string& src_lang, const std::string& tgt_lang, const std::string& source,
              const std::string& target, Provenance p) {
    std::lock_guard lock(mu_);
    if (!insert_locked(src_lang, tgt_lang, source, target, p)) return;
    if (sink_ && p == Provenance::remote) {
      *sink_ << src_lang << '\t' << tgt_lang << '\t' << tsv_escape(source) << '\t'
             << tsv_escape(target) << '\n';
      sink_->flush();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  std::size_t count(Provenance p) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [p](const auto& kv) { return kv.second.provenance == p; }));
  }

  /// Writes the whole table, sorted by key.
  void save(std::ostream& out) const {
    std::lock_guard lock(mu_);
    for (const auto& [key, e] : entries_)
      out << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << tsv_escape(std::get<2>(key))
          << '\t' << tsv_escape(e.target) << '\n';
  }

  std::map<Key, std::string> pairs() const {
    std::lock_guard lock(mu_);
    std::map<Key, std::string> out;
    for (const auto& [k, e] : entries_) out.emplace(k, e.target);
    return out;
  }

 private:
  bool insert_locked(std::string src, std::string tgt, std::string source, std::string target,
                     Provenance p) {
    return entries_.try_emplace({std::move(src), std::move(tgt), std::move(source)},
                                Entry{std::move(target), p})
        .second;
  }

  mutable std::mutex mu_;
  std::map<Key, Entry> entries_;
  std::unique_ptr<std::ofstream> sink_;
};

/// Answers from a TranslationTable. Misses go to `remote` when one is set;
/// otherwise (strict offline mode) a miss is a TranslationError.
class CachedProvider final : public TranslationProvider {
 public:
  CachedProvider(std::shared_ptr<TranslationTable> table,
                 std::shared_ptr<TranslationProvider> remote = nullptr)
      : table_(std::move(table)), remote_(std::move(remote)) {}

  std::vector<std::string> translate_batch(const std::vector<std::string>& sources,
                                           const std::string& src_lang,
                                           const std::string& tgt_lang) override {
    std::vector<std::string> out(sources.size());
    std::vector<std::size_t> missing_at;
    std::vector<std::string> misses;
    std::unordered_map<std::string_view, std::size_t> miss_index;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (sources[i].empty()) continue;
      if (auto hit = table_->lookup(src_lang, tgt_lang, sources[i])) {
        out[i] = std::move(*hit);
        continue;
      }
      missing_at.push_back(i);
      if (miss_index.try_emplace(sources[i], misses.size()).second) misses.push_back(sources[i]);
    }
    if (misses.empty()) return out;
    if (!remote_)
      throw TranslationError("no cached " + src_lang + "->" + tgt_lang + " translation for \"" +
                             misses.front() + "\"");
    auto fresh = remote_->translate_batch(misses, src_lang, tgt_lang);
    if (fresh.size() != misses.size())
      throw ProtocolError("provider returned " + std::to_string(fresh.size()) +
                          " translations for " + std::to_string(misses.size()) + " sources");
    for (std::size_t j = 0; j < misses.size(); ++j)
      table_->insert(src_lang, tgt_lang, misses[j], fresh[j], Provenance::remote);
    for (auto i : missing_at) out[i] = fresh[miss_index.at(sources[i])];
    return out;
  }

  TranslationTable& table() { return *table_; }

 private:
  std::shared_ptr<TranslationTable> table_;
  std::shared_ptr<TranslationProvider> remote_;
};

/// Cache-file-backed provider: loads `path` and, when `remote` is given,
/// appends every pair it fetches back to the same file. An empty path keeps
/// the table in memory only.
inline std::shared_ptr<CachedProvider> file_cache_provider(
    const std::string& path, std::shared_ptr<TranslationProvider> remote = nullptr,
    const std::string& default_src = "", const std::string& default_tgt = "") {
  auto table = std::make_shared<TranslationTable>();
  if (!path.empty()) {
    table->load_file(path, default_src, default_tgt);
    if (remote) table->attach(path);
  }
  return std::make_shared<CachedProvider>(std::move(table), std::move(remote));
}

struct HttpConfig {
  std::string url;                  // e.g. http://localhost:8080/translate
  std::string body = "json";        // "json": one request per chunk; "form": one per string
  std::string text_field = "q";
  std::string source_lang_field = "source";
  std::string target_lang_field = "target";
  std::string response_field = "translations";  // json responses; empty = top-level array
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int backoff_ms = 500;  // doubled after each failed attempt
  std::size_t max_batch = 32;
  std::size_t max_concurrent = 4;
};

inline void from_json(const nlohmann::json& j, HttpConfig& c) {
  c.url = j.value("url", c.url);
  c.body = j.value("body", c.body);
  c.text_field = j.value("text_field", c.text_field);
  c.source_lang_field = j.value("source_lang_field", c.source_lang_field);
  c.target_lang_field = j.value("target_lang_field", c.target_lang_field);
  c.response_field = j.value("response_field", c.response_field);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
  c.max_batch = j.value("max_batch", c.max_batch);
  c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
}

/// Talks to a translation web service. Chunks are sent concurrently (bounded
/// per provider, across all callers), retried with exponential backoff on
/// transport errors, 408, 429 and 5xx, and reassembled in input order.
class HttpProvider final : public TranslationProvider {
 public:
  explicit HttpProvider(HttpConfig cfg)
      : cfg_(std::move(cfg)), slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, cfg_.max_concurrent))) {
    if (cfg_.body != "json" && cfg_.body != "form")
      throw ConfigError("http body must be \"json\" or \"form\", got \"" + cfg_.body + "\"");
    if (cfg_.max_batch == 0) throw ConfigError("max_batch must be positive");
    auto scheme = cfg_.url.find("://");
    auto path = cfg_.url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + cfg_.url);
    host_ = cfg_.url.substr(0, path);
    path_ = path == std::string::npos ? "/" : cfg_.url.substr(path);
  }

  std::vector<std::string> translate_batch(const std::vector<std::string>& sources,
                                           const std::string& src_lang,
                                           const std::string& tgt_lang) override {
    const std::size_t chunk = cfg_.body == "form" ? 1 : cfg_.max_batch;
    const std::size_t nchunks = (sources.size() + chunk - 1) / chunk;
    std::vector<std::string> out(sources.size());
    if (nchunks == 0) return out;

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mu;
    std::size_t err_chunk = nchunks;
    std::exception_ptr err;

    auto worker = [&] {
      for (std::size_t c = next++; c < nchunks && !failed; c = next++) {
        std::size_t first = c * chunk, last = std::min(sources.size(), first + chunk);
        try {
          std::vector<std::string> part(sources.begin() + static_cast<std::ptrdiff_t>(first),
                                        sources.begin() + static_cast<std::ptrdiff_t>(last));
          auto got = send_with_retry(part, src_lang, tgt_lang, first, last);
          std::move(got.begin(), got.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (c < err_chunk) {
            err_chunk = c;
            err = std::current_exception();
          }
          failed = true;
        }
      }
    };
    const std::size_t nworkers = std::min(nchunks, std::max<std::size_t>(1, cfg_.max_concurrent));
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < nworkers; ++i) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (err) std::rethrow_exception(err);
    return out;
  }

  /// HTTP requests issued so far, retries included.
  std::size_t requests() const { return requests_; }

 private:
  std::vector<std::string> send_with_retry(const std::vector<std::string>& part,
                                           const std::string& src_lang,
                                           const std::string& tgt_lang, std::size_t first,
                                           std::size_t last) {
    int status = 0;
    std::string reason;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms) * (1 << (attempt - 1)));
      httplib::Result res;
      {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots_};
        ++requests_;
        res = post(part, src_lang, tgt_lang);
      }
      if (!res) {
        status = 0;
        reason = httplib::to_string(res.error());
        continue;
      }
      status = res->status;
      if (status == 200) return decode(res->body, part.size());
      reason = res->body.substr(0, 200);
      bool transient = status == 408 || status == 429 || status >= 500;
      if (!transient) break;
    }
    throw TranslationError("translation request for sources [" + std::to_string(first) + ", " +
                               std::to_string(last) + ") failed with status " +
                               std::to_string(status) + (reason.empty() ? "" : ": " + reason),
                           status, first, last);
  }

  httplib::Result post(const std::vector<std::string>& part, const std::string& src_lang,
                       const std::string& tgt_lang) {
    httplib::Client cli(host_);
    auto secs = static_cast<time_t>(cfg_.timeout_seconds);
    auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    if (cfg_.body == "form") {
      httplib::Params params{{cfg_.text_field, part.front()},
                             {cfg_.source_lang_field, src_lang},
                             {cfg_.target_lang_field, tgt_lang}};
      return cli.Post(path_, params);
    }
    nlohmann::json req = {{cfg_.text_field, part},
                          {cfg_.source_lang_field, src_lang},
                          {cfg_.target_lang_field, tgt_lang}};
    return cli.Post(path_, req.dump(), "application/json");
  }

  std::vector<std::string> decode(const std::string& body, std::size_t expected) const {
    std::vector<std::string> got;
    if (cfg_.body == "form") {
      std::string text = body;
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
      got.push_back(std::move(text));
    } else {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
      }
      const nlohmann::json* arr = &j;
      if (!cfg_.response_field.empty()) {
        if (!j.is_object() || !j.contains(cfg_.response_field))
          throw ProtocolError("response lacks field \"" + cfg_.response_field + "\"");
        arr = &j[cfg_.response_field];
      }
      if (!arr->is_array()) throw ProtocolError("response translations are not an array");
      for (const auto& t : *arr) {
        if (!t.is_string()) throw ProtocolError("non-string translation in response");
        got.push_back(t.get<std::string>());
      }
    }
    if (got.size() != expected)
      throw ProtocolError("response has " + std::to_string(got.size()) + " translations for " +
                          std::to_string(expected) + " sources");
    return got;
  }

  HttpConfig cfg_;
  std::counting_semaphore<> slots_;
  std::string host_;
  std::string path_;
  std::atomic<std::size_t> requests_{0};
};

/// Remote provider whose results land in the cache file at `cache_path`;
/// with a warm cache it issues no requests at all.
inline std::shared_ptr<CachedProvider> http_provider(const HttpConfig& cfg,
                                                     const std::string& cache_path) {
  return file_cache_provider(cache_path, std::make_shared<HttpProvider>(cfg));
}

}  // namespace mtsquad
