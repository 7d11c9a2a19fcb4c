#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtsquad {

/// Malformed input: bad JSON, missing or mistyped fields, bad TSV rows.
/// `path()` points at the offending location (JSON path or file:line).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Well-formed input that breaks a dataset invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> ids)
      : std::runtime_error(what), ids_(std::move(ids)) {}
  /// Question ids (or locations, when no id applies) that failed.
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

/// Inconsistent settings, e.g. root normalization without a forest.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public std::runtime_error {
 public:
  CycleError(std::string lemma, const std::string& what)
      : std::runtime_error(what), lemma_(std::move(lemma)) {}
  const std::string& lemma() const noexcept { return lemma_; }

 private:
  std::string lemma_;
};

/// Translation failed after retries, or a strict cache had no entry.
class TranslationError : public std::runtime_error {
 public:
  TranslationError(const std::string& what, int status = 0, std::size_t first = 0,
                   std::size_t last = 0)
      : std::runtime_error(what), status_(status), first_(first), last_(last) {}
  /// HTTP status of the last attempt; 0 for transport errors or cache misses.
  int status() const noexcept { return status_; }
  /// Half-open index range [first, last) of the failing chunk in the batch.
  std::size_t first() const noexcept { return first_; }
  std::size_t last() const noexcept { return last_; }

 private:
  int status_;
  std::size_t first_, last_;
};

/// The remote service answered, but not with what was asked for.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtsquad
