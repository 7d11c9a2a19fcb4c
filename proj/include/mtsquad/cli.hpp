#pragma once

// `mtsquad` command line: subcommands sharing one JSON run configuration,
// with flags overriding the file.

#include "mtsquad/dataset.hpp"
#include "mtsquad/eval.hpp"
#include "mtsquad/locate.hpp"
#include "mtsquad/morph.hpp"
#include "mtsquad/pipeline.hpp"
#include "mtsquad/translate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace mtsquad {

struct RunConfig {
  std::string input;
  std::string output;
  std::string source;  // stats: source split to compare against
  std::string cache;
  std::string lexicon;
  std::string forest;
  std::string predictions;
  std::string per_question;
  std::string context;  // locate
  std::string answer;   // locate
  double rel_pos = 0.0;
  std::string mode = "raw";
  std::string profile = "none";  // evaluate: "none" or "english"
  std::string provider;          // "identity", "http" or "cache"; empty = infer
  std::string split = "dataset";
  std::string src_lang = "en";
  std::string tgt_lang = "cs";
  std::size_t jobs = 0;  // 0 = hardware concurrency
  bool offline = false;
  HttpConfig http;

  std::size_t workers() const {
    return jobs > 0 ? jobs : std::max(1u, std::thread::hardware_concurrency());
  }
};

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + ": expected a JSON object");
  RunConfig c;
  try {
    c.input = j.value("input", c.input);
    c.output = j.value("output", c.output);
    c.source = j.value("source", c.source);
    c.cache = j.value("cache", c.cache);
    c.lexicon = j.value("lexicon", c.lexicon);
    c.forest = j.value("forest", c.forest);
    c.predictions = j.value("predictions", c.predictions);
    c.per_question = j.value("per_question", c.per_question);
    c.mode = j.value("mode", c.mode);
    c.profile = j.value("profile", c.profile);
    c.provider = j.value("provider", c.provider);
    c.split = j.value("split", c.split);
    c.src_lang = j.value("src_lang", c.src_lang);
    c.tgt_lang = j.value("tgt_lang", c.tgt_lang);
    c.jobs = j.value("jobs", c.jobs);
    c.offline = j.value("offline", c.offline);
    if (j.contains("http")) j.at("http").get_to(c.http);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return c;
}

namespace detail {

inline std::shared_ptr<const LemmaLexicon> load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open lexicon " + path);
  return std::make_shared<LemmaLexicon>(LemmaLexicon::load(in, path));
}

inline std::shared_ptr<const DerivationForest> load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open forest " + path);
  return std::make_shared<DerivationForest>(DerivationForest::load(in, path));
}

/// Lemma and root modes need their resources; a forest alone implies an
/// empty lexicon (every form is its own lemma).
inline Normalizer make_normalizer(const RunConfig& c) {
  auto mode = parse_norm_mode(c.mode);
  if (mode == NormMode::raw) return Normalizer::raw();
  if (c.lexicon.empty() && (mode == NormMode::lemma || c.forest.empty()))
    throw ConfigError(c.mode + " mode needs --lexicon" + (mode == NormMode::root ? " and --forest" : ""));
  auto lex = c.lexicon.empty() ? std::make_shared<const LemmaLexicon>() : load_lexicon(c.lexicon);
  std::shared_ptr<const DerivationForest> forest;
  if (mode == NormMode::root) {
    if (c.forest.empty()) throw ConfigError("root mode needs --forest");
    forest = load_forest(c.forest);
  }
  return Normalizer(mode, std::move(lex), std::move(forest));
}

inline std::shared_ptr<TranslationProvider> make_provider(const RunConfig& c,
                                                          const std::string& cache_path) {
  std::string kind = c.provider;
  if (kind.empty()) kind = (!c.http.url.empty() && !c.offline) ? "http" : "cache";
  if (kind == "identity") return std::make_shared<IdentityProvider>();
  if (kind == "http" && !c.offline) {
    if (c.http.url.empty()) throw ConfigError("http provider needs --endpoint");
    return file_cache_provider(cache_path, std::make_shared<HttpProvider>(c.http), c.src_lang,
                               c.tgt_lang);
  }
  if (kind != "cache" && kind != "http") throw ConfigError("unknown provider '" + kind + "'");
  if (cache_path.empty()) throw ConfigError("offline translation needs --cache");
  return file_cache_provider(cache_path, nullptr, c.src_lang, c.tgt_lang);
}

inline void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing ") + flag);
}

inline int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_path(c.input, "--input");
  auto d = parse_dataset(read_file(c.input), {.validate = false});
  auto issues = validate(d);
  if (!issues.empty()) {
    for (const auto& i : issues)
      err << i.where << (i.id.empty() ? "" : " [" + i.id + "]") << ": " << i.message << "\n";
    err << issues.size() << " problem(s) in " << c.input << "\n";
    return 1;
  }
  auto s = dataset_stats(d);
  out << "ok\t" << to_string(d.version) << "\t" << s.questions << " questions\n";
  return 0;
}

inline int cmd_stats(const RunConfig& c, std::ostream& out) {
  require_path(c.input, "--input");
  auto d = load_dataset(c.input);
  auto s = dataset_stats(d);
  if (!c.source.empty()) {
    auto src = dataset_stats(load_dataset(c.source));
    RetentionStats r;
    r.split = c.split;
    r.source_answerable = src.answerable;
    r.source_unanswerable = src.unanswerable;
    r.kept_answerable = s.answerable;
    r.kept_unanswerable = s.unanswerable;
    out << report_stats({r});
    return 0;
  }
  out << "version\t" << to_string(d.version) << "\n"
      << "articles\t" << s.articles << "\n"
      << "paragraphs\t" << s.paragraphs << "\n"
      << "questions\t" << s.questions << "\n"
      << "answerable\t" << s.answerable << "\n"
      << "unanswerable\t" << s.unanswerable << "\n";
  return 0;
}

inline int cmd_translate(const RunConfig& c, std::ostream& out) {
  require_path(c.input, "--input");
  require_path(c.cache, "--cache");
  auto d = load_dataset(c.input);
  auto provider = make_provider(c, c.cache);
  std::vector<std::string> sources;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& s) {
    if (!s.empty() && seen.insert(s).second) sources.push_back(s);
  };
  for (const auto& a : d.articles)
    for (const auto& p : a.paragraphs) {
      add(p.context);
      for (const auto& q : p.questions) {
        add(q.question);
        for (const auto& ans : q.answers) add(ans.text);
      }
    }
  provider->translate_batch(sources, c.src_lang, c.tgt_lang);
  out << sources.size() << " strings translated " << c.src_lang << "->" << c.tgt_lang << "\n";
  return 0;
}

inline int cmd_build(const RunConfig& c, std::ostream& out) {
  require_path(c.input, "--input");
  require_path(c.output, "--output");
  auto src = load_dataset(c.input);
  auto normalizer = make_normalizer(c);
  std::filesystem::create_directories(c.output);
  const std::string cache = c.cache.empty() ? c.output + "/cache.tsv" : c.cache;
  auto provider = make_provider(c, cache);
  BuildConfig bc{c.split, c.src_lang, c.tgt_lang, c.workers()};
  auto res = build_target_dataset(src, *provider, normalizer, bc);
  save_dataset(c.output + "/dataset.json", res.dataset);
  write_file(c.output + "/stats.txt", report_stats({res.stats}));
  write_file(c.output + "/drops.tsv", drops_tsv(res.stats));
  out << report_stats({res.stats});
  return 0;
}

inline int cmd_locate(const RunConfig& c, std::ostream& out) {
  require_path(c.context, "--context");
  if (c.rel_pos < 0.0 || c.rel_pos > 1.0) throw ConfigError("--rel-pos must lie in [0, 1]");
  auto normalizer = make_normalizer(c);
  auto context = read_file(c.context);
  auto r = locate_answer(LocateQuery{context, c.answer, c.rel_pos}, normalizer);
  if (!r.found()) {
    out << "NOT FOUND\n";
    return 1;
  }
  out << r.span->start << "\t" << r.span->end << "\t" << r.span->text << "\n";
  return 0;
}

inline int cmd_roundtrip_forward(const RunConfig& c, std::ostream& out) {
  require_path(c.input, "--input");
  require_path(c.output, "--output");
  auto dev = load_dataset(c.input);
  auto provider = make_provider(c, c.cache);
  auto fwd = round_trip_forward(dev, *provider, c.src_lang, c.tgt_lang, c.workers());
  save_dataset(c.output, fwd, {.require_answers = false});
  out << dataset_stats(fwd).questions << " questions written to " << c.output << "\n";
  return 0;
}

inline int cmd_roundtrip_back(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_path(c.predictions, "--predictions");
  require_path(c.output, "--output");
  auto preds = parse_predictions(read_file(c.predictions));
  if (!c.input.empty()) {
    auto dev = load_dataset(c.input, {.require_answers = false});
    auto stray = unknown_prediction_ids(dev, preds);
    if (!stray.empty()) {
      for (const auto& id : stray) err << "prediction for unknown question id " << id << "\n";
      return 1;
    }
  }
  auto provider = make_provider(c, c.cache);
  auto back = round_trip_back(preds, *provider, c.src_lang, c.tgt_lang);
  write_file(c.output, serialize_predictions(back));
  out << back.size() << " predictions written to " << c.output << "\n";
  return 0;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_path(c.input, "--input");
  require_path(c.predictions, "--predictions");
  EvalConfig ec;
  if (c.profile == "english")
    ec = EvalConfig::english();
  else if (c.profile != "none")
    throw ConfigError("unknown profile '" + c.profile + "'");
  auto n = make_normalizer(c);
  ec.mode = n.mode();
  if (ec.mode != NormMode::raw) {
    ec.lexicon = c.lexicon.empty() ? std::make_shared<const LemmaLexicon>() : load_lexicon(c.lexicon);
    if (ec.mode == NormMode::root) ec.forest = load_forest(c.forest);
  }
  auto d = load_dataset(c.input);
  auto preds = parse_predictions(read_file(c.predictions));
  auto report = evaluate(d, preds, ec, c.workers());
  for (const auto& id : report.unknown_ids) err << "warning: prediction for unknown id " << id << "\n";
  if (report.missing > 0) err << "warning: " << report.missing << " question(s) without prediction\n";
  if (!c.output.empty())
    write_file(c.output, format_report(report));
  else
    out << format_report(report);
  if (!c.per_question.empty()) write_file(c.per_question, per_question_tsv(report));
  return 0;
}

}  // namespace detail

/// Runs one subcommand. Exit codes: 0 success, 1 validation failure or
/// locate miss, 2 configuration, usage or I/O error.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Build and evaluate machine-translated SQuAD datasets", "mtsquad"};
  app.require_subcommand(1);

  RunConfig flags;
  std::string config_path, endpoint;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration; flags override it");
    sub->add_option("--input", flags.input, "Input file (dataset, or '-' for stdin)");
    sub->add_option("--output", flags.output, "Output file or directory");
    sub->add_option("--mode", flags.mode, "Normalization mode")
        ->check(CLI::IsMember({"raw", "lemma", "root"}));
    sub->add_option("--lexicon", flags.lexicon, "Lemma lexicon TSV (form<TAB>lemma)");
    sub->add_option("--forest", flags.forest, "Derivation forest TSV (lemma<TAB>parent)");
    sub->add_option("--cache", flags.cache, "Translation cache TSV");
    sub->add_option("--endpoint", endpoint, "Translation service URL");
    sub->add_option("--provider", flags.provider, "Translation provider")
        ->check(CLI::IsMember({"identity", "http", "cache"}));
    sub->add_option("--src-lang", flags.src_lang, "Source language code");
    sub->add_option("--tgt-lang", flags.tgt_lang, "Target language code");
    sub->add_option("--jobs", flags.jobs, "Worker threads (default: all cores)");
    sub->add_flag("--offline", flags.offline, "Never contact the translation service");
  };

  struct Sub {
    CLI::App* app;
    std::string name;
  };
  std::vector<Sub> subs;
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    add_common(s);
    subs.push_back({s, name});
    return s;
  };
  sub("validate", "Check schema and answer offsets");
  sub("stats", "Print split statistics, or retention against --source")
      ->add_option("--source", flags.source, "Source split the input was built from");
  sub("translate", "Translate every string of a dataset into the cache");
  sub("build", "Translate a dataset and locate its answers")
      ->add_option("--split", flags.split, "Split name used in the report");
  auto* loc = sub("locate", "Locate one answer in a context file");
  loc->add_option("--context", flags.context, "File holding the context text");
  loc->add_option("--answer", flags.answer, "Answer text");
  loc->add_option("--rel-pos", flags.rel_pos, "Relative position of the source answer");
  sub("roundtrip-forward", "Translate contexts and questions to the pivot language");
  sub("roundtrip-back", "Translate pivot-language predictions back")
      ->add_option("--predictions", flags.predictions, "Prediction JSON (id -> answer)");
  auto* ev = sub("evaluate", "Exact match and F1 of predictions");
  ev->add_option("--predictions", flags.predictions, "Prediction JSON (id -> answer)");
  ev->add_option("--profile", flags.profile, "Article profile")
      ->check(CLI::IsMember({"none", "english"}));
  ev->add_option("--per-question", flags.per_question, "Write id/em/f1 TSV here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string help;
    for (const auto& s : subs)
      if (s.app->parsed()) help = s.app->help();
    err << e.what() << "\n" << (help.empty() ? app.help() : help);
    return 2;
  }

  const Sub* chosen = nullptr;
  for (const auto& s : subs)
    if (s.app->parsed()) chosen = &s;

  try {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    auto overridden = [&](const char* flag) { return chosen->app->count(flag) > 0; };
    auto take = [&](const char* flag, auto& dst, const auto& src) {
      if (overridden(flag)) dst = src;
    };
    take("--input", c.input, flags.input);
    take("--output", c.output, flags.output);
    take("--mode", c.mode, flags.mode);
    take("--lexicon", c.lexicon, flags.lexicon);
    take("--forest", c.forest, flags.forest);
    take("--cache", c.cache, flags.cache);
    take("--provider", c.provider, flags.provider);
    take("--src-lang", c.src_lang, flags.src_lang);
    take("--tgt-lang", c.tgt_lang, flags.tgt_lang);
    take("--jobs", c.jobs, flags.jobs);
    take("--offline", c.offline, flags.offline);
    if (overridden("--endpoint")) c.http.url = endpoint;
    if (chosen->name == "stats") take("--source", c.source, flags.source);
    if (chosen->name == "build") take("--split", c.split, flags.split);
    if (chosen->name == "locate") {
      c.context = flags.context;
      c.answer = flags.answer;
      c.rel_pos = flags.rel_pos;
    }
    if (chosen->name == "roundtrip-back" || chosen->name == "evaluate")
      take("--predictions", c.predictions, flags.predictions);
    if (chosen->name == "evaluate") {
      take("--profile", c.profile, flags.profile);
      take("--per-question", c.per_question, flags.per_question);
    }

    const auto& name = chosen->name;
    if (name == "validate") return detail::cmd_validate(c, out, err);
    if (name == "stats") return detail::cmd_stats(c, out);
    if (name == "translate") return detail::cmd_translate(c, out);
    if (name == "build") return detail::cmd_build(c, out);
    if (name == "locate") return detail::cmd_locate(c, out);
    if (name == "roundtrip-forward") return detail::cmd_roundtrip_forward(c, out);
    if (name == "roundtrip-back") return detail::cmd_roundtrip_back(c, out, err);
    if (name == "evaluate") return detail::cmd_evaluate(c, out, err);
  } catch (const ValidationError& e) {
    err << "validation failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace mtsquad
