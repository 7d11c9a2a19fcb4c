// Acceptance gate: one PASS/FAIL line per criterion, thresholds pinned below.
//
// Default mode runs everything that needs no external data; criteria defined
// on the real SQuAD files are exercised on seeded synthetic corpora of the
// same size. `--real-data` runs them on the files named by
// MTSQUAD_SQUAD11_DEV / MTSQUAD_SQUAD20_DEV (and, for the fixed-point check,
// MTSQUAD_SQUAD11_TRAIN / MTSQUAD_SQUAD20_TRAIN); with none of them set it
// exits 77 so ctest reports the test as skipped.

#include "mtsquad/mtsquad.hpp"

#include "support/oracles.hpp"
#include "support/synth.hpp"
#include "support/tempdir.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

using namespace mtsquad;

namespace {

constexpr int kLocatorInstances = 10000;
constexpr std::size_t kLocatorVocab = 10;
constexpr double kLocatorSeconds = 10.0;

constexpr std::size_t kDevQuestions = 10570;
constexpr double kMinKeptShare = 0.99;
constexpr double kMinNormEqualShare = 1.0;
constexpr double kMinExactOffsetShare = 0.95;
constexpr double kSelfAlignSeconds = 120.0;

// Synthetic stand-in only: share of gold answers cut one character into a
// word or punctuation mark, so that they cannot be recovered exactly.
constexpr double kRaggedShare = 0.02;

constexpr double kMetricTolerance = 0.01;

constexpr int kUnanswerableDatasets = 200;
constexpr int kFixedPointDatasets = 50;
constexpr int kMorphFuzzCases = 1000;

int failures = 0;
int skips = 0;

void line(const char* status, const std::string& name, const std::string& detail) {
  std::printf("%-4s  %-28s %s\n", status, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

void verdict(bool ok, const std::string& name, const std::string& detail) {
  if (!ok) ++failures;
  line(ok ? "PASS" : "FAIL", name, detail);
}

void skip(const std::string& name, const std::string& why) {
  ++skips;
  line("SKIP", name, why);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Replaces the first word of about a third of all strings, so some answers
// stop matching their contexts. Stable across platforms and runs.
class LossyProvider final : public TranslationProvider {
 public:
  std::atomic<std::size_t> calls{0};
  std::vector<std::string> translate_batch(const std::vector<std::string>& sources,
                                           const std::string&, const std::string&) override {
    ++calls;
    std::vector<std::string> out;
    for (const auto& s : sources) {
      if (fnv1a(s) % 3 != 0) {
        out.push_back(s);
        continue;
      }
      auto sp = s.find(' ');
      out.push_back("zzz" + (sp == std::string::npos ? std::string() : s.substr(sp)));
    }
    return out;
  }
};

Dataset dev_sized_corpus(std::uint64_t seed) {
  synth::Rng rng(seed);
  synth::CorpusOptions o;
  o.articles = 302;
  o.paragraphs_per_article = 7;
  o.questions_per_paragraph = 5;  // 302 * 7 * 5 = 10,570
  o.word_aligned = true;
  o.ragged_share = kRaggedShare;
  return synth::english_corpus(rng, o);
}

// ---------------------------------------------------------------------------

void locator_oracle() {
  auto m = synth::czech_like_morphology(kLocatorVocab);
  auto n = m.normalizer();
  synth::Rng rng(20200601);
  std::vector<synth::LocateInstance> insts;
  for (int i = 0; i < kLocatorInstances; ++i)
    insts.push_back(synth::locate_instance(rng, m, synth::uniform(rng, 1, kLocatorVocab)));

  int agree = 0, positives = 0;
  double locate_time = 0.0;
  for (const auto& inst : insts) {
    auto expected = oracle::brute_force_locate(inst.words, inst.answer_roots, inst.context_length, inst.rel);
    auto t0 = std::chrono::steady_clock::now();
    auto got = locate_answer(LocateQuery{inst.context, inst.answer, inst.rel}, n);
    locate_time += seconds_since(t0);
    bool same = got.found() == expected.has_value() &&
                (!expected || (got.span->start == expected->start && got.span->end == expected->end));
    agree += same;
    positives += expected.has_value();
  }
  verdict(agree == kLocatorInstances && locate_time < kLocatorSeconds, "locator-oracle",
          fmt("%d/%d agree (%d with a match), %.2f s < %.0f s", agree, kLocatorInstances, positives,
              locate_time, kLocatorSeconds));
}

struct AlignmentFigures {
  std::size_t questions = 0, kept = 0;
  std::size_t answers = 0, located = 0, norm_equal = 0, same_order = 0, exact = 0;
  double seconds = 0.0;
};

AlignmentFigures self_alignment(const Dataset& dev) {
  AlignmentFigures f;
  IdentityProvider identity;
  const auto n = Normalizer::raw();
  auto t0 = std::chrono::steady_clock::now();
  auto built = build_target_dataset(dev, identity, n, {.split = "dev", .jobs = 1});
  f.seconds = seconds_since(t0);
  f.questions = built.stats.source_questions();
  f.kept = built.stats.kept_questions();

  // Per-answer audit along the same path the builder takes.
  for (const auto& a : dev.articles)
    for (const auto& p : a.paragraphs) {
      ContextIndex ctx(p.context, n);
      for (const auto& q : p.questions)
        for (const auto& ans : q.answers) {
          ++f.answers;
          auto r = locate_answer(ctx, ans.text, relative_position(ans.start, ctx.length()), n);
          if (!r.found()) continue;
          ++f.located;
          // Equal as root multisets: a permuted window at the same distance
          // can legitimately win the leftmost tie-break.
          auto got = normalize_text(r.span->text, n), want = normalize_text(ans.text, n);
          f.same_order += got == want;
          std::sort(got.begin(), got.end());
          std::sort(want.begin(), want.end());
          f.norm_equal += got == want;
          f.exact += r.span->start == ans.start && r.span->end == ans.start + unicode::length(ans.text);
        }
    }
  return f;
}

void report_self_alignment(const std::string& name, const AlignmentFigures& f) {
  double kept = double(f.kept) / double(std::max<std::size_t>(f.questions, 1));
  double norm = double(f.norm_equal) / double(std::max<std::size_t>(f.located, 1));
  double exact = double(f.exact) / double(std::max<std::size_t>(f.answers, 1));
  bool ok = kept >= kMinKeptShare && norm >= kMinNormEqualShare && exact >= kMinExactOffsetShare &&
            f.seconds < kSelfAlignSeconds;
  verdict(ok, name,
          fmt("kept %zu/%zu = %.2f%% (>= %.0f%%), normalization equal %zu/%zu (100%%; %zu in "
              "the same order), exact offsets %.2f%% (>= %.0f%%), %.2f s < %.0f s",
              f.kept, f.questions, 100 * kept, 100 * kMinKeptShare, f.norm_equal, f.located,
              f.same_order, 100 * exact, 100 * kMinExactOffsetShare, f.seconds, kSelfAlignSeconds));
}

struct Scores {
  double em = 0, f1 = 0;
};

std::optional<Scores> run_reference(const std::string& python, const std::string& script,
                                    const std::string& dataset, const std::string& preds) {
  std::string cmd = "\"" + python + "\" \"" + script + "\" \"" + dataset + "\" \"" + preds + "\" 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return std::nullopt;
  std::string out;
  char buf[4096];
  while (auto k = std::fread(buf, 1, sizeof buf, p)) out.append(buf, k);
  if (pclose(p) != 0) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(out);
    return Scores{j.at("exact_match").get<double>(), j.at("f1").get<double>()};
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::vector<std::pair<std::string, Predictions>> prediction_files(const Dataset& d) {
  Predictions perfect, empty, truncated;
  synth::Rng rng(1234);
  for (const auto& a : d.articles)
    for (const auto& p : a.paragraphs)
      for (const auto& q : p.questions) {
        std::string gold = q.answers.empty() ? "" : q.answers.front().text;
        perfect[q.id] = gold;
        empty[q.id] = "";
        auto len = unicode::length(gold);
        truncated[q.id] = unicode::substr(gold, 0, len == 0 ? 0 : synth::uniform(rng, 0, len));
      }
  return {{"perfect", perfect}, {"empty", empty}, {"truncated", truncated}};
}

void metric_oracle(const std::string& name, const std::string& dataset_path, const std::string& python,
                   const std::string& script) {
  if (python.empty()) {
    skip(name, "no Python interpreter for the reference script");
    return;
  }
  auto d = load_dataset(dataset_path);
  testing_support::TempDir dir;
  std::string detail;
  bool ok = true;
  for (const auto& [label, preds] : prediction_files(d)) {
    auto path = dir.write(label + ".json", serialize_predictions(preds));
    auto ref = run_reference(python, script, dataset_path, path);
    auto ours = evaluate(d, preds, EvalConfig::english());
    if (!ref) {
      ok = false;
      detail += label + ": reference script failed; ";
      continue;
    }
    double dem = std::fabs(ours.exact_match - ref->em), df1 = std::fabs(ours.f1 - ref->f1);
    ok = ok && dem <= kMetricTolerance && df1 <= kMetricTolerance;
    detail += fmt("%s EM %.4f/%.4f F1 %.4f/%.4f; ", label.c_str(), ours.exact_match, ref->em, ours.f1, ref->f1);
  }
  verdict(ok, name, detail + fmt("ours/reference within %.2f", kMetricTolerance));
}

struct Preservation {
  std::size_t unanswerable = 0, preserved = 0, dropped_answerable = 0;
};

void check_preservation(const Dataset& d, TranslationProvider& provider, Preservation& p) {
  auto built = build_target_dataset(d, provider, Normalizer::raw(), {.jobs = 4});
  std::set<std::string> out_unanswerable;
  for (const auto& a : built.dataset.articles)
    for (const auto& par : a.paragraphs)
      for (const auto& q : par.questions)
        if (q.unanswerable) out_unanswerable.insert(q.id);
  for (const auto& a : d.articles)
    for (const auto& par : a.paragraphs)
      for (const auto& q : par.questions)
        if (q.unanswerable) {
          ++p.unanswerable;
          p.preserved += out_unanswerable.count(q.id);
        }
  p.dropped_answerable += built.stats.drops.size();
}

void unanswerable_synthetic() {
  Preservation p;
  LossyProvider lossy;
  synth::Rng rng(77);
  for (int i = 0; i < kUnanswerableDatasets; ++i) {
    synth::CorpusOptions o;
    o.v2 = true;
    o.articles = synth::uniform(rng, 1, 3);
    o.paragraphs_per_article = synth::uniform(rng, 1, 4);
    o.unanswerable_share = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    o.context_words = synth::uniform(rng, 4, 60);
    check_preservation(synth::english_corpus(rng, o), lossy, p);
  }
  verdict(p.preserved == p.unanswerable && p.dropped_answerable > 0, "unanswerable-preservation",
          fmt("%d generated datasets: %zu/%zu unanswerable kept while %zu answerable were dropped",
              kUnanswerableDatasets, p.preserved, p.unanswerable, p.dropped_answerable));
}

void retention_table() {
  struct Cell {
    const char* split;
    std::size_t source, kept;
    const char* percent;
  };
  const Cell cells[] = {{"SQuAD 1.1 train", 87599, 64164, "73.2%"},
                        {"SQuAD 1.1 dev", 10570, 8739, "82.7%"},
                        {"SQuAD 2.0 train", 130319, 107088, "82.2%"},
                        {"SQuAD 2.0 dev", 11873, 10845, "91.3%"}};
  std::vector<RetentionStats> splits;
  for (const auto& c : cells) splits.push_back(published_stats(c.split, c.source, c.kept));
  auto table = report_stats(splits);
  bool ok = true;
  std::string detail;
  for (const auto& c : cells) {
    auto row = fmt("%-12s %18s %18s %10s\n", c.split, with_thousands(c.source).c_str(),
                   with_thousands(c.kept).c_str(), c.percent);
    bool found = table.find(row) != std::string::npos;
    ok = ok && found;
    detail += fmt("%s/%s -> %s%s; ", with_thousands(c.kept).c_str(), with_thousands(c.source).c_str(),
                  c.percent, found ? "" : " MISSING");
  }
  verdict(ok, "retention-table", detail + "empty split -> " + format_percent(0, 0));
}

bool fixed_point(const std::string& text, std::string* why) {
  auto d1 = parse_dataset(text);
  auto s1 = serialize_dataset(d1);
  auto d2 = parse_dataset(s1);
  auto s2 = serialize_dataset(d2);
  if (!(d1 == d2)) *why = "parsed values differ";
  if (s1 != s2) *why = "serializations differ";
  return d1 == d2 && s1 == s2;
}

void determinism() {
  std::string why;
  int fp_ok = 0;
  synth::Rng rng(31);
  for (int i = 0; i < kFixedPointDatasets; ++i) {
    synth::CorpusOptions o;
    o.articles = synth::uniform(rng, 1, 5);
    o.v2 = i % 2 == 1;
    fp_ok += fixed_point(serialize_dataset(synth::english_corpus(rng, o)), &why);
  }

  testing_support::TempDir dir;
  synth::CorpusOptions o;
  o.articles = 40;
  o.v2 = true;
  auto src = synth::english_corpus(rng, o);
  auto remote = std::make_shared<LossyProvider>();
  auto cache = dir.file("cache.tsv");
  auto first = build_target_dataset(src, *file_cache_provider(cache, remote), Normalizer::raw(), {.jobs = 4});
  auto calls = remote->calls.load();
  auto render = [](const BuildResult& r) {
    return serialize_dataset(r.dataset) + "\x1f" + report_stats({r.stats}) + "\x1f" + drops_tsv(r.stats);
  };
  auto warm1 = build_target_dataset(src, *file_cache_provider(cache, remote), Normalizer::raw(), {.jobs = 4});
  auto warm2 = build_target_dataset(src, *file_cache_provider(cache), Normalizer::raw(), {.jobs = 4});
  const auto warm_calls = remote->calls - calls;
  bool warm_ok = render(warm1) == render(first) && render(warm2) == render(first) && warm_calls == 0;

  bool workers_ok = true;
  auto baseline = render(build_target_dataset(src, *remote, Normalizer::raw(), {.jobs = 1}));
  Predictions preds;
  for (const auto& a : src.articles)
    for (const auto& p : a.paragraphs)
      for (const auto& q : p.questions) preds[q.id] = synth::pick(rng, synth::english_words());
  auto eval1 = evaluate(src, preds, EvalConfig::english(), 1);
  auto fwd1 = serialize_dataset(round_trip_forward(src, *remote, "cs", "en", 1), {.require_answers = false});
  for (std::size_t jobs : {2u, 8u, 32u}) {
    workers_ok = workers_ok && render(build_target_dataset(src, *remote, Normalizer::raw(), {.jobs = jobs})) == baseline;
    auto ev = evaluate(src, preds, EvalConfig::english(), jobs);
    workers_ok = workers_ok && format_report(ev) == format_report(eval1) && per_question_tsv(ev) == per_question_tsv(eval1);
    workers_ok = workers_ok && serialize_dataset(round_trip_forward(src, *remote, "cs", "en", jobs),
                                                 {.require_answers = false}) == fwd1;
  }

  verdict(fp_ok == kFixedPointDatasets && warm_ok && workers_ok, "determinism",
          fmt("fixed point %d/%d generated files%s; warm-cache reruns byte-identical: %s "
              "(remote calls after warm-up: %zu); jobs 1/2/8/32 identical: %s",
              fp_ok, kFixedPointDatasets, why.empty() ? "" : (" (" + why + ")").c_str(),
              warm_ok ? "yes" : "no", warm_calls, workers_ok ? "yes" : "no"));
}

std::map<std::string, std::string> random_acyclic(synth::Rng& rng, std::size_t n) {
  std::map<std::string, std::string> parent;
  for (std::size_t i = 0; i < n; ++i)
    parent["l" + std::to_string(i)] =
        (i == 0 || synth::uniform(rng, 0, 4) == 0) ? "" : "l" + std::to_string(synth::uniform(rng, 0, i - 1));
  return parent;
}

void morphology() {
  synth::Rng rng(2020);
  int cycles_rejected = 0, idempotent = 0;
  for (int i = 0; i < kMorphFuzzCases; ++i) {
    auto parent = random_acyclic(rng, synth::uniform(rng, 1, 50));
    std::vector<std::pair<std::string, std::string>> rows(parent.begin(), parent.end());
    auto f = DerivationForest::from_pairs(rows);
    bool ok = true;
    for (const auto& [l, unused] : parent) {
      auto r = f.root_of(l);
      ok = ok && r == oracle::naive_root(parent, l) && f.root_of(r) == r;
    }
    idempotent += ok;
  }
  for (int i = 0; i < kMorphFuzzCases; ++i) {
    auto parent = random_acyclic(rng, synth::uniform(rng, 1, 50));
    std::vector<std::string> roots;
    for (const auto& [l, p] : parent)
      if (p.empty()) roots.push_back(l);
    const auto root = synth::pick(rng, roots);
    std::vector<std::string> subtree;
    for (const auto& [l, p] : parent)
      if (oracle::naive_root(parent, l) == root) subtree.push_back(l);
    parent[root] = synth::pick(rng, subtree);
    std::vector<std::pair<std::string, std::string>> rows(parent.begin(), parent.end());
    std::shuffle(rows.begin(), rows.end(), rng);
    try {
      DerivationForest::from_pairs(rows);
    } catch (const CycleError& e) {
      cycles_rejected += oracle::on_cycle(parent, e.lemma());
    }
  }

  auto m = synth::czech_like_morphology();
  std::vector<Normalizer> modes = {Normalizer::raw(), Normalizer(NormMode::lemma, m.lexicon(), nullptr),
                                   m.normalizer()};
  int texts = 0, stable = 0;
  for (int i = 0; i < kMorphFuzzCases; ++i) {
    auto inst = synth::locate_instance(rng, m, 10);
    for (const auto& n : modes) {
      auto once = normalize_text(inst.context, n);
      std::string joined;
      for (const auto& w : once) joined += (joined.empty() ? "" : " ") + w;
      ++texts;
      stable += normalize_text(joined, n) == once;
    }
  }
  verdict(cycles_rejected == kMorphFuzzCases && idempotent == kMorphFuzzCases && stable == texts, "morphology",
          fmt("seeded cycles rejected %d/%d; root_of idempotent on %d/%d forests; "
              "normalize_text idempotent %d/%d (raw, lemma, root)",
              cycles_rejected, kMorphFuzzCases, idempotent, kMorphFuzzCases, stable, texts));
}

// ---------------------------------------------------------------------------

int synthetic_suite(const std::string& python, const std::string& script) {
  locator_oracle();

  auto dev = dev_sized_corpus(11);
  report_self_alignment("self-alignment (synthetic)", self_alignment(dev));

  testing_support::TempDir dir;
  auto dev_path = dir.write("dev.json", serialize_dataset(dev));
  metric_oracle("metric-oracle (synthetic)", dev_path, python, script);

  unanswerable_synthetic();
  retention_table();
  determinism();
  morphology();
  return failures ? 1 : 0;
}

int real_data_suite(const std::string& python, const std::string& script) {
  const auto dev11 = env("MTSQUAD_SQUAD11_DEV");
  const auto dev20 = env("MTSQUAD_SQUAD20_DEV");
  std::vector<std::string> all;
  for (const char* var : {"MTSQUAD_SQUAD11_DEV", "MTSQUAD_SQUAD20_DEV", "MTSQUAD_SQUAD11_TRAIN",
                          "MTSQUAD_SQUAD20_TRAIN"})
    if (!env(var).empty()) all.push_back(env(var));
  if (all.empty()) {
    skip("self-alignment (SQuAD 1.1 dev)", "MTSQUAD_SQUAD11_DEV not set");
    skip("metric-oracle (SQuAD 1.1 dev)", "MTSQUAD_SQUAD11_DEV not set");
    skip("unanswerable (SQuAD 2.0 dev)", "MTSQUAD_SQUAD20_DEV not set");
    skip("determinism (SQuAD files)", "no SQuAD file paths set");
    return 77;
  }

  if (dev11.empty()) {
    skip("self-alignment (SQuAD 1.1 dev)", "MTSQUAD_SQUAD11_DEV not set");
    skip("metric-oracle (SQuAD 1.1 dev)", "MTSQUAD_SQUAD11_DEV not set");
  } else {
    auto dev = load_dataset(dev11);
    auto st = dataset_stats(dev);
    if (st.questions != kDevQuestions)
      std::printf("note: %s has %zu questions, expected %zu\n", dev11.c_str(), st.questions, kDevQuestions);
    report_self_alignment("self-alignment (SQuAD 1.1 dev)", self_alignment(dev));
    metric_oracle("metric-oracle (SQuAD 1.1 dev)", dev11, python, script);
  }

  if (dev20.empty()) {
    skip("unanswerable (SQuAD 2.0 dev)", "MTSQUAD_SQUAD20_DEV not set");
  } else {
    Preservation p;
    LossyProvider lossy;
    check_preservation(load_dataset(dev20), lossy, p);
    verdict(p.unanswerable > 0 && p.preserved == p.unanswerable, "unanswerable (SQuAD 2.0 dev)",
            fmt("%zu/%zu unanswerable kept", p.preserved, p.unanswerable));
  }

  int ok = 0;
  std::string why;
  for (const auto& path : all) ok += fixed_point(read_file(path), &why);
  verdict(ok == int(all.size()), "determinism (SQuAD files)",
          fmt("parse/serialize fixed point on %d/%zu files%s", ok, all.size(),
              why.empty() ? "" : (" (" + why + ")").c_str()));
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool real = false;
  std::string python, script;
  app.add_flag("--real-data", real, "Run the criteria defined on the real SQuAD files");
  app.add_option("--python", python, "Python interpreter for the reference evaluation script");
  app.add_option("--reference-script", script, "Reference SQuAD 1.1 evaluation script")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    int rc = real ? real_data_suite(python, script) : synthetic_suite(python, script);
    std::printf("%d failed, %d skipped\n", failures, skips);
    return rc;
  } catch (const std::exception& e) {
    std::printf("FAIL  %-28s %s\n", "unexpected error", e.what());
    return 1;
  }
}
