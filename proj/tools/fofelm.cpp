// fofelm: FOFE language-model toolkit driver.
//
// One binary, subcommand style; the pipeline runs
//   gen-synthetic -> build-vocab -> train-ngram -> balance -> sample ->
//   train -> eval-ppl / bench
// with gradcheck, describe and params as side tools.  All randomness is
// controlled by --seed and every run can emit its fully resolved
// configuration for reproduction.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <variant>

#include "CLI11.hpp"
#include "json.hpp"

#include "fofe/balancing.hpp"
#include "fofe/container.hpp"
#include "fofe/dataset.hpp"
#include "fofe/eval.hpp"
#include "fofe/gradcheck.hpp"
#include "fofe/manifest.hpp"
#include "fofe/models.hpp"
#include "fofe/ngram.hpp"
#include "fofe/serialize.hpp"
#include "fofe/synthetic.hpp"
#include "fofe/text.hpp"
#include "fofe/train.hpp"

using json = nlohmann::json;
using namespace fofe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
    case ErrorCode::EmptyInput:
    case ErrorCode::VocabHashMismatch:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

const char* error_name(ErrorCode code) { return error_code_name(code); }

// Every subcommand gets --config (key = value file, schema-checked) and
// emits its resolved option values next to its primary output.
void add_config_options(CLI::App* sub, int* schema_version) {
  sub->set_config("--config")->check(CLI::ExistingFile);
  sub->add_option("--schema-version", *schema_version,
                  "config schema version (must be 1)")
      ->capture_default_str();
  sub->allow_config_extras(false);
}

void check_schema(int schema_version) {
  if (schema_version != 1) {
    fail(ErrorCode::InvalidConfig,
         "unsupported config schema version " + std::to_string(schema_version));
  }
}

void emit_resolved_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  out << "# resolved configuration (" << sub->get_name() << ")\n";
  out << sub->config_to_str(true, false);
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write report '" + path + "'");
  for (const auto& r : records) out << r.dump() << '\n';
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Model variant helpers.

using ModelVariant =
    std::variant<BaseFofeLM<float>, MixtureFofeLM<float>, AppDependentFofeLM<float>>;

ModelVariant load_any_model(const std::string& path, std::optional<std::uint64_t> vocab_hash) {
  const LoadedModel loaded = load_model(path, vocab_hash);
  if (loaded.arch == kArchBase) return model_from_loaded<BaseFofeLM<float>>(loaded);
  if (loaded.arch == kArchMixture) return model_from_loaded<MixtureFofeLM<float>>(loaded);
  if (loaded.arch == kArchAppDependent) {
    return model_from_loaded<AppDependentFofeLM<float>>(loaded);
  }
  fail(ErrorCode::InvalidConfig,
       "'" + path + "' holds architecture '" + loaded.arch + "', which eval cannot run");
}

// ---------------------------------------------------------------------------
// gen-synthetic

struct GenSyntheticArgs {
  std::string out_dir;
  std::uint64_t seed = 1;
  std::int64_t va_queries = 4000;
  std::int64_t stt_queries = 2500;
  std::int64_t dev_va_queries = 400;
  std::int64_t dev_stt_queries = 250;
  double alpha_va = 0.5;
  int schema_version = 1;
};

int run_gen_synthetic(CLI::App* sub, const GenSyntheticArgs& args) {
  check_schema(args.schema_version);
  SyntheticSpec spec;
  spec.va_queries = args.va_queries;
  spec.stt_queries = args.stt_queries;
  spec.alpha_va = args.alpha_va;
  write_synthetic(spec, args.seed, args.out_dir);

  SyntheticSpec dev_spec;
  dev_spec.va_queries = args.dev_va_queries;
  dev_spec.stt_queries = args.dev_stt_queries;
  const SyntheticCorpus dev = generate_synthetic(dev_spec, args.seed ^ 0x9e3779b97f4a7c15ull);
  auto join = [](const std::vector<std::string>& lines) {
    std::ostringstream os;
    for (const auto& l : lines) os << l << '\n';
    return os.str();
  };
  write_file(args.out_dir + "/dev-va.txt", join(dev.va_lines));
  write_file(args.out_dir + "/dev-stt.txt", join(dev.stt_lines));
  emit_resolved_config(sub, args.out_dir + "/gen-synthetic.resolved.cfg");

  std::cout << "wrote " << args.va_queries << " VA / " << args.stt_queries
            << " STT training queries and " << args.dev_va_queries << "/"
            << args.dev_stt_queries << " dev queries to " << args.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build-vocab

struct BuildVocabArgs {
  std::vector<std::string> corpora;
  std::int64_t top_k = 100000;
  std::string out;
  int schema_version = 1;
};

int run_build_vocab(CLI::App* sub, const BuildVocabArgs& args) {
  check_schema(args.schema_version);
  const Vocab vocab = build_vocab(args.corpora, args.top_k);
  vocab.save(args.out);
  emit_resolved_config(sub, args.out + ".resolved.cfg");
  std::cout << "vocab size " << vocab.size() << " (top-k " << args.top_k << " + 3 reserved), hash "
            << hex64(vocab.hash()) << " -> " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-ngram

struct TrainNgramArgs {
  std::vector<std::string> corpora;
  std::string vocab_path;
  std::string out;
  int order = 3;
  double discount = 0.75;
  int schema_version = 1;
};

int run_train_ngram(CLI::App* sub, const TrainNgramArgs& args) {
  check_schema(args.schema_version);
  const Vocab vocab = Vocab::load(args.vocab_path);
  std::vector<Query> corpus;
  for (const auto& path : args.corpora) {
    auto queries = load_queries(path, vocab, ApplicationId::VA);
    corpus.insert(corpus.end(), std::make_move_iterator(queries.begin()),
                  std::make_move_iterator(queries.end()));
  }
  const NGramLM lm = train_ngram(corpus, args.order, vocab.size(), args.discount);
  lm.save(args.out, vocab.hash());
  emit_resolved_config(sub, args.out + ".resolved.cfg");
  std::cout << "trained order-" << args.order << " ngram on " << lm.total_events() << " events -> "
            << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize-interpolation / balance

struct BalanceArgs {
  std::string manifest;
  std::string dev_va;
  std::string dev_stt;
  std::string vocab_path;  // optional; built from sources when empty
  std::string report;
  std::int64_t top_k = 10000;
  int order = 3;
  double discount = 0.75;
  int schema_version = 1;
};

struct InterpArgs {
  std::string lm_va;
  std::string lm_stt;
  std::string dev_va;
  std::string dev_stt;
  std::string vocab_path;
  std::string report;
  int schema_version = 1;
};

std::vector<Query> balanced_dev_from_files(const std::string& dev_va, const std::string& dev_stt,
                                           const Vocab& vocab) {
  const auto va = load_queries(dev_va, vocab, ApplicationId::VA);
  const auto stt = load_queries(dev_stt, vocab, ApplicationId::STT);
  if (va.empty() || stt.empty()) fail(ErrorCode::EmptyInput, "empty dev set");
  return make_balanced_dev(va, stt);
}

int run_optimize_interpolation(CLI::App* sub, const InterpArgs& args) {
  check_schema(args.schema_version);
  const Vocab vocab = Vocab::load(args.vocab_path);
  std::uint64_t hash_va = 0, hash_stt = 0;
  const NGramLM lm_va = NGramLM::load(args.lm_va, &hash_va);
  const NGramLM lm_stt = NGramLM::load(args.lm_stt, &hash_stt);
  if (hash_va != vocab.hash() || hash_stt != vocab.hash()) {
    fail(ErrorCode::VocabHashMismatch, "component models were trained on a different vocabulary");
  }
  const auto dev = balanced_dev_from_files(args.dev_va, args.dev_stt, vocab);
  const InterpolationResult res = optimize_interpolation(lm_va, lm_stt, dev);

  std::cout << "beta_va " << res.beta_va << "  beta_stt " << res.beta_stt << "  (EM iterations "
            << res.iterations << ")\n"
            << "balanced-dev perplexity " << res.dev_perplexity << "\n";
  if (!args.report.empty()) {
    write_jsonl(args.report, {json{{"type", "interpolation"},
                                   {"beta_va", res.beta_va},
                                   {"beta_stt", res.beta_stt},
                                   {"iterations", res.iterations},
                                   {"dev_perplexity", res.dev_perplexity},
                                   {"loglik_trace", res.loglik_trace}}});
    emit_resolved_config(sub, args.report + ".resolved.cfg");
  }
  return kExitOk;
}

int run_balance(CLI::App* sub, const BalanceArgs& args) {
  check_schema(args.schema_version);
  const auto sources = load_manifest(args.manifest);

  std::vector<std::string> all_paths;
  for (const auto& s : sources) all_paths.push_back(s.path);
  const Vocab vocab =
      args.vocab_path.empty() ? build_vocab(all_paths, args.top_k) : Vocab::load(args.vocab_path);

  // one AS component LM per application, trained on the union of that
  // application's sources
  std::vector<Query> corpus_va, corpus_stt;
  for (const auto& s : sources) {
    auto queries = load_queries(s.path, vocab, s.application);
    auto& dst = s.application == ApplicationId::VA ? corpus_va : corpus_stt;
    dst.insert(dst.end(), std::make_move_iterator(queries.begin()),
               std::make_move_iterator(queries.end()));
  }
  if (corpus_va.empty() || corpus_stt.empty()) {
    fail(ErrorCode::InvalidConfig, "balance requires sources for both applications");
  }
  const NGramLM lm_va = train_ngram(corpus_va, args.order, vocab.size(), args.discount);
  const NGramLM lm_stt = train_ngram(corpus_stt, args.order, vocab.size(), args.discount);

  const auto dev = balanced_dev_from_files(args.dev_va, args.dev_stt, vocab);
  const ApplicationMasses masses = application_masses(sources);
  const double ppl_before = mixture_perplexity(lm_va, lm_stt, dev, masses.va);
  const InterpolationResult em = optimize_interpolation(lm_va, lm_stt, dev);
  const BalanceSolution sol = balanced_weights(sources, em.beta_va, em.beta_stt);

  std::printf("%-12s %-5s %10s %10s\n", "source", "app", "alpha", "lambda");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::printf("%-12s %-5s %10.6f %10.6f\n", sources[i].id.c_str(),
                app_name(sources[i].application), sources[i].alpha, sol.lambda[i]);
  }
  std::printf("alpha_bar     VA %.6f  STT %.6f\n", sol.alpha_bar_va, sol.alpha_bar_stt);
  std::printf("beta          VA %.6f  STT %.6f   (EM iterations %d)\n", sol.beta_va,
              sol.beta_stt, em.iterations);
  std::printf("gamma         VA %.6f  STT %.6f\n", sol.gamma_va, sol.gamma_stt);
  std::printf("balanced-dev perplexity: %.4f before, %.4f after\n", ppl_before,
              em.dev_perplexity);

  if (!args.report.empty()) {
    std::vector<json> records;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      records.push_back(json{{"type", "source"},
                             {"id", sources[i].id},
                             {"application", app_name(sources[i].application)},
                             {"alpha", sources[i].alpha},
                             {"lambda", sol.lambda[i]}});
    }
    records.push_back(json{{"type", "balance"},
                           {"alpha_bar_va", sol.alpha_bar_va},
                           {"alpha_bar_stt", sol.alpha_bar_stt},
                           {"beta_va", sol.beta_va},
                           {"beta_stt", sol.beta_stt},
                           {"gamma_va", sol.gamma_va},
                           {"gamma_stt", sol.gamma_stt},
                           {"em_iterations", em.iterations},
                           {"dev_perplexity_before", ppl_before},
                           {"dev_perplexity_after", em.dev_perplexity}});
    write_jsonl(args.report, records);
    emit_resolved_config(sub, args.report + ".resolved.cfg");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string manifest;
  std::string out_train;
  std::string out_heldout;
  double beta_va = -1.0;  // <0: use raw manifest alphas
  std::int64_t total_tokens = 0;
  double heldout_fraction = 0.05;
  std::uint64_t seed = 1;
  int schema_version = 1;
};

int run_sample(CLI::App* sub, const SampleArgs& args) {
  check_schema(args.schema_version);
  const auto sources = load_manifest(args.manifest);

  std::vector<double> lambda;
  if (args.beta_va >= 0.0) {
    if (args.beta_va > 1.0) fail(ErrorCode::InvalidConfig, "--beta-va must be in [0,1]");
    lambda = balanced_weights(sources, args.beta_va, 1.0 - args.beta_va).lambda;
  } else {
    for (const auto& s : sources) lambda.push_back(s.alpha);
  }

  const SampleResult res =
      sample_corpus(sources, lambda, args.total_tokens, args.heldout_fraction, args.seed);

  auto write_tagged = [](const std::string& path, const std::vector<SampledLine>& lines) {
    std::ostringstream os;
    for (const auto& l : lines) os << app_name(l.app) << '\t' << l.text << '\n';
    write_file(path, os.str());
  };
  write_tagged(args.out_train, res.train);
  write_tagged(args.out_heldout, res.heldout);

  std::vector<json> records;
  json provenance{{"type", "sample"},
                  {"seed", args.seed},
                  {"total_tokens", res.train_tokens + res.heldout_tokens},
                  {"train_tokens", res.train_tokens},
                  {"heldout_tokens", res.heldout_tokens},
                  {"heldout_fraction", args.heldout_fraction}};
  for (std::size_t i = 0; i < sources.size(); ++i) {
    records.push_back(json{{"type", "sample_source"},
                           {"id", sources[i].id},
                           {"lambda", lambda[i]},
                           {"draws", res.draws_per_source[i]},
                           {"tokens", res.tokens_per_source[i]}});
  }
  records.push_back(provenance);
  write_jsonl(args.out_train + ".provenance.jsonl", records);
  emit_resolved_config(sub, args.out_train + ".resolved.cfg");

  std::cout << "sampled " << res.train.size() << " train / " << res.heldout.size()
            << " heldout lines (" << res.train_tokens << "/" << res.heldout_tokens
            << " tokens) -> " << args.out_train << ", " << args.out_heldout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string preset = "aa-fofe";
  std::string train_path;
  std::string heldout_path;
  std::string vocab_path;
  std::string out;
  std::uint64_t seed = 1;
  // optional overrides; negative/zero means "keep preset value"
  int epochs = 0;
  int hold_epochs = -1;
  int batch_size = 0;
  double lr = 0.0;
  int patience = 0;
  double clip_norm = 0.0;
  int nce_k = 0;
  double momentum = -1.0;
  int history_limit = 0;
  int embed_dim = 0;
  int hidden_dim = 0;
  int layers = 0;
  int context_n = 0;
  double alpha = 0.0;
  int mixture_m = 0;
  bool softmax = false;
  bool strict_fofe = false;
  int schema_version = 1;
};

template <typename Model>
int train_and_save(Model& model, const std::vector<Query>& train_q,
                   const std::vector<Query>& heldout_q, const TrainConfig& tcfg,
                   const TrainArgs& args, const Vocab& vocab) {
  std::ofstream history(args.out + ".history.jsonl");
  if (!history) fail(ErrorCode::Io, "cannot write '" + args.out + ".history.jsonl'");
  auto on_epoch = [&history](const EpochRecord& rec) {
    history << json{{"epoch", rec.epoch},
                    {"heldout_ppl", rec.heldout_ppl},
                    {"train_loss", rec.train_loss},
                    {"lr", rec.lr},
                    {"clip_events", rec.clip_events},
                    {"wall_seconds", rec.wall_seconds}}
                   .dump()
            << '\n';
    std::printf("epoch %3d  loss %8.4f  heldout ppl %10.3f  lr %.5f\n", rec.epoch,
                rec.train_loss, rec.heldout_ppl, rec.lr);
  };
  const auto outcome = train_model(model, train_q, heldout_q, tcfg, on_epoch);

  // last checkpoint, then best (the primary artifact)
  save_typed_model(model, args.out + ".last", vocab.hash());
  apply_values(model, outcome.best_values);
  save_typed_model(model, args.out, vocab.hash());
  std::printf("best heldout ppl %.3f at epoch %d -> %s\n", outcome.history.best_heldout_ppl,
              outcome.history.best_epoch, args.out.c_str());
  return kExitOk;
}

int run_train(CLI::App* sub, const TrainArgs& args) {
  check_schema(args.schema_version);
  TrainPreset preset = train_preset(args.preset);
  const Vocab vocab = Vocab::load(args.vocab_path);

  TrainConfig& tcfg = preset.train;
  tcfg.seed = args.seed;
  tcfg.use_nce = !args.softmax;
  if (args.epochs > 0) tcfg.max_epochs = args.epochs;
  if (args.hold_epochs >= 0) tcfg.lr_hold_epochs = args.hold_epochs;
  if (args.batch_size > 0) tcfg.batch_size = args.batch_size;
  if (args.lr > 0) tcfg.initial_lr = args.lr;
  if (args.patience > 0) tcfg.patience = args.patience;
  if (args.clip_norm > 0) tcfg.clip_norm = args.clip_norm;
  if (args.nce_k > 0) tcfg.nce_k = args.nce_k;
  if (args.momentum >= 0) tcfg.momentum = args.momentum;
  if (args.history_limit > 0) tcfg.history_limit = args.history_limit;

  FofeConfig& mcfg = preset.model;
  mcfg.vocab_size = vocab.size();
  mcfg.strict_literal_fofe = args.strict_fofe;
  if (args.embed_dim > 0) mcfg.embed_dim = args.embed_dim;
  if (args.hidden_dim > 0) mcfg.hidden_dim = args.hidden_dim;
  if (args.layers > 0) mcfg.num_ff_layers = args.layers;
  if (args.context_n > 0) mcfg.context_n = args.context_n;
  if (args.alpha > 0) mcfg.forgetting_factor = args.alpha;
  if (args.mixture_m > 0) mcfg.mixture_m = args.mixture_m;
  mcfg.validate();

  const auto train_q = load_queries(args.train_path, vocab, ApplicationId::VA);
  const auto heldout_q = load_queries(args.heldout_path, vocab, ApplicationId::VA);

  emit_resolved_config(sub, args.out + ".resolved.cfg");
  if (preset.arch == kArchBase) {
    BaseFofeLM<float> model(mcfg, args.seed);
    return train_and_save(model, train_q, heldout_q, tcfg, args, vocab);
  }
  if (preset.arch == kArchMixture) {
    MixtureFofeLM<float> model(mcfg, args.seed);
    return train_and_save(model, train_q, heldout_q, tcfg, args, vocab);
  }
  AppDependentFofeLM<float> model(mcfg, args.seed);
  return train_and_save(model, train_q, heldout_q, tcfg, args, vocab);
}

// ---------------------------------------------------------------------------
// eval-ppl

struct EvalArgs {
  std::string model_path;
  std::string vocab_path;
  std::string test_path;
  std::string report;
  int context_limit = 8;
  int schema_version = 1;
};

int run_eval_ppl(CLI::App* sub, const EvalArgs& args) {
  check_schema(args.schema_version);
  const Vocab vocab = Vocab::load(args.vocab_path);
  CorpusStats stats;
  const auto queries = load_queries(args.test_path, vocab, ApplicationId::VA, &stats);
  if (queries.empty()) fail(ErrorCode::EmptyInput, "empty test set");

  // peek at the architecture tag to route ngram models
  ContainerReader peek(args.model_path);
  std::uint64_t stored_hash = 0;
  const std::string arch = peek.magic(&stored_hash);
  if (stored_hash != vocab.hash()) {
    fail(ErrorCode::VocabHashMismatch,
         "'" + args.model_path + "' was trained against a different vocabulary");
  }

  EvalReport report;
  if (arch == "ngram") {
    const NGramLM lm = NGramLM::load(args.model_path);
    report.context_limit = lm.order() - 1;
    report.perplexity = lm.perplexity(queries);
    report.events = 0;
    for (const auto& q : queries) {
      report.word_tokens += static_cast<std::int64_t>(q.ids.size());
      report.events += static_cast<std::int64_t>(q.ids.size()) + 1;
    }
    report.oov_rate = stats.oov_rate();
  } else {
    const ModelVariant model = load_any_model(args.model_path, vocab.hash());
    report = std::visit(
        [&](const auto& m) { return model_perplexity(m, queries, args.context_limit, &stats); },
        model);
  }

  std::printf("perplexity %.4f over %lld events (%lld words, OOV rate %.4f, context limit %d)\n",
              report.perplexity, static_cast<long long>(report.events),
              static_cast<long long>(report.word_tokens), report.oov_rate,
              report.context_limit);
  if (!args.report.empty()) {
    write_jsonl(args.report, {json{{"type", "eval"},
                                   {"model", args.model_path},
                                   {"model_hash", hex64(file_hash(args.model_path))},
                                   {"arch", arch},
                                   {"test", args.test_path},
                                   {"perplexity", report.perplexity},
                                   {"events", report.events},
                                   {"word_tokens", report.word_tokens},
                                   {"oov_rate", report.oov_rate},
                                   {"context_limit", report.context_limit}}});
    emit_resolved_config(sub, args.report + ".resolved.cfg");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string model_path;
  std::string baseline_path;
  std::string vocab_path;
  std::string queries_path;
  std::string report;
  int repeats = 3;
  int warmup = 50;
  int context_limit = 8;
  double assumed_wps = 0.0;  // words per second, simulated-RTF presentation
  int schema_version = 1;
};

json bench_to_json(const BenchReport& rep, const std::string& path, double assumed_wps,
                   double mean_query_words) {
  json j{{"type", "bench"},
         {"model", path},
         {"model_hash", hex64(file_hash(path))},
         {"queries", rep.query_count},
         {"warmup", rep.warmup},
         {"context_limit", rep.context_limit},
         {"machine", rep.machine},
         {"timer_warning", rep.timer_warning},
         {"p50_avg_ms", rep.p50_avg_ms},
         {"p95_avg_ms", rep.p95_avg_ms}};
  std::vector<double> p50s, p95s;
  for (const auto& r : rep.repeats) {
    p50s.push_back(r.p50_ms);
    p95s.push_back(r.p95_ms);
  }
  j["p50_ms"] = p50s;
  j["p95_ms"] = p95s;
  if (assumed_wps > 0.0) {
    // presentation only: latency / simulated audio duration
    const double audio_ms = mean_query_words / assumed_wps * 1000.0;
    j["simulated_rtf_p95"] = rep.p95_avg_ms / audio_ms;
  }
  return j;
}

int run_bench(CLI::App* sub, const BenchArgs& args) {
  check_schema(args.schema_version);
  const Vocab vocab = Vocab::load(args.vocab_path);
  const auto queries = load_queries(args.queries_path, vocab, ApplicationId::VA);
  if (queries.empty()) fail(ErrorCode::EmptyInput, "empty benchmark query set");
  double mean_words = 0.0;
  for (const auto& q : queries) mean_words += static_cast<double>(q.ids.size());
  mean_words /= static_cast<double>(queries.size());

  const ModelVariant model = load_any_model(args.model_path, vocab.hash());
  const BenchReport rep = std::visit(
      [&](const auto& m) {
        return bench_latency(m, queries, args.repeats, args.warmup, args.context_limit);
      },
      model);
  std::printf("%s: P50 %.3f ms, P95 %.3f ms (avg over %d repeats, %lld queries)\n",
              args.model_path.c_str(), rep.p50_avg_ms, rep.p95_avg_ms, args.repeats,
              static_cast<long long>(rep.query_count));
  if (rep.timer_warning) std::printf("warning: clock resolution coarser than 1us\n");

  std::vector<json> records;
  records.push_back(bench_to_json(rep, args.model_path, args.assumed_wps, mean_words));

  if (!args.baseline_path.empty()) {
    const ModelVariant baseline = load_any_model(args.baseline_path, vocab.hash());
    const BenchReport base = std::visit(
        [&](const auto& m) {
          return bench_latency(m, queries, args.repeats, args.warmup, args.context_limit);
        },
        baseline);
    const double delta_p95 = relative_delta_pct(base.p95_avg_ms, rep.p95_avg_ms);
    const double delta_p50 = relative_delta_pct(base.p50_avg_ms, rep.p50_avg_ms);
    std::printf("%s (baseline): P50 %.3f ms, P95 %.3f ms\n", args.baseline_path.c_str(),
                base.p50_avg_ms, base.p95_avg_ms);
    std::printf("relative P95 change vs baseline: %+.1f%% (positive = faster)\n", delta_p95);
    records.push_back(bench_to_json(base, args.baseline_path, args.assumed_wps, mean_words));
    records.push_back(json{{"type", "bench_delta"},
                           {"baseline", args.baseline_path},
                           {"candidate", args.model_path},
                           {"relative_p95_pct", delta_p95},
                           {"relative_p50_pct", delta_p50}});
  }
  if (!args.report.empty()) {
    write_jsonl(args.report, records);
    emit_resolved_config(sub, args.report + ".resolved.cfg");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string arch = "base";
  std::string app = "VA";
  std::uint64_t seed = 1;
  int vocab_size = 20;
  int embed_dim = 8;
  int hidden_dim = 8;
  int context_n = 2;
  int layers = 2;
  int mixture_m = 2;
  int batch = 5;
  double step = 1e-4;
  double tolerance = 1e-4;
  bool nce = false;
  int schema_version = 1;
};

template <typename Model>
GradCheckReport gradcheck_arch(const FofeConfig& cfg, const GradcheckArgs& args) {
  Model model(cfg, args.seed);
  Rng rng(args.seed + 1);
  std::vector<Example> batch;
  const ApplicationId app = app_from_name(args.app);
  for (int i = 0; i < args.batch; ++i) {
    Example ex;
    ex.app = app;
    ex.target = static_cast<WordId>(rng.next_index(static_cast<std::size_t>(cfg.vocab_size)));
    const std::size_t len = 1 + rng.next_index(4);
    for (std::size_t t = 0; t < len; ++t) {
      ex.history.push_back(
          static_cast<WordId>(rng.next_index(static_cast<std::size_t>(cfg.vocab_size))));
    }
    batch.push_back(std::move(ex));
  }
  if (args.nce) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(cfg.vocab_size), 1);
    const NceHead head = NceHead::from_counts(counts, 4);
    Rng noise_rng(args.seed + 2);
    const IdMat noise = head.draw_noise(noise_rng, static_cast<Eigen::Index>(batch.size()));
    auto loss_fn = [&] { return model.loss_nce(batch, head, noise, true); };
    return gradcheck(loss_fn, model.params(), args.step);
  }
  auto loss_fn = [&] { return model.loss_softmax(batch, true); };
  return gradcheck(loss_fn, model.params(), args.step);
}

int run_gradcheck(CLI::App*, const GradcheckArgs& args) {
  check_schema(args.schema_version);
  FofeConfig cfg;
  cfg.vocab_size = args.vocab_size;
  cfg.embed_dim = args.embed_dim;
  cfg.hidden_dim = args.hidden_dim;
  cfg.context_n = args.context_n;
  cfg.num_ff_layers = args.layers;
  cfg.mixture_m = args.mixture_m;
  cfg.validate();

  GradCheckReport report;
  if (args.arch == kArchBase) {
    report = gradcheck_arch<BaseFofeLM<double>>(cfg, args);
  } else if (args.arch == kArchMixture) {
    report = gradcheck_arch<MixtureFofeLM<double>>(cfg, args);
  } else if (args.arch == kArchAppDependent) {
    report = gradcheck_arch<AppDependentFofeLM<double>>(cfg, args);
  } else {
    fail(ErrorCode::InvalidConfig, "unknown architecture '" + args.arch + "'");
  }
  std::printf("gradcheck %s%s: max relative error %.3e over %lld elements (worst: %s[%lld,%lld])\n",
              args.arch.c_str(), args.nce ? "+nce" : "", report.max_rel_error,
              static_cast<long long>(report.elements_checked), report.worst_param.c_str(),
              static_cast<long long>(report.worst_row), static_cast<long long>(report.worst_col));
  if (report.max_rel_error >= args.tolerance) {
    std::printf("FAIL (tolerance %.1e)\n", args.tolerance);
    return kExitRuntime;
  }
  std::printf("PASS (tolerance %.1e)\n", args.tolerance);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// describe / params

int run_describe(CLI::App*, const std::string& model_path) {
  ContainerReader peek(model_path);
  std::uint64_t hash = 0;
  const std::string arch = peek.magic(&hash);
  if (arch == "ngram") {
    const NGramLM lm = NGramLM::load(model_path);
    std::printf("arch ngram  order %d  vocab %d  discount %.3f  events %lld\n", lm.order(),
                lm.vocab_size(), lm.discount(), static_cast<long long>(lm.total_events()));
  } else {
    const LoadedModel loaded = load_model(model_path);
    const auto& cfg = loaded.cfg;
    std::printf(
        "arch %s  vocab %d  embed %d  hidden %d  layers %d  context_n %d  alpha %.3f%s\n",
        loaded.arch.c_str(), cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.num_ff_layers,
        cfg.context_n, cfg.forgetting_factor,
        loaded.arch == kArchMixture ? ("  M " + std::to_string(cfg.mixture_m)).c_str() : "");
    std::printf("parameters %lld\n",
                static_cast<long long>(loaded.params.parameter_count()));
  }
  std::printf("vocab hash %s  file hash %s\n", hex64(hash).c_str(),
              hex64(file_hash(model_path)).c_str());
  return kExitOk;
}

struct ParamsArgs {
  std::string arch = "base";
  int vocab_size = 100000;
  int embed_dim = 256;
  int hidden_dim = 768;
  int context_n = 8;
  int layers = 4;
  int mixture_m = 2;
  int schema_version = 1;
};

int run_params(CLI::App*, const ParamsArgs& args) {
  check_schema(args.schema_version);
  FofeConfig cfg;
  cfg.vocab_size = args.vocab_size;
  cfg.embed_dim = args.embed_dim;
  cfg.hidden_dim = args.hidden_dim;
  cfg.context_n = args.context_n;
  cfg.num_ff_layers = args.layers;
  cfg.mixture_m = args.mixture_m;
  cfg.validate();
  std::int64_t count = 0;
  if (args.arch == kArchBase) {
    count = BaseFofeLM<float>::parameter_count(cfg);
  } else if (args.arch == kArchMixture) {
    count = MixtureFofeLM<float>::parameter_count(cfg);
  } else if (args.arch == kArchAppDependent) {
    count = AppDependentFofeLM<float>::parameter_count(cfg);
  } else {
    fail(ErrorCode::InvalidConfig, "unknown architecture '" + args.arch + "'");
  }
  std::printf("%s: %lld parameters (%.2fM)\n", args.arch.c_str(), static_cast<long long>(count),
              static_cast<double>(count) / 1e6);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fofelm: FOFE neural language model toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenSyntheticArgs gen_args;
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "generate the deterministic two-application test corpus");
  gen->add_option("--out-dir", gen_args.out_dir, "output directory")->required();
  gen->add_option("--seed", gen_args.seed, "rng seed")->capture_default_str();
  gen->add_option("--va-queries", gen_args.va_queries, "VA training queries")
      ->capture_default_str();
  gen->add_option("--stt-queries", gen_args.stt_queries, "STT training queries")
      ->capture_default_str();
  gen->add_option("--dev-va-queries", gen_args.dev_va_queries, "VA dev queries")
      ->capture_default_str();
  gen->add_option("--dev-stt-queries", gen_args.dev_stt_queries, "STT dev queries")
      ->capture_default_str();
  gen->add_option("--alpha-va", gen_args.alpha_va, "manifest weight of the VA source")
      ->capture_default_str();
  add_config_options(gen, &gen_args.schema_version);

  BuildVocabArgs vocab_args;
  auto* bv = app.add_subcommand("build-vocab", "build the top-k vocabulary from corpora");
  bv->add_option("--corpus", vocab_args.corpora, "corpus file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  bv->add_option("--top-k", vocab_args.top_k, "number of words to keep")->capture_default_str();
  bv->add_option("--out", vocab_args.out, "output vocab file")->required();
  add_config_options(bv, &vocab_args.schema_version);

  TrainNgramArgs ngram_args;
  auto* tn = app.add_subcommand("train-ngram", "train a back-off n-gram model");
  tn->add_option("--corpus", ngram_args.corpora, "corpus file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  tn->add_option("--vocab", ngram_args.vocab_path, "vocab file")->required();
  tn->add_option("--order", ngram_args.order, "n-gram order")->capture_default_str();
  tn->add_option("--discount", ngram_args.discount, "absolute discount in (0,1)")
      ->capture_default_str();
  tn->add_option("--out", ngram_args.out, "output model file")->required();
  add_config_options(tn, &ngram_args.schema_version);

  InterpArgs interp_args;
  auto* oi = app.add_subcommand("optimize-interpolation",
                                "EM-optimize the two-application mixture weights");
  oi->add_option("--lm-va", interp_args.lm_va, "VA component ngram model")->required();
  oi->add_option("--lm-stt", interp_args.lm_stt, "STT component ngram model")->required();
  oi->add_option("--dev-va", interp_args.dev_va, "VA dev corpus")->required();
  oi->add_option("--dev-stt", interp_args.dev_stt, "STT dev corpus")->required();
  oi->add_option("--vocab", interp_args.vocab_path, "vocab file")->required();
  oi->add_option("--report", interp_args.report, "structured report path (jsonl)");
  add_config_options(oi, &interp_args.schema_version);

  BalanceArgs balance_args;
  auto* bal = app.add_subcommand("balance", "run the full balancing pipeline on a manifest");
  bal->add_option("--manifest", balance_args.manifest, "source manifest")->required();
  bal->add_option("--dev-va", balance_args.dev_va, "VA dev corpus")->required();
  bal->add_option("--dev-stt", balance_args.dev_stt, "STT dev corpus")->required();
  bal->add_option("--vocab", balance_args.vocab_path, "vocab file (built from sources if absent)");
  bal->add_option("--top-k", balance_args.top_k, "vocab size when building internally")
      ->capture_default_str();
  bal->add_option("--order", balance_args.order, "component n-gram order")->capture_default_str();
  bal->add_option("--discount", balance_args.discount, "absolute discount")
      ->capture_default_str();
  bal->add_option("--report", balance_args.report, "structured report path (jsonl)");
  add_config_options(bal, &balance_args.schema_version);

  SampleArgs sample_args;
  auto* smp = app.add_subcommand("sample", "sample train/heldout corpora by weight");
  smp->add_option("--manifest", sample_args.manifest, "source manifest")->required();
  smp->add_option("--beta-va", sample_args.beta_va,
                  "redistribution mass for VA (with STT = 1 - beta); raw alphas when unset");
  smp->add_option("--total-tokens", sample_args.total_tokens, "word budget")->required();
  smp->add_option("--heldout-fraction", sample_args.heldout_fraction, "heldout draw fraction")
      ->capture_default_str();
  smp->add_option("--seed", sample_args.seed, "rng seed")->capture_default_str();
  smp->add_option("--out-train", sample_args.out_train, "train corpus output")->required();
  smp->add_option("--out-heldout", sample_args.out_heldout, "heldout corpus output")->required();
  add_config_options(smp, &sample_args.schema_version);

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "train a FOFE neural language model");
  tr->add_option("--preset", train_args.preset,
                 "as-fofe | aa-fofe | aa-mixture | ad-fofe (architecture + recipe)")
      ->required();
  tr->add_option("--train", train_args.train_path, "training corpus")->required();
  tr->add_option("--heldout", train_args.heldout_path, "heldout corpus")->required();
  tr->add_option("--vocab", train_args.vocab_path, "vocab file")->required();
  tr->add_option("--out", train_args.out, "output model path (best checkpoint)")->required();
  tr->add_option("--seed", train_args.seed, "rng seed")->capture_default_str();
  tr->add_option("--epochs", train_args.epochs, "override max epochs");
  tr->add_option("--hold-epochs", train_args.hold_epochs, "override lr hold window");
  tr->add_option("--batch-size", train_args.batch_size, "override batch size");
  tr->add_option("--lr", train_args.lr, "override initial learning rate");
  tr->add_option("--patience", train_args.patience, "override decay patience");
  tr->add_option("--clip-norm", train_args.clip_norm, "override gradient clip norm");
  tr->add_option("--nce-k", train_args.nce_k, "override NCE noise sample count");
  tr->add_option("--momentum", train_args.momentum, "override momentum coefficient");
  tr->add_option("--history-limit", train_args.history_limit, "override word-history limit");
  tr->add_option("--embed-dim", train_args.embed_dim, "override embedding size");
  tr->add_option("--hidden-dim", train_args.hidden_dim, "override hidden size");
  tr->add_option("--layers", train_args.layers, "override feed-forward layer count");
  tr->add_option("--context-n", train_args.context_n, "override FOFE context positions");
  tr->add_option("--fofe-alpha", train_args.alpha, "override forgetting factor");
  tr->add_option("--mixture-m", train_args.mixture_m, "override mixture expert count");
  tr->add_flag("--softmax", train_args.softmax, "train with full softmax instead of NCE");
  tr->add_flag("--strict-fofe", train_args.strict_fofe,
               "literal z_m = z_{m-1} + alpha e_m recurrence (comparison mode)");
  add_config_options(tr, &train_args.schema_version);

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval-ppl", "evaluate perplexity under the context limit");
  ev->add_option("--model", eval_args.model_path, "model file")->required();
  ev->add_option("--vocab", eval_args.vocab_path, "vocab file")->required();
  ev->add_option("--test", eval_args.test_path, "test corpus")->required();
  ev->add_option("--context-limit", eval_args.context_limit, "word-history limit")
      ->capture_default_str();
  ev->add_option("--report", eval_args.report, "structured report path (jsonl)");
  add_config_options(ev, &eval_args.schema_version);

  BenchArgs bench_args;
  auto* bn = app.add_subcommand("bench", "latency benchmark (P50/P95, repeats averaged)");
  bn->add_option("--model", bench_args.model_path, "model file")->required();
  bn->add_option("--baseline", bench_args.baseline_path, "baseline model for relative deltas");
  bn->add_option("--vocab", bench_args.vocab_path, "vocab file")->required();
  bn->add_option("--queries", bench_args.queries_path, "benchmark query corpus")->required();
  bn->add_option("--repeats", bench_args.repeats, "timed repeats")->capture_default_str();
  bn->add_option("--warmup", bench_args.warmup, "untimed warmup queries")->capture_default_str();
  bn->add_option("--context-limit", bench_args.context_limit, "word-history limit")
      ->capture_default_str();
  bn->add_option("--assumed-words-per-second", bench_args.assumed_wps,
                 "convert latency to a simulated RTF (presentation only)");
  bn->add_option("--report", bench_args.report, "structured report path (jsonl)");
  add_config_options(bn, &bench_args.schema_version);

  GradcheckArgs grad_args;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check (64-bit)");
  gc->add_option("--arch", grad_args.arch, "base | mixture | appdep")->capture_default_str();
  gc->add_option("--app", grad_args.app, "application tag for appdep batches")
      ->capture_default_str();
  gc->add_option("--seed", grad_args.seed, "rng seed")->capture_default_str();
  gc->add_option("--vocab-size", grad_args.vocab_size, "V")->capture_default_str();
  gc->add_option("--embed-dim", grad_args.embed_dim, "E")->capture_default_str();
  gc->add_option("--hidden-dim", grad_args.hidden_dim, "H")->capture_default_str();
  gc->add_option("--context-n", grad_args.context_n, "FOFE context positions")
      ->capture_default_str();
  gc->add_option("--layers", grad_args.layers, "feed-forward layers")->capture_default_str();
  gc->add_option("--mixture-m", grad_args.mixture_m, "mixture experts")->capture_default_str();
  gc->add_option("--batch", grad_args.batch, "batch size")->capture_default_str();
  gc->add_option("--step", grad_args.step, "finite-difference step")->capture_default_str();
  gc->add_option("--tolerance", grad_args.tolerance, "max relative error allowed")
      ->capture_default_str();
  gc->add_flag("--nce", grad_args.nce, "check the NCE loss path instead of softmax");
  add_config_options(gc, &grad_args.schema_version);

  std::string describe_path;
  auto* de = app.add_subcommand("describe", "print a model file's architecture and dims");
  de->add_option("--model", describe_path, "model file")->required();

  ParamsArgs params_args;
  auto* pa = app.add_subcommand("params", "closed-form parameter count for an architecture");
  pa->add_option("--arch", params_args.arch, "base | mixture | appdep")->capture_default_str();
  pa->add_option("--vocab-size", params_args.vocab_size, "V")->capture_default_str();
  pa->add_option("--embed-dim", params_args.embed_dim, "E")->capture_default_str();
  pa->add_option("--hidden-dim", params_args.hidden_dim, "H")->capture_default_str();
  pa->add_option("--context-n", params_args.context_n, "FOFE context positions")
      ->capture_default_str();
  pa->add_option("--layers", params_args.layers, "feed-forward layers")->capture_default_str();
  pa->add_option("--mixture-m", params_args.mixture_m, "mixture experts")->capture_default_str();
  add_config_options(pa, &params_args.schema_version);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    // unknown subcommand / bare usage errors -> 2, option value errors -> 3
    const bool usage = app.get_subcommands().empty();
    return usage ? kExitUsage : kExitConfig;
  }

  try {
    if (gen->parsed()) return run_gen_synthetic(gen, gen_args);
    if (bv->parsed()) return run_build_vocab(bv, vocab_args);
    if (tn->parsed()) return run_train_ngram(tn, ngram_args);
    if (oi->parsed()) return run_optimize_interpolation(oi, interp_args);
    if (bal->parsed()) return run_balance(bal, balance_args);
    if (smp->parsed()) return run_sample(smp, sample_args);
    if (tr->parsed()) return run_train(tr, train_args);
    if (ev->parsed()) return run_eval_ppl(ev, eval_args);
    if (bn->parsed()) return run_bench(bn, bench_args);
    if (gc->parsed()) return run_gradcheck(gc, grad_args);
    if (de->parsed()) return run_describe(de, describe_path);
    if (pa->parsed()) return run_params(pa, params_args);
  } catch (const FofeError& e) {
    std::cerr << "error\tcode=" << error_name(e.code()) << "\tmsg=" << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error\tcode=internal\tmsg=" << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
