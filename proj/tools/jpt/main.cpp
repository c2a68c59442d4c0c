// jpt: command-line front end. Exit codes: 0 ok, 1 usage, 2 data, 3 model.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/data/schema.hpp"
#include "jpt/embedding/cache.hpp"
#include "jpt/embedding/provider.hpp"
#include "jpt/model/model.hpp"
#include "jpt/profile/cost.hpp"
#include "jpt/service/engine.hpp"
#include "jpt/service/http.hpp"
#include "jpt/train/grad_check.hpp"
#include "jpt/train/run_config.hpp"
#include "jpt/train/trainer.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/config.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace fs = std::filesystem;

namespace jpt {
namespace {

EntitySchema read_schema(const std::string& path) {
  EntitySchema s = load_schema(path);
  s.validate();
  return s;
}

std::string read_text_arg(const std::string& text, const std::string& input) {
  if (!input.empty()) {
    std::string t = binio::read_file(input);
    while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
    return t;
  }
  return text;
}

struct Loaded {
  std::shared_ptr<Model> model;
  std::shared_ptr<EmbeddingProvider> provider;
  std::shared_ptr<EmbeddingCache> cache;
  std::shared_ptr<Engine> engine;
};

Loaded load_engine(const std::string& model_dir, const std::string& cache_path) {
  Loaded l;
  l.model = std::make_shared<Model>(Model::load(model_dir));
  l.provider = make_provider(l.model->config().provider, l.model->config().d_enc);
  l.cache = std::make_shared<EmbeddingCache>(cache_path.empty() ? model_dir + "/" + kCacheFile : cache_path);
  l.engine = std::make_shared<Engine>(l.model, l.provider, l.cache);
  return l;
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    binio::write_file(path, content);
  }
}

// ---- prompt

struct PromptArgs {
  std::string schema, text, input, model, template_name = "standard", ablation = "full", out;
};

int run_prompt(const PromptArgs& a) {
  EntitySchema schema = read_schema(a.schema);
  std::string text = read_text_arg(a.text, a.input);
  if (text.empty()) throw DataError("empty input");
  if (!a.model.empty()) {
    Model m = Model::load(a.model);
    PromptRender r = render_prompt(schema, pre_tokenize(text), m.prompt_template(), m.tokenizer(), m.render_options());
    write_or_print(a.out, r.text);
    return 0;
  }
  AblationSettings settings = settings_for(parse_ablation(a.ablation));
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  PromptRender r = render_prompt(schema, pre_tokenize(text), PromptTemplate::by_name(a.template_name), tok,
                                 {settings.prompt_definitions, settings.duplicate});
  write_or_print(a.out, r.text);
  return 0;
}

// ---- predict

struct PredictArgs {
  std::string model, cache, schema, text, input, out;
  bool chunk = false, probs = false, pretty = false;
};

int run_predict(const PredictArgs& a) {
  Loaded l = load_engine(a.model, a.cache);
  EntitySchema schema = read_schema(a.schema);
  std::string text = read_text_arg(a.text, a.input);
  if (text.empty()) throw DataError("empty input");
  PredictOptions options;
  options.return_probs = a.probs;
  PredictResult r = a.chunk ? l.engine->predict_chunked(text, schema, options) : l.engine->predict(text, schema, options);
  nlohmann::json j = predict_to_json(r, schema, a.probs);
  write_or_print(a.out, (a.pretty ? j.dump(2) : j.dump()) + "\n");
  return 0;
}

// ---- attention

struct AttentionArgs {
  std::string model, cache, schema, text, input, out;
};

int run_attention(const AttentionArgs& a) {
  Loaded l = load_engine(a.model, a.cache);
  EntitySchema schema = read_schema(a.schema);
  std::string text = read_text_arg(a.text, a.input);
  if (text.empty()) throw DataError("empty input");
  PredictOptions options;
  options.return_attention = true;
  PredictResult r = l.engine->predict(text, schema, options);
  write_or_print(a.out, attention_to_csv(*r.attention, r.attention_labels, r.attention_labels));
  return 0;
}

// ---- train

struct TrainArgs {
  std::string config, ablation, data, eval, out;
  int log_every = 50;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  ConfigFile cfg = a.config.empty() ? ConfigFile{} : ConfigFile::load(a.config);
  for (const std::string& key : cfg.apply_env(ConfigFile::process_environment())) {
    std::cerr << "config override from environment: " << key << "\n";
  }
  RunConfig run = run_config_from(cfg);
  if (!a.ablation.empty()) run.model.ablation = parse_ablation(a.ablation);
  if (!a.data.empty()) run.data.train = a.data;
  if (!a.eval.empty()) run.data.eval = a.eval;

  Dataset train_data = load_run_dataset(run.data, false);
  if (train_data.records.empty()) throw DataError("training data is empty");
  fs::create_directories(a.out);
  for (const char* stale : {kCacheFile, kMetricsFile}) fs::remove(fs::path(a.out) / stale);

  auto model = std::make_shared<Model>(Model::create(run.model, build_vocabulary(train_data)));
  auto provider = make_provider(run.model.provider, run.model.d_enc);
  auto cache = std::make_shared<EmbeddingCache>(a.out + "/" + kCacheFile);
  std::ofstream metrics(a.out + "/" + kMetricsFile);
  TrainResult res = train(*model, run.train, train_data, *provider, *cache, [&](const StepMetrics& m) {
    metrics << metrics_to_jsonl(m) << "\n";
    if (!a.quiet && a.log_every > 0 && m.step % static_cast<std::size_t>(a.log_every) == 0) {
      std::fprintf(stderr, "step %zu lr %.3g ce %.4f focal %.4f total %.4f\n", m.step, m.lr, m.ce, m.focal, m.total);
    }
  });
  metrics.close();
  model->save(a.out);
  binio::write_file(a.out + "/run.json", to_json(run).dump(2) + "\n");
  if (res.diverged) std::cerr << "warning: training hit a non-finite loss; kept the last finite parameters\n";
  std::cout << "checkpoint " << a.out << " checksum " << to_hex(model->checksum()) << " backbone "
            << to_hex(res.backbone_checksum_after)
            << (res.backbone_checksum_before == res.backbone_checksum_after ? " (unchanged)" : " (CHANGED)") << "\n";

  Dataset eval_data = load_run_dataset(run.data, true);
  if (!eval_data.records.empty()) {
    Engine engine(model, provider, cache);
    EvalOutcome o = engine.evaluate(eval_data);
    nlohmann::json report = report_to_json(o.report);
    report["token_f1"] = o.token_prf.f1;
    if (o.ambiguous_tokens > 0) report["ambiguous_accuracy"] = o.ambiguous_accuracy();
    binio::write_file(a.out + "/eval.json", report.dump(2) + "\n");
    std::printf("eval span F1 %.4f token F1 %.4f", o.report.micro.f1, o.token_prf.f1);
    if (o.ambiguous_tokens > 0) std::printf(" ambiguous accuracy %.4f", o.ambiguous_accuracy());
    std::printf("\n");
  }
  return res.diverged ? 3 : 0;
}

// ---- eval

struct EvalArgs {
  std::string model, cache, data, schema, report, confusion, errors;
};

int run_eval(const EvalArgs& a) {
  Dataset data = read_dataset(a.data);
  if (data.records.empty()) throw DataError(a.data + ": dataset is empty");
  Loaded l = load_engine(a.model, a.cache);
  if (!a.schema.empty()) apply_schema_definitions(data, read_schema(a.schema));
  EvalOutcome o = l.engine->evaluate(data);
  nlohmann::json report = report_to_json(o.report);
  report["token_f1"] = o.token_prf.f1;
  if (o.ambiguous_tokens > 0) report["ambiguous_accuracy"] = o.ambiguous_accuracy();
  write_or_print(a.report, report.dump(2) + "\n");
  if (!a.confusion.empty()) binio::write_file(a.confusion, confusion_to_csv(o.report));
  if (!a.errors.empty()) {
    std::string lines;
    for (const std::string& line : o.error_lines) lines += line + "\n";
    binio::write_file(a.errors, lines);
  }
  return 0;
}

// ---- profile

struct ProfileArgs {
  std::string stats, measure, descriptors, template_name = "standard";
  double c_in = 1.0, c_out = 4.0, tokens_per_word = 1.3;
  bool json = false;
};

int run_profile(const ProfileArgs& a) {
  WorkloadStats stats;
  if (!a.measure.empty()) {
    stats = measure_workload(read_dataset(a.measure), a.tokens_per_word, fs::path(a.measure).stem().string());
  } else if (!a.stats.empty()) {
    nlohmann::json j = nlohmann::json::parse(binio::read_file(a.stats), nullptr, false);
    if (j.is_discarded()) throw DataError(a.stats + ": not valid JSON");
    stats = workload_stats_from_json(j);
  } else {
    throw UsageError("profile needs --stats or --measure");
  }
  WorkloadDescriptor jpt = jpt_descriptor(PromptTemplate::by_name(a.template_name), stats.tokens_per_word);
  std::vector<WorkloadDescriptor> methods{jpt};
  if (!a.descriptors.empty()) {
    nlohmann::json j = nlohmann::json::parse(binio::read_file(a.descriptors), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw DataError(a.descriptors + ": expected a JSON array of descriptors");
    for (const auto& d : j) methods.push_back(workload_descriptor_from_json(d));
  } else {
    for (const WorkloadDescriptor& d : generative_descriptors(jpt.prompt_base)) methods.push_back(d);
  }
  CostReport report = profile_cost({a.c_in, a.c_out}, methods, stats);
  if (a.json) {
    std::cout << to_json(report).dump(2) << "\n";
    return 0;
  }
  std::cout << report.table();
  WallClockContext wall;
  std::printf("reported wall clock on CrossNER-Politics (context, not reproduced): %.1fs vs %.1fs, %.1fx\n",
              wall.uniner_seconds, wall.jpt_seconds, wall.ratio());
  return 0;
}

// ---- serve

struct ServeArgs {
  std::string model, cache, host = "127.0.0.1", datasets;
  int port = 8080;
  bool deterministic = false;
};

int run_serve(const ServeArgs& a) {
  Loaded l = load_engine(a.model, a.cache);
  ServiceOptions options;
  options.deterministic = a.deterministic;
  options.dataset_dir = a.datasets;
  Service service(l.engine, options);
  std::cerr << "serving " << a.model << " on http://" << a.host << ":" << a.port << "\n";
  service.listen(a.host, a.port);
  return 0;
}

// ---- cache

struct CacheArgs {
  std::string model, cache;
  std::vector<std::string> schemas;
  bool compact = false;
};

int run_cache_warm(const CacheArgs& a) {
  Loaded l = load_engine(a.model, a.cache);
  std::size_t before = l.cache->size();
  for (const std::string& path : a.schemas) l.engine->raw_entities(read_schema(path));
  std::printf("cache %s: %zu entries (%zu new)\n", l.cache->path().c_str(), l.cache->size(), l.cache->size() - before);
  return 0;
}

int run_cache_verify(const CacheArgs& a) {
  std::string path = !a.cache.empty() ? a.cache : a.model + "/" + kCacheFile;
  if (!fs::exists(path)) throw DataError("no cache at " + path);
  EmbeddingCache cache(path);
  EmbeddingCache::VerifyReport r = cache.verify();
  std::printf("cache %s: %zu entries, %zu bad checksums, %zu bad keys, index %s\n", path.c_str(), r.entries,
              r.bad_checksums, r.bad_keys, r.sidecar_ok ? "ok" : "stale");
  if (a.compact) {
    cache.compact();
    std::printf("compacted to %zu entries\n", cache.size());
  }
  if (!r.ok()) {
    std::fprintf(stderr, "cache is corrupt; delete it and run `jpt cache warm` to rebuild\n");
    return 3;
  }
  return 0;
}

// ---- sweep

struct SweepArgs {
  std::string config, out;
  std::vector<int> ranks{0, 2, 4, 8};
};

int run_sweep(const SweepArgs& a) {
  ConfigFile cfg = a.config.empty() ? ConfigFile{} : ConfigFile::load(a.config);
  cfg.apply_env(ConfigFile::process_environment());
  RunConfig run = run_config_from(cfg);
  Dataset train_data = load_run_dataset(run.data, false);
  Dataset eval_data = load_run_dataset(run.data, true);
  auto provider = make_provider(run.model.provider, run.model.d_enc);
  EmbeddingCache cache;
  SweepReport report = sweep_lora(a.ranks, run.model, run.train, train_data, eval_data, *provider, cache);
  std::cout << report.summary;
  if (!a.out.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepRow& r : report.rows) {
      rows.push_back({{"rank", r.rank},
                      {"token_f1", r.token_f1},
                      {"span_f1", r.span_f1},
                      {"ambiguous_accuracy", r.ambiguous_accuracy}});
    }
    binio::write_file(a.out, nlohmann::json{{"rows", rows}, {"non_decreasing", report.non_decreasing}}.dump(2) + "\n");
  }
  return 0;
}

// ---- gradcheck

int run_gradcheck(const std::vector<std::string>& targets, std::uint64_t seed) {
  int status = 0;
  for (const std::string& name : targets) {
    GradCheckResult r = grad_check(parse_grad_check_target(name), seed);
    bool ok = r.max_rel_error < 1e-4;
    std::printf("%-16s coords %4zu max rel error %.3e %s\n", name.c_str(), r.coordinates, r.max_rel_error,
                ok ? "ok" : "FAIL");
    if (!ok) status = 3;
  }
  return status;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"jpt: zero-shot NER by passing the input twice through a causal encoder"};
  app.require_subcommand(1);

  PromptArgs prompt;
  auto* c_prompt = app.add_subcommand("prompt", "Render the prompt for a schema and text");
  c_prompt->add_option("--schema", prompt.schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  c_prompt->add_option("--text", prompt.text, "Input text");
  c_prompt->add_option("--input", prompt.input, "Read the input text from a file")->check(CLI::ExistingFile);
  c_prompt->add_option("--model", prompt.model, "Use a checkpoint's template and ablation");
  c_prompt->add_option("--template", prompt.template_name, "standard or compact");
  c_prompt->add_option("--ablation", prompt.ablation, "full, single_pass, prompt_only_definitions, embedding_only_definitions, no_definitions");
  c_prompt->add_option("--out", prompt.out, "Output file (default stdout)");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Tag a text with a trained checkpoint");
  c_predict->add_option("--model", predict.model, "Checkpoint directory")->required();
  c_predict->add_option("--cache", predict.cache, "Embedding cache (default <model>/embeddings.jptc)");
  c_predict->add_option("--schema", predict.schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--text", predict.text, "Input text");
  c_predict->add_option("--input", predict.input, "Read the input text from a file")->check(CLI::ExistingFile);
  c_predict->add_flag("--chunk", predict.chunk, "Split inputs that exceed the backbone context");
  c_predict->add_flag("--probs", predict.probs, "Include per-token class probabilities");
  c_predict->add_flag("--pretty", predict.pretty, "Indent the JSON output");
  c_predict->add_option("--out", predict.out, "Output file (default stdout)");

  AttentionArgs attention;
  auto* c_attention = app.add_subcommand("attention", "Dump the second-pass to first-pass attention roll-up as CSV");
  c_attention->add_option("--model", attention.model, "Checkpoint directory")->required();
  c_attention->add_option("--cache", attention.cache, "Embedding cache");
  c_attention->add_option("--schema", attention.schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  c_attention->add_option("--text", attention.text, "Input text");
  c_attention->add_option("--input", attention.input, "Read the input text from a file")->check(CLI::ExistingFile);
  c_attention->add_option("--out", attention.out, "Output CSV (default stdout)");

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "Train adapters, projection networks and heads");
  c_train->add_option("--config", train_args.config, "Config file")->check(CLI::ExistingFile);
  c_train->add_option("--ablation", train_args.ablation, "Ablation variant");
  c_train->add_option("--data", train_args.data, "Training data (.conll, .jsonl or 'synthetic')");
  c_train->add_option("--eval", train_args.eval, "Evaluation data (.conll, .jsonl or 'synthetic')");
  c_train->add_option("--out", train_args.out, "Checkpoint directory")->required();
  c_train->add_option("--log-every", train_args.log_every, "Print every k steps");
  c_train->add_flag("--quiet", train_args.quiet, "No per-step output");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
  c_eval->add_option("--model", eval.model, "Checkpoint directory")->required();
  c_eval->add_option("--cache", eval.cache, "Embedding cache");
  c_eval->add_option("--data", eval.data, "Dataset (.conll or .jsonl)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--schema", eval.schema, "Replace type definitions from this schema")->check(CLI::ExistingFile);
  c_eval->add_option("--report", eval.report, "EvalReport JSON (default stdout)");
  c_eval->add_option("--confusion", eval.confusion, "Confusion matrix CSV");
  c_eval->add_option("--errors", eval.errors, "Error cases JSONL");

  ProfileArgs profile;
  auto* c_profile = app.add_subcommand("profile", "Compare modeled token costs against generative workloads");
  c_profile->add_option("--stats", profile.stats, "Workload statistics JSON")->check(CLI::ExistingFile);
  c_profile->add_option("--measure", profile.measure, "Measure statistics from a dataset")->check(CLI::ExistingFile);
  c_profile->add_option("--tokens-per-word", profile.tokens_per_word, "Scale for --measure");
  c_profile->add_option("--descriptors", profile.descriptors, "JSON array of generative descriptors");
  c_profile->add_option("--template", profile.template_name, "Prompt template for the JPT framing");
  c_profile->add_option("--c-in", profile.c_in, "Cost per prefill token");
  c_profile->add_option("--c-out", profile.c_out, "Cost per decoded token");
  c_profile->add_flag("--json", profile.json, "JSON output");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
  c_serve->add_option("--model", serve.model, "Checkpoint directory")->required();
  c_serve->add_option("--cache", serve.cache, "Embedding cache");
  c_serve->add_option("--host", serve.host, "Bind address");
  c_serve->add_option("--port", serve.port, "Port");
  c_serve->add_option("--datasets", serve.datasets, "Directory served to /v1/evaluate by dataset_id");
  c_serve->add_flag("--deterministic", serve.deterministic, "Omit timing from responses");

  CacheArgs cache;
  auto* c_cache = app.add_subcommand("cache", "Manage the definition embedding cache");
  c_cache->require_subcommand(1);
  auto* c_warm = c_cache->add_subcommand("warm", "Embed schema definitions ahead of time");
  c_warm->add_option("--model", cache.model, "Checkpoint directory")->required();
  c_warm->add_option("--cache", cache.cache, "Embedding cache");
  c_warm->add_option("--schema", cache.schemas, "Schema JSON (repeatable)")->required()->check(CLI::ExistingFile);
  auto* c_verify = c_cache->add_subcommand("verify", "Re-hash every cache record");
  c_verify->add_option("--model", cache.model, "Checkpoint directory");
  c_verify->add_option("--cache", cache.cache, "Embedding cache");
  c_verify->add_flag("--compact", cache.compact, "Rewrite with one record per key");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Train one model per LoRA rank and compare token F1");
  c_sweep->add_option("--config", sweep.config, "Config file")->check(CLI::ExistingFile);
  c_sweep->add_option("--ranks", sweep.ranks, "Ranks")->delimiter(',');
  c_sweep->add_option("--out", sweep.out, "Table JSON");

  std::vector<std::string> gc_targets{"identity_linear", "token_mlp", "entity_mlp", "bilinear",
                                      "weighted_ce",     "focal",     "pipeline"};
  std::uint64_t gc_seed = 1;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  c_gc->add_option("--target", gc_targets, "Targets");
  c_gc->add_option("--seed", gc_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (c_prompt->parsed()) {
    if (prompt.text.empty() == prompt.input.empty()) throw UsageError("prompt needs exactly one of --text or --input");
    return run_prompt(prompt);
  }
  if (c_predict->parsed()) {
    if (predict.text.empty() == predict.input.empty()) throw UsageError("predict needs exactly one of --text or --input");
    return run_predict(predict);
  }
  if (c_attention->parsed()) {
    if (attention.text.empty() == attention.input.empty()) {
      throw UsageError("attention needs exactly one of --text or --input");
    }
    return run_attention(attention);
  }
  if (c_train->parsed()) return run_train(train_args);
  if (c_eval->parsed()) return run_eval(eval);
  if (c_profile->parsed()) return run_profile(profile);
  if (c_serve->parsed()) return run_serve(serve);
  if (c_warm->parsed()) return run_cache_warm(cache);
  if (c_verify->parsed()) {
    if (cache.model.empty() && cache.cache.empty()) throw UsageError("cache verify needs --model or --cache");
    return run_cache_verify(cache);
  }
  if (c_sweep->parsed()) return run_sweep(sweep);
  if (c_gc->parsed()) return run_gradcheck(gc_targets, gc_seed);
  return 1;
}

}  // namespace
}  // namespace jpt

int main(int argc, char** argv) {
  try {
    return jpt::dispatch(argc, argv);
  } catch (const jpt::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const jpt::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const jpt::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 3;
  }
}
