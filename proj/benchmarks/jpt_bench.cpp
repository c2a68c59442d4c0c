#include <benchmark/benchmark.h>

#include "jpt/backbone/transformer.hpp"
#include "jpt/encoder/prompt.hpp"
#include "jpt/eval/spans.hpp"
#include "jpt/head/classifier.hpp"
#include "jpt/profile/cost.hpp"
#include "jpt/service/engine.hpp"
#include "jpt/train/synthetic.hpp"
#include "jpt/train/trainer.hpp"

namespace jpt {
namespace {

BackboneConfig bench_backbone() {
  BackboneConfig c;
  c.vocab_size = 512;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.max_seq_len = 1024;
  c.rng_seed = 1;
  return c;
}

// Encoder cost as a function of the sequence length, single pass vs duplicated.
void BM_EncodeSinglePass(benchmark::State& state) {
  const BackboneConfig c = bench_backbone();
  ToyTransformer model(c, std::make_shared<ParamSet>(init_backbone(c)));
  std::vector<int> tokens(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(i % 500) + 2;
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(tokens, false));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EncodeSinglePass)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_EncodeDuplicated(benchmark::State& state) {
  const BackboneConfig c = bench_backbone();
  ToyTransformer model(c, std::make_shared<ParamSet>(init_backbone(c)));
  std::vector<int> tokens(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(i % 500) + 2;
  const std::vector<int> dup = duplicate_core(tokens, 1).first;
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(dup, false));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EncodeDuplicated)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_RenderPrompt(benchmark::State& state) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  const EntitySchema schema = synthetic_schema();
  std::string text;
  for (int i = 0; i < state.range(0); ++i) text += "Jordan visited the harbour ";
  const TokenizedText pieces = tok.retokenize(pre_tokenize(text));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_prompt(schema, pieces, PromptTemplate::standard(), tok));
  }
}
BENCHMARK(BM_RenderPrompt)->Arg(1)->Arg(16)->Arg(64);

void BM_BilinearHead(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::Index types = 17;
  Matrix t = random_normal(n, 32, 1.0, rng);
  Matrix p = random_normal(types, 32, 1.0, rng);
  Matrix w = random_normal(32, 32, 0.2, rng);
  RowVector b = random_normal(1, types, 1.0, rng);
  for (auto _ : state) {
    Matrix s = score(t, p, w, b);
    benchmark::DoNotOptimize(ensemble(softmax_probs(s), sigmoid_head_distribution(s)));
  }
}
BENCHMARK(BM_BilinearHead)->Arg(32)->Arg(512);

void BM_MergeAndEvaluate(benchmark::State& state) {
  Rng rng(2);
  std::vector<int> pred(static_cast<std::size_t>(state.range(0))), gold(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = static_cast<int>(rng.below(4));
    gold[i] = static_cast<int>(rng.below(4));
  }
  for (auto _ : state) {
    auto p = to_token_spans(merge_spans(pred));
    auto g = to_token_spans(merge_spans(gold));
    benchmark::DoNotOptimize(evaluate(p, g, 3));
  }
}
BENCHMARK(BM_MergeAndEvaluate)->Arg(64)->Arg(4096);

void BM_EnginePredict(benchmark::State& state) {
  ModelConfig c;
  c.backbone = bench_backbone();
  c.backbone.vocab_size = 0;
  c.lora = {4, 8.0};
  c.prompt_template = "compact";
  Dataset d = generate_synthetic(SyntheticGrammar::standard(), 32, 1);
  auto model = std::make_shared<Model>(Model::create(c, build_vocabulary(d)));
  Engine engine(model, std::make_shared<HashEmbeddingProvider>(c.d_enc), std::make_shared<EmbeddingCache>());
  const std::string text = "Yesterday Jordan finally released a new album according to Maria";
  const EntitySchema schema = synthetic_schema();
  for (auto _ : state) benchmark::DoNotOptimize(engine.predict(text, schema));
}
BENCHMARK(BM_EnginePredict);

void BM_CostProfile(benchmark::State& state) {
  WorkloadStats s;
  s.mean_input_tokens = 60;
  s.mean_entities = 6;
  s.num_types = 9;
  s.mention_tokens = 3;
  s.type_name_tokens = 3;
  s.definition_tokens = 30;
  WorkloadDescriptor jpt = jpt_descriptor(PromptTemplate::standard(), 1.3);
  std::vector<WorkloadDescriptor> methods = generative_descriptors(jpt.prompt_base);
  methods.push_back(jpt);
  for (auto _ : state) benchmark::DoNotOptimize(profile_cost({1.0, 4.0}, methods, s));
}
BENCHMARK(BM_CostProfile);

}  // namespace
}  // namespace jpt

BENCHMARK_MAIN();
