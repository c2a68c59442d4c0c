#include "jpt/train/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "jpt/backbone/transformer.hpp"
#include "jpt/embedding/entity.hpp"
#include "jpt/head/classifier.hpp"
#include "jpt/nn/mlp.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {

namespace {

double eval_loss(ParamSet& params, const LossBuilder& loss) {
  ad::Graph g;
  Binding b(g);
  b.bind(params, nullptr);
  return loss(b).value()(0, 0);
}

}  // namespace

GradCheckResult grad_check(ParamSet& params, const LossBuilder& loss, double eps, std::size_t samples,
                           std::uint64_t seed) {
  if (!(eps > 0)) throw UsageError("grad_check: eps must be positive");
  ParamSet grads = params.zeros_like();
  {
    ad::Graph g;
    Binding b(g);
    b.bind(params, &grads);
    ad::Var l = loss(b);
    if (l.rows() != 1 || l.cols() != 1) throw UsageError("grad_check: loss must be a scalar");
    g.backward(l);
  }
  std::vector<std::pair<Matrix*, Eigen::Index>> coords;
  std::vector<const Matrix*> grad_of;
  for (auto& [name, m] : params.tensors()) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      coords.push_back({&m, i});
      grad_of.push_back(&grads.at(name));
    }
  }
  std::vector<std::size_t> pick(coords.size());
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
  Rng rng(seed);
  rng.shuffle(pick);
  if (pick.size() > samples) pick.resize(samples);

  GradCheckResult out;
  for (std::size_t idx : pick) {
    auto [m, i] = coords[idx];
    const double saved = m->data()[i];
    m->data()[i] = saved + eps;
    const double up = eval_loss(params, loss);
    m->data()[i] = saved - eps;
    const double down = eval_loss(params, loss);
    m->data()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = grad_of[idx]->data()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.coordinates;
  }
  return out;
}

GradCheckTarget parse_grad_check_target(std::string_view name) {
  if (name == "identity_linear") return GradCheckTarget::kIdentityLinear;
  if (name == "token_mlp") return GradCheckTarget::kTokenMlp;
  if (name == "entity_mlp") return GradCheckTarget::kEntityMlp;
  if (name == "bilinear") return GradCheckTarget::kBilinear;
  if (name == "weighted_ce") return GradCheckTarget::kWeightedCe;
  if (name == "focal") return GradCheckTarget::kFocal;
  if (name == "pipeline") return GradCheckTarget::kPipeline;
  throw UsageError("unknown grad-check target '" + std::string(name) + "'");
}

namespace {

Matrix uniform_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<int> random_labels(int n, int classes, Rng& rng) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return y;
}

// Random linear read-out so every output coordinate matters.
ad::Var readout(ad::Var x, const Matrix& weights) {
  ad::Graph& g = x.graph();
  ad::Var w = g.constant(weights);
  ad::Var rows = ad::matmul_nt(x, w);  // n x n
  const Matrix ones = Matrix::Ones(1, rows.rows());
  ad::Var sum = ad::matmul(g.constant(ones), rows);
  return ad::matmul_nt(sum, g.constant(Matrix::Ones(1, rows.cols())));
}

}  // namespace

GradCheckResult grad_check(GradCheckTarget target, std::uint64_t seed, double eps, std::size_t samples) {
  Rng rng(seed);
  ParamSet params;
  LossBuilder loss;
  LossConfig cfg;
  const int n = 24;
  const int d_in = 10;
  const int d_p = 8;
  const int classes = 10;

  switch (target) {
    case GradCheckTarget::kIdentityLinear: {
      init_identity_mlp(params, "lin", d_in);
      params.add("input", uniform_matrix(n, d_in, rng));
      const Matrix w = uniform_matrix(n, d_in, rng);
      loss = [w](const Binding& b) { return readout(mlp_forward(b, {d_in, d_in}, "lin", b["input"]), w); };
      break;
    }
    case GradCheckTarget::kTokenMlp:
    case GradCheckTarget::kEntityMlp: {
      const std::string prefix = target == GradCheckTarget::kTokenMlp ? kTokenMlpPrefix : kEntityMlpPrefix;
      const std::vector<int> dims{d_in, 7, 5, d_p};
      init_mlp(params, prefix, dims, rng);
      for (auto& [name, m] : params.tensors()) {
        if (name.find(".ln.") != std::string::npos || name.ends_with(".b")) m = uniform_matrix(m.rows(), m.cols(), rng);
      }
      params.add("input", uniform_matrix(n, d_in, rng));
      const Matrix w = uniform_matrix(n, d_p, rng);
      loss = [prefix, dims, w](const Binding& b) { return readout(mlp_forward(b, dims, prefix, b["input"]), w); };
      break;
    }
    case GradCheckTarget::kBilinear: {
      init_head(params, kSoftmaxHead, d_p, rng);
      params.at(std::string(kSoftmaxHead) + ".u") = uniform_matrix(1, d_p, rng);
      params.at(std::string(kSoftmaxHead) + ".c") = uniform_matrix(1, 1, rng);
      params.add("tokens", uniform_matrix(n, d_p, rng));
      params.add("entities", uniform_matrix(classes, d_p, rng));
      const Matrix w = uniform_matrix(n, classes, rng);
      loss = [w](const Binding& b) { return readout(score_graph(b, kSoftmaxHead, b["tokens"], b["entities"]), w); };
      break;
    }
    case GradCheckTarget::kWeightedCe:
    case GradCheckTarget::kFocal: {
      Matrix s = uniform_matrix(n, classes, rng) * 3.0;
      params.add("scores", s);
      const std::vector<int> gold = random_labels(n, classes, rng);
      const bool ce = target == GradCheckTarget::kWeightedCe;
      loss = [gold, cfg, ce](const Binding& b) {
        return ce ? weighted_ce_graph(b["scores"], gold, cfg) : focal_graph(b["scores"], gold, cfg);
      };
      break;
    }
    case GradCheckTarget::kPipeline: {
      BackboneConfig bc;
      bc.vocab_size = 11;
      bc.d_model = 8;
      bc.n_layers = 1;
      bc.n_heads = 2;
      bc.max_seq_len = 16;
      bc.rng_seed = seed;
      LoraConfig lc;
      lc.rank = 2;
      lc.alpha = 4.0;
      const ParamSet backbone = init_backbone(bc);
      params = init_lora(bc, lc, rng);
      for (auto& [name, m] : params.tensors()) m = uniform_matrix(m.rows(), m.cols(), rng) * 0.5;
      init_mlp(params, kTokenMlpPrefix, {bc.d_model, 6, d_p}, rng);
      init_mlp(params, kEntityMlpPrefix, {d_in, 6, d_p}, rng);
      init_head(params, kSoftmaxHead, d_p, rng);
      init_head(params, kSigmoidHead, d_p, rng);
      const std::vector<int> ids{1, 4, 2, 9, 3, 10, 4, 2, 9, 3};
      const std::vector<int> second{6, 7, 8, 9};
      const Matrix raw = uniform_matrix(3, d_in, rng);
      const std::vector<int> gold = random_labels(4, 3, rng);
      loss = [backbone, bc, lc, ids, second, raw, gold, cfg](Binding& b) {
        b.bind(backbone, nullptr);
        ad::Var h = transformer_forward(b, bc, lc, ids, nullptr);
        ClassifierGraph heads = classifier_forward(b, ad::gather_rows(h, second), b.graph().constant(raw));
        return ad::add(weighted_ce_graph(heads.softmax_scores, gold, cfg), focal_graph(heads.sigmoid_scores, gold, cfg));
      };
      break;
    }
  }
  return grad_check(params, loss, eps, samples, seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace jpt
