#include "jpt/backbone/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "jpt/nn/mlp.hpp"
#include "jpt/util/error.hpp"

namespace jpt {

std::string_view projection_name(Projection p) {
  switch (p) {
    case Projection::kQuery:
      return "q_proj";
    case Projection::kKey:
      return "k_proj";
    case Projection::kValue:
      return "v_proj";
    case Projection::kOutput:
      return "o_proj";
  }
  return "?";
}

Projection parse_projection(std::string_view name) {
  if (name == "q" || name == "q_proj" || name == "query") return Projection::kQuery;
  if (name == "k" || name == "k_proj" || name == "key") return Projection::kKey;
  if (name == "v" || name == "v_proj" || name == "value") return Projection::kValue;
  if (name == "o" || name == "o_proj" || name == "output") return Projection::kOutput;
  throw UsageError("unknown projection '" + std::string(name) + "' (expected q_proj, k_proj, v_proj or o_proj)");
}

void BackboneConfig::validate() const {
  if (vocab_size <= 0) throw ModelError("backbone vocab_size must be positive");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0) throw ModelError("backbone dimensions must be positive");
  if (d_model % n_heads != 0) {
    throw ModelError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                     std::to_string(n_heads));
  }
  if (max_seq_len < 3) throw ModelError("max_seq_len must be at least 3");
}

nlohmann::json to_json(const BackboneConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.ffn_dim()},          {"max_seq_len", c.max_seq_len},
          {"rng_seed", c.rng_seed}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.value("d_ff", 0);
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.rng_seed = j.value("rng_seed", std::uint64_t{0});
  c.validate();
  return c;
}

bool LoraConfig::targets_projection(Projection p) const {
  return std::find(targets.begin(), targets.end(), p) != targets.end();
}

nlohmann::json to_json(const LoraConfig& c) {
  nlohmann::json targets = nlohmann::json::array();
  for (Projection p : c.targets) targets.push_back(std::string(projection_name(p)));
  return {{"rank", c.rank}, {"alpha", c.alpha}, {"targets", targets}};
}

LoraConfig lora_config_from_json(const nlohmann::json& j) {
  LoraConfig c;
  c.rank = j.at("rank").get<int>();
  c.alpha = j.at("alpha").get<double>();
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& t : j.at("targets")) c.targets.push_back(parse_projection(t.get<std::string>()));
  }
  return c;
}

namespace {

std::string layer_prefix(int layer) { return "backbone.layer" + std::to_string(layer); }

}  // namespace

std::string projection_weight_name(int layer, Projection p) {
  return layer_prefix(layer) + ".attn." + std::string(projection_name(p));
}
std::string lora_a_name(int layer, Projection p) {
  return "lora.layer" + std::to_string(layer) + "." + std::string(projection_name(p)) + ".A";
}
std::string lora_b_name(int layer, Projection p) {
  return "lora.layer" + std::to_string(layer) + "." + std::string(projection_name(p)) + ".B";
}

ParamSet init_backbone(const BackboneConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  const int d = config.d_model;
  const int f = config.ffn_dim();
  ParamSet p;
  p.add("backbone.tok_emb", random_normal(config.vocab_size, d, 1.0, rng));
  p.add("backbone.pos_emb", random_normal(config.max_seq_len, d, 0.5, rng));
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    p.add(pre + ".ln1.gamma", Matrix::Ones(1, d));
    p.add(pre + ".ln1.beta", Matrix::Zero(1, d));
    for (Projection proj : kAllProjections) {
      p.add(projection_weight_name(l, proj), random_normal(d, d, 1.0 / std::sqrt(d), rng));
    }
    p.add(pre + ".ln2.gamma", Matrix::Ones(1, d));
    p.add(pre + ".ln2.beta", Matrix::Zero(1, d));
    p.add(pre + ".ffn.w1", random_normal(f, d, 1.0 / std::sqrt(d), rng));
    p.add(pre + ".ffn.b1", Matrix::Zero(1, f));
    p.add(pre + ".ffn.w2", random_normal(d, f, 1.0 / std::sqrt(f), rng));
    p.add(pre + ".ffn.b2", Matrix::Zero(1, d));
  }
  p.add("backbone.ln_f.gamma", Matrix::Ones(1, d));
  p.add("backbone.ln_f.beta", Matrix::Zero(1, d));
  return p;
}

ParamSet init_lora(const BackboneConfig& config, const LoraConfig& lora, Rng& rng) {
  ParamSet p;
  if (lora.rank <= 0) return p;
  for (const ProjectionShape& s : projection_shapes(config)) {
    if (!lora.targets_projection(s.projection)) continue;
    for (int l = 0; l < config.n_layers; ++l) {
      p.add(lora_a_name(l, s.projection), random_normal(lora.rank, s.d_in, 1.0 / std::sqrt(double(s.d_in)), rng));
      p.add(lora_b_name(l, s.projection), Matrix::Zero(s.d_out, lora.rank));
    }
  }
  return p;
}

void validate_lora(const BackboneConfig& config, const LoraConfig& lora, const ParamSet& lora_params) {
  for (const auto& [name, m] : lora_params.tensors()) {
    bool known = false;
    for (int l = 0; l < config.n_layers && !known; ++l) {
      for (const ProjectionShape& s : projection_shapes(config)) {
        const bool is_a = name == lora_a_name(l, s.projection);
        const bool is_b = name == lora_b_name(l, s.projection);
        if (!is_a && !is_b) continue;
        known = true;
        if (!lora.targets_projection(s.projection)) {
          throw ModelError("adapter tensor '" + name + "' targets " + std::string(projection_name(s.projection)) +
                           ", which is not in the LoRA targets");
        }
        const long long want_rows = is_a ? lora.rank : s.d_out;
        const long long want_cols = is_a ? s.d_in : lora.rank;
        if (m.rows() != want_rows || m.cols() != want_cols) {
          throw ModelError("adapter tensor '" + name + "' is " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(want_rows) + "x" +
                           std::to_string(want_cols));
        }
        break;
      }
    }
    if (!known) throw ModelError("unrecognized adapter tensor '" + name + "'");
  }
}

ParamSet apply_lora(const ParamSet& base, const BackboneConfig& config, const LoraConfig& lora,
                    const ParamSet& lora_params) {
  validate_lora(config, lora, lora_params);
  ParamSet out = base;
  if (lora.rank <= 0) return out;
  for (int l = 0; l < config.n_layers; ++l) {
    for (Projection p : lora.targets) {
      const std::string a = lora_a_name(l, p);
      const std::string b = lora_b_name(l, p);
      if (!lora_params.contains(a) || !lora_params.contains(b)) continue;
      out.at(projection_weight_name(l, p)) += lora.scaling() * (lora_params.at(b) * lora_params.at(a));
    }
  }
  return out;
}

namespace {

ad::Var projection(const Binding& b, const LoraConfig& lora, int layer, Projection p, ad::Var x) {
  ad::Var w = b[projection_weight_name(layer, p)];
  if (lora.rank > 0 && lora.targets_projection(p) && b.contains(lora_a_name(layer, p))) {
    ad::Var delta = ad::matmul(b[lora_b_name(layer, p)], b[lora_a_name(layer, p)]);
    w = ad::add(w, ad::scale(delta, lora.scaling()));
  }
  return ad::matmul_nt(x, w);
}

}  // namespace

ad::Var transformer_forward(const Binding& b, const BackboneConfig& config, const LoraConfig& lora,
                            std::span<const int> token_ids, std::vector<std::vector<Matrix>>* attentions) {
  const int length = static_cast<int>(token_ids.size());
  if (length == 0) throw DataError("empty input");
  if (length > config.max_seq_len) {
    throw DataError("sequence of " + std::to_string(length) + " tokens exceeds the backbone limit of " +
                    std::to_string(config.max_seq_len) + "; split the input into chunks");
  }
  for (int id : token_ids) {
    if (id < 0 || id >= config.vocab_size) throw ModelError("token id " + std::to_string(id) + " outside vocabulary");
  }
  std::vector<int> positions(static_cast<std::size_t>(length));
  std::iota(positions.begin(), positions.end(), 0);

  ad::Var x = ad::add(ad::gather_rows(b["backbone.tok_emb"], token_ids), ad::gather_rows(b["backbone.pos_emb"], positions));
  const int heads = config.n_heads;
  const int dh = config.head_dim();
  const double factor = 1.0 / std::sqrt(static_cast<double>(dh));
  if (attentions != nullptr) attentions->assign(static_cast<std::size_t>(config.n_layers), {});

  for (int l = 0; l < config.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    ad::Var h = ad::layer_norm(x, b[pre + ".ln1.gamma"], b[pre + ".ln1.beta"], kLayerNormEps);
    ad::Var q = projection(b, lora, l, Projection::kQuery, h);
    ad::Var k = projection(b, lora, l, Projection::kKey, h);
    ad::Var v = projection(b, lora, l, Projection::kValue, h);
    std::vector<ad::Var> head_out;
    head_out.reserve(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      ad::Var qh = ad::slice_cols(q, hd * dh, dh);
      ad::Var kh = ad::slice_cols(k, hd * dh, dh);
      ad::Var vh = ad::slice_cols(v, hd * dh, dh);
      ad::Var probs = ad::causal_softmax(ad::matmul_nt(qh, kh), factor);
      if (attentions != nullptr) (*attentions)[static_cast<std::size_t>(l)].push_back(probs.value());
      head_out.push_back(ad::matmul(probs, vh));
    }
    ad::Var attn = projection(b, lora, l, Projection::kOutput, ad::concat_cols(head_out));
    x = ad::add(x, attn);

    h = ad::layer_norm(x, b[pre + ".ln2.gamma"], b[pre + ".ln2.beta"], kLayerNormEps);
    ad::Var f = ad::gelu(ad::add_row(ad::matmul_nt(h, b[pre + ".ffn.w1"]), b[pre + ".ffn.b1"]));
    f = ad::add_row(ad::matmul_nt(f, b[pre + ".ffn.w2"]), b[pre + ".ffn.b2"]);
    x = ad::add(x, f);
  }
  return ad::layer_norm(x, b["backbone.ln_f.gamma"], b["backbone.ln_f.beta"], kLayerNormEps);
}

ToyTransformer::ToyTransformer(BackboneConfig config, std::shared_ptr<const ParamSet> weights, LoraConfig lora,
                               std::shared_ptr<const ParamSet> lora_params)
    : config_(config), weights_(std::move(weights)), lora_(std::move(lora)), lora_params_(std::move(lora_params)) {
  config_.validate();
  if (!weights_) throw ModelError("toy transformer constructed without weights");
  if (lora_params_) validate_lora(config_, lora_, *lora_params_);
}

EncoderOutput ToyTransformer::encode(std::span<const int> token_ids, bool record_attention) const {
  ad::Graph g;
  Binding b(g);
  b.bind(*weights_, nullptr);
  if (lora_params_) b.bind(*lora_params_, nullptr);
  EncoderOutput out;
  out.hidden = transformer_forward(b, config_, lora_, token_ids, record_attention ? &out.attentions : nullptr).value();
  return out;
}

std::vector<ProjectionShape> projection_shapes(const BackboneConfig& config) {
  const long long d = config.d_model;
  return {{Projection::kQuery, d, d}, {Projection::kKey, d, d}, {Projection::kValue, d, d}, {Projection::kOutput, d, d}};
}

long long backbone_parameter_count(const BackboneConfig& config) {
  const long long d = config.d_model;
  const long long f = config.ffn_dim();
  const long long per_layer = 2 * d + 4 * d * d + 2 * d + f * d + f + d * f + d;
  return static_cast<long long>(config.vocab_size) * d + static_cast<long long>(config.max_seq_len) * d +
         config.n_layers * per_layer + 2 * d;
}

TrainableCount count_trainable(const std::vector<ProjectionShape>& per_layer, int n_layers, long long backbone_total,
                               const LoraConfig& lora, long long head_params) {
  TrainableCount c;
  if (lora.rank > 0) {
    for (const ProjectionShape& s : per_layer) {
      if (lora.targets_projection(s.projection)) c.adapter += lora.rank * (s.d_in + s.d_out);
    }
    c.adapter *= n_layers;
  }
  c.trainable = c.adapter + head_params;
  const long long denom = backbone_total + c.trainable;
  c.fraction = denom > 0 ? static_cast<double>(c.trainable) / static_cast<double>(denom) : 0.0;
  return c;
}

TrainableCount count_trainable(const BackboneConfig& config, const LoraConfig& lora, long long head_params) {
  return count_trainable(projection_shapes(config), config.n_layers, backbone_parameter_count(config), lora,
                         head_params);
}

Matrix attention_rollup(const EncoderOutput& output, std::span<const int> second_pass_positions,
                        std::span<const int> first_pass_positions) {
  if (!output.has_attentions()) throw ModelError("attentions were not recorded; rerun encode with attention recording");
  const auto rows = static_cast<Eigen::Index>(second_pass_positions.size());
  const auto cols = static_cast<Eigen::Index>(first_pass_positions.size());
  Matrix sum = Matrix::Zero(rows, cols);
  std::size_t count = 0;
  for (const auto& layer : output.attentions) {
    for (const Matrix& a : layer) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          const int r = second_pass_positions[static_cast<std::size_t>(i)];
          const int c = first_pass_positions[static_cast<std::size_t>(j)];
          if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw ModelError("roll-up position out of range");
          sum(i, j) += a(r, c);
        }
      }
      ++count;
    }
  }
  if (count == 0) throw ModelError("attentions were not recorded; rerun encode with attention recording");
  return sum / static_cast<double>(count);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DataError("unterminated quote in CSV");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string attention_to_csv(const Matrix& m, const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& col_labels) {
  if (static_cast<Eigen::Index>(row_labels.size()) != m.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != m.cols()) {
    throw UsageError("attention CSV labels do not match the matrix shape");
  }
  std::string out;
  for (const auto& c : col_labels) out += "," + csv_field(c);
  out += "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += csv_field(row_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

LabeledMatrix attention_from_csv(const std::string& csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw DataError("empty attention CSV");
  LabeledMatrix out;
  out.col_labels.assign(rows[0].begin() + 1, rows[0].end());
  const auto n_cols = static_cast<Eigen::Index>(out.col_labels.size());
  out.values.resize(static_cast<Eigen::Index>(rows.size() - 1), n_cols);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != n_cols + 1) {
      throw DataError("attention CSV row " + std::to_string(r + 1) + " has the wrong number of fields");
    }
    out.row_labels.push_back(rows[r][0]);
    for (Eigen::Index j = 0; j < n_cols; ++j) {
      try {
        out.values(static_cast<Eigen::Index>(r - 1), j) = std::stod(rows[r][static_cast<std::size_t>(j) + 1]);
      } catch (const std::exception&) {
        throw DataError("attention CSV row " + std::to_string(r + 1) + " has a non-numeric value");
      }
    }
  }
  return out;
}

}  // namespace jpt
