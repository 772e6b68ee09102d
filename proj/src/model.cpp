#include "ota/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ota {

OntologyGraph build_ontology() {
  OntologyGraph g;
  // rows: age, ethnicity, gender, religion, other_hate
  // cols: demographic, cultural, gender, religious, complexity, diversity
  g.node_features = Tensor::from({5, 6},
                                 {
                                     1.0, 0.0, 0.0, 0.0, 0.7, 0.3,  // age
                                     1.0, 1.0, 0.0, 0.0, 0.6, 0.7,  // ethnicity
                                     1.0, 0.0, 1.0, 0.0, 0.6, 0.5,  // gender
                                     1.0, 1.0, 0.0, 1.0, 0.9, 0.8,  // religion
                                     0.5, 0.5, 0.5, 0.5, 0.4, 0.9,  // other_hate
                                 });
  g.adjacency = Tensor({5, 5});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) g.adjacency.at(i, j) = i == j ? 0.0 : 1.0;
  return g;
}

Tensor normalize_adjacency(const Tensor& a) {
  if (a.ndim() != 2 || a.rows() != a.cols())
    throw ShapeError("normalize_adjacency: adjacency must be square");
  const int n = a.rows();
  for (int i = 0; i < n; ++i) {
    if (a.at(i, i) != 0.0) throw ValueError("normalize_adjacency: nonzero diagonal");
    for (int j = 0; j < n; ++j)
      if (a.at(i, j) != a.at(j, i))
        throw ValueError("normalize_adjacency: adjacency not symmetric");
  }
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (int j = 0; j < n; ++j) deg += a.at(i, j);
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  Tensor out({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double tilde = a.at(i, j) + (i == j ? 1.0 : 0.0);
      out.at(i, j) = inv_sqrt_deg[static_cast<size_t>(i)] * tilde *
                     inv_sqrt_deg[static_cast<size_t>(j)];
    }
  return out;
}

EmbeddingFile EmbeddingFile::load(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
    throw IoError("embedding file: expected `dim=<d>` on line 1");
  EmbeddingFile f;
  f.dim_ = std::stoi(line.substr(4));
  if (f.dim_ != expected_dim)
    throw IoError("embedding file dim=" + std::to_string(f.dim_) +
                  " does not match d_model=" + std::to_string(expected_dim));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    int id = 0, seq_len = 0;
    if (!(row >> id >> seq_len) || seq_len < 1)
      throw IoError("embedding file line " + std::to_string(lineno) + ": bad record header");
    std::vector<double> vals(static_cast<size_t>(seq_len) * f.dim_);
    for (auto& v : vals)
      if (!(row >> v))
        throw IoError("embedding file line " + std::to_string(lineno) +
                      ": expected " + std::to_string(vals.size()) + " values");
    f.records_[id] = {seq_len, std::move(vals)};
  }
  return f;
}

const std::pair<int, std::vector<double>>& EmbeddingFile::lookup(int sample_id) const {
  auto it = records_.find(sample_id);
  if (it == records_.end())
    throw IoError("embedding file: no record for sample id " + std::to_string(sample_id));
  return it->second;
}

Model::Model(ModelConfig cfg, Variant variant, int vocab_size, uint64_t seed)
    : cfg_(cfg), variant_(variant), vocab_size_(vocab_size) {
  graph_ = build_ontology();
  norm_adj_ = normalize_adjacency(graph_.adjacency);
  RngStream rng(seed, "param_init");
  const int d = cfg_.d_model;

  auto add_linear = [&](const std::string& prefix, int in, int out) {
    params_.add(prefix + ".w", {in, out}, in, rng, true);
    params_.add_zeros(prefix + ".b", {out});
  };
  auto add_norm_affine = [&](const std::string& prefix, int width) {
    params_.add_const(prefix + ".gamma", {width}, 1.0);
    params_.add_zeros(prefix + ".beta", {width});
  };

  if (!cfg_.precomputed_embeddings) {
    params_.add("embed.tok", {vocab_size, d}, d, rng, true);
    params_.add("embed.pos", {cfg_.max_seq_len, d}, d, rng, true);
    for (int b = 0; b < cfg_.encoder_blocks; ++b) {
      const std::string p = "enc" + std::to_string(b);
      add_linear(p + ".attn.q", d, d);
      add_linear(p + ".attn.k", d, d);
      add_linear(p + ".attn.v", d, d);
      add_linear(p + ".attn.out", d, d);
      add_norm_affine(p + ".ln1", d);
      add_linear(p + ".ffn.1", d, 4 * d);
      add_linear(p + ".ffn.2", 4 * d, d);
      add_norm_affine(p + ".ln2", d);
    }
  }

  if (variant_ == Variant::Ota) {
    add_linear("ota.q", d, d);
    add_linear("ota.k", d, d);
    add_linear("ota.v", d, d);
    add_linear("gcn.0", 6, ModelConfig::kGcnHidden);
    add_norm_affine("gcn.0.ln", ModelConfig::kGcnHidden);
    add_linear("gcn.1", ModelConfig::kGcnHidden, ModelConfig::kGcnHidden);
    add_norm_affine("gcn.1.ln", ModelConfig::kGcnHidden);
    add_linear("gcn.2", ModelConfig::kGcnHidden, ModelConfig::kGcnOut);
    add_linear("head.1", cfg_.fused_width(), cfg_.head1_width());
    add_norm_affine("head.1.bn", cfg_.head1_width());
    bn_["head.1.bn"] = BatchNormState{};
    add_linear("head.2", cfg_.head1_width(), cfg_.head2_width());
    add_norm_affine("head.2.ln", cfg_.head2_width());
    add_linear("head.3", cfg_.head2_width(), kNumClasses);
  } else {
    add_linear("head.1", cfg_.baseline_in(), cfg_.baseline_h1());
    add_norm_affine("head.1.bn", cfg_.baseline_h1());
    bn_["head.1.bn"] = BatchNormState{};
    add_linear("head.2", cfg_.baseline_h1(), cfg_.baseline_h2());
    add_norm_affine("head.2.ln", cfg_.baseline_h2());
    add_linear("head.3", cfg_.baseline_h2(), kNumClasses);
  }
}

Tensor Model::linear(const std::string& prefix, const Tensor& x, GradTape* tape) {
  return add_rowvec(matmul(x, params_[prefix + ".w"], tape), params_[prefix + ".b"], tape);
}

Tensor Model::encoder_block(int index, const Tensor& h, const std::vector<uint8_t>& mask,
                            int batch, int len, GradTape* tape) {
  const std::string p = "enc" + std::to_string(index);
  Tensor q = linear(p + ".attn.q", h, tape);
  Tensor k = linear(p + ".attn.k", h, tape);
  Tensor v = linear(p + ".attn.v", h, tape);
  Tensor attn = masked_attention(q, k, v, mask, batch, len, cfg_.encoder_heads, tape);
  attn = linear(p + ".attn.out", attn, tape);
  Tensor x = layer_norm(add(h, attn, tape), params_[p + ".ln1.gamma"],
                        params_[p + ".ln1.beta"], 1e-5, tape);
  Tensor f = relu(linear(p + ".ffn.1", x, tape), tape);
  f = linear(p + ".ffn.2", f, tape);
  return layer_norm(add(x, f, tape), params_[p + ".ln2.gamma"], params_[p + ".ln2.beta"],
                    1e-5, tape);
}

Tensor Model::embed_sequence(const EncodedBatch& batch, Mode mode, GradTape* tape,
                             const EmbeddingFile* embeddings) {
  const int b = batch.batch, l = batch.len, d = cfg_.d_model;
  if (cfg_.precomputed_embeddings) {
    if (!embeddings)
      throw ValueError("embed_sequence: precomputed mode requires an embedding file");
    Tensor h({b * l, d});
    for (int i = 0; i < b; ++i) {
      const auto& [seq_len, vals] = embeddings->lookup(batch.sample_ids[static_cast<size_t>(i)]);
      const int n = std::min(seq_len, l);
      for (int t = 0; t < n; ++t)
        for (int j = 0; j < d; ++j)
          h[(static_cast<int64_t>(i) * l + t) * d + j] =
              vals[static_cast<size_t>(t) * d + j];
    }
    return h;
  }
  (void)mode;
  Tensor tok = embedding_lookup(params_["embed.tok"], batch.token_ids, b, l, tape);
  std::vector<int> pos_ids(static_cast<size_t>(b) * l);
  for (int i = 0; i < b; ++i)
    for (int t = 0; t < l; ++t) pos_ids[static_cast<size_t>(i) * l + t] = t;
  Tensor pos = embedding_lookup(params_["embed.pos"], pos_ids, b, l, tape);
  Tensor h = add(tok, pos, tape);
  for (int blk = 0; blk < cfg_.encoder_blocks; ++blk)
    h = encoder_block(blk, h, batch.mask, b, l, tape);
  return h;
}

Tensor Model::ota_attention(const Tensor& h, const std::vector<uint8_t>& mask, int batch,
                            int len, GradTape* tape) {
  // single head, no output projection, no residual
  Tensor q = linear("ota.q", h, tape);
  Tensor k = linear("ota.k", h, tape);
  Tensor v = linear("ota.v", h, tape);
  return masked_attention(q, k, v, mask, batch, len, 1, tape);
}

Tensor Model::gcn_forward(Mode mode, GradTape* tape, RngStream* dropout_rng) {
  Tensor x = graph_.node_features;  // frozen constants
  for (int layer = 0; layer < 3; ++layer) {
    const std::string p = "gcn." + std::to_string(layer);
    x = matmul(norm_adj_, x, tape);
    x = linear(p, x, tape);
    if (layer < 2) {
      x = relu(x, tape);
      x = layer_norm(x, params_[p + ".ln.gamma"], params_[p + ".ln.beta"], 1e-5, tape);
      if (mode == Mode::Train && dropout_rng)
        x = dropout(x, cfg_.dropout_gcn, *dropout_rng, mode, tape);
    }
  }
  return x;  // [5, 32], final layer raw
}

Tensor Model::classify(const Tensor& fused, Mode mode, GradTape* tape,
                       RngStream* dropout_rng) {
  RngStream fallback(0, "eval_dropout_unused");
  RngStream& rng = dropout_rng ? *dropout_rng : fallback;
  Tensor x = linear("head.1", fused, tape);
  x = batch_norm(x, params_["head.1.bn.gamma"], params_["head.1.bn.beta"],
                 bn_["head.1.bn"], mode, 1e-5, 0.1, tape);
  x = relu(x, tape);
  x = dropout(x, cfg_.dropout_head1, rng, mode, tape);
  x = linear("head.2", x, tape);
  x = layer_norm(x, params_["head.2.ln.gamma"], params_["head.2.ln.beta"], 1e-5, tape);
  x = relu(x, tape);
  x = dropout(x, cfg_.dropout_head2, rng, mode, tape);
  return linear("head.3", x, tape);
}

std::vector<uint8_t> Model::effective_mask(const EncodedBatch& batch,
                                           const EmbeddingFile* embeddings) const {
  if (!cfg_.precomputed_embeddings) return batch.mask;
  // precomputed mode: real positions are the record's seq_len, truncated
  std::vector<uint8_t> mask(static_cast<size_t>(batch.batch) * batch.len, 0);
  for (int i = 0; i < batch.batch; ++i) {
    const int n = std::min(embeddings->lookup(batch.sample_ids[static_cast<size_t>(i)]).first,
                           batch.len);
    for (int t = 0; t < n; ++t) mask[static_cast<size_t>(i) * batch.len + t] = 1;
  }
  return mask;
}

Tensor Model::forward(const EncodedBatch& batch, Mode mode, GradTape* tape,
                      RngStream* dropout_rng, const EmbeddingFile* embeddings) {
  RngStream fallback(0, "eval_dropout_unused");
  RngStream& rng = dropout_rng ? *dropout_rng : fallback;
  const std::vector<uint8_t> mask = effective_mask(batch, embeddings);
  Tensor h = embed_sequence(batch, mode, tape, embeddings);
  if (variant_ == Variant::Ota) {
    Tensor attn = ota_attention(h, mask, batch.batch, batch.len, tape);
    Tensor text_vec = masked_mean_pool(attn, mask, batch.batch, batch.len, tape);
    Tensor nodes = gcn_forward(mode, tape, dropout_rng);
    Tensor onto_vec = col_mean(nodes, tape);
    Tensor fused = concat_broadcast(text_vec, onto_vec, tape);
    fused = dropout(fused, cfg_.dropout_fusion, rng, mode, tape);
    return classify(fused, mode, tape, dropout_rng);
  }
  Tensor text_vec = masked_mean_pool(h, mask, batch.batch, batch.len, tape);
  Tensor x = dropout(text_vec, cfg_.dropout_fusion, rng, mode, tape);
  return classify(x, mode, tape, dropout_rng);
}

std::vector<int> Model::predict(const EncodedBatch& batch, const EmbeddingFile* embeddings) {
  Tensor logits = forward(batch, Mode::Eval, nullptr, nullptr, embeddings);
  std::vector<int> preds(static_cast<size_t>(batch.batch));
  for (int i = 0; i < batch.batch; ++i) preds[static_cast<size_t>(i)] = argmax_row(logits, i);
  return preds;
}

int argmax_row(const Tensor& logits, int row) {
  int best = 0;
  for (int j = 1; j < logits.cols(); ++j)
    if (logits.at(row, j) > logits.at(row, best)) best = j;
  return best;
}

ParamCount Model::count_parameters() const {
  ParamCount pc;
  auto component_of = [](const std::string& name) {
    const size_t dot = name.find('.');
    std::string head = name.substr(0, dot);
    if (head == "enc" || name.rfind("enc", 0) == 0) return std::string("encoder");
    if (head == "embed") return std::string("embedding");
    if (head == "ota") return std::string("ota_attention");
    if (head == "gcn") return std::string("gcn");
    if (head == "head") return std::string("classifier_head");
    return head;
  };
  std::map<std::string, int64_t> acc;
  for (size_t i = 0; i < params_.count(); ++i) {
    acc[component_of(params_.name(i))] += params_.tensor(i).size();
    pc.total += params_.tensor(i).size();
  }
  for (const auto& [k, v] : acc) pc.per_component.emplace_back(k, v);
  return pc;
}

Model Model::clone_with_params(const ParamStore& p) const {
  Model m(cfg_, variant_, vocab_size_, 0);
  m.params_.copy_values_from(p);
  m.bn_ = bn_;
  return m;
}

}  // namespace ota
