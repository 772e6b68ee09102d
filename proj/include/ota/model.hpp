#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ota/data.hpp"
#include "ota/params.hpp"
#include "ota/tensor.hpp"

namespace ota {

// Fixed 5-node complete graph over the class categories with hand-specified
// 6-dimensional node features (columns: demographic, cultural, gender,
// religious, complexity, diversity). Node order matches kLabelNames.
struct OntologyGraph {
  Tensor node_features;  // [5,6], constants
  Tensor adjacency;      // [5,5], {0,1}, zero diagonal
};

OntologyGraph build_ontology();

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
Tensor normalize_adjacency(const Tensor& a);

enum class Variant { Ota, Baseline };

struct ModelConfig {
  int d_model = 64;
  int encoder_blocks = 2;
  int encoder_heads = 2;
  int max_seq_len = 128;
  // GCN dims fixed at 6 -> 64 -> 64 -> 32
  static constexpr int kGcnHidden = 64;
  static constexpr int kGcnOut = 32;
  double dropout_fusion = 0.3;
  double dropout_head1 = 0.2;
  double dropout_head2 = 0.1;
  double dropout_gcn = 0.1;
  bool precomputed_embeddings = false;

  int fused_width() const { return d_model + kGcnOut; }
  // classifier dims: (d+32) -> (d+32)/2 -> (d+32)/4 -> 5 (800->400->200->5 at d=768)
  int head1_width() const { return fused_width() / 2; }
  int head2_width() const { return fused_width() / 4; }
  // baseline head dims: d -> d/2 -> d/4 -> 5
  int baseline_in() const { return d_model; }
  int baseline_h1() const { return d_model / 2; }
  int baseline_h2() const { return d_model / 4; }
};

// Precomputed per-token embedding file: line 1 `dim=<d>`, then one record per
// sample: `<id>\t<seq_len>\t<seq_len*d reals>` row-major.
class EmbeddingFile {
 public:
  static EmbeddingFile load(const std::string& path, int expected_dim);
  int dim() const { return dim_; }
  // (seq_len, row-major values); throws on missing id
  const std::pair<int, std::vector<double>>& lookup(int sample_id) const;

 private:
  int dim_ = 0;
  std::map<int, std::pair<int, std::vector<double>>> records_;
};

struct ParamCount {
  std::vector<std::pair<std::string, int64_t>> per_component;
  int64_t total = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, Variant variant, int vocab_size, uint64_t seed);

  // logits [B,5]; dropout_rng drives dropout masks in train mode
  Tensor forward(const EncodedBatch& batch, Mode mode, GradTape* tape,
                 RngStream* dropout_rng, const EmbeddingFile* embeddings = nullptr);

  // exposed for tests / component checks
  Tensor embed_sequence(const EncodedBatch& batch, Mode mode, GradTape* tape,
                        const EmbeddingFile* embeddings);
  Tensor ota_attention(const Tensor& h, const std::vector<uint8_t>& mask, int batch,
                       int len, GradTape* tape);
  Tensor gcn_forward(Mode mode, GradTape* tape, RngStream* dropout_rng);
  Tensor classify(const Tensor& fused, Mode mode, GradTape* tape, RngStream* dropout_rng);

  std::vector<int> predict(const EncodedBatch& batch,
                           const EmbeddingFile* embeddings = nullptr);

  ParamCount count_parameters() const;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  int vocab_size() const { return vocab_size_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::map<std::string, BatchNormState>& bn_states() { return bn_; }
  const std::map<std::string, BatchNormState>& bn_states() const { return bn_; }
  const OntologyGraph& graph() const { return graph_; }
  const Tensor& normalized_adjacency() const { return norm_adj_; }

  Model clone_with_params(const ParamStore& p) const;

  std::vector<uint8_t> effective_mask(const EncodedBatch& batch,
                                      const EmbeddingFile* embeddings) const;

 private:
  Tensor linear(const std::string& prefix, const Tensor& x, GradTape* tape);
  Tensor encoder_block(int index, const Tensor& h, const std::vector<uint8_t>& mask,
                       int batch, int len, GradTape* tape);

  ModelConfig cfg_;
  Variant variant_;
  int vocab_size_;
  ParamStore params_;
  std::map<std::string, BatchNormState> bn_;
  OntologyGraph graph_;
  Tensor norm_adj_;
};

// Lowest index among maximal logits.
int argmax_row(const Tensor& logits, int row);

}  // namespace ota
