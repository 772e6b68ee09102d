#include "ota/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "ota/errors.hpp"

namespace ota {

namespace {
using json = nlohmann::ordered_json;
}

void save_checkpoint(const std::string& path, const Model& model, const Vocab& vocab) {
  const ModelConfig& cfg = model.config();
  json j;
  j["format"] = "ota-checkpoint";
  j["version"] = 1;
  j["variant"] = model.variant() == Variant::Ota ? "ota" : "baseline";
  j["config"] = {
      {"d_model", cfg.d_model},
      {"encoder_blocks", cfg.encoder_blocks},
      {"encoder_heads", cfg.encoder_heads},
      {"max_seq_len", cfg.max_seq_len},
      {"precomputed_embeddings", cfg.precomputed_embeddings},
  };
  j["vocab"] = {{"min_frequency", vocab.min_frequency}, {"tokens", vocab.tokens}};
  json tensors = json::object();
  const ParamStore& p = model.params();
  for (size_t i = 0; i < p.count(); ++i) {
    const Tensor& t = p.tensor(i);
    tensors[p.name(i)] = {{"shape", t.shape()}, {"data", t.values()}};
  }
  j["tensors"] = tensors;
  json bn = json::object();
  for (const auto& [name, state] : model.bn_states())
    bn[name] = {{"mean", state.running_mean},
                {"var", state.running_var},
                {"initialized", state.initialized}};
  j["batch_norm"] = bn;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump();
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("format", "") != "ota-checkpoint" || j.value("version", 0) != 1)
    throw IoError("unsupported checkpoint format/version in " + path);

  ModelConfig cfg;
  const json& jc = j.at("config");
  cfg.d_model = jc.at("d_model").get<int>();
  cfg.encoder_blocks = jc.at("encoder_blocks").get<int>();
  cfg.encoder_heads = jc.at("encoder_heads").get<int>();
  cfg.max_seq_len = jc.at("max_seq_len").get<int>();
  cfg.precomputed_embeddings = jc.at("precomputed_embeddings").get<bool>();
  const Variant variant =
      j.at("variant").get<std::string>() == "ota" ? Variant::Ota : Variant::Baseline;

  Vocab vocab;
  vocab.min_frequency = j.at("vocab").at("min_frequency").get<int>();
  vocab.tokens = j.at("vocab").at("tokens").get<std::vector<std::string>>();
  for (size_t i = 0; i < vocab.tokens.size(); ++i)
    vocab.index[vocab.tokens[i]] = static_cast<int>(i) + 2;

  Checkpoint ckpt{Model(cfg, variant, vocab.size(), 0), std::move(vocab)};
  ParamStore& p = ckpt.model.params();
  const json& tensors = j.at("tensors");
  for (size_t i = 0; i < p.count(); ++i) {
    const std::string& name = p.name(i);
    if (!tensors.contains(name)) throw IoError("checkpoint missing tensor " + name);
    const json& jt = tensors.at(name);
    const auto shape = jt.at("shape").get<std::vector<int>>();
    if (shape != p.tensor(i).shape())
      throw IoError("checkpoint tensor " + name + " has shape " + shape_str(shape) +
                    ", expected " + shape_str(p.tensor(i).shape()));
    p.tensor(i).values() = jt.at("data").get<std::vector<double>>();
  }
  for (auto& [name, state] : ckpt.model.bn_states()) {
    const json& jb = j.at("batch_norm").at(name);
    state.running_mean = jb.at("mean").get<std::vector<double>>();
    state.running_var = jb.at("var").get<std::vector<double>>();
    state.initialized = jb.at("initialized").get<bool>();
  }
  return ckpt;
}

}  // namespace ota
