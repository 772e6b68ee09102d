#pragma once

#include <string>

#include "ota/data.hpp"
#include "ota/model.hpp"

namespace ota {

// JSON checkpoint (version 1): model config, variant, vocab, parameter
// tensors, and batch-norm running stats. Doubles serialize with shortest
// round-trip precision, so save/load is lossless.
void save_checkpoint(const std::string& path, const Model& model, const Vocab& vocab);

struct Checkpoint {
  Model model;
  Vocab vocab;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ota
