#pragma once

#include <cstdint>
#include <string>

#include "skd/dataset.hpp"
#include "skd/model.hpp"

namespace skd {

// A model plus the vocabularies it was trained with.
//
// File layout: one JSON header line (format tag, encoder config, tag and
// token vocabularies, tensor names and shapes), then every tensor as
// little-endian float32 in declared order. Tensors widen back to double on load.
struct Checkpoint {
  ModelParams params;
  TagVocabulary tag_vocab;
  Vocabulary token_vocab;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the encoder config and the float32 image of every tensor.
std::uint64_t model_fingerprint(const ModelParams& params);

namespace le {

void write_f32(std::string& out, float v);
void write_u32(std::string& out, std::uint32_t v);
float read_f32(const unsigned char* p);
std::uint32_t read_u32(const unsigned char* p);

}  // namespace le

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

}  // namespace skd
