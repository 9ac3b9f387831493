#include "skd/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "skd/random.hpp"

namespace skd {

namespace le {

void write_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void write_f32(std::string& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32(const unsigned char* p) { return std::bit_cast<float>(read_u32(p)); }

}  // namespace le

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

namespace {

constexpr const char* kFormat = "skd-checkpoint-v1";

std::string tensor_payload(const ModelParams& params) {
  std::string out;
  out.reserve(params.parameter_count() * 4);
  for (const auto& t : params.tensors()) {
    for (double v : t.values) le::write_f32(out, static_cast<float>(v));
  }
  return out;
}

}  // namespace

std::uint64_t model_fingerprint(const ModelParams& params) {
  Fnv1a h;
  h.update(nlohmann::json(params.config()).dump());
  h.update(tensor_payload(params));
  return h.digest();
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["config"] = ckpt.params.config();
  header["tag_vocab"] = ckpt.tag_vocab.names();
  header["token_vocab"] = ckpt.token_vocab.tokens();
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.params.tensors()) tensors.push_back({{"name", t.name}, {"shape", t.shape}});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << header.dump() << '\n' << tensor_payload(ckpt.params);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad checkpoint header: " + e.what(), 1);
  }
  if (header.value("format", "") != kFormat) throw ParseError(path + ": not a " + std::string(kFormat) + " file", 1);

  Checkpoint ckpt{ModelParams(header.at("config").get<EncoderConfig>()),
                  TagVocabulary(header.at("tag_vocab").get<std::vector<std::string>>()),
                  Vocabulary(header.at("token_vocab").get<std::vector<std::string>>())};
  auto& tensors = ckpt.params.tensors();
  const auto& declared = header.at("tensors");
  if (declared.size() != tensors.size()) throw ParseError(path + ": tensor count does not match config", 1);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (declared[k].at("name") != tensors[k].name ||
        declared[k].at("shape").get<std::vector<std::size_t>>() != tensors[k].shape) {
      throw ParseError(path + ": tensor '" + tensors[k].name + "' does not match config", 1);
    }
  }

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != ckpt.params.parameter_count() * 4) {
    throw IoError(path + ": truncated or oversized tensor payload");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (auto& t : tensors) {
    for (double& v : t.values) {
      v = le::read_f32(p);
      p += 4;
    }
  }
  if (ckpt.tag_vocab.size() != ckpt.params.num_tags()) throw ParseError(path + ": tag vocabulary size mismatch", 1);
  if (ckpt.token_vocab.size() != ckpt.params.config().vocab_size) {
    throw ParseError(path + ": token vocabulary size mismatch", 1);
  }
  return ckpt;
}

}  // namespace skd
