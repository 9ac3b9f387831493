#include "skd/score_cache.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "skd/checkpoint.hpp"
#include "skd/parallel.hpp"

namespace skd {

namespace {
constexpr const char* kFormat = "skd-score-cache-v1";
}

ScoreLattice TeacherScoreCache::lattice(std::size_t index) const {
  const auto rec = record(index);
  ScoreLattice out(lengths_[index], header_.num_tags);
  auto dst = out.values();
  for (std::size_t k = 0; k < rec.size(); ++k) dst[k] = rec[k];
  reads_->fetch_add(1, std::memory_order_relaxed);
  return out;
}

std::span<const float> TeacherScoreCache::record(std::size_t index) const {
  if (index >= header_.records) throw InvalidInput("cache record index out of range");
  const std::size_t size = LatticeShape{lengths_[index], header_.num_tags}.size();
  return {scores_.data() + offsets_[index], size};
}

void TeacherScoreCache::check(const Dataset& dataset, std::optional<std::uint64_t> teacher) const {
  if (header_.fingerprint != fingerprint(dataset) || header_.records != dataset.size()) {
    throw StaleCache("score cache was built from a different dataset");
  }
  if (header_.num_tags != dataset.num_tags()) throw StaleCache("score cache tag count differs from dataset");
  if (teacher && *teacher != header_.teacher) throw StaleCache("score cache was built by a different teacher");
}

TeacherScoreCache TeacherScoreCache::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score cache '" + path + "'");
  std::string line;
  std::getline(in, line);
  TeacherScoreCache cache;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.value("format", "") != kFormat) throw ParseError(path + ": not a score cache", 1);
    cache.header_.fingerprint = parse_hex64(h.at("fingerprint").get<std::string>());
    cache.header_.num_tags = h.at("num_tags").get<std::size_t>();
    cache.header_.teacher = parse_hex64(h.at("teacher").get<std::string>());
    cache.header_.records = h.at("records").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad score cache header: " + e.what(), 1);
  }
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(body.data());
  const auto* end = p + body.size();
  for (std::size_t r = 0; r < cache.header_.records; ++r) {
    if (end - p < 4) throw IoError(path + ": truncated score cache");
    const std::size_t len = le::read_u32(p);
    p += 4;
    if (len == 0) throw IoError(path + ": zero-length record");
    const std::size_t size = LatticeShape{len, cache.header_.num_tags}.size();
    if (static_cast<std::size_t>(end - p) < size * 4) throw IoError(path + ": truncated score cache");
    cache.offsets_.push_back(cache.scores_.size());
    cache.lengths_.push_back(len);
    for (std::size_t k = 0; k < size; ++k, p += 4) cache.scores_.push_back(le::read_f32(p));
  }
  if (p != end) throw IoError(path + ": trailing bytes after the last record");
  return cache;
}

TeacherScoreCache build_cache(const ModelParams& teacher, const Dataset& dataset, const std::string& path,
                              std::size_t threads) {
  if (teacher.num_tags() != dataset.num_tags()) {
    throw InvalidInput("teacher has " + std::to_string(teacher.num_tags()) + " tags, dataset has " +
                       std::to_string(dataset.num_tags()));
  }
  std::vector<ScoreLattice> lattices(dataset.size());
  parallel_chunks(dataset.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) lattices[i] = encode(teacher, dataset.sentences[i].tokens);
  });

  nlohmann::json h{{"format", kFormat},
                   {"fingerprint", hex64(fingerprint(dataset))},
                   {"num_tags", dataset.num_tags()},
                   {"teacher", hex64(model_fingerprint(teacher))},
                   {"records", dataset.size()}};
  std::string body;
  for (const auto& x : lattices) {
    le::write_u32(body, static_cast<std::uint32_t>(x.length()));
    for (double v : x.values()) le::write_f32(body, static_cast<float>(v));
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << h.dump() << '\n' << body;
    if (!out) throw IoError("write failed for '" + path + "'");
  }
  return TeacherScoreCache::read(path);
}

TeacherScoreCache load_cache(const std::string& path, const Dataset& dataset, const ModelParams* teacher) {
  auto cache = TeacherScoreCache::read(path);
  cache.check(dataset, teacher ? std::optional(model_fingerprint(*teacher)) : std::nullopt);
  return cache;
}

ScoreLattice round_to_f32(const ScoreLattice& lattice) {
  ScoreLattice out = lattice;
  for (double& v : out.values()) v = static_cast<float>(v);
  return out;
}

}  // namespace skd
