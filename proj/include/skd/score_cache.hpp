#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skd/dataset.hpp"
#include "skd/lattice.hpp"
#include "skd/model.hpp"

namespace skd {

// Precomputed teacher sub-structure scores for every sentence of a dataset.
//
// File layout: one JSON header line
//   {"format":"skd-score-cache-v1","fingerprint":<hex>,"num_tags":N,"teacher":<hex>,"records":n}
// then, per sentence in dataset order, a little-endian uint32 length L
// followed by N + (L-1)*N*N little-endian float32 scores in lattice layout.
class TeacherScoreCache {
 public:
  struct Header {
    std::uint64_t fingerprint = 0;  // fingerprint(dataset)
    std::size_t num_tags = 0;
    std::uint64_t teacher = 0;  // model_fingerprint(teacher)
    std::size_t records = 0;
  };

  const Header& header() const { return header_; }
  std::size_t size() const { return header_.records; }

  // Scores of sentence `index`, widened to double.
  ScoreLattice lattice(std::size_t index) const;
  std::span<const float> record(std::size_t index) const;

  // Number of lattice() calls served so far.
  std::uint64_t reads() const { return reads_->load(std::memory_order_relaxed); }

  // Throws StaleCache unless the header matches `dataset` (and `teacher`, if given).
  void check(const Dataset& dataset, std::optional<std::uint64_t> teacher = std::nullopt) const;

  static TeacherScoreCache read(const std::string& path);

 private:
  Header header_;
  std::vector<float> scores_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> lengths_;
  std::unique_ptr<std::atomic<std::uint64_t>> reads_ = std::make_unique<std::atomic<std::uint64_t>>(0);
};

// Encodes every sentence once with the teacher and writes the cache file.
// Sentences may be encoded on `threads` workers; records are written in order.
TeacherScoreCache build_cache(const ModelParams& teacher, const Dataset& dataset, const std::string& path,
                              std::size_t threads = 1);

// Reads a cache and checks it against the dataset (and optionally the teacher).
TeacherScoreCache load_cache(const std::string& path, const Dataset& dataset,
                             const ModelParams* teacher = nullptr);

// Entry-wise float32 rounding, i.e. what a cache round trip stores.
ScoreLattice round_to_f32(const ScoreLattice& lattice);

}  // namespace skd
