#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skd/error.hpp"

namespace skd {

// Length and tag count of a linear-chain lattice.
struct LatticeShape {
  std::size_t length = 0;
  std::size_t num_tags = 0;

  // Number of sub-structures: N start entries plus (L-1)*N*N pair entries.
  std::size_t size() const {
    return num_tags + (length == 0 ? 0 : (length - 1) * num_tags * num_tags);
  }
  bool operator==(const LatticeShape&) const = default;
};

// Dense storage for one value per sub-structure of a lattice.
//
// Layout is a single contiguous buffer: the N start entries, followed by
// (L-1) blocks of N*N pair entries, each block row-major in (prev, next).
// The `Kind` parameter only distinguishes scores, gradients and marginals at
// the type level; all three share this layout.
template <class Kind>
class LatticeTensor {
 public:
  LatticeTensor() = default;
  explicit LatticeTensor(LatticeShape shape, double fill = 0.0)
      : shape_(shape), data_(checked(shape).size(), fill) {}
  LatticeTensor(std::size_t length, std::size_t num_tags, double fill = 0.0)
      : LatticeTensor(LatticeShape{length, num_tags}, fill) {}

  const LatticeShape& shape() const { return shape_; }
  std::size_t length() const { return shape_.length; }
  std::size_t num_tags() const { return shape_.num_tags; }

  double& start(std::size_t tag) { return data_[tag]; }
  double start(std::size_t tag) const { return data_[tag]; }

  // Entry for the transition y_l = prev -> y_{l+1} = next, l in [0, L-1).
  double& pair(std::size_t l, std::size_t prev, std::size_t next) {
    return data_[offset(l, prev, next)];
  }
  double pair(std::size_t l, std::size_t prev, std::size_t next) const {
    return data_[offset(l, prev, next)];
  }

  std::span<double> start_span() { return {data_.data(), shape_.num_tags}; }
  std::span<const double> start_span() const { return {data_.data(), shape_.num_tags}; }

  // N*N block of pair entries at position l.
  std::span<double> pair_block(std::size_t l) {
    return {data_.data() + offset(l, 0, 0), shape_.num_tags * shape_.num_tags};
  }
  std::span<const double> pair_block(std::size_t l) const {
    return {data_.data() + offset(l, 0, 0), shape_.num_tags * shape_.num_tags};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const LatticeTensor&) const = default;

 private:
  static LatticeShape checked(LatticeShape s) {
    if (s.length == 0 || s.num_tags == 0) {
      throw InvalidInput("lattice length and tag count must be positive");
    }
    return s;
  }
  std::size_t offset(std::size_t l, std::size_t prev, std::size_t next) const {
    const std::size_t n = shape_.num_tags;
    return n + (l * n + prev) * n + next;
  }

  LatticeShape shape_;
  std::vector<double> data_;
};

struct ScoreKind;
struct GradKind;
struct MarginalKind;

// Sub-structure scores of one sentence: start[j] scores y_1 = j and
// pair(l, i, j) scores y_{l+1} = j following y_l = i, transition and
// emission already summed.
using ScoreLattice = LatticeTensor<ScoreKind>;

// Partial derivatives of a scalar loss with respect to each lattice entry.
using LatticeGrad = LatticeTensor<GradKind>;

// Posterior marginals: start(j) = p(y_1 = j), pair(l, i, j) = p(y_l = i, y_{l+1} = j).
using PairMarginalTable = LatticeTensor<MarginalKind>;

using Tag = std::int32_t;
using TagSequence = std::vector<Tag>;

// Throws InvalidInput if any entry is NaN or infinite.
void validate(const ScoreLattice& lattice);

// Throws InvalidInput if `tags` does not fit `shape`.
void validate(const TagSequence& tags, const LatticeShape& shape);

// Throws InvalidInput unless every slice sums to one within `tolerance`
// and every entry lies in [0, 1] (with the same slack).
void validate(const PairMarginalTable& marginals, double tolerance = 1e-6);

template <class A, class B>
LatticeTensor<A> reinterpret(const LatticeTensor<B>& other) {
  LatticeTensor<A> out(other.shape());
  auto src = other.values();
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

}  // namespace skd
