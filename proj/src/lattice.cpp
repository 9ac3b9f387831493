#include "skd/lattice.hpp"

#include <cmath>
#include <string>

namespace skd {

void validate(const ScoreLattice& lattice) {
  for (double v : lattice.values()) {
    if (!std::isfinite(v)) throw InvalidInput("lattice contains a non-finite score");
  }
}

void validate(const TagSequence& tags, const LatticeShape& shape) {
  if (tags.size() != shape.length) {
    throw InvalidInput("tag sequence length " + std::to_string(tags.size()) +
                       " does not match lattice length " + std::to_string(shape.length));
  }
  for (Tag t : tags) {
    if (t < 0 || static_cast<std::size_t>(t) >= shape.num_tags) {
      throw InvalidInput("tag index " + std::to_string(t) + " out of range");
    }
  }
}

namespace {

void check_slice(std::span<const double> slice, double tolerance, const char* what) {
  double sum = 0.0;
  for (double p : slice) {
    if (!std::isfinite(p) || p < -tolerance || p > 1.0 + tolerance) {
      throw InvalidInput(std::string(what) + " entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw InvalidInput(std::string(what) + " does not sum to one");
  }
}

}  // namespace

void validate(const PairMarginalTable& marginals, double tolerance) {
  check_slice(marginals.start_span(), tolerance, "start marginal");
  for (std::size_t l = 0; l + 1 < marginals.length(); ++l) {
    check_slice(marginals.pair_block(l), tolerance, "pair marginal");
  }
}

}  // namespace skd
