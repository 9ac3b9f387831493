#pragma once

#include <cstddef>
#include <vector>

#include "skd/lattice.hpp"

namespace skd {

// Unnormalized log-score: start[y_1] + sum_l pair(l, y_l, y_{l+1}),
// accumulated left to right.
double score_sequence(const ScoreLattice& lattice, const TagSequence& tags);

// log Z(x) by the forward algorithm in log space.
double log_partition(const ScoreLattice& lattice);

struct ForwardBackward {
  double log_partition = 0.0;
  PairMarginalTable marginals;
};

// Forward-backward pass returning log Z(x) and the start and pair posteriors.
ForwardBackward forward_backward(const ScoreLattice& lattice);

PairMarginalTable pair_marginals(const ScoreLattice& lattice);

struct ScoredSequence {
  TagSequence tags;
  double score = 0.0;
  bool operator==(const ScoredSequence&) const = default;
};

// Highest-scoring sequence. Among equal-scoring sequences the
// lexicographically smallest is returned, which is what picking the lowest
// tag index at each decoding step yields. `score` equals
// score_sequence(lattice, tags) exactly.
ScoredSequence viterbi(const ScoreLattice& lattice);

// The min(k, N^L) best sequences ordered by score (descending), ties
// broken lexicographically. kbest(x, k) is a prefix of kbest(x, k + 1).
std::vector<ScoredSequence> kbest(const ScoreLattice& lattice, std::size_t k);

struct EnumeratedSequence {
  TagSequence tags;
  double score = 0.0;
  double probability = 0.0;
};

inline constexpr std::size_t kEnumerationGuard = 100000;

// Every sequence in lexicographic order with its score and normalized
// probability. Throws OracleTooLarge when N^L exceeds `guard`.
std::vector<EnumeratedSequence> enumerate_all(const ScoreLattice& lattice,
                                              std::size_t guard = kEnumerationGuard);

// N^L, saturating at `cap + 1`.
std::size_t output_space_size(const LatticeShape& shape, std::size_t cap);

}  // namespace skd
