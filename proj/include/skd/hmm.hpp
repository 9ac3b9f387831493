#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "skd/dataset.hpp"

namespace skd {

// Discrete HMM used to sample synthetic tagged corpora. Hidden states are
// the tags ("S0".."S{N-1}"); observations are tokens "w0".."w{V-1}".
struct HmmSpec {
  std::size_t num_states = 0;
  std::vector<double> initial;                  // N
  std::vector<std::vector<double>> transition;  // N x N, row-stochastic
  std::vector<std::vector<double>> emission;    // N x V, row-stochastic
  std::uint64_t seed = 0;

  std::size_t vocab_size() const { return emission.empty() ? 0 : emission.front().size(); }
  // Throws InvalidInput unless every distribution is non-negative and sums to 1 within 1e-9.
  void validate() const;
};

void to_json(nlohmann::json& j, const HmmSpec& spec);
void from_json(const nlohmann::json& j, HmmSpec& spec);

// Vocabularies shared by every corpus sampled from `spec`.
Vocabulary hmm_token_vocab(const HmmSpec& spec);
TagVocabulary hmm_tag_vocab(const HmmSpec& spec);

// Ancestral sampling; lengths uniform in [min_len, max_len]. `stream`
// selects an independent substream of spec.seed (e.g. one per split).
Dataset hmm_generate(const HmmSpec& spec, std::size_t num_sentences, std::size_t min_len, std::size_t max_len,
                     std::uint64_t stream = 0);

// Randomized benchmark HMM: sparse Dirichlet transitions and Zipf-shaped
// emissions over per-state token blocks that overlap with a confusable
// neighbour state, so context is needed to disambiguate.
HmmSpec make_benchmark_hmm(std::size_t num_states, std::size_t vocab_size, std::uint64_t seed);

}  // namespace skd
