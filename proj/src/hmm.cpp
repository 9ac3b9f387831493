#include "skd/hmm.hpp"

#include <cmath>
#include <string>

#include "skd/random.hpp"

namespace skd {

namespace {

void check_distribution(const std::vector<double>& p, std::size_t size, const std::string& what) {
  if (p.size() != size) throw InvalidInput(what + " has wrong size");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput(what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput(what + " does not sum to 1");
}

void normalize(std::vector<double>& p) {
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
}

}  // namespace

void HmmSpec::validate() const {
  if (num_states == 0) throw InvalidInput("HMM needs at least one state");
  check_distribution(initial, num_states, "initial distribution");
  if (transition.size() != num_states || emission.size() != num_states) {
    throw InvalidInput("HMM matrices must have one row per state");
  }
  const std::size_t v = vocab_size();
  if (v == 0) throw InvalidInput("HMM emission vocabulary is empty");
  for (std::size_t k = 0; k < num_states; ++k) {
    check_distribution(transition[k], num_states, "transition row " + std::to_string(k));
    check_distribution(emission[k], v, "emission row " + std::to_string(k));
  }
}

void to_json(nlohmann::json& j, const HmmSpec& s) {
  j = nlohmann::json{{"num_states", s.num_states}, {"initial", s.initial}, {"transition", s.transition},
                     {"emission", s.emission}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, HmmSpec& s) {
  j.at("num_states").get_to(s.num_states);
  j.at("initial").get_to(s.initial);
  j.at("transition").get_to(s.transition);
  j.at("emission").get_to(s.emission);
  s.seed = j.value("seed", std::uint64_t{0});
}

Vocabulary hmm_token_vocab(const HmmSpec& spec) {
  Vocabulary v;
  for (std::size_t t = 0; t < spec.vocab_size(); ++t) v.add("w" + std::to_string(t));
  return v;
}

TagVocabulary hmm_tag_vocab(const HmmSpec& spec) {
  TagVocabulary v;
  for (std::size_t k = 0; k < spec.num_states; ++k) v.add("S" + std::to_string(k));
  return v;
}

Dataset hmm_generate(const HmmSpec& spec, std::size_t num_sentences, std::size_t min_len, std::size_t max_len,
                     std::uint64_t stream) {
  spec.validate();
  if (min_len < 1 || min_len > max_len) throw InvalidInput("need 1 <= min_len <= max_len");
  Dataset ds{{}, hmm_tag_vocab(spec), hmm_token_vocab(spec)};
  Rng rng(derive_seed(spec.seed, "hmm-sample-" + std::to_string(stream)));
  ds.sentences.reserve(num_sentences);
  for (std::size_t s = 0; s < num_sentences; ++s) {
    const std::size_t len = min_len + rng.index(max_len - min_len + 1);
    TaggedSentence sent;
    std::size_t state = rng.categorical(spec.initial);
    for (std::size_t l = 0; l < len; ++l) {
      if (l > 0) state = rng.categorical(spec.transition[state]);
      const std::size_t word = rng.categorical(spec.emission[state]);
      sent.tags.push_back(static_cast<Tag>(state));
      sent.tokens.push_back(static_cast<TokenId>(word + 1));  // id 0 is <unk>
      sent.words.push_back("w" + std::to_string(word));
    }
    ds.sentences.push_back(std::move(sent));
  }
  return ds;
}

HmmSpec make_benchmark_hmm(std::size_t num_states, std::size_t vocab_size, std::uint64_t seed) {
  if (num_states == 0 || vocab_size < num_states) throw InvalidInput("benchmark HMM needs vocab_size >= num_states");
  Rng rng(derive_seed(seed, "benchmark-hmm"));
  HmmSpec spec;
  spec.num_states = num_states;
  spec.seed = seed;
  spec.initial.assign(num_states, 0.0);
  for (double& p : spec.initial) p = rng.gamma(1.0);
  normalize(spec.initial);

  spec.transition.assign(num_states, std::vector<double>(num_states, 0.0));
  for (auto& row : spec.transition) {
    for (double& p : row) p = rng.gamma(0.4);
    normalize(row);
  }

  // State k owns token block k; it also emits from block (k + 1) % N, the
  // block of its confusable partner.
  const std::size_t block = vocab_size / num_states;
  spec.emission.assign(num_states, std::vector<double>(vocab_size, 0.0));
  for (std::size_t k = 0; k < num_states; ++k) {
    auto& row = spec.emission[k];
    const std::size_t partner = (k + 1) % num_states;
    for (std::size_t r = 0; r < block; ++r) {
      const double zipf = 1.0 / static_cast<double>(r + 1);
      row[k * block + r] += zipf;
      row[partner * block + r] += 0.5 * zipf;
    }
    for (double& p : row) p += 1e-3 / static_cast<double>(vocab_size);
    normalize(row);
  }
  return spec;
}

}  // namespace skd
