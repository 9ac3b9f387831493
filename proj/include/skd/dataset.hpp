#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "skd/lattice.hpp"
#include "skd/model.hpp"

namespace skd {

// Token-to-id map. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // tokens[0] must be <unk>

  // Id of `word`, inserting it if unseen.
  TokenId add(const std::string& word);
  // Id of `word`, or kUnk.
  TokenId lookup(const std::string& word) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Ordered tag names; index = tag id.
class TagVocabulary {
 public:
  TagVocabulary() = default;
  explicit TagVocabulary(const std::vector<std::string>& names);  // throws on duplicates

  Tag add(const std::string& name);
  // Throws InvalidInput for an unknown name.
  Tag at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(Tag id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool operator==(const TagVocabulary& o) const { return names_ == o.names_; }

  // True when every tag is O or carries a B-/I- prefix.
  bool is_bio() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tag> index_;
};

struct TaggedSentence {
  std::vector<std::string> words;
  std::vector<TokenId> tokens;
  TagSequence tags;
};

struct Dataset {
  std::vector<TaggedSentence> sentences;
  TagVocabulary tag_vocab;
  Vocabulary token_vocab;

  std::size_t size() const { return sentences.size(); }
  std::size_t num_tags() const { return tag_vocab.size(); }
  std::size_t num_tokens() const;

  // Throws InvalidInput when an invariant is broken.
  void validate() const;

  // Sentences [begin, end) sharing this dataset's vocabularies.
  Dataset slice(std::size_t begin, std::size_t end) const;

  std::vector<std::string> tag_names(const TagSequence& tags) const;
};

struct ConllColumns {
  int token = 0;
  int tag = -1;  // negative counts from the end of the line
};

// Reads whitespace-separated columns; blank lines end sentences and
// -DOCSTART- lines are skipped. BIO-style tags are repaired to BIO2.
// Vocabularies are built in first-occurrence order.
Dataset parse_conll(const std::string& path, ConllColumns columns);
Dataset parse_conll(std::istream& in, ConllColumns columns);

// As above, but maps tokens through fixed vocabularies: unseen tokens
// become <unk>, unseen tags are a parse error.
Dataset parse_conll(const std::string& path, ConllColumns columns, const Vocabulary& tokens,
                    const TagVocabulary& tags);
Dataset parse_conll(std::istream& in, ConllColumns columns, const Vocabulary& tokens, const TagVocabulary& tags);

// Two-column "word tag" text, blank line after each sentence.
std::string serialize_conll(const Dataset& dataset);
void write_conll(const Dataset& dataset, const std::string& path);

// An I-X that does not continue B-X or I-X becomes B-X.
std::vector<std::string> repair_bio2(std::vector<std::string> tags);

// 64-bit FNV-1a over serialize_conll(dataset).
std::uint64_t fingerprint(const Dataset& dataset);

// Shuffled index batches for one epoch; the permutation depends only on
// (shuffle_seed, epoch). The last batch may be short.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t num_sentences, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::size_t epoch);

}  // namespace skd
