#include "skd/dataset.hpp"

#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "skd/random.hpp"

namespace skd {

Vocabulary::Vocabulary() : tokens_{std::string(kUnkToken)}, index_{{std::string(kUnkToken), kUnk}} {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens[0] != kUnkToken) throw InvalidInput("vocabulary must start with <unk>");
  for (const auto& t : tokens) {
    if (!index_.emplace(t, static_cast<TokenId>(tokens_.size())).second) {
      throw InvalidInput("duplicate token '" + t + "' in vocabulary");
    }
    tokens_.push_back(t);
  }
}

TokenId Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(word);
  return it->second;
}

TokenId Vocabulary::lookup(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

TagVocabulary::TagVocabulary(const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (contains(n)) throw InvalidInput("duplicate tag '" + n + "'");
    add(n);
  }
}

Tag TagVocabulary::add(const std::string& name) {
  auto [it, inserted] = index_.emplace(name, static_cast<Tag>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

Tag TagVocabulary::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown tag '" + name + "'");
  return it->second;
}

bool TagVocabulary::is_bio() const {
  if (names_.empty()) return false;
  for (const auto& n : names_) {
    if (n == "O") continue;
    if (n.size() < 3 || (n[0] != 'B' && n[0] != 'I') || n[1] != '-') return false;
  }
  return true;
}

std::size_t Dataset::num_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

void Dataset::validate() const {
  for (const auto& s : sentences) {
    if (s.tokens.empty()) throw InvalidInput("dataset contains an empty sentence");
    if (s.tags.size() != s.tokens.size() || s.words.size() != s.tokens.size()) {
      throw InvalidInput("sentence words, tokens and tags differ in length");
    }
    for (Tag t : s.tags) {
      if (t < 0 || static_cast<std::size_t>(t) >= tag_vocab.size()) throw InvalidInput("tag id out of range");
    }
    for (TokenId t : s.tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= token_vocab.size()) throw InvalidInput("token id out of range");
    }
  }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > sentences.size()) throw InvalidInput("dataset slice out of range");
  Dataset out{{sentences.begin() + static_cast<std::ptrdiff_t>(begin), sentences.begin() + static_cast<std::ptrdiff_t>(end)},
              tag_vocab, token_vocab};
  return out;
}

std::vector<std::string> Dataset::tag_names(const TagSequence& tags) const {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (Tag t : tags) out.push_back(tag_vocab.name(t));
  return out;
}

std::vector<std::string> repair_bio2(std::vector<std::string> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t.size() < 3 || t[0] != 'I' || t[1] != '-') continue;
    const std::string type = t.substr(2);
    const bool continues = i > 0 && tags[i - 1].size() >= 3 && (tags[i - 1][0] == 'B' || tags[i - 1][0] == 'I') &&
                           tags[i - 1][1] == '-' && tags[i - 1].substr(2) == type;
    if (!continues) tags[i] = "B-" + type;
  }
  return tags;
}

namespace {

bool looks_bio(const std::vector<std::string>& tags) {
  for (const auto& t : tags) {
    if (t == "O") continue;
    if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-') return false;
  }
  return true;
}

struct RawSentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::vector<std::size_t> lines;
};

std::vector<RawSentence> read_raw(std::istream& in, ConllColumns columns) {
  std::vector<RawSentence> out;
  RawSentence cur;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!cur.words.empty()) out.push_back(std::move(cur));
    cur = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(std::move(f));
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") continue;
    auto resolve = [&](int c) -> std::optional<std::size_t> {
      const long idx = c < 0 ? static_cast<long>(cols.size()) + c : c;
      if (idx < 0 || idx >= static_cast<long>(cols.size())) return std::nullopt;
      return static_cast<std::size_t>(idx);
    };
    const auto tok = resolve(columns.token);
    const auto tag = resolve(columns.tag);
    if (!tok || !tag) {
      throw ParseError("missing column in CoNLL line '" + line + "'", line_no);
    }
    cur.words.push_back(cols[*tok]);
    cur.tags.push_back(cols[*tag]);
    cur.lines.push_back(line_no);
  }
  flush();
  if (out.empty()) throw EmptyDataset("CoNLL input contains no sentences");

  bool bio = true;
  for (const auto& s : out) bio = bio && looks_bio(s.tags);
  if (bio) {
    for (auto& s : out) s.tags = repair_bio2(std::move(s.tags));
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

Dataset parse_conll(std::istream& in, ConllColumns columns) {
  Dataset ds;
  for (auto& raw : read_raw(in, columns)) {
    TaggedSentence s;
    for (std::size_t i = 0; i < raw.words.size(); ++i) {
      s.tokens.push_back(ds.token_vocab.add(raw.words[i]));
      s.tags.push_back(ds.tag_vocab.add(raw.tags[i]));
    }
    s.words = std::move(raw.words);
    ds.sentences.push_back(std::move(s));
  }
  return ds;
}

Dataset parse_conll(std::istream& in, ConllColumns columns, const Vocabulary& tokens, const TagVocabulary& tags) {
  Dataset ds{{}, tags, tokens};
  for (auto& raw : read_raw(in, columns)) {
    TaggedSentence s;
    for (std::size_t i = 0; i < raw.words.size(); ++i) {
      s.tokens.push_back(tokens.lookup(raw.words[i]));
      if (!tags.contains(raw.tags[i])) throw ParseError("tag '" + raw.tags[i] + "' not in the tag vocabulary", raw.lines[i]);
      s.tags.push_back(tags.at(raw.tags[i]));
    }
    s.words = std::move(raw.words);
    ds.sentences.push_back(std::move(s));
  }
  return ds;
}

Dataset parse_conll(const std::string& path, ConllColumns columns) {
  auto in = open_input(path);
  try {
    return parse_conll(in, columns);
  } catch (const ParseError& e) {
    throw ParseError(path, e);
  }
}

Dataset parse_conll(const std::string& path, ConllColumns columns, const Vocabulary& tokens,
                    const TagVocabulary& tags) {
  auto in = open_input(path);
  try {
    return parse_conll(in, columns, tokens, tags);
  } catch (const ParseError& e) {
    throw ParseError(path, e);
  }
}

std::string serialize_conll(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.sentences) {
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      out += s.words[i];
      out += ' ';
      out += dataset.tag_vocab.name(s.tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << serialize_conll(dataset);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::uint64_t fingerprint(const Dataset& dataset) {
  Fnv1a h;
  h.update(serialize_conll(dataset));
  return h.digest();
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t num_sentences, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::size_t epoch) {
  if (batch_size == 0) throw InvalidInput("batch size must be >= 1");
  std::vector<std::size_t> order(num_sentences);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(shuffle_seed, "shuffle-epoch-" + std::to_string(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < num_sentences; b += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(b + batch_size, num_sentences)));
  }
  return batches;
}

}  // namespace skd
