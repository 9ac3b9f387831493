#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "skd/checkpoint.hpp"
#include "skd/dataset.hpp"
#include "skd/hmm.hpp"
#include "skd/instrumentation.hpp"
#include "skd/random.hpp"
#include "skd/score_cache.hpp"

using namespace skd;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("skd-test-" + name)).string();
}

Dataset parse(const std::string& text, ConllColumns cols = {}) {
  std::istringstream in(text);
  return parse_conll(in, cols);
}

HmmSpec small_hmm() {
  HmmSpec h;
  h.num_states = 2;
  h.initial = {0.6, 0.4};
  h.transition = {{0.7, 0.3}, {0.2, 0.8}};
  h.emission = {{0.5, 0.4, 0.1}, {0.1, 0.3, 0.6}};
  h.seed = 99;
  return h;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("conll parsing") {
  const auto d = parse("-DOCSTART- -X- O\n\nEU NNP B-ORG\nrejects VBZ O\nGerman JJ B-MISC\n\nPeter NNP B-PER\nBlackburn NNP I-PER\n");
  REQUIRE(d.size() == 2);
  CHECK(d.sentences[0].words == std::vector<std::string>{"EU", "rejects", "German"});
  CHECK(d.tag_names(d.sentences[1].tags) == std::vector<std::string>{"B-PER", "I-PER"});
  CHECK(d.tag_vocab.names() == std::vector<std::string>{"B-ORG", "O", "B-MISC", "B-PER", "I-PER"});
  CHECK(d.token_vocab.lookup("Peter") == d.sentences[1].tokens[0]);
  CHECK(d.token_vocab.lookup("never-seen") == Vocabulary::kUnk);
  CHECK(d.num_tokens() == 5);

  // column selection, counted from either end
  const auto pos = parse("EU NNP B-ORG\nrejects VBZ O\n", {0, 1});
  CHECK(pos.tag_names(pos.sentences[0].tags) == std::vector<std::string>{"NNP", "VBZ"});
  const auto neg = parse("EU NNP B-ORG\n", {0, -2});
  CHECK(neg.tag_vocab.names() == std::vector<std::string>{"NNP"});
}

TEST_CASE("conll errors carry line numbers") {
  try {
    parse("a O\nb\nc O\n", {0, 1});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse(""), EmptyDataset);
  CHECK_THROWS_AS(parse("\n\n-DOCSTART- O\n\n"), EmptyDataset);
  CHECK_THROWS_AS(parse_conll(temp_path("does-not-exist.conll"), {}), IoError);

  std::istringstream in("a B-X\nb B-Y\n");
  const Vocabulary v;
  const TagVocabulary tags({"B-X", "O"});
  try {
    parse_conll(in, {}, v, tags);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("bio repair") {
  CHECK(repair_bio2({"I-PER", "I-PER", "O", "I-LOC", "B-LOC", "I-ORG"}) ==
        std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC", "B-LOC", "B-ORG"});
  const auto d = parse("a I-PER\nb I-PER\nc O\n");
  CHECK(d.tag_names(d.sentences[0].tags) == std::vector<std::string>{"B-PER", "I-PER", "O"});
  // non-BIO tag sets are left alone
  const auto pos = parse("a I-PER\nb NN\n");
  CHECK(pos.tag_names(pos.sentences[0].tags) == std::vector<std::string>{"I-PER", "NN"});
  CHECK(d.tag_vocab.is_bio());
  CHECK(!pos.tag_vocab.is_bio());
}

TEST_CASE("serialize round trip and fingerprint") {
  const auto d = parse("EU B-ORG\nrejects O\n\nPeter B-PER\n");
  const std::string text = serialize_conll(d);
  CHECK(text == "EU B-ORG\nrejects O\n\nPeter B-PER\n\n");
  std::istringstream in(text);
  const auto back = parse_conll(in, {});
  CHECK(serialize_conll(back) == text);
  CHECK(fingerprint(back) == fingerprint(d));
  const auto other = parse("EU B-ORG\nrejects O\n\nPeter B-LOC\n");
  CHECK(fingerprint(other) != fingerprint(d));
  const auto path = temp_path("rt.conll");
  write_conll(d, path);
  CHECK(serialize_conll(parse_conll(path, {})) == text);
  std::filesystem::remove(path);
  CHECK(d.slice(1, 2).size() == 1);
  CHECK(d.slice(1, 2).sentences[0].words[0] == "Peter");
  CHECK_THROWS_AS(d.slice(1, 3), InvalidInput);
}

TEST_CASE("vocabularies") {
  Vocabulary v;
  CHECK(v.size() == 1);
  CHECK(v.tokens()[0] == "<unk>");
  CHECK(v.add("x") == 1);
  CHECK(v.add("x") == 1);
  CHECK(v.lookup("y") == 0);
  CHECK_THROWS_AS(TagVocabulary({"O", "O"}), InvalidInput);
  TagVocabulary t({"O", "B-A"});
  CHECK(t.at("B-A") == 1);
  CHECK_THROWS_AS(t.at("I-A"), InvalidInput);
}

TEST_CASE("batch_iter partitions deterministically") {
  for (std::size_t n : {1, 31, 32, 33, 100}) {
    const auto batches = batch_iter(n, 32, 7, 0);
    std::multiset<std::size_t> seen;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (b + 1 < batches.size()) CHECK(batches[b].size() == 32);
      CHECK(!batches[b].empty());
      seen.insert(batches[b].begin(), batches[b].end());
    }
    CHECK(seen.size() == n);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == n);
    CHECK(*seen.rbegin() == n - 1);
  }
  CHECK(batch_iter(100, 8, 7, 3) == batch_iter(100, 8, 7, 3));
  CHECK(batch_iter(100, 8, 7, 3) != batch_iter(100, 8, 7, 4));
  CHECK(batch_iter(100, 8, 7, 3) != batch_iter(100, 8, 8, 3));
  CHECK(batch_iter(0, 8, 7, 3).empty());
  CHECK_THROWS_AS(batch_iter(10, 0, 7, 3), InvalidInput);
}

TEST_CASE("rng helpers") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  Rng r(5);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[r.categorical({1.0, 2.0, 7.0})];
  CHECK(counts[0] / 30000.0 == doctest::Approx(0.1).epsilon(0.1));
  CHECK(counts[2] / 30000.0 == doctest::Approx(0.7).epsilon(0.03));
  double mean = 0;
  for (int i = 0; i < 20000; ++i) mean += r.gamma(0.4) / 20000;
  CHECK(mean == doctest::Approx(0.4).epsilon(0.05));
  for (int i = 0; i < 1000; ++i) CHECK(r.index(7) < 7);
}

TEST_CASE("hmm spec validation and json") {
  auto h = small_hmm();
  CHECK_NOTHROW(h.validate());
  const nlohmann::json j = h;
  const auto back = j.get<HmmSpec>();
  CHECK(back.transition == h.transition);
  CHECK(back.seed == h.seed);
  h.transition[0][0] = 0.71;
  CHECK_THROWS_AS(h.validate(), InvalidInput);
  h = small_hmm();
  h.emission[1] = {1.1, -0.1, 0.0};
  CHECK_THROWS_AS(h.validate(), InvalidInput);
  h = small_hmm();
  h.initial = {1.0};
  CHECK_THROWS_AS(h.validate(), InvalidInput);
}

TEST_CASE("hmm sampling follows the spec") {
  const auto h = small_hmm();
  const auto d = hmm_generate(h, 4000, 5, 15);
  CHECK(d.size() == 4000);
  for (const auto& s : d.sentences) {
    CHECK(s.tags.size() >= 5);
    CHECK(s.tags.size() <= 15);
  }
  // law of large numbers on transitions and emissions
  double trans[2][2] = {{0, 0}, {0, 0}}, emit[2][3] = {{0, 0, 0}, {0, 0, 0}}, first[2] = {0, 0};
  for (const auto& s : d.sentences) {
    first[s.tags[0]] += 1;
    for (std::size_t l = 0; l < s.tags.size(); ++l) {
      emit[s.tags[l]][s.tokens[l] - 1] += 1;  // token id = word index + 1
      if (l + 1 < s.tags.size()) trans[s.tags[l]][s.tags[l + 1]] += 1;
    }
  }
  CHECK(first[0] / 4000.0 == doctest::Approx(0.6).epsilon(0.05));
  for (int i = 0; i < 2; ++i) {
    const double row = trans[i][0] + trans[i][1];
    for (int j = 0; j < 2; ++j) CHECK(std::abs(trans[i][j] / row - h.transition[i][j]) < 0.02);
    const double er = emit[i][0] + emit[i][1] + emit[i][2];
    for (int w = 0; w < 3; ++w) CHECK(std::abs(emit[i][w] / er - h.emission[i][w]) < 0.02);
  }
  // reproducible per stream, independent across streams, shared vocabularies
  CHECK(serialize_conll(hmm_generate(h, 50, 3, 8, 1)) == serialize_conll(hmm_generate(h, 50, 3, 8, 1)));
  CHECK(serialize_conll(hmm_generate(h, 50, 3, 8, 1)) != serialize_conll(hmm_generate(h, 50, 3, 8, 2)));
  CHECK(hmm_generate(h, 5, 3, 8, 1).token_vocab == hmm_generate(h, 5, 3, 8, 2).token_vocab);
  CHECK_THROWS_AS(hmm_generate(h, 5, 0, 8), InvalidInput);
  CHECK_THROWS_AS(hmm_generate(h, 5, 9, 8), InvalidInput);
}

TEST_CASE("benchmark hmm") {
  const auto h = make_benchmark_hmm(8, 3000, 2024);
  CHECK_NOTHROW(h.validate());
  CHECK(h.num_states == 8);
  CHECK(h.vocab_size() == 3000);
  const auto again = make_benchmark_hmm(8, 3000, 2024);
  CHECK(again.transition == h.transition);
  CHECK(make_benchmark_hmm(8, 3000, 2025).transition != h.transition);
  CHECK_THROWS_AS(make_benchmark_hmm(8, 4, 1), InvalidInput);
}

TEST_CASE("score cache round trip, staleness and counters") {
  const auto h = small_hmm();
  const auto d = hmm_generate(h, 20, 2, 6);
  EncoderConfig c{d.token_vocab.size(), 2, 3, {3}, d.num_tags(), 4};
  ModelParams teacher = init_model(c);
  teacher.transition().values = {0.3, -0.2, 0.1, 0.4};
  const auto path = temp_path("cache.bin");

  const std::uint64_t before = instrumentation::encode_calls();
  const auto built = build_cache(teacher, d, path);
  CHECK(instrumentation::encode_calls() - before == d.size());

  const auto loaded = load_cache(path, d, &teacher);
  CHECK(instrumentation::encode_calls() - before == d.size());  // loading never encodes
  REQUIRE(loaded.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto expect = round_to_f32(encode(teacher, d.sentences[i].tokens));
    CHECK(loaded.lattice(i) == expect);
    CHECK(built.lattice(i) == expect);
  }
  CHECK(loaded.reads() == d.size());
  CHECK(loaded.header().teacher == model_fingerprint(teacher));

  // 4-thread build writes identical bytes
  const auto path4 = temp_path("cache4.bin");
  build_cache(teacher, d, path4, 4);
  std::ifstream a(path, std::ios::binary), b(path4, std::ios::binary);
  CHECK(std::string((std::istreambuf_iterator<char>(a)), {}) == std::string((std::istreambuf_iterator<char>(b)), {}));

  Dataset edited = d;
  edited.sentences[3].tags[0] = 1 - edited.sentences[3].tags[0];
  CHECK_THROWS_AS(load_cache(path, edited), StaleCache);
  ModelParams other = teacher;
  other.start().values[0] += 1.0;
  CHECK_THROWS_AS(load_cache(path, d, &other), StaleCache);
  CHECK_THROWS_AS(loaded.lattice(d.size()), InvalidInput);

  EncoderConfig wrong = c;
  wrong.num_tags = 3;
  CHECK_THROWS_AS(build_cache(init_model(wrong), d, path), InvalidInput);
  {
    std::ofstream t(path, std::ios::binary | std::ios::app);
    t << "xx";
  }
  CHECK_THROWS_AS(load_cache(path, d), IoError);
  std::filesystem::remove(path);
  std::filesystem::remove(path4);
}

}  // TEST_SUITE
