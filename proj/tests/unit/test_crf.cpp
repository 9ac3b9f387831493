#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "skd/crf.hpp"
#include "skd/logsumexp.hpp"

using namespace skd;

TEST_SUITE("crf") {

TEST_CASE("lattice layout and validation") {
  ScoreLattice x(3, 2);
  CHECK(x.shape().size() == 2 + 2 * 4);
  x.pair(1, 1, 0) = 7.0;
  CHECK(x.values()[2 + 4 + 2] == 7.0);
  CHECK(x.pair_block(1)[2] == 7.0);
  CHECK_THROWS_AS(ScoreLattice(0, 2), InvalidInput);
  CHECK_THROWS_AS(ScoreLattice(2, 0), InvalidInput);

  x.start(0) = std::nan("");
  CHECK_THROWS_AS(validate(x), InvalidInput);
  x.start(0) = INFINITY;
  CHECK_THROWS_AS(log_partition(x), InvalidInput);

  CHECK_THROWS_AS(validate(TagSequence{0, 1}, x.shape()), InvalidInput);
  CHECK_THROWS_AS(validate(TagSequence{0, 2, 1}, x.shape()), InvalidInput);
  CHECK_THROWS_AS(validate(TagSequence{0, -1, 1}, x.shape()), InvalidInput);
  CHECK_NOTHROW(validate(TagSequence{0, 1, 1}, x.shape()));
}

TEST_CASE("score_sequence") {
  ScoreLattice x(2, 2);
  x.start(0) = 1;
  x.pair(0, 1, 1) = 2;
  CHECK(score_sequence(x, {0, 1}) == 1.0);
  CHECK(score_sequence(x, {1, 1}) == 2.0);
  CHECK(score_sequence(ScoreLattice(4, 3), {2, 0, 1, 2}) == 0.0);
  CHECK_THROWS_AS(score_sequence(x, {0}), InvalidInput);

  std::mt19937_64 gen(11);
  const auto r = oracle::random_lattice(gen, 4, 3);
  for (const auto& e : enumerate_all(r)) CHECK(score_sequence(r, e.tags) == doctest::Approx(e.score).epsilon(1e-14));
}

TEST_CASE("log_partition examples") {
  CHECK(log_partition(ScoreLattice(3, 2)) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  ScoreLattice one(1, 3);
  one.start(2) = std::log(2.0);
  CHECK(log_partition(one) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  std::mt19937_64 gen(5);
  const auto x = oracle::random_lattice(gen, 5, 4);
  const double ref = oracle::log_z(x);
  CHECK(std::abs(log_partition(x) - ref) <= 1e-10 * std::abs(ref));
  for (const auto& e : enumerate_all(x)) CHECK(log_partition(x) >= e.score);
}

TEST_CASE("pair_marginals examples") {
  const auto m = pair_marginals(ScoreLattice(4, 3));
  for (std::size_t j = 0; j < 3; ++j) CHECK(m.start(j) == doctest::Approx(1.0 / 3));
  for (std::size_t l = 0; l < 3; ++l) {
    for (double v : m.pair_block(l)) CHECK(v == doctest::Approx(1.0 / 9));
  }

  ScoreLattice one(1, 3);
  one.start(0) = 1.0;
  one.start(1) = -2.0;
  const auto m1 = pair_marginals(one);
  CHECK(m1.values().size() == 3);
  const double z = std::exp(1.0) + std::exp(-2.0) + 1.0;
  CHECK(m1.start(0) == doctest::Approx(std::exp(1.0) / z));
  CHECK(m1.start(2) == doctest::Approx(1.0 / z));

  std::mt19937_64 gen(19);
  const auto x = oracle::random_lattice(gen, 4, 3);
  const auto ref = oracle::marginals(x);
  const auto got = pair_marginals(x);
  for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(got.values()[k] - ref[k]) <= 1e-9);
}

TEST_CASE("marginal table invariants") {
  std::mt19937_64 gen(23);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = oracle::random_lattice(gen, 2 + rep % 6, 2 + rep % 3);
    const auto m = pair_marginals(x);
    CHECK_NOTHROW(validate(m, 1e-9));
    const std::size_t N = x.num_tags();
    double s = 0;
    for (double v : m.start_span()) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-9);
    for (std::size_t l = 0; l + 1 < x.length(); ++l) {
      double t = 0;
      for (double v : m.pair_block(l)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        t += v;
      }
      CHECK(std::abs(t - 1.0) <= 1e-9);
    }
    // node marginal consistency between adjacent pair slices
    for (std::size_t l = 0; l + 2 < x.length(); ++l) {
      for (std::size_t j = 0; j < N; ++j) {
        double in = 0, out = 0;
        for (std::size_t i = 0; i < N; ++i) in += m.pair(l, i, j);
        for (std::size_t k = 0; k < N; ++k) out += m.pair(l + 1, j, k);
        CHECK(std::abs(in - out) <= 1e-9);
      }
    }
  }
  PairMarginalTable bad(2, 2, 0.25);
  bad.start(0) = 0.9;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
}

TEST_CASE("viterbi examples") {
  const auto z = viterbi(ScoreLattice(4, 3));
  CHECK(z.tags == TagSequence{0, 0, 0, 0});
  CHECK(z.score == 0.0);

  // transitions carry nothing; emissions folded into each position's column
  ScoreLattice x(3, 3);
  const double emit[3][3] = {{0.1, 0.9, 0.3}, {2.0, -1.0, 0.5}, {0.0, 0.2, 0.7}};
  for (std::size_t j = 0; j < 3; ++j) x.start(j) = emit[0][j];
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) x.pair(l, i, j) = emit[l + 1][j];
    }
  }
  const auto v = viterbi(x);
  CHECK(v.tags == TagSequence{1, 0, 2});
  CHECK(v.score == score_sequence(x, v.tags));

  std::mt19937_64 gen(31);
  const auto r = oracle::random_lattice(gen, 5, 3);
  const auto best = oracle::ranked(r).front();
  const auto got = viterbi(r);
  CHECK(got.tags == best.tags);
  CHECK(got.score == doctest::Approx(best.score).epsilon(1e-14));
}

TEST_CASE("viterbi ties resolve to the lexicographically smallest sequence") {
  // two optimal paths: [1, 0] and [0, 1]; the lexicographic one is [0, 1]
  ScoreLattice x(2, 2);
  x.start(1) = 1.0;
  x.pair(0, 0, 1) = 1.0;
  const auto v = viterbi(x);
  CHECK(v.tags == TagSequence{0, 1});
  CHECK(kbest(x, 1).front().tags == v.tags);
  CHECK(kbest(x, 2)[1].tags == TagSequence{1, 0});
}

TEST_CASE("kbest examples") {
  std::mt19937_64 gen(37);
  const auto r = oracle::random_lattice(gen, 4, 3);
  const auto k1 = kbest(r, 1);
  REQUIRE(k1.size() == 1);
  CHECK(k1.front() == viterbi(r));

  const auto all = kbest(ScoreLattice(2, 2), 4);
  REQUIRE(all.size() == 4);
  CHECK(all[0].tags == TagSequence{0, 0});
  CHECK(all[1].tags == TagSequence{0, 1});
  CHECK(all[2].tags == TagSequence{1, 0});
  CHECK(all[3].tags == TagSequence{1, 1});
  for (const auto& s : all) CHECK(s.score == 0.0);

  const auto top = kbest(r, 3);
  const auto ref = oracle::ranked(r);
  REQUIRE(top.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(top[k].tags == ref[k].tags);
    CHECK(top[k].score == doctest::Approx(ref[k].score).epsilon(1e-14));
  }

  CHECK(kbest(ScoreLattice(2, 2), 50).size() == 4);
  CHECK_THROWS_AS(kbest(r, 0), InvalidInput);
}

TEST_CASE("kbest is prefix-monotone in K") {
  std::mt19937_64 gen(41);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = oracle::random_lattice(gen, 1 + rep % 5, 2 + rep % 3);
    if (rep % 4 == 0) {
      for (double& v : x.values()) v = std::round(v);  // force ties
    }
    auto prev = kbest(x, 1);
    for (std::size_t k = 2; k <= 12; ++k) {
      const auto cur = kbest(x, k);
      REQUIRE(cur.size() >= prev.size());
      for (std::size_t i = 0; i < prev.size(); ++i) CHECK(cur[i] == prev[i]);
      prev = cur;
    }
  }
}

TEST_CASE("enumerate_all") {
  const auto two = enumerate_all(ScoreLattice(1, 2));
  REQUIRE(two.size() == 2);
  CHECK(two[0].probability == doctest::Approx(0.5));
  CHECK(two[1].probability == doctest::Approx(0.5));

  const auto four = enumerate_all(ScoreLattice(2, 2));
  REQUIRE(four.size() == 4);
  for (const auto& e : four) CHECK(e.probability == doctest::Approx(0.25));
  CHECK(four[2].tags == TagSequence{1, 0});

  std::mt19937_64 gen(43);
  const auto x = oracle::random_lattice(gen, 5, 3);
  const auto all = enumerate_all(x);
  double p = 0, e = 0;
  for (const auto& s : all) {
    p += s.probability;
    e += std::exp(s.score);
  }
  CHECK(std::abs(p - 1.0) <= 1e-9);
  CHECK(std::exp(log_partition(x)) == doctest::Approx(e).epsilon(1e-12));

  CHECK_THROWS_AS(enumerate_all(ScoreLattice(17, 2)), OracleTooLarge);  // 131072 > 100000
  CHECK_NOTHROW(enumerate_all(ScoreLattice(16, 2)));
  CHECK_THROWS_AS(enumerate_all(ScoreLattice(3, 3), 26), OracleTooLarge);
  CHECK(output_space_size({40, 4}, 1000) == 1001);
  CHECK(output_space_size({3, 4}, 1000) == 64);
}

TEST_CASE("shift covariance") {
  std::mt19937_64 gen(47);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t L = 1 + rep % 5, N = 2 + rep % 3;
    const auto x = oracle::random_lattice(gen, L, N);
    const double c = std::uniform_real_distribution<double>(-3, 3)(gen);
    // shifting every entry of one position's block shifts every path by c
    const std::size_t pos = rep % L;
    ScoreLattice y = x;
    if (pos == 0) {
      for (double& v : y.start_span()) v += c;
    } else {
      for (double& v : y.pair_block(pos - 1)) v += c;
    }
    CHECK(std::abs(log_partition(y) - log_partition(x) - c) <= 1e-9);
    const TagSequence some = viterbi(x).tags;
    CHECK(std::abs(score_sequence(y, some) - score_sequence(x, some) - c) <= 1e-9);
    const auto mx = pair_marginals(x), my = pair_marginals(y);
    for (std::size_t k = 0; k < mx.values().size(); ++k) CHECK(std::abs(mx.values()[k] - my.values()[k]) <= 1e-9);
    CHECK(viterbi(y).tags == viterbi(x).tags);
  }
}

TEST_CASE("finite outputs on extreme scores") {
  std::mt19937_64 gen(53);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = oracle::random_lattice(gen, 2 + rep % 8, 2 + rep % 3, -50.0, 50.0);
    const auto fb = forward_backward(x);
    CHECK(std::isfinite(fb.log_partition));
    for (double v : fb.marginals.values()) CHECK(std::isfinite(v));
    CHECK_NOTHROW(validate(fb.marginals, 1e-9));
    CHECK(std::isfinite(viterbi(x).score));
    for (const auto& s : kbest(x, 3)) CHECK(std::isfinite(s.score));
  }
  ScoreLattice big(30, 4, 50.0);
  // every path scores 30 * 50
  CHECK(log_partition(big) == doctest::Approx(1500.0 + 30 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("log-sum-exp helpers") {
  const std::vector<double> xs{1000.0, 1000.0};
  CHECK(log_sum_exp(xs) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{}) == -INFINITY);
  CHECK(log_add(-INFINITY, 2.0) == 2.0);
  CompensatedSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1.0);
}

}  // TEST_SUITE
