#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "skd/logsumexp.hpp"
#include "skd/losses.hpp"

using namespace skd;

namespace {

std::vector<double> flat(const LatticeGrad& g) { return {g.values().begin(), g.values().end()}; }

// Central differences of `loss(x)` over every lattice entry.
template <class F>
std::vector<double> fd(ScoreLattice x, F loss) {
  std::vector<double> values(x.values().begin(), x.values().end());
  return oracle::numeric_grad(values, [&] {
    std::copy(values.begin(), values.end(), x.values().begin());
    return loss(x);
  });
}

TagSequence random_tags(std::mt19937_64& gen, std::size_t L, std::size_t N) {
  TagSequence y(L);
  for (auto& t : y) t = static_cast<Tag>(gen() % N);
  return y;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("nll examples") {
  const auto r = nll_loss(ScoreLattice(2, 2), {0, 1});
  CHECK(r.loss == doctest::Approx(std::log(4.0)));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(r.grad.pair(0, i, j) == doctest::Approx(i == 0 && j == 1 ? -0.75 : 0.25));
  }
  CHECK(r.grad.start(0) == doctest::Approx(-0.5));
  CHECK(r.grad.start(1) == doctest::Approx(0.5));

  ScoreLattice peaked(4, 3);
  const TagSequence gold{2, 0, 1, 1};
  peaked.start(2) = 40;
  for (std::size_t l = 0; l < 3; ++l) peaked.pair(l, gold[l], gold[l + 1]) = 40;
  const auto p = nll_loss(peaked, gold);
  CHECK(p.loss >= 0.0);
  CHECK(p.loss <= 1e-10);

  CHECK_THROWS_AS(nll_loss(ScoreLattice(2, 2), {0}), InvalidInput);
  CHECK_THROWS_AS(nll_loss(ScoreLattice(2, 2), {0, 2}), InvalidInput);
}

TEST_CASE("exact kd examples") {
  std::mt19937_64 gen(3);
  const auto t = oracle::random_lattice(gen, 3, 3);
  CHECK(exact_kd_loss(t, t) == doctest::Approx(oracle::entropy(t)).epsilon(1e-12));
  CHECK(exact_kd_loss(ScoreLattice(2, 2), ScoreLattice(2, 2)) == doctest::Approx(std::log(4.0)));
  const auto s = oracle::random_lattice(gen, 3, 3);
  CHECK(std::abs(exact_kd_loss(s, t) - oracle::cross_entropy(s, t)) <= 1e-12);
  CHECK(exact_kd_loss(s, t) >= oracle::entropy(t) - 1e-12);
  CHECK_THROWS_AS(exact_kd_loss(ScoreLattice(20, 2), ScoreLattice(20, 2)), OracleTooLarge);
  CHECK_THROWS_AS(exact_kd_loss(ScoreLattice(2, 2), ScoreLattice(3, 2)), InvalidInput);
}

TEST_CASE("structural kd examples") {
  const PairMarginalTable uniform(2, 2, 0.25);
  PairMarginalTable u = uniform;
  u.start(0) = u.start(1) = 0.5;
  const auto r = structural_kd_loss(ScoreLattice(2, 2), u);
  CHECK(r.loss == doctest::Approx(std::log(4.0)));
  for (double g : r.grad.values()) CHECK(std::abs(g) <= 1e-12);

  PairMarginalTable bad(2, 2, 0.3);
  bad.start(0) = bad.start(1) = 0.5;
  CHECK_THROWS_AS(structural_kd_loss(ScoreLattice(2, 2), bad), InvalidInput);
  CHECK_THROWS_AS(structural_kd_loss(ScoreLattice(3, 2), u), InvalidInput);
}

TEST_CASE("factorization identity on small spaces") {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t L = 1 + rep % 6, N = 2 + rep % 3;
    const auto s = oracle::random_lattice(gen, L, N);
    const auto t = oracle::random_lattice(gen, L, N);
    const auto r = structural_kd_loss(s, pair_marginals(t));
    CHECK(std::abs(r.loss - exact_kd_loss(s, t)) <= 1e-9);
  }
}

TEST_CASE("kbest kd examples") {
  std::mt19937_64 gen(13);
  const auto s = oracle::random_lattice(gen, 3, 2);
  const auto t = oracle::random_lattice(gen, 3, 2);
  // the full output space: renormalization is the identity
  const auto full = KBestHypotheses::from_teacher(t, 8);
  CHECK(kbest_kd_loss(s, full).loss == doctest::Approx(exact_kd_loss(s, t)).epsilon(1e-12));

  const auto one = KBestHypotheses::from_teacher(t, 1);
  const auto nll = nll_loss(s, viterbi(t).tags);
  const auto k1 = kbest_kd_loss(s, one);
  CHECK(k1.loss == doctest::Approx(nll.loss).epsilon(1e-12));
  for (std::size_t k = 0; k < nll.grad.values().size(); ++k) CHECK(k1.grad.values()[k] == doctest::Approx(nll.grad.values()[k]));

  // K = 3 against the top-3 set restricted from enumeration
  const auto s4 = oracle::random_lattice(gen, 4, 3);
  const auto t4 = oracle::random_lattice(gen, 4, 3);
  const auto top = oracle::ranked(t4);
  const double norm = std::log(std::exp(top[0].score) + std::exp(top[1].score) + std::exp(top[2].score));
  const double zs = oracle::log_z(s4);
  double ref = 0;
  for (int k = 0; k < 3; ++k) ref -= std::exp(top[k].score - norm) * (oracle::path_score(s4, top[k].tags) - zs);
  const auto h3 = KBestHypotheses::from_teacher(t4, 3);
  CHECK(kbest_kd_loss(s4, h3).loss == doctest::Approx(ref).epsilon(1e-12));
  double q = 0;
  for (double p : h3.probabilities()) q += p;
  CHECK(std::abs(q - 1.0) <= 1e-9);

  CHECK_THROWS_AS(KBestHypotheses({}), InvalidInput);
  CHECK_THROWS_AS(KBestHypotheses({{{0, 1}, 1.0}, {{0, 1}, 2.0}}), InvalidInput);
  CHECK_THROWS_AS(kbest_kd_loss(ScoreLattice(3, 2), KBestHypotheses({{{0, 1}, 1.0}})), InvalidInput);
}

TEST_CASE("substructure l2 examples") {
  std::mt19937_64 gen(17);
  const auto t = oracle::random_lattice(gen, 4, 3);
  const auto same = substructure_l2_loss(t, t);
  CHECK(same.loss == 0.0);
  for (double g : same.grad.values()) CHECK(g == 0.0);

  for (std::size_t L : {1, 2, 5}) {
    for (std::size_t N : {1, 3}) {
      const ScoreLattice zero(L, N), ones(L, N, 1.0);
      const auto r = substructure_l2_loss(zero, ones);
      const double u = static_cast<double>(N + (L - 1) * N * N);
      CHECK(r.loss == doctest::Approx(1.0));
      for (double g : r.grad.values()) CHECK(g == doctest::Approx(-2.0 / u));
    }
  }

  const auto s = oracle::random_lattice(gen, 4, 3);
  double direct = 0;
  for (std::size_t k = 0; k < s.values().size(); ++k) {
    const double d = s.values()[k] - t.values()[k];
    direct += d * d;
  }
  CHECK(substructure_l2_loss(s, t).loss == doctest::Approx(direct / (3 + 3 * 9)).epsilon(1e-14));
  CHECK_THROWS_AS(substructure_l2_loss(ScoreLattice(2, 2), ScoreLattice(2, 3)), InvalidInput);
}

TEST_CASE("combined objective") {
  LatticeGrad a(2, 2, 1.0), b(2, 2, 3.0);
  const auto kd = combined_objective(2.0, a, 4.0, b, 1.0);
  CHECK(kd.loss == 2.0);
  CHECK(kd.grad == a);
  const auto nll = combined_objective(2.0, a, 4.0, b, 0.0);
  CHECK(nll.loss == 4.0);
  CHECK(nll.grad == b);
  const auto mid = combined_objective(2.0, a, 4.0, b, 0.5);
  CHECK(mid.loss == 3.0);
  for (double g : mid.grad.values()) CHECK(g == 2.0);
  CHECK_THROWS_AS(combined_objective(2.0, a, 4.0, b, 1.5), InvalidInput);
  CHECK_THROWS_AS(combined_objective(2.0, a, 4.0, b, -0.1), InvalidInput);
  CHECK_THROWS_AS(combined_objective(2.0, a, 4.0, LatticeGrad(3, 2), 0.5), InvalidInput);
}

TEST_CASE("lambda schedules") {
  const LambdaSchedule eff(LambdaSchedule::Mode::kPaperEfficient, 5);
  std::vector<double> seq;
  for (std::size_t e = 0; e < 5; ++e) seq.push_back(eff.at(e));
  CHECK(seq == std::vector<double>{1, 1, 1, 1, 0});

  const LambdaSchedule lin(LambdaSchedule::Mode::kLinearDecay, 5);
  CHECK(lin.at(0) == 1.0);
  CHECK(lin.at(2) == 0.5);
  CHECK(lin.at(4) == 0.0);
  CHECK(LambdaSchedule(LambdaSchedule::Mode::kLinearDecay, 1).at(0) == 0.0);
  CHECK(LambdaSchedule(LambdaSchedule::Mode::kPaperEfficient, 1).at(0) == 0.0);
  CHECK(LambdaSchedule(LambdaSchedule::Mode::kConstantZero, 3).at(1) == 0.0);
  CHECK_THROWS_AS(LambdaSchedule(LambdaSchedule::Mode::kLinearDecay, 0), InvalidInput);
  CHECK_THROWS_AS(lin.at(5), InvalidInput);
  CHECK(LambdaSchedule::parse_mode("paper-efficient") == LambdaSchedule::Mode::kPaperEfficient);
  CHECK_THROWS_AS(LambdaSchedule::parse_mode("cosine"), InvalidInput);
  for (std::size_t total = 1; total < 12; ++total) {
    for (auto mode : {LambdaSchedule::Mode::kLinearDecay, LambdaSchedule::Mode::kPaperEfficient}) {
      const LambdaSchedule s(mode, total);
      for (std::size_t e = 0; e < total; ++e) {
        CHECK(s.at(e) >= 0.0);
        CHECK(s.at(e) <= 1.0);
      }
    }
  }
}

TEST_CASE("finite-difference gradients") {
  std::mt19937_64 gen(29);
  double worst_nll = 0, worst_struct = 0, worst_kbest = 0, worst_l2 = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t L = 1 + rep % 5, N = 2 + rep % 3;
    const auto s = oracle::random_lattice(gen, L, N, -2.0, 2.0);
    const auto t = oracle::random_lattice(gen, L, N, -2.0, 2.0);
    const auto gold = random_tags(gen, L, N);
    const auto pt = pair_marginals(t);
    const auto hyps = KBestHypotheses::from_teacher(t, 3);

    worst_nll = std::max(worst_nll, oracle::max_rel_error(flat(nll_loss(s, gold).grad),
                                                          fd(s, [&](const ScoreLattice& x) { return nll_loss(x, gold).loss; })));
    worst_struct = std::max(worst_struct, oracle::max_rel_error(flat(structural_kd_loss(s, pt).grad),
                                                                fd(s, [&](const ScoreLattice& x) {
                                                                  return structural_kd_loss(x, pt).loss;
                                                                })));
    worst_kbest = std::max(worst_kbest, oracle::max_rel_error(flat(kbest_kd_loss(s, hyps).grad),
                                                              fd(s, [&](const ScoreLattice& x) {
                                                                return kbest_kd_loss(x, hyps).loss;
                                                              })));
    worst_l2 = std::max(worst_l2, oracle::max_rel_error(flat(substructure_l2_loss(s, t).grad),
                                                        fd(s, [&](const ScoreLattice& x) {
                                                          return substructure_l2_loss(x, t).loss;
                                                        })));
  }
  CHECK(worst_nll <= 1e-4);
  CHECK(worst_struct <= 1e-4);
  CHECK(worst_kbest <= 1e-4);
  CHECK(worst_l2 <= 1e-4);
}

TEST_CASE("loss properties") {
  std::mt19937_64 gen(59);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t L = 1 + rep % 5, N = 2 + rep % 3;
    const auto s = oracle::random_lattice(gen, L, N);
    const auto t = oracle::random_lattice(gen, L, N);
    CHECK(nll_loss(s, random_tags(gen, L, N)).loss >= 0.0);
    CHECK(substructure_l2_loss(s, t).loss >= 0.0);
    CHECK(exact_kd_loss(s, t) >= oracle::entropy(t) - 1e-12);

    // zero L2 means identical distributions: KL(t || s) = CE - H = 0
    CHECK(substructure_l2_loss(t, t).loss == 0.0);
    CHECK(std::abs(exact_kd_loss(t, t) - oracle::entropy(t)) <= 1e-9);

    // structural KD gradient vanishes once the student matches the teacher's marginals
    const auto r = structural_kd_loss(t, pair_marginals(t));
    for (double g : r.grad.values()) CHECK(std::abs(g) <= 1e-9);

    // L2 numerator summed position by position in reverse order
    const auto terms = substructure_l2_terms(s, t);
    CompensatedSum fwd, rev;
    for (double v : terms) fwd.add(v);
    for (std::size_t i = terms.size(); i-- > 0;) rev.add(terms[i]);
    const double u = static_cast<double>(s.shape().size());
    CHECK(std::abs(fwd.value() - rev.value()) <= 1e-12);
    CHECK(std::abs(fwd.value() / u - substructure_l2_loss(s, t).loss) <= 1e-12);
  }
}

TEST_CASE("shared forward-backward overloads agree") {
  std::mt19937_64 gen(61);
  const auto s = oracle::random_lattice(gen, 5, 3);
  const auto t = oracle::random_lattice(gen, 5, 3);
  const auto fb = forward_backward(s);
  const TagSequence gold{0, 2, 1, 1, 0};
  CHECK(nll_loss(s, gold, fb).grad == nll_loss(s, gold).grad);
  CHECK(structural_kd_loss(s, pair_marginals(t), fb).loss == structural_kd_loss(s, pair_marginals(t)).loss);
  const auto h = KBestHypotheses::from_teacher(t, 3);
  CHECK(kbest_kd_loss(s, h, fb).loss == kbest_kd_loss(s, h).loss);
}

}  // TEST_SUITE
