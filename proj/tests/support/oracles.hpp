#pragma once

// Brute-force references used by the tests. Deliberately naive and written
// without the library's DP code so agreement means something.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "skd/lattice.hpp"

namespace oracle {

using skd::ScoreLattice;
using skd::TagSequence;

inline ScoreLattice random_lattice(std::mt19937_64& gen, std::size_t L, std::size_t N, double lo = -5.0,
                                   double hi = 5.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ScoreLattice x(L, N);
  for (double& v : x.values()) v = dist(gen);
  return x;
}

// every sequence in base-N counting order (= lexicographic)
inline std::vector<TagSequence> all_paths(std::size_t L, std::size_t N) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < L; ++i) total *= N;
  std::vector<TagSequence> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    TagSequence y(L);
    std::size_t c = code;
    for (std::size_t p = L; p-- > 0;) {
      y[p] = static_cast<skd::Tag>(c % N);
      c /= N;
    }
    out.push_back(y);
  }
  return out;
}

inline double path_score(const ScoreLattice& x, const TagSequence& y) {
  double s = x.start(y[0]);
  for (std::size_t l = 0; l + 1 < y.size(); ++l) s += x.pair(l, y[l], y[l + 1]);
  return s;
}

inline double log_z(const ScoreLattice& x) {
  const auto paths = all_paths(x.length(), x.num_tags());
  long double m = -INFINITY;
  std::vector<long double> s;
  for (const auto& y : paths) {
    s.push_back(path_score(x, y));
    m = std::max(m, s.back());
  }
  long double sum = 0.0L;
  for (long double v : s) sum += std::exp(v - m);
  return static_cast<double>(m + std::log(sum));
}

inline std::vector<double> probabilities(const ScoreLattice& x) {
  const double z = log_z(x);
  std::vector<double> p;
  for (const auto& y : all_paths(x.length(), x.num_tags())) p.push_back(std::exp(path_score(x, y) - z));
  return p;
}

// marginals as a flat vector in lattice layout
inline std::vector<double> marginals(const ScoreLattice& x) {
  const std::size_t N = x.num_tags();
  std::vector<double> m(x.shape().size(), 0.0);
  const auto paths = all_paths(x.length(), N);
  const auto p = probabilities(x);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& y = paths[k];
    m[y[0]] += p[k];
    for (std::size_t l = 0; l + 1 < y.size(); ++l) m[N + (l * N + y[l]) * N + y[l + 1]] += p[k];
  }
  return m;
}

struct Ranked {
  TagSequence tags;
  double score;
};

// all paths sorted by score descending, ties lexicographic
inline std::vector<Ranked> ranked(const ScoreLattice& x) {
  std::vector<Ranked> r;
  for (const auto& y : all_paths(x.length(), x.num_tags())) r.push_back({y, path_score(x, y)});
  std::stable_sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  return r;
}

// -sum_y Pt(y) log Ps(y)
inline double cross_entropy(const ScoreLattice& student, const ScoreLattice& teacher) {
  const auto pt = probabilities(teacher);
  const double zs = log_z(student);
  const auto paths = all_paths(student.length(), student.num_tags());
  double ce = 0.0;
  for (std::size_t k = 0; k < paths.size(); ++k) ce -= pt[k] * (path_score(student, paths[k]) - zs);
  return ce;
}

inline double entropy(const ScoreLattice& x) {
  double h = 0.0;
  for (double p : probabilities(x)) {
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

// Central finite differences of f over every entry of `values`.
inline std::vector<double> numeric_grad(std::span<double> values, const std::function<double()>& f,
                                        double step = 1e-4) {
  std::vector<double> g(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double keep = values[k];
    values[k] = keep + step;
    const double up = f();
    values[k] = keep - step;
    const double down = f();
    values[k] = keep;
    g[k] = (up - down) / (2 * step);
  }
  return g;
}

// |a - n| / max(|a|, |n|, floor): relative error, with a floor so entries
// that are zero analytically are compared on an absolute scale.
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double max_rel_error(std::span<const double> a, std::span<const double> n, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, rel_error(a[k], n[k], floor));
  return worst;
}

}  // namespace oracle
