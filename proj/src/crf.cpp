#include "skd/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "skd/instrumentation.hpp"
#include "skd/logsumexp.hpp"

namespace skd {

namespace instrumentation {
Counters& counters() {
  static Counters c;
  return c;
}
}  // namespace instrumentation

double score_sequence(const ScoreLattice& lattice, const TagSequence& tags) {
  validate(tags, lattice.shape());
  double score = lattice.start(tags[0]);
  for (std::size_t l = 0; l + 1 < tags.size(); ++l) {
    score += lattice.pair(l, tags[l], tags[l + 1]);
  }
  return score;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// alpha is L x N, row l holds log-sum of prefix scores ending in each tag.
void forward_pass(const ScoreLattice& x, std::vector<double>& alpha) {
  validate(x);
  const std::size_t n = x.num_tags();
  const std::size_t len = x.length();
  alpha.resize(len * n);
  std::copy(x.start_span().begin(), x.start_span().end(), alpha.begin());
  for (std::size_t l = 0; l + 1 < len; ++l) {
    const double* prev = alpha.data() + l * n;
    double* next = alpha.data() + (l + 1) * n;
    const double* block = x.pair_block(l).data();
    for (std::size_t j = 0; j < n; ++j) {
      double m = kNegInf;
      for (std::size_t i = 0; i < n; ++i) m = std::max(m, prev[i] + block[i * n + j]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += std::exp(prev[i] + block[i * n + j] - m);
      next[j] = m + std::log(sum);
    }
  }
  instrumentation::counters().log_partition.fetch_add(1, std::memory_order_relaxed);
}

double final_log_sum(const std::vector<double>& alpha, std::size_t len, std::size_t n) {
  return log_sum_exp(std::span<const double>(alpha.data() + (len - 1) * n, n));
}

}  // namespace

double log_partition(const ScoreLattice& lattice) {
  std::vector<double> alpha;
  forward_pass(lattice, alpha);
  return final_log_sum(alpha, lattice.length(), lattice.num_tags());
}

ForwardBackward forward_backward(const ScoreLattice& x) {
  const std::size_t n = x.num_tags();
  const std::size_t len = x.length();
  std::vector<double> alpha;
  forward_pass(x, alpha);
  const double log_z = final_log_sum(alpha, len, n);

  std::vector<double> beta(len * n, 0.0);
  for (std::size_t l = len - 1; l-- > 0;) {
    const double* next = beta.data() + (l + 1) * n;
    double* cur = beta.data() + l * n;
    const double* block = x.pair_block(l).data();
    for (std::size_t i = 0; i < n; ++i) {
      double m = kNegInf;
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, block[i * n + j] + next[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += std::exp(block[i * n + j] + next[j] - m);
      cur[i] = m + std::log(sum);
    }
  }

  ForwardBackward out{log_z, PairMarginalTable(x.shape())};
  for (std::size_t j = 0; j < n; ++j) {
    out.marginals.start(j) = std::exp(alpha[j] + beta[j] - log_z);
  }
  for (std::size_t l = 0; l + 1 < len; ++l) {
    const double* a = alpha.data() + l * n;
    const double* b = beta.data() + (l + 1) * n;
    const double* block = x.pair_block(l).data();
    double* marg = out.marginals.pair_block(l).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        marg[i * n + j] = std::exp(a[i] + block[i * n + j] + b[j] - log_z);
      }
    }
  }
  return out;
}

PairMarginalTable pair_marginals(const ScoreLattice& lattice) {
  return forward_backward(lattice).marginals;
}

ScoredSequence viterbi(const ScoreLattice& x) {
  validate(x);
  const std::size_t n = x.num_tags();
  const std::size_t len = x.length();
  // best[l * n + i]: max score of the suffix (positions l+1..L-1) given y_l = i.
  std::vector<double> best(len * n, 0.0);
  for (std::size_t l = len - 1; l-- > 0;) {
    const double* next = best.data() + (l + 1) * n;
    const double* block = x.pair_block(l).data();
    for (std::size_t i = 0; i < n; ++i) {
      double m = kNegInf;
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, block[i * n + j] + next[j]);
      best[l * n + i] = m;
    }
  }

  // Decode front to back, keeping the lowest index on ties.
  ScoredSequence out;
  out.tags.resize(len);
  double m = kNegInf;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = x.start(j) + best[j];
    if (v > m) {
      m = v;
      out.tags[0] = static_cast<Tag>(j);
    }
  }
  for (std::size_t l = 0; l + 1 < len; ++l) {
    const std::size_t i = out.tags[l];
    const double* next = best.data() + (l + 1) * n;
    m = kNegInf;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = x.pair(l, i, j) + next[j];
      if (v > m) {
        m = v;
        out.tags[l + 1] = static_cast<Tag>(j);
      }
    }
  }
  out.score = score_sequence(x, out.tags);
  return out;
}

namespace {

struct Hypothesis {
  double score;
  std::uint32_t prev_tag;
  std::uint32_t prev_rank;  // index into the previous position's list for prev_tag
  std::uint32_t lex_rank;   // lexicographic rank among all hypotheses at this position
};

}  // namespace

std::vector<ScoredSequence> kbest(const ScoreLattice& x, std::size_t k) {
  if (k == 0) throw InvalidInput("kbest requires k >= 1");
  validate(x);
  const std::size_t n = x.num_tags();
  const std::size_t len = x.length();

  // hyps[l][j] holds the top partial paths ending in tag j at position l,
  // sorted by (score desc, lex asc).
  std::vector<std::vector<std::vector<Hypothesis>>> hyps(len, std::vector<std::vector<Hypothesis>>(n));
  for (std::size_t j = 0; j < n; ++j) {
    hyps[0][j].push_back({x.start(j), 0, 0, static_cast<std::uint32_t>(j)});
  }

  auto better = [](const Hypothesis& a, std::uint32_t a_key, const Hypothesis& b, std::uint32_t b_key) {
    if (a.score != b.score) return a.score > b.score;
    return a_key < b_key;
  };

  struct Candidate {
    Hypothesis h;
    std::uint32_t key;  // lexicographic rank of the prefix it extends
  };
  std::vector<Candidate> cands;

  for (std::size_t l = 0; l + 1 < len; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      cands.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& prev = hyps[l][i];
        const double w = x.pair(l, i, j);
        for (std::size_t r = 0; r < prev.size(); ++r) {
          cands.push_back({{prev[r].score + w, static_cast<std::uint32_t>(i),
                            static_cast<std::uint32_t>(r), 0},
                           prev[r].lex_rank});
        }
      }
      const std::size_t keep = std::min(k, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                        [&](const Candidate& a, const Candidate& b) { return better(a.h, a.key, b.h, b.key); });
      auto& dst = hyps[l + 1][j];
      dst.clear();
      for (std::size_t c = 0; c < keep; ++c) dst.push_back(cands[c].h);
    }

    // Lexicographic rank of a full prefix: order by the prefix it extends,
    // then by its final tag.
    struct Ref {
      std::uint32_t prev_key, tag, rank;
    };
    std::vector<Ref> refs;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t r = 0; r < hyps[l + 1][j].size(); ++r) {
        const auto& h = hyps[l + 1][j][r];
        refs.push_back({hyps[l][h.prev_tag][h.prev_rank].lex_rank, static_cast<std::uint32_t>(j),
                        static_cast<std::uint32_t>(r)});
      }
    }
    std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
      return a.prev_key != b.prev_key ? a.prev_key < b.prev_key : a.tag < b.tag;
    });
    for (std::size_t pos = 0; pos < refs.size(); ++pos) {
      hyps[l + 1][refs[pos].tag][refs[pos].rank].lex_rank = static_cast<std::uint32_t>(pos);
    }
  }

  struct Final {
    std::uint32_t tag, rank;
  };
  std::vector<Final> finals;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < hyps[len - 1][j].size(); ++r) {
      finals.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(r)});
    }
  }
  const auto& last = hyps[len - 1];
  std::sort(finals.begin(), finals.end(), [&](const Final& a, const Final& b) {
    const auto& ha = last[a.tag][a.rank];
    const auto& hb = last[b.tag][b.rank];
    return better(ha, ha.lex_rank, hb, hb.lex_rank);
  });
  finals.resize(std::min(k, finals.size()));

  std::vector<ScoredSequence> out;
  out.reserve(finals.size());
  for (const auto& f : finals) {
    ScoredSequence seq;
    seq.tags.resize(len);
    seq.score = last[f.tag][f.rank].score;
    std::uint32_t tag = f.tag, rank = f.rank;
    for (std::size_t l = len; l-- > 0;) {
      seq.tags[l] = static_cast<Tag>(tag);
      const auto& h = hyps[l][tag][rank];
      tag = h.prev_tag;
      rank = h.prev_rank;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::size_t output_space_size(const LatticeShape& shape, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t l = 0; l < shape.length; ++l) {
    if (total > cap / shape.num_tags) return cap + 1;
    total *= shape.num_tags;
  }
  return total;
}

std::vector<EnumeratedSequence> enumerate_all(const ScoreLattice& x, std::size_t guard) {
  const std::size_t total = output_space_size(x.shape(), guard);
  if (total > guard) {
    throw OracleTooLarge("output space exceeds enumeration guard of " + std::to_string(guard));
  }
  const std::size_t n = x.num_tags();
  std::vector<EnumeratedSequence> out;
  out.reserve(total);
  TagSequence tags(x.length(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    out.push_back({tags, score_sequence(x, tags), 0.0});
    for (std::size_t l = tags.size(); l-- > 0;) {
      if (static_cast<std::size_t>(++tags[l]) < n) break;
      tags[l] = 0;
    }
  }
  std::vector<double> scores(out.size());
  for (std::size_t s = 0; s < out.size(); ++s) scores[s] = out[s].score;
  const double log_z = log_sum_exp(scores);
  for (auto& e : out) e.probability = std::exp(e.score - log_z);
  return out;
}

}  // namespace skd
