#include "skd/losses.hpp"

#include <cmath>
#include <set>

#include "skd/logsumexp.hpp"

namespace skd {

namespace {

void require_same_shape(const LatticeShape& a, const LatticeShape& b, const char* what) {
  if (!(a == b)) throw InvalidInput(std::string(what) + ": lattice shapes differ");
}

LatticeGrad grad_from_marginals(const PairMarginalTable& marginals) {
  return reinterpret<GradKind>(marginals);
}

// grad -= weight * indicator(tags)
void subtract_indicator(LatticeGrad& grad, const TagSequence& tags, double weight) {
  grad.start(tags[0]) -= weight;
  for (std::size_t l = 0; l + 1 < tags.size(); ++l) {
    grad.pair(l, tags[l], tags[l + 1]) -= weight;
  }
}

}  // namespace

LossResult nll_loss(const ScoreLattice& student, const TagSequence& gold) {
  validate(gold, student.shape());
  return nll_loss(student, gold, forward_backward(student));
}

LossResult nll_loss(const ScoreLattice& student, const TagSequence& gold, const ForwardBackward& fb) {
  validate(gold, student.shape());
  require_same_shape(student.shape(), fb.marginals.shape(), "nll_loss");
  LossResult out{fb.log_partition - score_sequence(student, gold), grad_from_marginals(fb.marginals)};
  // log Z >= any path score mathematically; clamp rounding noise at the optimum.
  if (out.loss < 0.0) out.loss = 0.0;
  subtract_indicator(out.grad, gold, 1.0);
  return out;
}

double exact_kd_loss(const ScoreLattice& student, const ScoreLattice& teacher) {
  require_same_shape(student.shape(), teacher.shape(), "exact_kd_loss");
  const auto s = enumerate_all(student);
  const auto t = enumerate_all(teacher);
  std::vector<double> scores(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) scores[k] = s[k].score;
  const double log_z = log_sum_exp(scores);
  CompensatedSum sum;
  for (std::size_t k = 0; k < s.size(); ++k) {
    sum.add(-t[k].probability * (s[k].score - log_z));
  }
  return sum.value();
}

LossResult structural_kd_loss(const ScoreLattice& student, const PairMarginalTable& teacher_marginals) {
  require_same_shape(student.shape(), teacher_marginals.shape(), "structural_kd_loss");
  validate(teacher_marginals);
  return structural_kd_loss(student, teacher_marginals, forward_backward(student));
}

LossResult structural_kd_loss(const ScoreLattice& student, const PairMarginalTable& teacher_marginals,
                              const ForwardBackward& fb) {
  require_same_shape(student.shape(), teacher_marginals.shape(), "structural_kd_loss");
  require_same_shape(student.shape(), fb.marginals.shape(), "structural_kd_loss");
  const auto s = student.values();
  const auto p = teacher_marginals.values();
  double expected = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) expected += p[k] * s[k];

  LossResult out{fb.log_partition - expected, grad_from_marginals(fb.marginals)};
  auto g = out.grad.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= p[k];
  return out;
}

KBestHypotheses::KBestHypotheses(std::vector<Item> items) : items_(std::move(items)) {
  if (items_.empty()) throw InvalidInput("k-best hypothesis set is empty");
  std::set<TagSequence> seen;
  std::vector<double> scores;
  scores.reserve(items_.size());
  for (const auto& it : items_) {
    if (!seen.insert(it.tags).second) throw InvalidInput("k-best hypotheses are not distinct");
    scores.push_back(it.teacher_logscore);
  }
  const double log_norm = log_sum_exp(scores);
  probs_.reserve(items_.size());
  for (double s : scores) probs_.push_back(std::exp(s - log_norm));
}

KBestHypotheses KBestHypotheses::from_teacher(const ScoreLattice& teacher, std::size_t k) {
  std::vector<Item> items;
  for (auto& seq : kbest(teacher, k)) items.push_back({std::move(seq.tags), seq.score});
  return KBestHypotheses(std::move(items));
}

LossResult kbest_kd_loss(const ScoreLattice& student, const KBestHypotheses& hyps) {
  for (const auto& it : hyps.items()) validate(it.tags, student.shape());
  return kbest_kd_loss(student, hyps, forward_backward(student));
}

LossResult kbest_kd_loss(const ScoreLattice& student, const KBestHypotheses& hyps, const ForwardBackward& fb) {
  for (const auto& it : hyps.items()) validate(it.tags, student.shape());
  require_same_shape(student.shape(), fb.marginals.shape(), "kbest_kd_loss");
  LossResult out{fb.log_partition, grad_from_marginals(fb.marginals)};
  const auto& q = hyps.probabilities();
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    out.loss -= q[k] * score_sequence(student, hyps.items()[k].tags);
    subtract_indicator(out.grad, hyps.items()[k].tags, q[k]);
  }
  return out;
}

std::vector<double> substructure_l2_terms(const ScoreLattice& student, const ScoreLattice& teacher) {
  require_same_shape(student.shape(), teacher.shape(), "substructure_l2_loss");
  const std::size_t len = student.length();
  std::vector<double> terms(len, 0.0);
  auto block_sum = [](std::span<const double> a, std::span<const double> b) {
    CompensatedSum sum;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = a[k] - b[k];
      sum.add(d * d);
    }
    return sum.value();
  };
  terms[0] = block_sum(student.start_span(), teacher.start_span());
  for (std::size_t l = 0; l + 1 < len; ++l) {
    terms[l + 1] = block_sum(student.pair_block(l), teacher.pair_block(l));
  }
  return terms;
}

LossResult substructure_l2_loss(const ScoreLattice& student, const ScoreLattice& teacher) {
  require_same_shape(student.shape(), teacher.shape(), "substructure_l2_loss");
  const auto s = student.values();
  const auto t = teacher.values();
  const double count = static_cast<double>(s.size());
  const double scale = 2.0 / count;
  LossResult out{0.0, LatticeGrad(student.shape())};
  auto g = out.grad.values();
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double d = s[k] - t[k];
    sum += d * d;
    g[k] = scale * d;
  }
  out.loss = sum / count;
  return out;
}

LossResult combined_objective(double kd_loss, const LatticeGrad& kd_grad, double nll_loss,
                              const LatticeGrad& nll_grad, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0, 1]");
  require_same_shape(kd_grad.shape(), nll_grad.shape(), "combined_objective");
  LossResult out{lambda * kd_loss + (1.0 - lambda) * nll_loss, LatticeGrad(kd_grad.shape())};
  auto a = kd_grad.values();
  auto b = nll_grad.values();
  auto g = out.grad.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = lambda * a[k] + (1.0 - lambda) * b[k];
  return out;
}

LambdaSchedule::LambdaSchedule(Mode mode, std::size_t total_epochs) : mode_(mode), total_(total_epochs) {
  if (total_epochs == 0) throw InvalidInput("lambda schedule needs at least one epoch");
}

double LambdaSchedule::at(std::size_t epoch) const {
  if (epoch >= total_) throw InvalidInput("epoch beyond schedule length");
  switch (mode_) {
    case Mode::kLinearDecay:
      if (total_ == 1) return 0.0;
      return 1.0 - static_cast<double>(epoch) / static_cast<double>(total_ - 1);
    case Mode::kPaperEfficient:
      return epoch + 1 == total_ ? 0.0 : 1.0;
    case Mode::kConstantZero:
      return 0.0;
  }
  return 0.0;
}

LambdaSchedule::Mode LambdaSchedule::parse_mode(const std::string& name) {
  if (name == "linear-decay") return Mode::kLinearDecay;
  if (name == "paper-efficient") return Mode::kPaperEfficient;
  if (name == "zero") return Mode::kConstantZero;
  throw InvalidInput("unknown lambda schedule '" + name + "'");
}

std::string LambdaSchedule::mode_name(Mode mode) {
  switch (mode) {
    case Mode::kLinearDecay:
      return "linear-decay";
    case Mode::kPaperEfficient:
      return "paper-efficient";
    case Mode::kConstantZero:
      return "zero";
  }
  return "?";
}

}  // namespace skd
