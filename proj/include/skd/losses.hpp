#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "skd/crf.hpp"
#include "skd/lattice.hpp"

namespace skd {

struct LossResult {
  double loss = 0.0;
  LatticeGrad grad;
};

// Negative log-likelihood of the gold sequence: log Z - score(gold).
// Gradient is the model marginals minus the gold indicator.
LossResult nll_loss(const ScoreLattice& student, const TagSequence& gold);
// Same, reusing a forward_backward(student) already computed by the caller.
LossResult nll_loss(const ScoreLattice& student, const TagSequence& gold, const ForwardBackward& fb);

// Sequence-level cross-entropy -sum_y P_t(y) log P_s(y), by full enumeration.
// Oracle only; throws OracleTooLarge beyond the enumeration guard.
double exact_kd_loss(const ScoreLattice& student, const ScoreLattice& teacher);

// Factorized cross-entropy: -sum_u p'(u) s(u) + log Z, where p' are the
// teacher's start and pair marginals. Equals exact_kd_loss when p' is exact.
LossResult structural_kd_loss(const ScoreLattice& student, const PairMarginalTable& teacher_marginals);
LossResult structural_kd_loss(const ScoreLattice& student, const PairMarginalTable& teacher_marginals,
                              const ForwardBackward& fb);

// Teacher K-best list with probabilities renormalized over the list.
class KBestHypotheses {
 public:
  struct Item {
    TagSequence tags;
    double teacher_logscore = 0.0;
  };

  // Renormalizes via a softmax over the supplied teacher log-scores.
  // Throws InvalidInput on an empty list or duplicated sequences.
  explicit KBestHypotheses(std::vector<Item> items);

  // Top-k sequences of the teacher lattice.
  static KBestHypotheses from_teacher(const ScoreLattice& teacher, std::size_t k);

  const std::vector<Item>& items() const { return items_; }
  const std::vector<double>& probabilities() const { return probs_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<Item> items_;
  std::vector<double> probs_;
};

// -sum_{y in T} q(y) log P_s(y) with q the renormalized teacher probabilities.
LossResult kbest_kd_loss(const ScoreLattice& student, const KBestHypotheses& hyps);
LossResult kbest_kd_loss(const ScoreLattice& student, const KBestHypotheses& hyps, const ForwardBackward& fb);

// Mean squared difference between student and teacher sub-structure scores
// over all N + (L-1)N^2 sub-structures. No dynamic programming involved.
LossResult substructure_l2_loss(const ScoreLattice& student, const ScoreLattice& teacher);

// Per-position sums of squared differences (index 0 is the start block,
// index l + 1 the pair block at l), before division by |U(x)|. Summing
// these in any order with CompensatedSum reproduces the L2 numerator.
std::vector<double> substructure_l2_terms(const ScoreLattice& student, const ScoreLattice& teacher);

// lambda * KD + (1 - lambda) * NLL, losses and gradients alike.
LossResult combined_objective(double kd_loss, const LatticeGrad& kd_grad, double nll_loss,
                              const LatticeGrad& nll_grad, double lambda);

// Mixing weight between the distillation and gold-label objectives per epoch.
class LambdaSchedule {
 public:
  enum class Mode {
    kLinearDecay,     // 1 - epoch / (total - 1)
    kPaperEfficient,  // 1 until the final epoch, 0 on it
    kConstantZero,    // pure NLL (vanilla training)
  };

  LambdaSchedule(Mode mode, std::size_t total_epochs);

  // Weight for zero-based `epoch`; always in [0, 1].
  double at(std::size_t epoch) const;

  Mode mode() const { return mode_; }
  std::size_t total_epochs() const { return total_; }

  static Mode parse_mode(const std::string& name);
  static std::string mode_name(Mode mode);

 private:
  Mode mode_;
  std::size_t total_;
};

}  // namespace skd
