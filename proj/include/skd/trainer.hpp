#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skd/dataset.hpp"
#include "skd/eval.hpp"
#include "skd/model.hpp"
#include "skd/score_cache.hpp"

namespace skd {

// Student training objective.
enum class Method {
  kVanilla,     // gold-label NLL only
  kKBest,       // K-best sequence distillation
  kStructural,  // factorized (marginal-weighted) sequence distillation
  kEfficient,   // sub-structure score L2
};

Method parse_method(const std::string& name);
std::string method_name(Method method);
// Row label used in reports ("Vanilla Training", "K-best", ...).
std::string method_label(Method method);

struct TrainOptions {
  Method method = Method::kVanilla;
  std::size_t batch_size = 32;
  std::size_t k = 3;
  std::size_t threads = 1;
  std::uint64_t shuffle_seed = 0;
};

// Wall-clock phase split and instrumentation for one epoch.
struct EpochStats {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double mean_loss = 0.0;
  double teacher_forward_s = 0.0;   // teacher lattices plus k-best / marginals
  double student_forward_s = 0.0;   // student encode plus loss and lattice gradient
  double student_backward_s = 0.0;  // backprop through the encoder plus the Adam update
  double total_s = 0.0;
  std::uint64_t teacher_encodes = 0;
  std::uint64_t cache_reads = 0;
  std::uint64_t student_log_partitions = 0;
  std::size_t sentences = 0;
};

// One-epoch-at-a-time training loop, shared by every method.
//
// Each batch runs three timed phases in order: teacher (skipped when
// lambda = 0 or the method is vanilla), student forward, student backward.
// Within a phase sentences are spread over `threads` workers; gradient
// reduction is in fixed chunk order, so results depend only on the inputs
// and the thread count.
class Trainer {
 public:
  // `teacher` and/or `cache` supply teacher scores; when a cache is given it
  // is used instead of running the teacher.
  Trainer(ModelParams& student, AdamState& adam, const Dataset& data, TrainOptions options,
          const ModelParams* teacher = nullptr, const TeacherScoreCache* cache = nullptr);

  EpochStats run_epoch(std::size_t epoch, double lambda);

 private:
  ModelParams& student_;
  AdamState& adam_;
  const Dataset& data_;
  TrainOptions opts_;
  const ModelParams* teacher_;
  const TeacherScoreCache* cache_;
  std::vector<ParamGrads> chunk_grads_;
};

// Viterbi predictions for every sentence.
std::vector<TagSequence> predict(const ModelParams& model, const Dataset& data, std::size_t threads = 1);

// Token accuracy, plus conlleval span scores when the tag set is BIO.
Metrics evaluate(const ModelParams& model, const Dataset& data, std::size_t threads = 1);

}  // namespace skd
