#include "skd/trainer.hpp"

#include <chrono>
#include <optional>

#include "skd/crf.hpp"
#include "skd/instrumentation.hpp"
#include "skd/losses.hpp"
#include "skd/parallel.hpp"

namespace skd {

Method parse_method(const std::string& name) {
  if (name == "vanilla") return Method::kVanilla;
  if (name == "kbest") return Method::kKBest;
  if (name == "structural") return Method::kStructural;
  if (name == "efficient") return Method::kEfficient;
  throw InvalidInput("unknown method '" + name + "' (expected vanilla, kbest, structural or efficient)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kVanilla:
      return "vanilla";
    case Method::kKBest:
      return "kbest";
    case Method::kStructural:
      return "structural";
    case Method::kEfficient:
      return "efficient";
  }
  return "?";
}

std::string method_label(Method method) {
  switch (method) {
    case Method::kVanilla:
      return "Vanilla Training";
    case Method::kKBest:
      return "K-best";
    case Method::kStructural:
      return "Struct. KD";
    case Method::kEfficient:
      return "Efficient KD";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Per-sentence state carried across the phases of one batch.
struct Slot {
  ScoreLattice teacher;
  std::optional<KBestHypotheses> hyps;
  PairMarginalTable teacher_marginals;
  EncoderActivations acts;
  LatticeGrad grad;
  double loss = 0.0;
};

}  // namespace

Trainer::Trainer(ModelParams& student, AdamState& adam, const Dataset& data, TrainOptions options,
                 const ModelParams* teacher, const TeacherScoreCache* cache)
    : student_(student), adam_(adam), data_(data), opts_(options), teacher_(teacher), cache_(cache) {
  if (opts_.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (opts_.threads == 0) opts_.threads = 1;
  if (opts_.method != Method::kVanilla) {
    if (teacher_ == nullptr && cache_ == nullptr) {
      throw ConfigError("method '" + method_name(opts_.method) + "' needs a teacher model or score cache");
    }
    if (opts_.method == Method::kKBest && opts_.k == 0) throw ConfigError("k must be >= 1");
    if (teacher_ != nullptr && teacher_->num_tags() != student_.num_tags()) {
      throw ConfigError("teacher and student tag counts differ");
    }
    if (cache_ != nullptr) cache_->check(data_);
  }
  if (student_.num_tags() != data_.num_tags()) throw ConfigError("student tag count differs from dataset");
  chunk_grads_.assign(opts_.threads, ParamGrads::zeros_like(student_));
}

EpochStats Trainer::run_epoch(std::size_t epoch, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0, 1]");
  const Method method = opts_.method;
  if (method == Method::kVanilla) lambda = 0.0;
  const bool need_kd = lambda > 0.0;
  const bool need_nll = lambda < 1.0;

  EpochStats stats;
  stats.epoch = epoch;
  stats.lambda = lambda;
  const auto epoch_start = Clock::now();
  const std::uint64_t reads_before = cache_ ? cache_->reads() : 0;

  std::vector<Slot> slots(opts_.batch_size);
  double loss_sum = 0.0;

  for (const auto& batch : batch_iter(data_.size(), opts_.batch_size, opts_.shuffle_seed, epoch)) {
    const std::size_t count = batch.size();
    auto tokens = [&](std::size_t i) -> const std::vector<TokenId>& { return data_.sentences[batch[i]].tokens; };

    // Teacher phase.
    auto t0 = Clock::now();
    if (need_kd) {
      parallel_chunks(count, opts_.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          Slot& s = slots[i];
          s.teacher = cache_ ? cache_->lattice(batch[i]) : encode(*teacher_, tokens(i));
          if (method == Method::kKBest) {
            s.hyps = KBestHypotheses::from_teacher(s.teacher, opts_.k);
          } else if (method == Method::kStructural) {
            s.teacher_marginals = pair_marginals(s.teacher);
          }
        }
      });
      if (!cache_) stats.teacher_encodes += count;
      stats.teacher_forward_s += seconds_since(t0);
    }

    // Student forward: encode and objective.
    t0 = Clock::now();
    const std::uint64_t lp_before = instrumentation::log_partition_calls();
    parallel_chunks(count, opts_.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Slot& s = slots[i];
        const ScoreLattice x = encode(student_, tokens(i), s.acts);
        const TagSequence& gold = data_.sentences[batch[i]].tags;
        LossResult r;
        if (method == Method::kEfficient && !need_nll) {
          r = substructure_l2_loss(x, s.teacher);
        } else if (!need_kd) {
          r = nll_loss(x, gold);
        } else {
          // Every remaining case is a lambda mix that needs the student's
          // forward-backward once, shared between the two terms.
          const ForwardBackward fb = forward_backward(x);
          LossResult kd;
          switch (method) {
            case Method::kKBest:
              kd = kbest_kd_loss(x, *s.hyps, fb);
              break;
            case Method::kStructural:
              kd = structural_kd_loss(x, s.teacher_marginals, fb);
              break;
            default:
              kd = substructure_l2_loss(x, s.teacher);
              break;
          }
          if (need_nll) {
            const LossResult nll = nll_loss(x, gold, fb);
            r = combined_objective(kd.loss, kd.grad, nll.loss, nll.grad, lambda);
          } else {
            r = std::move(kd);
          }
        }
        s.loss = r.loss;
        s.grad = std::move(r.grad);
      }
    });
    stats.student_log_partitions += instrumentation::log_partition_calls() - lp_before;
    stats.student_forward_s += seconds_since(t0);

    // Student backward and update.
    t0 = Clock::now();
    parallel_chunks(count, opts_.threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      ParamGrads& g = chunk_grads_[chunk];
      g.set_zero();
      for (std::size_t i = begin; i < end; ++i) {
        accumulate_backward(student_, tokens(i), slots[i].acts, slots[i].grad, g);
      }
    });
    const std::size_t used = std::min(opts_.threads, count);
    ParamGrads& total = chunk_grads_[0];
    for (std::size_t c = 1; c < used; ++c) total.add(chunk_grads_[c]);
    total.scale(1.0 / static_cast<double>(count));
    adam_step(student_, total, adam_);
    stats.student_backward_s += seconds_since(t0);

    for (std::size_t i = 0; i < count; ++i) loss_sum += slots[i].loss;
    stats.sentences += count;
  }

  stats.mean_loss = stats.sentences == 0 ? 0.0 : loss_sum / static_cast<double>(stats.sentences);
  stats.cache_reads = cache_ ? cache_->reads() - reads_before : 0;
  stats.total_s = seconds_since(epoch_start);
  return stats;
}

std::vector<TagSequence> predict(const ModelParams& model, const Dataset& data, std::size_t threads) {
  std::vector<TagSequence> out(data.size());
  parallel_chunks(data.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = viterbi(encode(model, data.sentences[i].tokens)).tags;
  });
  return out;
}

Metrics evaluate(const ModelParams& model, const Dataset& data, std::size_t threads) {
  const auto pred = predict(model, data, threads);
  std::vector<TagSequence> gold;
  gold.reserve(data.size());
  for (const auto& s : data.sentences) gold.push_back(s.tags);
  Metrics m;
  m.token_accuracy = token_accuracy(gold, pred);
  if (data.tag_vocab.is_bio()) {
    std::vector<TagNameSequence> g, p;
    for (std::size_t i = 0; i < data.size(); ++i) {
      g.push_back(data.tag_names(gold[i]));
      p.push_back(data.tag_names(pred[i]));
    }
    m.has_spans = true;
    m.spans = prf1(g, p);
  }
  return m;
}

}  // namespace skd
