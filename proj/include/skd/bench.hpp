#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "skd/dataset.hpp"
#include "skd/model.hpp"
#include "skd/score_cache.hpp"
#include "skd/trainer.hpp"

namespace skd {

// Average per-epoch wall-clock cost of each training phase.
struct PhaseTiming {
  std::string method;
  double teacher_forward_s = 0.0;
  double student_forward_s = 0.0;
  double student_backward_s = 0.0;
  double total_s = 0.0;
  double overhead_s = 0.0;  // total minus the three phases (batching, bookkeeping)
  std::size_t epochs_measured = 0;
  std::size_t warmup_epochs = 0;
  std::size_t epochs_executed = 0;
  std::uint64_t teacher_encodes = 0;          // over the measured epochs
  std::uint64_t student_log_partitions = 0;   // over the measured epochs

  // Throws InvalidInput if a duration is negative or total is inconsistent.
  void validate() const;
};

struct BenchDataSpec {
  std::size_t num_states = 8;
  std::size_t vocab_size = 2000;
  std::size_t sentences = 5000;
  std::size_t min_len = 20;
  std::size_t max_len = 60;
  std::uint64_t seed = 7;
};

struct ArchSpec {
  std::size_t embed_dim = 0;
  std::size_t window = 0;
  std::vector<std::size_t> hidden_dims;
  bool operator==(const ArchSpec&) const = default;
};

ArchSpec default_teacher_arch();
ArchSpec default_student_arch();
EncoderConfig make_encoder(const ArchSpec& arch, std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed);

struct BenchConfig {
  BenchDataSpec data;
  std::vector<std::string> methods{"vanilla", "kbest", "structural", "efficient"};
  std::size_t warmup_epochs = 1;
  std::size_t measured_epochs = 5;
  std::size_t threads = 1;
  std::size_t batch_size = 32;
  std::size_t k = 3;
  // Lambda used by kbest and structural in timed epochs (the midpoint of
  // their linear decay). Efficient runs at its steady-state lambda = 1 and
  // vanilla at 0.
  double mixed_lambda = 0.5;
  double lr = 2e-4;
  ArchSpec teacher = default_teacher_arch();
  ArchSpec student = default_student_arch();
  std::uint64_t seed = 1;
  std::string output;      // report path; empty prints only
  std::string cache_path;  // score cache location; empty uses a temporary file

  void validate() const;
};

void to_json(nlohmann::json& j, const BenchConfig& c);
void from_json(const nlohmann::json& j, BenchConfig& c);
void to_json(nlohmann::json& j, const ArchSpec& a);
void from_json(const nlohmann::json& j, ArchSpec& a);
void to_json(nlohmann::json& j, const BenchDataSpec& d);
void from_json(const nlohmann::json& j, BenchDataSpec& d);

// Lambda a method is timed at under `config`.
double bench_lambda(Method method, const BenchConfig& config);

// Trains `student` for warmup + measured epochs and averages the phase
// timings of the measured ones. The efficient method reads teacher scores
// from `cache` when one is given.
PhaseTiming time_epoch(Method method, const ModelParams& teacher, ModelParams student, const Dataset& dataset,
                       const BenchConfig& config, const TeacherScoreCache* cache = nullptr);

struct BenchReport {
  std::string table;
  std::string kv;
};

// Table with columns Method, Tea. Forward, Stu. Forward, Stu. Backward,
// Total (seconds, two decimals; "-" when no teacher runs), plus key=value
// lines. Rows keep input order. Throws InvalidInput on an empty list.
BenchReport report(const std::vector<PhaseTiming>& timings);

struct BenchResult {
  std::vector<PhaseTiming> timings;
  BenchReport report;
};

// Generates the synthetic corpus, initializes teacher and student, builds
// the teacher score cache and times every configured method.
BenchResult run_bench(const BenchConfig& config);

}  // namespace skd
