#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skd/bench.hpp"
#include "skd/dataset.hpp"
#include "skd/eval.hpp"
#include "skd/losses.hpp"
#include "skd/model.hpp"
#include "skd/score_cache.hpp"
#include "skd/trainer.hpp"

namespace skd {

// Line-delimited key=value records: `event=<name> key=value ...`.
class KvRecord {
 public:
  explicit KvRecord(const std::string& event);
  KvRecord& add(const std::string& key, const std::string& value);
  KvRecord& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
  KvRecord& add(const std::string& key, double value);
  template <std::integral T>
  KvRecord& add(const std::string& key, T value) {
    return add(key, std::to_string(value));
  }
  const std::string& str() const { return line_; }

 private:
  std::string line_;
};

class KvLog {
 public:
  explicit KvLog(std::ostream* out = nullptr) : out_(out) {}
  void write(const KvRecord& record);
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ostream* out_;
  std::vector<std::string> lines_;
};

enum class Command { kTrainTeacher, kCacheScores, kDistill, kEvaluate };

std::string command_name(Command command);

// Parameters shared by the pipeline subcommands. Unset optionals are filled
// by resolve() with command- and method-specific defaults.
struct RunConfig {
  std::string train;  // CoNLL paths
  std::string dev;
  std::string test;
  int token_column = 0;
  int tag_column = -1;
  std::string teacher;  // teacher checkpoint
  std::string cache;    // teacher score cache
  std::string model;    // checkpoint to evaluate
  std::string output_dir;
  std::string method = "efficient";
  std::optional<std::size_t> k;
  std::optional<std::string> schedule;
  std::optional<std::size_t> epochs;
  std::size_t batch_size = 32;
  std::optional<double> lr;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<ArchSpec> arch;
  std::string selection = "auto";  // auto, f1 or accuracy

  // Copy with every default filled in for `command`.
  RunConfig resolve(Command command) const;
  // Throws ConfigError naming the offending field.
  void validate(Command command) const;

  bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Rejects unknown keys.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

constexpr std::size_t kDefaultK = 3;
constexpr std::size_t kDefaultTeacherEpochs = 20;
constexpr std::size_t kDefaultStudentEpochs = 30;
constexpr double kDefaultTeacherLr = 5e-5;
constexpr double kDefaultStudentLr = 2e-4;

// Default lambda schedule for a method: zero for vanilla, paper-efficient
// for efficient, linear-decay for kbest and structural.
LambdaSchedule::Mode default_schedule(Method method);

enum class Selection { kAuto, kF1, kAccuracy };
Selection parse_selection(const std::string& name);
// Dev metric used for model selection.
double selection_metric(const Metrics& m, Selection selection);

struct EpochRecord {
  EpochStats stats;
  bool has_dev = false;
  Metrics dev;
};

struct TrainResult {
  ModelParams params;  // best-dev for teachers, final for students
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  std::vector<double> lambdas;
};

struct TeacherSettings {
  ArchSpec arch = default_teacher_arch();
  std::size_t epochs = kDefaultTeacherEpochs;
  std::size_t batch_size = 32;
  double lr = kDefaultTeacherLr;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  Selection selection = Selection::kAuto;
};

// Trains a teacher with the gold NLL and keeps the best-dev epoch (the last
// epoch when `dev` is null). Ties keep the earlier epoch.
TrainResult train_teacher(const Dataset& train, const Dataset* dev, const TeacherSettings& settings,
                          KvLog* log = nullptr);

struct DistillSettings {
  ArchSpec arch = default_student_arch();
  Method method = Method::kEfficient;
  std::size_t k = kDefaultK;
  LambdaSchedule::Mode schedule = LambdaSchedule::Mode::kPaperEfficient;
  std::size_t epochs = kDefaultStudentEpochs;
  std::size_t batch_size = 32;
  double lr = kDefaultStudentLr;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

// Trains a student with the method's loss mixed with the gold NLL by the
// lambda schedule. Teacher scores come from `cache` when given, otherwise
// from `teacher`. Returns the final-epoch student.
TrainResult distill_student(const Dataset& train, const Dataset* dev, const ModelParams* teacher,
                            const TeacherScoreCache* cache, const DistillSettings& settings, KvLog* log = nullptr);

// File-level subcommands. Each writes resolved_config.json to output_dir
// (when set) and logs to `log`.
struct CommandResult {
  std::string checkpoint;  // path written, if any
  std::optional<Metrics> metrics;
};

CommandResult run_train_teacher(const RunConfig& config, KvLog& log);
CommandResult run_cache_scores(const RunConfig& config, KvLog& log);
CommandResult run_distill(const RunConfig& config, KvLog& log);
CommandResult run_evaluate(const RunConfig& config, KvLog& log);

struct GenerateConfig {
  BenchDataSpec data;
  std::uint64_t stream = 0;
  std::string hmm;         // optional HMM spec to sample from instead of a generated one
  std::string output;      // CoNLL file
  std::string hmm_output;  // optional path for the HMM spec used
};

Dataset run_generate(const GenerateConfig& config, KvLog& log);

struct SuiteConfig {
  std::size_t num_states = 8;
  std::size_t vocab_size = 3000;
  std::uint64_t hmm_seed = 2024;
  std::size_t teacher_sentences = 2000;
  std::size_t student_sentences = 500;  // a prefix of the teacher's training set
  std::size_t dev_sentences = 500;
  std::size_t test_sentences = 1000;
  std::size_t min_len = 20;
  std::size_t max_len = 60;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> methods{"vanilla", "kbest", "structural", "efficient"};
  ArchSpec teacher_arch = default_teacher_arch();
  ArchSpec student_arch = default_student_arch();
  std::size_t teacher_epochs = kDefaultTeacherEpochs;
  std::size_t student_epochs = kDefaultStudentEpochs;
  double teacher_lr = 2e-3;
  double student_lr = 2e-3;
  std::size_t batch_size = 32;
  std::size_t k = kDefaultK;
  std::size_t threads = 1;
  std::uint64_t teacher_seed = 1;
  std::string work_dir;  // score cache location; empty uses the temp directory

  void validate() const;
};

void to_json(nlohmann::json& j, const SuiteConfig& c);
void from_json(const nlohmann::json& j, SuiteConfig& c);

struct SuiteRow {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> runs;
  Metrics mean;
};

struct SuiteResult {
  Metrics teacher;
  std::vector<SuiteRow> rows;
  std::string table;
};

// Trains one teacher, then one student per (method, seed) and reports the
// per-method mean test metrics.
SuiteResult run_experiment_suite(const SuiteConfig& config, KvLog* log = nullptr);

// Mean of each metric over runs (span counts are summed).
Metrics mean_metrics(const std::vector<Metrics>& runs);

// Summary table: Precision/Recall/F1 when spans exist, else token accuracy.
std::string format_suite_table(const std::vector<SuiteRow>& rows, const std::optional<Metrics>& teacher);

}  // namespace skd
