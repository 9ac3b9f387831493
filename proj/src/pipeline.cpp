#include "skd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include <fmt/format.h>

#include "skd/checkpoint.hpp"
#include "skd/hmm.hpp"
#include "skd/instrumentation.hpp"
#include "skd/random.hpp"

namespace skd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- key=value logging

namespace {

std::string quote_if_needed(const std::string& v) {
  const bool plain = !v.empty() && v.find_first_of(" \t\n=\"") == std::string::npos;
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

KvRecord::KvRecord(const std::string& event) : line_("event=" + quote_if_needed(event)) {}

KvRecord& KvRecord::add(const std::string& key, const std::string& value) {
  line_ += ' ';
  line_ += key;
  line_ += '=';
  line_ += quote_if_needed(value);
  return *this;
}

KvRecord& KvRecord::add(const std::string& key, double value) { return add(key, fmt::format("{:.8g}", value)); }

void KvLog::write(const KvRecord& record) {
  lines_.push_back(record.str());
  if (out_ != nullptr) *out_ << record.str() << '\n' << std::flush;
}

std::string command_name(Command command) {
  switch (command) {
    case Command::kTrainTeacher:
      return "train-teacher";
    case Command::kCacheScores:
      return "cache-scores";
    case Command::kDistill:
      return "distill";
    case Command::kEvaluate:
      return "evaluate";
  }
  return "?";
}

// ---- config

LambdaSchedule::Mode default_schedule(Method method) {
  switch (method) {
    case Method::kVanilla:
      return LambdaSchedule::Mode::kConstantZero;
    case Method::kEfficient:
      return LambdaSchedule::Mode::kPaperEfficient;
    default:
      return LambdaSchedule::Mode::kLinearDecay;
  }
}

Selection parse_selection(const std::string& name) {
  if (name == "auto") return Selection::kAuto;
  if (name == "f1") return Selection::kF1;
  if (name == "accuracy") return Selection::kAccuracy;
  throw ConfigError("selection: expected auto, f1 or accuracy, got '" + name + "'");
}

double selection_metric(const Metrics& m, Selection selection) {
  switch (selection) {
    case Selection::kF1:
      if (!m.has_spans) throw ConfigError("selection: f1 needs BIO-tagged dev data");
      return m.spans.f1;
    case Selection::kAccuracy:
      return m.token_accuracy;
    case Selection::kAuto:
      return m.has_spans ? m.spans.f1 : m.token_accuracy;
  }
  return 0.0;
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
    return;
  }
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(fmt::format("{}: unknown field '{}'", what, it.key()));
  }
}

void validate_arch(const ArchSpec& a, const std::string& field) {
  if (a.embed_dim < 1) throw ConfigError(field + ".embed_dim: must be >= 1");
  if (a.window < 1 || a.window % 2 == 0) throw ConfigError(field + ".window: must be odd and >= 1");
  for (std::size_t h : a.hidden_dims) {
    if (h < 1) throw ConfigError(field + ".hidden_dims: every layer needs >= 1 unit");
  }
}

void require_path(const std::string& value, const std::string& field, Command command) {
  if (value.empty()) throw ConfigError(fmt::format("{}: required by {}", field, command_name(command)));
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  j = json{{"train", c.train},
           {"dev", c.dev},
           {"test", c.test},
           {"token_column", c.token_column},
           {"tag_column", c.tag_column},
           {"teacher", c.teacher},
           {"cache", c.cache},
           {"model", c.model},
           {"output_dir", c.output_dir},
           {"method", c.method},
           {"k", optional_json(c.k)},
           {"schedule", optional_json(c.schedule)},
           {"epochs", optional_json(c.epochs)},
           {"batch_size", c.batch_size},
           {"lr", optional_json(c.lr)},
           {"seed", c.seed},
           {"threads", c.threads},
           {"arch", optional_json(c.arch)},
           {"selection", c.selection}};
}

void from_json(const json& j, RunConfig& c) {
  static const std::set<std::string> allowed{
      "train",  "dev",    "test",   "token_column", "tag_column", "teacher", "cache",   "model",  "output_dir", "method",
      "k",      "schedule", "epochs", "batch_size", "lr",         "seed",    "threads", "arch",   "selection"};
  reject_unknown(j, allowed, "run config");
  c = RunConfig{};
  read_field(j, "train", c.train);
  read_field(j, "dev", c.dev);
  read_field(j, "test", c.test);
  read_field(j, "token_column", c.token_column);
  read_field(j, "tag_column", c.tag_column);
  read_field(j, "teacher", c.teacher);
  read_field(j, "cache", c.cache);
  read_field(j, "model", c.model);
  read_field(j, "output_dir", c.output_dir);
  read_field(j, "method", c.method);
  read_optional(j, "k", c.k);
  read_optional(j, "schedule", c.schedule);
  read_optional(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_optional(j, "lr", c.lr);
  read_field(j, "seed", c.seed);
  read_field(j, "threads", c.threads);
  read_optional(j, "arch", c.arch);
  read_field(j, "selection", c.selection);
}

RunConfig RunConfig::resolve(Command command) const {
  RunConfig r = *this;
  const bool teacher_side = command == Command::kTrainTeacher;
  if (!r.k) r.k = kDefaultK;
  if (command == Command::kTrainTeacher || command == Command::kDistill) {
    if (!r.epochs) r.epochs = teacher_side ? kDefaultTeacherEpochs : kDefaultStudentEpochs;
    if (!r.lr) r.lr = teacher_side ? kDefaultTeacherLr : kDefaultStudentLr;
    if (!r.arch) r.arch = teacher_side ? default_teacher_arch() : default_student_arch();
  }
  if (command == Command::kDistill && !r.schedule) {
    r.schedule = LambdaSchedule::mode_name(default_schedule(parse_method(r.method)));
  }
  return r;
}

void RunConfig::validate(Command command) const {
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  if (epochs && *epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (k && *k < 1) throw ConfigError("k: must be >= 1");
  if (lr && !(std::isfinite(*lr) && *lr > 0.0)) throw ConfigError("lr: must be a positive number");
  if (token_column == tag_column) throw ConfigError("tag_column: must differ from token_column");
  Method m;
  try {
    m = parse_method(method);
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("method: ") + e.what());
  }
  if (schedule) {
    try {
      LambdaSchedule::parse_mode(*schedule);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    }
  }
  parse_selection(selection);
  if (arch) validate_arch(*arch, "arch");

  switch (command) {
    case Command::kTrainTeacher:
      require_path(train, "train", command);
      require_path(output_dir, "output_dir", command);
      break;
    case Command::kCacheScores:
      require_path(train, "train", command);
      require_path(teacher, "teacher", command);
      require_path(cache, "cache", command);
      break;
    case Command::kDistill:
      require_path(train, "train", command);
      require_path(output_dir, "output_dir", command);
      if (m != Method::kVanilla && teacher.empty()) {
        throw ConfigError(fmt::format("teacher: required by method '{}'", method));
      }
      if (m != Method::kEfficient && m != Method::kVanilla && !cache.empty()) {
        throw ConfigError(fmt::format("cache: only the efficient method reads a score cache, not '{}'", method));
      }
      break;
    case Command::kEvaluate:
      require_path(model, "model", command);
      require_path(test, "test", command);
      break;
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return j.get<RunConfig>();
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---- in-memory training

namespace {

KvRecord epoch_record(const std::string& phase, const EpochRecord& r) {
  KvRecord rec("epoch");
  rec.add("phase", phase)
      .add("epoch", r.stats.epoch)
      .add("lambda", r.stats.lambda)
      .add("loss", r.stats.mean_loss)
      .add("teacher_forward_s", r.stats.teacher_forward_s)
      .add("student_forward_s", r.stats.student_forward_s)
      .add("student_backward_s", r.stats.student_backward_s)
      .add("total_s", r.stats.total_s)
      .add("teacher_encodes", r.stats.teacher_encodes)
      .add("cache_reads", r.stats.cache_reads)
      .add("student_log_partitions", r.stats.student_log_partitions);
  if (r.has_dev) {
    rec.add("dev_accuracy", r.dev.token_accuracy);
    if (r.dev.has_spans) {
      rec.add("dev_precision", r.dev.spans.precision).add("dev_recall", r.dev.spans.recall).add("dev_f1", r.dev.spans.f1);
    }
  }
  return rec;
}

void require_same_tags(const Dataset& a, const Dataset& b, const char* what) {
  if (!(a.tag_vocab == b.tag_vocab)) throw ConfigError(std::string(what) + ": tag set differs from the training data");
}

}  // namespace

TrainResult train_teacher(const Dataset& train, const Dataset* dev, const TeacherSettings& s, KvLog* log) {
  if (s.epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (train.size() == 0) throw EmptyDataset("teacher training set is empty");
  if (dev) require_same_tags(train, *dev, "dev");
  const EncoderConfig config =
      make_encoder(s.arch, train.token_vocab.size(), train.num_tags(), derive_seed(s.seed, "teacher-init"));
  TrainResult result{init_model(config), {}, 0, {}};
  ModelParams params = result.params;
  AdamState adam = AdamState::for_params(params, s.lr);
  Trainer trainer(params, adam, train,
                  {Method::kVanilla, s.batch_size, kDefaultK, s.threads, derive_seed(s.seed, "teacher-shuffle")});
  double best = -1.0;
  for (std::size_t e = 0; e < s.epochs; ++e) {
    EpochRecord rec{trainer.run_epoch(e, 0.0), false, {}};
    result.lambdas.push_back(0.0);
    if (dev) {
      rec.has_dev = true;
      rec.dev = evaluate(params, *dev, s.threads);
      const double metric = selection_metric(rec.dev, s.selection);
      if (metric > best) {
        best = metric;
        result.params = params;
        result.selected_epoch = e;
      }
    } else {
      result.params = params;
      result.selected_epoch = e;
    }
    if (log) log->write(epoch_record("teacher", rec));
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

TrainResult distill_student(const Dataset& train, const Dataset* dev, const ModelParams* teacher,
                            const TeacherScoreCache* cache, const DistillSettings& s, KvLog* log) {
  if (s.epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (train.size() == 0) throw EmptyDataset("student training set is empty");
  if (dev) require_same_tags(train, *dev, "dev");
  const EncoderConfig config =
      make_encoder(s.arch, train.token_vocab.size(), train.num_tags(), derive_seed(s.seed, "student-init"));
  TrainResult result{init_model(config), {}, 0, {}};
  AdamState adam = AdamState::for_params(result.params, s.lr);
  Trainer trainer(result.params, adam, train,
                  {s.method, s.batch_size, s.k, s.threads, derive_seed(s.seed, "student-shuffle")}, teacher, cache);
  const LambdaSchedule schedule(s.method == Method::kVanilla ? LambdaSchedule::Mode::kConstantZero : s.schedule,
                                s.epochs);
  for (std::size_t e = 0; e < s.epochs; ++e) {
    EpochRecord rec{trainer.run_epoch(e, schedule.at(e)), false, {}};
    result.lambdas.push_back(rec.stats.lambda);
    if (dev) {
      rec.has_dev = true;
      rec.dev = evaluate(result.params, *dev, s.threads);
    }
    if (log) log->write(epoch_record(method_name(s.method), rec));
    result.epochs.push_back(std::move(rec));
  }
  result.selected_epoch = s.epochs - 1;
  return result;
}

// ---- file-level commands

namespace {

ConllColumns columns_of(const RunConfig& c) { return {c.token_column, c.tag_column}; }

void write_resolved(const RunConfig& c) {
  if (c.output_dir.empty()) return;
  fs::create_directories(c.output_dir);
  save_json((fs::path(c.output_dir) / "resolved_config.json").string(), json(c));
}

std::optional<Dataset> load_dev(const RunConfig& c, const Dataset& train) {
  if (c.dev.empty()) return std::nullopt;
  return parse_conll(c.dev, columns_of(c), train.token_vocab, train.tag_vocab);
}

KvRecord metrics_record(const std::string& split, const Metrics& m) {
  KvRecord rec("metrics");
  rec.add("split", split).add("accuracy", m.token_accuracy);
  if (m.has_spans) {
    rec.add("precision", m.spans.precision)
        .add("recall", m.spans.recall)
        .add("f1", m.spans.f1)
        .add("correct", m.spans.correct)
        .add("predicted", m.spans.predicted)
        .add("gold", m.spans.gold);
  }
  return rec;
}

}  // namespace

CommandResult run_train_teacher(const RunConfig& config, KvLog& log) {
  config.validate(Command::kTrainTeacher);
  const RunConfig c = config.resolve(Command::kTrainTeacher);
  const Dataset train = parse_conll(c.train, columns_of(c));
  const auto dev = load_dev(c, train);
  write_resolved(c);

  TeacherSettings s{*c.arch, *c.epochs, c.batch_size, *c.lr, c.seed, c.threads, parse_selection(c.selection)};
  TrainResult r = train_teacher(train, dev ? &*dev : nullptr, s, &log);

  CommandResult out;
  out.checkpoint = (fs::path(c.output_dir) / "teacher.ckpt").string();
  save_checkpoint(out.checkpoint, {r.params, train.tag_vocab, train.token_vocab});
  log.write(KvRecord("checkpoint")
                .add("path", out.checkpoint)
                .add("selected_epoch", r.selected_epoch)
                .add("fingerprint", hex64(model_fingerprint(r.params))));
  if (dev) {
    out.metrics = r.epochs[r.selected_epoch].dev;
    log.write(metrics_record("dev", *out.metrics));
  }
  return out;
}

CommandResult run_cache_scores(const RunConfig& config, KvLog& log) {
  config.validate(Command::kCacheScores);
  const RunConfig c = config.resolve(Command::kCacheScores);
  const Checkpoint teacher = load_checkpoint(c.teacher);
  const Dataset train = parse_conll(c.train, columns_of(c), teacher.token_vocab, teacher.tag_vocab);
  write_resolved(c);
  const std::uint64_t before = instrumentation::encode_calls();
  const TeacherScoreCache cache = build_cache(teacher.params, train, c.cache, c.threads);
  log.write(KvRecord("cache")
                .add("path", c.cache)
                .add("records", cache.size())
                .add("teacher_encodes", instrumentation::encode_calls() - before)
                .add("fingerprint", hex64(cache.header().fingerprint)));
  return {};
}

CommandResult run_distill(const RunConfig& config, KvLog& log) {
  config.validate(Command::kDistill);
  const RunConfig c = config.resolve(Command::kDistill);
  const Method method = parse_method(c.method);

  std::optional<Checkpoint> teacher;
  if (!c.teacher.empty()) teacher = load_checkpoint(c.teacher);
  const Dataset train = teacher ? parse_conll(c.train, columns_of(c), teacher->token_vocab, teacher->tag_vocab)
                                : parse_conll(c.train, columns_of(c));
  const auto dev = load_dev(c, train);
  if (teacher && teacher->params.num_tags() != train.num_tags()) {
    throw ConfigError("teacher: tag count differs from the training data");
  }
  write_resolved(c);

  std::optional<TeacherScoreCache> cache;
  if (method == Method::kEfficient) {
    const std::uint64_t teacher_fp = model_fingerprint(teacher->params);
    if (!c.cache.empty() && fs::exists(c.cache)) {
      cache = load_cache(c.cache, train, &teacher->params);
      log.write(KvRecord("cache").add("path", c.cache).add("action", "loaded").add("records", cache->size()));
    } else {
      const std::string path =
          c.cache.empty() ? (fs::path(c.output_dir) / "teacher_scores.cache").string() : c.cache;
      cache = build_cache(teacher->params, train, path, c.threads);
      log.write(KvRecord("cache").add("path", path).add("action", "built").add("records", cache->size()));
    }
    cache->check(train, teacher_fp);
  }

  DistillSettings s{*c.arch, method, *c.k, LambdaSchedule::parse_mode(*c.schedule), *c.epochs, c.batch_size,
                    *c.lr, c.seed, c.threads};
  TrainResult r = distill_student(train, dev ? &*dev : nullptr, teacher ? &teacher->params : nullptr,
                                  cache ? &*cache : nullptr, s, &log);

  CommandResult out;
  out.checkpoint = (fs::path(c.output_dir) / "student.ckpt").string();
  save_checkpoint(out.checkpoint, {r.params, train.tag_vocab, train.token_vocab});
  log.write(KvRecord("checkpoint").add("path", out.checkpoint).add("fingerprint", hex64(model_fingerprint(r.params))));
  if (dev) {
    out.metrics = r.epochs.back().dev;
    log.write(metrics_record("dev", *out.metrics));
  }
  return out;
}

CommandResult run_evaluate(const RunConfig& config, KvLog& log) {
  config.validate(Command::kEvaluate);
  const RunConfig c = config.resolve(Command::kEvaluate);
  const Checkpoint model = load_checkpoint(c.model);
  const Dataset test = parse_conll(c.test, columns_of(c), model.token_vocab, model.tag_vocab);
  write_resolved(c);
  CommandResult out;
  out.metrics = evaluate(model.params, test, c.threads);
  log.write(metrics_record("test", *out.metrics));
  return out;
}

Dataset run_generate(const GenerateConfig& c, KvLog& log) {
  HmmSpec spec;
  if (!c.hmm.empty()) {
    std::ifstream in(c.hmm);
    if (!in) throw IoError("cannot read HMM spec '" + c.hmm + "'");
    try {
      spec = json::parse(in).get<HmmSpec>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", c.hmm, e.what()));
    }
    spec.validate();
  } else {
    if (c.data.num_states < 1 || c.data.vocab_size < c.data.num_states) {
      throw ConfigError("vocab_size: must be >= num_states >= 1");
    }
    spec = make_benchmark_hmm(c.data.num_states, c.data.vocab_size, c.data.seed);
  }
  if (c.data.min_len < 1 || c.data.min_len > c.data.max_len) throw ConfigError("min_len: need 1 <= min_len <= max_len");
  if (c.data.sentences < 1) throw ConfigError("sentences: must be >= 1");
  Dataset d = hmm_generate(spec, c.data.sentences, c.data.min_len, c.data.max_len, c.stream);
  if (!c.output.empty()) write_conll(d, c.output);
  if (!c.hmm_output.empty()) save_json(c.hmm_output, json(spec));
  log.write(KvRecord("generate")
                .add("sentences", d.size())
                .add("tokens", d.num_tokens())
                .add("states", spec.num_states)
                .add("output", c.output.empty() ? "-" : c.output)
                .add("fingerprint", hex64(fingerprint(d))));
  return d;
}

// ---- experiment suite

void SuiteConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: must not be empty");
  if (methods.empty()) throw ConfigError("methods: must not be empty");
  for (const auto& m : methods) {
    try {
      parse_method(m);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("methods: ") + e.what());
    }
  }
  if (num_states < 1 || vocab_size < num_states) throw ConfigError("vocab_size: must be >= num_states >= 1");
  if (teacher_sentences < 1) throw ConfigError("teacher_sentences: must be >= 1");
  if (student_sentences < 1 || student_sentences > teacher_sentences) {
    throw ConfigError("student_sentences: must lie in [1, teacher_sentences]");
  }
  if (dev_sentences < 1) throw ConfigError("dev_sentences: must be >= 1");
  if (test_sentences < 1) throw ConfigError("test_sentences: must be >= 1");
  if (min_len < 1 || min_len > max_len) throw ConfigError("min_len: need 1 <= min_len <= max_len");
  if (teacher_epochs < 1) throw ConfigError("teacher_epochs: must be >= 1");
  if (student_epochs < 1) throw ConfigError("student_epochs: must be >= 1");
  if (!(teacher_lr > 0.0)) throw ConfigError("teacher_lr: must be positive");
  if (!(student_lr > 0.0)) throw ConfigError("student_lr: must be positive");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (k < 1) throw ConfigError("k: must be >= 1");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  validate_arch(teacher_arch, "teacher_arch");
  validate_arch(student_arch, "student_arch");
}

void to_json(json& j, const SuiteConfig& c) {
  j = json{{"num_states", c.num_states},
           {"vocab_size", c.vocab_size},
           {"hmm_seed", c.hmm_seed},
           {"teacher_sentences", c.teacher_sentences},
           {"student_sentences", c.student_sentences},
           {"dev_sentences", c.dev_sentences},
           {"test_sentences", c.test_sentences},
           {"min_len", c.min_len},
           {"max_len", c.max_len},
           {"seeds", c.seeds},
           {"methods", c.methods},
           {"teacher_arch", c.teacher_arch},
           {"student_arch", c.student_arch},
           {"teacher_epochs", c.teacher_epochs},
           {"student_epochs", c.student_epochs},
           {"teacher_lr", c.teacher_lr},
           {"student_lr", c.student_lr},
           {"batch_size", c.batch_size},
           {"k", c.k},
           {"threads", c.threads},
           {"teacher_seed", c.teacher_seed},
           {"work_dir", c.work_dir}};
}

void from_json(const json& j, SuiteConfig& c) {
  static const std::set<std::string> allowed{
      "num_states",   "vocab_size",     "hmm_seed",       "teacher_sentences", "student_sentences", "dev_sentences",
      "test_sentences", "min_len",      "max_len",        "seeds",             "methods",           "teacher_arch",
      "student_arch", "teacher_epochs", "student_epochs", "teacher_lr",        "student_lr",        "batch_size",
      "k",            "threads",        "teacher_seed",   "work_dir"};
  reject_unknown(j, allowed, "suite config");
  c = SuiteConfig{};
  read_field(j, "num_states", c.num_states);
  read_field(j, "vocab_size", c.vocab_size);
  read_field(j, "hmm_seed", c.hmm_seed);
  read_field(j, "teacher_sentences", c.teacher_sentences);
  read_field(j, "student_sentences", c.student_sentences);
  read_field(j, "dev_sentences", c.dev_sentences);
  read_field(j, "test_sentences", c.test_sentences);
  read_field(j, "min_len", c.min_len);
  read_field(j, "max_len", c.max_len);
  read_field(j, "seeds", c.seeds);
  read_field(j, "methods", c.methods);
  read_field(j, "teacher_arch", c.teacher_arch);
  read_field(j, "student_arch", c.student_arch);
  read_field(j, "teacher_epochs", c.teacher_epochs);
  read_field(j, "student_epochs", c.student_epochs);
  read_field(j, "teacher_lr", c.teacher_lr);
  read_field(j, "student_lr", c.student_lr);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "k", c.k);
  read_field(j, "threads", c.threads);
  read_field(j, "teacher_seed", c.teacher_seed);
  read_field(j, "work_dir", c.work_dir);
}

Metrics mean_metrics(const std::vector<Metrics>& runs) {
  if (runs.empty()) throw InvalidInput("mean_metrics needs at least one run");
  Metrics m;
  m.has_spans = runs.front().has_spans;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    m.token_accuracy += r.token_accuracy / n;
    if (m.has_spans) {
      m.spans.precision += r.spans.precision / n;
      m.spans.recall += r.spans.recall / n;
      m.spans.f1 += r.spans.f1 / n;
      m.spans.correct += r.spans.correct;
      m.spans.predicted += r.spans.predicted;
      m.spans.gold += r.spans.gold;
    }
  }
  if (runs.size() == 1) return runs.front();
  return m;
}

std::string format_suite_table(const std::vector<SuiteRow>& rows, const std::optional<Metrics>& teacher) {
  const bool spans = !rows.empty() ? rows.front().mean.has_spans : (teacher && teacher->has_spans);
  std::string out;
  auto line = [&](const std::string& label, const Metrics& m) {
    if (spans) {
      out += fmt::format("{:<18}{:>11.2f}{:>9.2f}{:>8.2f}\n", label, m.spans.precision, m.spans.recall, m.spans.f1);
    } else {
      out += fmt::format("{:<18}{:>10.2f}\n", label, m.token_accuracy);
    }
  };
  if (spans) {
    out += fmt::format("{:<18}{:>11}{:>9}{:>8}\n", "Method", "Precision", "Recall", "F1");
  } else {
    out += fmt::format("{:<18}{:>10}\n", "Method", "Accuracy");
  }
  if (teacher) line("Teacher", *teacher);
  for (const auto& r : rows) line(method_label(parse_method(r.method)), r.mean);
  return out;
}

SuiteResult run_experiment_suite(const SuiteConfig& c, KvLog* log) {
  c.validate();
  const HmmSpec spec = make_benchmark_hmm(c.num_states, c.vocab_size, c.hmm_seed);
  const Dataset teacher_train = hmm_generate(spec, c.teacher_sentences, c.min_len, c.max_len, 0);
  const Dataset dev = hmm_generate(spec, c.dev_sentences, c.min_len, c.max_len, 1);
  const Dataset test = hmm_generate(spec, c.test_sentences, c.min_len, c.max_len, 2);
  const Dataset student_train = teacher_train.slice(0, c.student_sentences);

  TeacherSettings ts{c.teacher_arch, c.teacher_epochs, c.batch_size, c.teacher_lr, c.teacher_seed, c.threads,
                     Selection::kAuto};
  const TrainResult teacher = train_teacher(teacher_train, &dev, ts, log);
  SuiteResult result;
  result.teacher = evaluate(teacher.params, test, c.threads);
  if (log) log->write(metrics_record("test", result.teacher).add("model", "teacher"));

  std::optional<TeacherScoreCache> cache;
  std::string cache_path;
  if (std::find(c.methods.begin(), c.methods.end(), "efficient") != c.methods.end()) {
    const fs::path dir = c.work_dir.empty() ? fs::temp_directory_path() : fs::path(c.work_dir);
    fs::create_directories(dir);
    cache_path = (dir / fmt::format("skd-suite-{}-{}.cache", hex64(fingerprint(student_train)),
                                    static_cast<long>(::getpid())))
                     .string();
    cache = build_cache(teacher.params, student_train, cache_path, c.threads);
  }

  for (const auto& name : c.methods) {
    const Method method = parse_method(name);
    SuiteRow row;
    row.method = name;
    for (std::uint64_t seed : c.seeds) {
      try {
        DistillSettings ds{c.student_arch, method,  c.k,    default_schedule(method), c.student_epochs,
                           c.batch_size,   c.student_lr, seed, c.threads};
        const TrainResult r = distill_student(student_train, nullptr, &teacher.params,
                                              method == Method::kEfficient ? &*cache : nullptr, ds, nullptr);
        const Metrics m = evaluate(r.params, test, c.threads);
        if (log) log->write(metrics_record("test", m).add("model", "student").add("method", name).add("seed", seed));
        row.seeds.push_back(seed);
        row.runs.push_back(m);
      } catch (const Error& e) {
        throw Error(fmt::format("suite method={} seed={}: {}", name, seed, e.what()));
      }
    }
    row.mean = mean_metrics(row.runs);
    result.rows.push_back(std::move(row));
  }
  if (!cache_path.empty()) fs::remove(cache_path);
  result.table = format_suite_table(result.rows, result.teacher);
  return result;
}

}  // namespace skd
