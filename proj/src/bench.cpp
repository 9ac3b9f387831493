#include "skd/bench.hpp"

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <fmt/format.h>

#include "skd/checkpoint.hpp"
#include "skd/hmm.hpp"
#include "skd/random.hpp"

namespace skd {

void PhaseTiming::validate() const {
  for (double v : {teacher_forward_s, student_forward_s, student_backward_s, total_s, overhead_s}) {
    if (!(v >= 0.0)) throw InvalidInput("phase timing for '" + method + "' has a negative duration");
  }
  const double phases = teacher_forward_s + student_forward_s + student_backward_s;
  if (phases > total_s * (1.0 + 1e-9) + 1e-12) {
    throw InvalidInput("phase timing for '" + method + "' exceeds the epoch total");
  }
  const double bound = 1.05 * (phases + overhead_s);
  if (total_s > bound + 1e-12) throw InvalidInput("phase timing for '" + method + "' has unaccounted time");
}

ArchSpec default_teacher_arch() { return {64, 5, {128, 128}}; }
ArchSpec default_student_arch() { return {32, 3, {32}}; }

EncoderConfig make_encoder(const ArchSpec& arch, std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed) {
  EncoderConfig c{vocab_size, arch.embed_dim, arch.window, arch.hidden_dims, num_tags, seed};
  c.validate();
  return c;
}

void BenchConfig::validate() const {
  if (methods.empty()) throw ConfigError("bench config: methods must not be empty");
  for (const auto& m : methods) {
    try {
      parse_method(m);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("bench config: methods: ") + e.what());
    }
  }
  if (warmup_epochs < 1) throw ConfigError("bench config: warmup_epochs must be >= 1");
  if (measured_epochs < 1) throw ConfigError("bench config: measured_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("bench config: batch_size must be >= 1");
  if (threads < 1) throw ConfigError("bench config: threads must be >= 1");
  if (k < 1) throw ConfigError("bench config: k must be >= 1");
  if (!(mixed_lambda >= 0.0 && mixed_lambda <= 1.0)) throw ConfigError("bench config: mixed_lambda must lie in [0, 1]");
  if (data.sentences < 1) throw ConfigError("bench config: data.sentences must be >= 1");
  if (data.min_len < 1 || data.min_len > data.max_len) throw ConfigError("bench config: need 1 <= data.min_len <= data.max_len");
  if (data.num_states < 1 || data.vocab_size < data.num_states) {
    throw ConfigError("bench config: data.vocab_size must be >= data.num_states >= 1");
  }
}

void to_json(nlohmann::json& j, const ArchSpec& a) {
  j = nlohmann::json{{"embed_dim", a.embed_dim}, {"window", a.window}, {"hidden_dims", a.hidden_dims}};
}

void from_json(const nlohmann::json& j, ArchSpec& a) {
  j.at("embed_dim").get_to(a.embed_dim);
  j.at("window").get_to(a.window);
  j.at("hidden_dims").get_to(a.hidden_dims);
}

void to_json(nlohmann::json& j, const BenchDataSpec& d) {
  j = nlohmann::json{{"num_states", d.num_states}, {"vocab_size", d.vocab_size}, {"sentences", d.sentences},
                     {"min_len", d.min_len}, {"max_len", d.max_len}, {"seed", d.seed}};
}

void from_json(const nlohmann::json& j, BenchDataSpec& d) {
  const BenchDataSpec def;
  d.num_states = j.value("num_states", def.num_states);
  d.vocab_size = j.value("vocab_size", def.vocab_size);
  d.sentences = j.value("sentences", def.sentences);
  d.min_len = j.value("min_len", def.min_len);
  d.max_len = j.value("max_len", def.max_len);
  d.seed = j.value("seed", def.seed);
}

void to_json(nlohmann::json& j, const BenchConfig& c) {
  j = nlohmann::json{{"data", c.data},
                     {"methods", c.methods},
                     {"warmup_epochs", c.warmup_epochs},
                     {"measured_epochs", c.measured_epochs},
                     {"threads", c.threads},
                     {"batch_size", c.batch_size},
                     {"k", c.k},
                     {"mixed_lambda", c.mixed_lambda},
                     {"lr", c.lr},
                     {"teacher", c.teacher},
                     {"student", c.student},
                     {"seed", c.seed},
                     {"output", c.output},
                     {"cache_path", c.cache_path}};
}

void from_json(const nlohmann::json& j, BenchConfig& c) {
  const BenchConfig def;
  c.data = j.value("data", def.data);
  c.methods = j.value("methods", def.methods);
  c.warmup_epochs = j.value("warmup_epochs", def.warmup_epochs);
  c.measured_epochs = j.value("measured_epochs", def.measured_epochs);
  c.threads = j.value("threads", def.threads);
  c.batch_size = j.value("batch_size", def.batch_size);
  c.k = j.value("k", def.k);
  c.mixed_lambda = j.value("mixed_lambda", def.mixed_lambda);
  c.lr = j.value("lr", def.lr);
  c.teacher = j.value("teacher", def.teacher);
  c.student = j.value("student", def.student);
  c.seed = j.value("seed", def.seed);
  c.output = j.value("output", def.output);
  c.cache_path = j.value("cache_path", def.cache_path);
}

double bench_lambda(Method method, const BenchConfig& config) {
  switch (method) {
    case Method::kVanilla:
      return 0.0;
    case Method::kEfficient:
      return 1.0;
    default:
      return config.mixed_lambda;
  }
}

PhaseTiming time_epoch(Method method, const ModelParams& teacher, ModelParams student, const Dataset& dataset,
                       const BenchConfig& config, const TeacherScoreCache* cache) {
  if (config.warmup_epochs < 1) throw ConfigError("time_epoch: warmup must be >= 1");
  if (config.measured_epochs < 1) throw ConfigError("time_epoch: measured epochs must be >= 1");
  AdamState adam = AdamState::for_params(student, config.lr);
  TrainOptions opts{method, config.batch_size, config.k, config.threads, derive_seed(config.seed, "bench-shuffle")};
  const bool use_cache = method == Method::kEfficient && cache != nullptr;
  Trainer trainer(student, adam, dataset, opts, &teacher, use_cache ? cache : nullptr);
  const double lambda = bench_lambda(method, config);

  PhaseTiming t;
  t.method = method_name(method);
  t.warmup_epochs = config.warmup_epochs;
  t.epochs_measured = config.measured_epochs;
  const std::size_t total = config.warmup_epochs + config.measured_epochs;
  for (std::size_t e = 0; e < total; ++e) {
    const EpochStats s = trainer.run_epoch(e, lambda);
    ++t.epochs_executed;
    if (e < config.warmup_epochs) continue;
    t.teacher_forward_s += s.teacher_forward_s;
    t.student_forward_s += s.student_forward_s;
    t.student_backward_s += s.student_backward_s;
    t.total_s += s.total_s;
    t.teacher_encodes += s.teacher_encodes;
    t.student_log_partitions += s.student_log_partitions;
  }
  const double n = static_cast<double>(config.measured_epochs);
  t.teacher_forward_s /= n;
  t.student_forward_s /= n;
  t.student_backward_s /= n;
  t.total_s /= n;
  t.overhead_s = std::max(0.0, t.total_s - (t.teacher_forward_s + t.student_forward_s + t.student_backward_s));
  t.validate();
  return t;
}

BenchReport report(const std::vector<PhaseTiming>& timings) {
  if (timings.empty()) throw InvalidInput("report needs at least one timing");
  for (const auto& t : timings) t.validate();
  BenchReport r;
  r.table = fmt::format("{:<18}{:>14}{:>14}{:>15}{:>10}\n", "Method", "Tea. Forward", "Stu. Forward", "Stu. Backward",
                        "Total");
  for (const auto& t : timings) {
    const Method m = parse_method(t.method);
    const std::string teacher = m == Method::kVanilla ? "-" : fmt::format("{:.2f}s", t.teacher_forward_s);
    r.table += fmt::format("{:<18}{:>14}{:>14}{:>15}{:>10}\n", method_label(m), teacher,
                           fmt::format("{:.2f}s", t.student_forward_s), fmt::format("{:.2f}s", t.student_backward_s),
                           fmt::format("{:.2f}s", t.total_s));
    r.kv += fmt::format(
        "method={} teacher_forward_s={:.6f} student_forward_s={:.6f} student_backward_s={:.6f} total_s={:.6f} "
        "overhead_s={:.6f} warmup_epochs={} epochs_measured={} teacher_encodes={} student_log_partitions={}\n",
        t.method, m == Method::kVanilla ? 0.0 : t.teacher_forward_s, t.student_forward_s, t.student_backward_s,
        t.total_s, t.overhead_s, t.warmup_epochs, t.epochs_measured, t.teacher_encodes, t.student_log_partitions);
  }
  r.table +=
      "Per-epoch averages. Tea. Forward for Struct. KD includes the teacher's forward-backward marginals;\n"
      "for K-best it includes K-best decoding; for Efficient KD it is score-cache reads.\n";
  return r;
}

BenchResult run_bench(const BenchConfig& config) {
  config.validate();
  const HmmSpec hmm = make_benchmark_hmm(config.data.num_states, config.data.vocab_size, config.data.seed);
  const Dataset data = hmm_generate(hmm, config.data.sentences, config.data.min_len, config.data.max_len);
  const std::size_t vocab = data.token_vocab.size();
  const ModelParams teacher =
      init_model(make_encoder(config.teacher, vocab, data.num_tags(), derive_seed(config.seed, "bench-teacher")));
  const ModelParams student =
      init_model(make_encoder(config.student, vocab, data.num_tags(), derive_seed(config.seed, "bench-student")));

  std::string cache_path = config.cache_path;
  if (cache_path.empty()) {
    cache_path = (std::filesystem::temp_directory_path() /
                  fmt::format("skd-bench-{}-{}.cache", hex64(fingerprint(data)), static_cast<long>(::getpid())))
                     .string();
  }
  const TeacherScoreCache cache = build_cache(teacher, data, cache_path, config.threads);

  BenchResult result;
  for (const auto& name : config.methods) {
    const Method m = parse_method(name);
    result.timings.push_back(time_epoch(m, teacher, student, data, config, &cache));
  }
  if (config.cache_path.empty()) std::filesystem::remove(cache_path);
  result.report = report(result.timings);
  if (!config.output.empty()) {
    std::ofstream out(config.output);
    if (!out) throw IoError("cannot open '" + config.output + "' for writing");
    out << result.report.table << '\n' << result.report.kv;
  }
  return result;
}

}  // namespace skd
