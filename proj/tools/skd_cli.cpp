// skd: train CRF taggers and distill them into small students.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "skd/bench.hpp"
#include "skd/error.hpp"
#include "skd/pipeline.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw skd::IoError("cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw skd::ConfigError(path + ": " + e.what());
  }
}

// Flag overrides for RunConfig. Unset flags leave the file's values alone.
struct RunFlags {
  std::string config;
  std::optional<std::string> train, dev, test, teacher, cache, model, output_dir, method, schedule, selection;
  std::optional<std::size_t> k, epochs, batch_size, threads;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<int> token_column, tag_column;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON run config");
    app->add_option("--train", train, "training CoNLL file");
    app->add_option("--dev", dev, "dev CoNLL file");
    app->add_option("--test", test, "test CoNLL file");
    app->add_option("--teacher", teacher, "teacher checkpoint");
    app->add_option("--cache", cache, "teacher score cache");
    app->add_option("--model", model, "checkpoint to evaluate");
    app->add_option("-o,--output-dir", output_dir, "output directory");
    app->add_option("--method", method, "vanilla, kbest, structural or efficient");
    app->add_option("--schedule", schedule, "linear-decay, paper-efficient or zero");
    app->add_option("--selection", selection, "dev selection metric: auto, f1 or accuracy");
    app->add_option("-k,--k", k, "hypotheses for k-best distillation");
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--threads", threads, "thread budget");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--seed", seed, "root seed");
    app->add_option("--token-column", token_column);
    app->add_option("--tag-column", tag_column, "negative counts from the end");
  }

  skd::RunConfig build() const {
    skd::RunConfig c;
    if (!config.empty()) c = skd::load_run_config(config);
    auto set = [](auto& dst, const auto& src) {
      if (src) dst = *src;
    };
    set(c.train, train);
    set(c.dev, dev);
    set(c.test, test);
    set(c.teacher, teacher);
    set(c.cache, cache);
    set(c.model, model);
    set(c.output_dir, output_dir);
    set(c.method, method);
    set(c.selection, selection);
    set(c.batch_size, batch_size);
    set(c.threads, threads);
    set(c.seed, seed);
    set(c.token_column, token_column);
    set(c.tag_column, tag_column);
    if (schedule) c.schedule = *schedule;
    if (k) c.k = *k;
    if (epochs) c.epochs = *epochs;
    if (lr) c.lr = *lr;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRF tagger training and sub-structure knowledge distillation"};
  app.require_subcommand(1);

  skd::GenerateConfig gen;
  auto* generate = app.add_subcommand("generate", "sample a synthetic tagged corpus from an HMM");
  generate->add_option("--states", gen.data.num_states, "hidden states (tags)");
  generate->add_option("--vocab", gen.data.vocab_size, "vocabulary size");
  generate->add_option("--sentences", gen.data.sentences);
  generate->add_option("--min-len", gen.data.min_len);
  generate->add_option("--max-len", gen.data.max_len);
  generate->add_option("--seed", gen.data.seed, "HMM seed");
  generate->add_option("--stream", gen.stream, "independent sample stream, e.g. one per split");
  generate->add_option("--hmm", gen.hmm, "sample from this HMM spec (JSON) instead");
  generate->add_option("--hmm-output", gen.hmm_output, "write the HMM spec used");
  generate->add_option("-o,--output", gen.output, "CoNLL output file")->required();

  RunFlags teacher_flags, cache_flags, distill_flags, eval_flags;
  auto* train_teacher = app.add_subcommand("train-teacher", "train the teacher with the gold-label objective");
  teacher_flags.attach(train_teacher);
  auto* cache_scores = app.add_subcommand("cache-scores", "precompute teacher sub-structure scores");
  cache_flags.attach(cache_scores);
  auto* distill = app.add_subcommand("distill", "train a student from a teacher");
  distill_flags.attach(distill);
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a test set");
  eval_flags.attach(evaluate);

  std::string bench_config;
  std::optional<std::size_t> bench_threads, bench_sentences, bench_max_len, bench_min_len, bench_measured;
  std::optional<std::string> bench_output;
  std::vector<std::string> bench_methods;
  auto* bench = app.add_subcommand("bench", "time the phases of one training epoch per method");
  bench->add_option("-c,--config", bench_config, "JSON bench config");
  bench->add_option("--threads", bench_threads);
  bench->add_option("--sentences", bench_sentences);
  bench->add_option("--min-len", bench_min_len);
  bench->add_option("--max-len", bench_max_len);
  bench->add_option("--measured-epochs", bench_measured);
  bench->add_option("--methods", bench_methods);
  bench->add_option("-o,--output", bench_output, "report file");

  std::string suite_config;
  std::optional<std::size_t> suite_threads;
  std::optional<std::string> suite_work_dir;
  std::vector<std::uint64_t> suite_seeds;
  std::vector<std::string> suite_methods;
  auto* suite = app.add_subcommand("suite", "teacher plus one student per method and seed on synthetic data");
  suite->add_option("-c,--config", suite_config, "JSON suite config");
  suite->add_option("--threads", suite_threads);
  suite->add_option("--seeds", suite_seeds);
  suite->add_option("--methods", suite_methods);
  suite->add_option("--work-dir", suite_work_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    skd::KvLog log(&std::cout);
    if (*generate) {
      skd::run_generate(gen, log);
    } else if (*train_teacher) {
      skd::run_train_teacher(teacher_flags.build(), log);
    } else if (*cache_scores) {
      skd::run_cache_scores(cache_flags.build(), log);
    } else if (*distill) {
      skd::run_distill(distill_flags.build(), log);
    } else if (*evaluate) {
      const auto r = skd::run_evaluate(eval_flags.build(), log);
      std::cout << skd::format_metrics_table(*r.metrics);
    } else if (*bench) {
      skd::BenchConfig c;
      if (!bench_config.empty()) c = read_json_file(bench_config).get<skd::BenchConfig>();
      if (bench_threads) c.threads = *bench_threads;
      if (bench_sentences) c.data.sentences = *bench_sentences;
      if (bench_min_len) c.data.min_len = *bench_min_len;
      if (bench_max_len) c.data.max_len = *bench_max_len;
      if (bench_measured) c.measured_epochs = *bench_measured;
      if (!bench_methods.empty()) c.methods = bench_methods;
      if (bench_output) c.output = *bench_output;
      const auto r = skd::run_bench(c);
      std::cout << r.report.kv << '\n' << r.report.table;
    } else if (*suite) {
      skd::SuiteConfig c;
      if (!suite_config.empty()) c = read_json_file(suite_config).get<skd::SuiteConfig>();
      if (suite_threads) c.threads = *suite_threads;
      if (suite_work_dir) c.work_dir = *suite_work_dir;
      if (!suite_seeds.empty()) c.seeds = suite_seeds;
      if (!suite_methods.empty()) c.methods = suite_methods;
      const auto r = skd::run_experiment_suite(c, &log);
      std::cout << '\n' << r.table;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
