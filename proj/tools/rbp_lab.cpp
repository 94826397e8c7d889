// rbp_lab: generate datasets, train and evaluate models, reproduce the
// result tables, run corpus prediction and verify gradients.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbp/rbp_lab.hpp"

namespace {

using namespace rbp;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Invalid flag combination detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
}

void print_resolved(std::uint64_t seed, const json& config) {
  std::cout << "seed: " << seed << "\n"
            << "config: " << config.dump() << "\n";
}

struct Options {
  std::string task;
  std::string model = "ffnn";
  std::string rbp = "none";
  std::optional<std::size_t> context;
  std::size_t sims = 10;
  std::uint64_t seed = 0;
  bool fast = false;
  std::string out;
  std::string config;
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  int table = 0;
  std::size_t threads = 1;
  std::string text, symbols;
  bool synthetic = false;
  double eps = 1e-5;
  bool verbose = false;
};

LabeledDataset dataset_from_flags(const Options& o) {
  if (!o.task.empty() && !o.data.empty()) throw UsageError("--task and --data are mutually exclusive");
  if (o.task.empty() && o.data.empty()) throw UsageError("one of --task or --data is required");
  LabeledDataset d = o.data.empty() ? build_task(TaskSpec{parse_task(o.task), 0, o.seed}) : read_dataset(o.data);
  if (o.context && *o.context != d.context) {
    throw UsageError("--context " + std::to_string(*o.context) + " does not match the task's context of " +
                     std::to_string(d.context));
  }
  return d;
}

ModelConfig model_from_flags(const Options& o, const LabeledDataset& d) {
  ModelConfig c;
  if (!o.config.empty()) c = model_config_from_json(read_json_file(o.config), c);
  c.architecture = parse_architecture(o.model);
  c.rbp = parse_rbp(o.rbp);
  c.seed = o.seed;
  c = config_for(d, c);
  if (c.rbp == RbpVariant::rbp3 && d.mode != TaskMode::prediction) {
    throw UsageError("--rbp 3 needs a prediction task (pred-aba, pred-abb or a corpus)");
  }
  c.validate();
  return c;
}

int cmd_gen(const Options& o) {
  if (o.task.empty()) throw UsageError("gen needs --task");
  const LabeledDataset d = dataset_from_flags(o);
  print_resolved(o.seed, {{"task", o.task}});
  write_dataset(d, o.out);
  std::cout << "items: train " << d.count(Split::train) << ", val " << d.count(Split::val) << ", test "
            << d.count(Split::test) << "\nwrote " << o.out << "\n";
  return kExitOk;
}

void report_splits(TrainedModel& m, const LabeledDataset& d) {
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto items = d.subset(s);
    if (items.empty()) continue;
    std::cout << to_string(s) << ": accuracy " << evaluate(m, items, Metric::accuracy) << ", cross-entropy "
              << evaluate(m, items, Metric::cross_entropy) << "\n";
  }
}

int cmd_train(const Options& o) {
  const LabeledDataset d = dataset_from_flags(o);
  const ModelConfig cfg = model_from_flags(o, d);
  print_resolved(o.seed, to_json(cfg));
  TrainedModel m = train(cfg, d.subset(Split::train));
  report_splits(m, d);
  save_checkpoint(m, o.out);
  std::cout << "wrote " << o.out << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o) {
  TrainedModel m = load_checkpoint(o.checkpoint);
  const LabeledDataset d = dataset_from_flags(o);
  print_resolved(o.seed, to_json(m.config()));
  const auto items = d.subset(parse_split(o.split));
  if (items.empty()) throw std::runtime_error("split " + o.split + " is empty");
  const double acc = evaluate(m, items, Metric::accuracy);
  const double ce = evaluate(m, items, Metric::cross_entropy);
  std::cout << o.split << ": accuracy " << acc << ", cross-entropy " << ce << "\n";
  json result{{"split", o.split}, {"accuracy", acc}, {"cross_entropy", ce}, {"items", items.size()}};
  if (const auto chance = chance_baselines(d)) {
    std::cout << "chance accuracy: " << chance->full_vocabulary << " over the vocabulary, " << chance->held_out
              << " over held-out letters\n";
    result["chance"] = {{"full_vocabulary", chance->full_vocabulary}, {"held_out", chance->held_out}};
  }
  if (!o.out.empty()) {
    write_text(o.out, result.dump(2) + "\n");
    std::cout << "wrote " << o.out << "\n";
  }
  return kExitOk;
}

std::string manifest_path(const std::string& csv) {
  const std::string twin = json_twin_path(csv);
  return twin.substr(0, twin.size() - 5) + ".manifest.json";
}

int cmd_reproduce(const Options& o) {
  if (o.table < 1 || o.table > 6) throw UsageError("--table must be between 1 and 6");
  if (o.sims == 0) throw UsageError("--sims must be at least 1");
  ReproduceOptions opts;
  opts.sims = o.sims;
  opts.seed = o.seed;
  opts.fast = o.fast;
  opts.threads = o.threads;
  if (!o.config.empty()) opts.grid = grid_from_json(read_json_file(o.config));
  print_resolved(o.seed, {{"table", o.table}, {"sims", o.sims}, {"fast", o.fast}, {"grid", to_json(opts.grid)}});
  opts.on_cell = [](const CellResult& c) {
    std::cout << to_string(c.task) << ' ' << to_string(c.arch) << ' ' << to_string(c.rbp) << ": mean " << c.stats.mean
              << " (target " << c.paper_target << ") " << pass_string(c);
    if (c.chance) std::cout << " [chance " << c.chance->full_vocabulary << " / " << c.chance->held_out << "]";
    std::cout << std::endl;
  };
  const ExperimentReport r = reproduce_table(o.table, opts);
  write_report(r, o.out);
  write_text(manifest_path(o.out), run_manifest(r, opts).dump(2) + "\n");
  for (const auto& k : r.checks) std::cout << k.name << ": " << (k.pass ? "pass" : "fail") << " (" << k.detail << ")\n";
  std::cout << "wrote " << o.out << ", " << json_twin_path(o.out) << " and " << manifest_path(o.out) << "\n";
  bool failed = false;
  for (const auto& c : r.cells) failed = failed || c.stats.failed;
  return failed ? kExitFailure : kExitOk;
}

int cmd_corpus(const Options& o) {
  const int sources = !o.text.empty() + !o.symbols.empty() + o.synthetic;
  if (sources != 1) throw UsageError("corpus-predict needs exactly one of --text, --symbols or --synthetic");
  const std::size_t context = o.context.value_or(5);
  if (context == 0) throw UsageError("--context must be at least 1");

  CorpusStudyOptions study;
  if (!o.config.empty()) study.base = model_config_from_json(read_json_file(o.config), study.base);
  study.base.architecture = parse_architecture(o.model);
  study.context = context;
  study.seeds = o.sims;
  study.base_seed = o.seed;
  if (study.base.architecture == Architecture::ffnn) throw UsageError("corpus-predict expects a recurrent --model");
  if (o.rbp != "all") study.variants = {parse_rbp(o.rbp)};

  std::function<Corpus(std::uint64_t)> corpus_for;
  if (o.synthetic) {
    corpus_for = [context](std::uint64_t seed) {
      RepetitionCorpusSpec spec;
      spec.context = context;
      spec.seed = seed;
      return make_repetition_corpus(spec);
    };
  } else {
    const Corpus c = o.text.empty() ? ingest_symbols(o.symbols) : ingest_text(o.text);
    std::cout << "corpus: " << c.source << " (" << to_string(c.mode) << "), " << c.token_count() << " tokens, "
              << c.vocabulary.size() << " symbols\n";
    corpus_for = [c](std::uint64_t) { return c; };
  }
  print_resolved(o.seed, {{"context", context}, {"seeds", o.sims}, {"model", to_json(study.base)}});
  const auto results = corpus_study(corpus_for, study);
  json out = json::array();
  for (const auto& r : results) {
    std::cout << to_string(r.arch) << ' ' << to_string(r.rbp) << ": mean test cross-entropy " << r.stats.mean << "\n";
    out.push_back({{"model", std::string(to_string(r.arch))},
                   {"rbp", std::string(to_string(r.rbp))},
                   {"mean_cross_entropy", r.stats.mean},
                   {"per_seed", r.stats.values}});
  }
  if (!o.out.empty()) {
    write_text(o.out, json{{"format", "rbp-corpus-report"}, {"version", 1}, {"context", context}, {"results", out}}.dump(2) + "\n");
    std::cout << "wrote " << o.out << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  print_resolved(o.seed, {{"eps", o.eps}, {"tolerance", kGradCheckTolerance}});
  bool ok = true;
  for (const auto& r : run_all_grad_checks(o.eps)) {
    std::cout << (r.passed ? "pass " : "FAIL ") << r.name << " max relative error " << r.error
              << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-based pattern experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sub->add_flag("--verbose", o.verbose, "Log progress to standard error");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", o.model, "ffnn, rnn, gru or lstm (default ffnn; corpus-predict: lstm)");
    sub->add_option("--rbp", o.rbp, "none, 1n, 1p, 2 or 3 (corpus-predict: default all of none, 1p, 2, 3)");
    sub->add_option("--config", o.config, "JSON file with model settings");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--task", o.task, "1a, 1b, 2, 3, shared, pred-aba, pred-abb or mixed4");
    sub->add_option("--data", o.data, "Dataset file written by gen");
    sub->add_option("--context", o.context, "Context length (must match the task)");
  };

  auto* gen = app.add_subcommand("gen", "Generate a task dataset");
  add_common(gen);
  gen->add_option("--task", o.task, "Task id")->required();
  gen->add_option("--context", o.context, "Context length (must match the task)");
  gen->add_option("--out", o.out, "Output dataset path")->required();

  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(trn);
  add_data(trn);
  add_model(trn);
  trn->add_option("--out", o.out, "Checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_common(ev);
  add_data(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint written by train")->required();
  ev->add_option("--split", o.split, "train, val or test")->capture_default_str();
  ev->add_option("--out", o.out, "Optional JSON result path");

  auto* rep = app.add_subcommand("reproduce", "Reproduce a result table");
  add_common(rep);
  rep->add_option("--table", o.table, "Table number 1-6")->required();
  rep->add_option("--sims", o.sims, "Simulations per cell")->capture_default_str();
  rep->add_flag("--fast", o.fast, "Use pinned settings instead of a grid search per cell");
  rep->add_option("--out", o.out, "CSV report path (JSON twin and manifest are written alongside)")->required();
  rep->add_option("--config", o.config, "JSON file overriding grid defaults");
  rep->add_option("--threads", o.threads, "Concurrent simulations")->capture_default_str();

  auto* cor = app.add_subcommand("corpus-predict", "Next-token prediction on a corpus");
  add_common(cor);
  add_model(cor);
  cor->add_option("--text", o.text, "UTF-8 text file (characters are tokens)");
  cor->add_option("--symbols", o.symbols, "Integer symbols, one sequence per line");
  cor->add_flag("--synthetic", o.synthetic, "Synthetic repetition corpus, regenerated per seed");
  cor->add_option("--context", o.context, "Context length (default 5)");
  cor->add_option("--sims", o.sims, "Number of seeds")->capture_default_str();
  cor->add_option("--out", o.out, "Optional JSON report path");

  auto* gc = app.add_subcommand("gradcheck", "Check gradients of the registered graphs");
  add_common(gc);
  gc->add_option("--eps", o.eps, "Finite-difference step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (cor->parsed()) {
    if (cor->count("--sims") == 0) o.sims = 1;
    if (cor->count("--model") == 0) o.model = "lstm";
    if (cor->count("--rbp") == 0) o.rbp = "all";
  }
  log::set_level(o.verbose ? log::Level::info : log::Level::warn);

  try {
    if (gen->parsed()) return cmd_gen(o);
    if (trn->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (rep->parsed()) return cmd_reproduce(o);
    if (cor->parsed()) return cmd_corpus(o);
    if (gc->parsed()) return cmd_gradcheck(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
