#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "searn/beam.hpp"
#include "searn/conll.hpp"
#include "searn/core.hpp"
#include "searn/eval.hpp"
#include "searn/model_io.hpp"
#include "searn/tasks.hpp"
#include "searn/train.hpp"

namespace searn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline ConllSchema schema_for_file(const std::string& path, const std::string& columns_flag) {
  if (!columns_flag.empty()) {
    ConllSchema s;
    std::istringstream ss(columns_flag);
    std::string col;
    while (std::getline(ss, col, ',')) s.columns.push_back(col);
    return s;
  }
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto fields = split_fields(line);
    if (!fields.empty()) return infer_schema(static_cast<int>(fields.size()));
  }
  throw EmptyFile(path + " has no token rows");
}

inline std::vector<LexiconList> load_lexicons(const std::vector<std::string>& specs) {
  std::vector<LexiconList> out;
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--lexicon expects name=path, got " + spec);
    LexiconList lex;
    lex.name = spec.substr(0, eq);
    std::ifstream in(spec.substr(eq + 1));
    if (!in) throw EmptyFile("cannot open lexicon " + spec.substr(eq + 1));
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) lex.entries.insert(searn::detail::lowercase(line));
    }
    out.push_back(std::move(lex));
  }
  return out;
}

inline std::string label_name(const ModelTaskSpec& spec, int id) {
  if (spec.task == TaskKind::Sequence) return spec.labels.name(id);
  return bio_tag_name(id, spec.labels);
}

inline std::vector<std::vector<int>> decode_labels(const ConllDataset& data, LabelVocab& vocab,
                                                   bool bio) {
  std::vector<std::vector<int>> out;
  for (const auto& sent : data.sentences) {
    std::vector<int> labels;
    for (const auto& row : sent.rows) {
      const std::string& name = row.back();
      labels.push_back(bio ? bio_tag_from_name(name, vocab) : vocab.intern(name));
    }
    out.push_back(std::move(labels));
  }
  return out;
}

// Beam insertions are scored by the mixture's weighted per-action score.
inline BeamScorer mixture_scorer(std::shared_ptr<const MixturePolicy> scorer_policy,
                                 std::shared_ptr<const Task> base) {
  return [scorer_policy, base](const SearchState& s, ActionId a) {
    FeatureVector f = base->features(s);
    double score = 0.0;
    for (const auto& comp : scorer_policy->components())
      if (!comp.is_initial_policy()) score += comp.weight * comp.classifier->score(f, a);
    return score;
  };
}

struct TrainOptions {
  std::string data_path;
  std::string dev_path;
  std::string out_path;
  std::string log_path;
  std::string columns;
  std::string task = "sequence";
  std::string loss;
  std::string encoding;
  std::string learner = "logreg";
  std::string beta = "auto";
  std::string cost_mode = "approx";
  int iterations = 5;
  int mc_samples = 100;
  int beam = 1;
  int max_phrase = 5;
  int hash_bits = 20;
  int window = 2;
  bool no_structural = false;
  std::uint64_t seed = 0;
  std::vector<std::string> lexicons;
};

inline int run_train(const TrainOptions& opt) {
  // Resolve the task/loss matrix.
  bool chunk_task = opt.task == "chunk";
  std::string loss = opt.loss.empty() ? (chunk_task ? "f1" : "hamming") : opt.loss;
  if (!chunk_task && loss != "hamming") {
    std::cerr << "train: --task sequence supports --loss hamming only\n";
    return kExitUsage;
  }
  if (chunk_task && loss != "f1") {
    std::cerr << "train: --task chunk supports --loss f1 only\n";
    return kExitUsage;
  }
  std::string encoding = opt.encoding.empty() ? (chunk_task ? "chunk" : "word") : opt.encoding;

  ConllSchema schema = schema_for_file(opt.data_path, opt.columns);
  if (!schema.has_labels()) {
    std::cerr << "train: data schema has no label column\n";
    return kExitData;
  }
  ConllDataset raw = read_conll(opt.data_path, schema);

  ModelTaskSpec spec;
  spec.loss = chunk_task ? LossKind::F1 : LossKind::Hamming;
  spec.task = !chunk_task ? TaskKind::Sequence
                          : (encoding == "word" ? TaskKind::ChunkWord : TaskKind::ChunkEmit);
  spec.hash_bits = opt.hash_bits;
  spec.window = opt.window;
  spec.use_structural = !opt.no_structural;
  spec.max_phrase = opt.max_phrase;

  std::vector<SequenceInstance> train_data = build_instances(raw, spec.labels, chunk_task);
  std::vector<SequenceInstance> dev_data;
  if (!opt.dev_path.empty()) {
    ConllDataset dev_raw = read_conll(opt.dev_path, schema_for_file(opt.dev_path, opt.columns));
    dev_data = build_instances(dev_raw, spec.labels, chunk_task);
  }

  FeatureConfig features = spec.feature_config(load_lexicons(opt.lexicons));
  std::shared_ptr<Task> base_task{spec.build_task(features)};

  SearnConfig config;
  config.seed = opt.seed;
  config.max_iterations = opt.iterations;
  config.beam_width = opt.beam;
  config.mc_samples = opt.mc_samples;
  if (opt.cost_mode == "approx")
    config.cost_mode = CostMode::Approximation;
  else if (opt.cost_mode == "mc")
    config.cost_mode = CostMode::MonteCarlo;
  else if (opt.cost_mode == "single")
    config.cost_mode = CostMode::SingleSample;
  else {
    std::cerr << "train: unknown --cost-mode " << opt.cost_mode << "\n";
    return kExitUsage;
  }
  if (opt.beta == "auto") {
    config.beta_mode = dev_data.empty() ? BetaMode::Fixed : BetaMode::DevLineSearch;
    config.beta = 0.5;
  } else if (opt.beta == "analytic") {
    config.beta_mode = BetaMode::Analytic;
  } else {
    config.beta_mode = BetaMode::Fixed;
    config.beta = std::stod(opt.beta);
    if (config.beta <= 0.0 || config.beta > 1.0) {
      std::cerr << "train: --beta must be in (0, 1]\n";
      return kExitUsage;
    }
  }
  config.learner.learner =
      opt.learner == "perceptron" ? LearnerKind::Perceptron : LearnerKind::LogReg;

  std::ofstream log_file;
  std::ostream* log = &std::cerr;
  if (!opt.log_path.empty()) {
    log_file.open(opt.log_path);
    log = &log_file;
  }

  std::vector<const Instance*> train_ptrs = instance_ptrs(train_data);
  std::vector<const Instance*> dev_ptrs = instance_ptrs(dev_data);

  // When a beam is requested, a bootstrap classifier (one true-history
  // iteration on the base task) scores queue insertions, and the main loop
  // trains in the abstract queue space.
  std::shared_ptr<const MixturePolicy> bootstrap;
  std::shared_ptr<Task> task = base_task;
  if (opt.beam > 1) {
    SearnConfig boot_config = config;
    boot_config.seed = config.seed ^ 0xb00ull;
    bootstrap = std::make_shared<MixturePolicy>(
        baseline_memm(train_ptrs, *base_task, boot_config).policy);
    task = std::make_shared<BeamTask>(*base_task, opt.beam, mixture_scorer(bootstrap, base_task),
                                      features.hasher);
  }

  // Bound-report inputs, estimated on the training set.
  double c_max_est = 0.0, l_pi_est = 0.0;
  {
    MixturePolicy pi = MixturePolicy::initial_only();
    RandomStream pi_rng(config.seed ^ 0x717ull);
    for (const Instance* x : train_ptrs) c_max_est += task->max_loss(*x);
    c_max_est /= static_cast<double>(train_ptrs.size());
    l_pi_est = mean_rollout_loss(pi, train_ptrs, *task, pi_rng);
  }
  int t_max = max_horizon(train_ptrs, *task);

  {
    nlohmann::json header;
    header["record"] = "train_header";
    header["task"] = task_kind_name(spec.task);
    header["loss"] = loss_kind_name(spec.loss);
    header["instances"] = train_ptrs.size();
    header["T_max"] = t_max;
    header["c_max_est"] = c_max_est;
    header["L_pi_est"] = l_pi_est;
    header["beam"] = opt.beam;
    header["seed"] = opt.seed;
    (*log) << header.dump() << "\n";
  }

  SearnResult result = searn_train(train_ptrs, dev_ptrs, *task, config,
                                   [&](const IterationReport& r) {
                                     nlohmann::json j;
                                     j["record"] = "iteration";
                                     j["iteration"] = r.iteration;
                                     j["cs_loss"] = r.cs_loss;
                                     j["pi_weight"] = r.pi_weight;
                                     j["examples"] = r.example_count;
                                     j["ell_avg"] = r.running_avg_loss;
                                     j["beta"] = r.beta;
                                     if (r.dev_loss) j["dev_loss"] = *r.dev_loss;
                                     (*log) << j.dump() << "\n";
                                     log->flush();
                                   });

  write_model(result.policy, spec, opt.out_path, opt.beam, bootstrap);
  return kExitOk;
}

struct PredictOptions {
  std::string model_path;
  std::string in_path;
  std::string out_path;
  std::string columns;
  std::uint64_t seed = 0;
  std::vector<std::string> lexicons;
};

inline int run_predict(const PredictOptions& opt) {
  LoadedModel model = read_model(opt.model_path);
  ConllDataset raw = read_conll(opt.in_path, schema_for_file(opt.in_path, opt.columns));

  LabelVocab scratch = model.spec.labels;
  std::vector<SequenceInstance> data =
      build_instances(raw, scratch, model.spec.task != TaskKind::Sequence);
  // Prediction never consults references.
  for (auto& inst : data) inst.gold.clear();

  FeatureConfig features = model.spec.feature_config(load_lexicons(opt.lexicons));
  std::shared_ptr<Task> base_task{model.spec.build_task(features)};
  std::shared_ptr<Task> task = base_task;
  std::shared_ptr<const MixturePolicy> scorer;
  if (model.beam_width > 1 && model.scorer) {
    scorer = model.scorer;
    task = std::make_shared<BeamTask>(*base_task, model.beam_width,
                                      mixture_scorer(scorer, base_task), features.hasher);
  }

  RandomStream rng(opt.seed);
  std::vector<std::vector<std::string>> predicted;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RandomStream r = rng.split(0x93edu, i);
    Trajectory traj = rollout(model.policy, task->start_state(data[i]), *task, r);
    std::vector<std::string> names;
    for (int id : traj.final_output) names.push_back(label_name(model.spec, id));
    predicted.push_back(std::move(names));
  }
  write_conll(opt.out_path, with_labels(raw, predicted));
  return kExitOk;
}

struct EvalOptions {
  std::string gold_path;
  std::string pred_path;
  std::string loss = "hamming";
  std::string columns;
};

inline int run_eval(const EvalOptions& opt) {
  ConllDataset gold_raw = read_conll(opt.gold_path, schema_for_file(opt.gold_path, opt.columns));
  ConllDataset pred_raw = read_conll(opt.pred_path, schema_for_file(opt.pred_path, ""));
  bool bio = opt.loss == "f1";
  LabelVocab vocab;
  auto gold = decode_labels(gold_raw, vocab, bio);
  auto pred = decode_labels(pred_raw, vocab, bio);
  EvalReport report = evaluate(gold, pred, bio ? LossKind::F1 : LossKind::Hamming);
  nlohmann::json j;
  j["loss"] = opt.loss;
  j["instances"] = report.instance_count;
  if (bio) {
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["f1"] = report.f1;
  } else {
    j["mean_hamming"] = report.mean_hamming;
    j["total_hamming"] = report.total_hamming;
    j["total_tokens"] = report.total_tokens;
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

struct LowerBoundOptions {
  double epsilon = 0.1;
  int T = 10;
  int trials = 10000;
  std::uint64_t seed = 0;
};

inline int run_lowerbound(const LowerBoundOptions& opt) {
  MarkovLowerBoundSpec spec{opt.epsilon, opt.T, opt.trials};
  RandomStream rng(opt.seed);
  LowerBoundResult r = kaariainen_simulation(spec, rng);
  nlohmann::json j;
  j["epsilon"] = opt.epsilon;
  j["T"] = opt.T;
  j["trials"] = opt.trials;
  j["formula_value"] = r.formula_value;
  j["measured_mean_hamming"] = r.measured_mean_hamming;
  j["relative_error"] = r.formula_value == 0.0
                            ? 0.0
                            : std::abs(r.measured_mean_hamming - r.formula_value) /
                                  r.formula_value;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

inline int run_bound_report(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw EmptyFile("cannot open " + log_path);
  BoundInputs inputs;
  bool have_header = false, have_iteration = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    std::string record = j.value("record", "");
    if (record == "train_header") {
      inputs.T = j.value("T_max", 1.0);
      inputs.c_max = j.value("c_max_est", 0.0);
      inputs.L_pi = j.value("L_pi_est", 0.0);
      have_header = true;
    } else if (record == "iteration") {
      inputs.ell_avg = j.value("ell_avg", 0.0);
      have_iteration = true;
    }
  }
  if (!have_header || !have_iteration)
    throw CorruptFile(log_path + ": missing train_header or iteration records");
  nlohmann::json j;
  j["T"] = inputs.T;
  j["c_max"] = inputs.c_max;
  j["L_pi"] = inputs.L_pi;
  j["ell_avg"] = inputs.ell_avg;
  j["bound_rhs"] = theorem2_bound(inputs);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Search-based structured prediction toolkit"};
  app.require_subcommand(1);

  detail::TrainOptions train_opt;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", train_opt.data_path, "training data (CoNLL columns)")->required();
  train->add_option("--dev", train_opt.dev_path, "development set for the beta line search");
  train->add_option("--out", train_opt.out_path, "output model path")->required();
  train->add_option("--log", train_opt.log_path, "progress log path (default: stderr)");
  train->add_option("--columns", train_opt.columns, "comma-separated column names");
  train->add_option("--task", train_opt.task, "sequence|chunk")->default_val("sequence");
  train->add_option("--loss", train_opt.loss, "hamming|f1 (defaults per task)");
  train->add_option("--encoding", train_opt.encoding, "word|chunk (chunk tasks)");
  train->add_option("--learner", train_opt.learner, "perceptron|logreg")->default_val("logreg");
  train->add_option("--beta", train_opt.beta, "interpolation: real, auto, or analytic")
      ->default_val("auto");
  train->add_option("--iterations", train_opt.iterations, "max iterations")->default_val(5);
  train->add_option("--cost-mode", train_opt.cost_mode, "approx|mc|single")->default_val("approx");
  train->add_option("--mc-samples", train_opt.mc_samples, "samples per action in mc mode")
      ->default_val(100);
  train->add_option("--beam", train_opt.beam, "beam width (1 = greedy)")->default_val(1);
  train->add_option("--max-phrase", train_opt.max_phrase, "max chunk length")->default_val(5);
  train->add_option("--hash-bits", train_opt.hash_bits, "feature space log2 size")
      ->default_val(20);
  train->add_option("--window", train_opt.window, "token context window")->default_val(2);
  train->add_flag("--no-structural", train_opt.no_structural,
                  "disable prefix-dependent features (independent classifier)");
  train->add_option("--seed", train_opt.seed, "random seed")->default_val(0);
  train->add_option("--lexicon", train_opt.lexicons, "name=path membership list (repeatable)");

  detail::PredictOptions predict_opt;
  CLI::App* predict = app.add_subcommand("predict", "Label new data with a model");
  predict->add_option("--model", predict_opt.model_path)->required();
  predict->add_option("--in", predict_opt.in_path)->required();
  predict->add_option("--out", predict_opt.out_path)->required();
  predict->add_option("--columns", predict_opt.columns);
  predict->add_option("--seed", predict_opt.seed)->default_val(0);
  predict->add_option("--lexicon", predict_opt.lexicons);

  detail::EvalOptions eval_opt;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against gold labels");
  eval_cmd->add_option("--gold", eval_opt.gold_path)->required();
  eval_cmd->add_option("--pred", eval_opt.pred_path)->required();
  eval_cmd->add_option("--loss", eval_opt.loss, "hamming|f1")->default_val("hamming");
  eval_cmd->add_option("--columns", eval_opt.columns);

  detail::LowerBoundOptions lb_opt;
  CLI::App* lb = app.add_subcommand("simulate-lowerbound",
                                    "First-order Markov error-propagation simulation");
  lb->add_option("--epsilon", lb_opt.epsilon)->required();
  lb->add_option("--T", lb_opt.T)->required();
  lb->add_option("--trials", lb_opt.trials)->default_val(10000);
  lb->add_option("--seed", lb_opt.seed)->default_val(0);

  std::string model_log;
  CLI::App* bound = app.add_subcommand("bound-report", "Loss bound from a training log");
  bound->add_option("--model-log", model_log, "training log with header + iteration records")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed()) return detail::run_train(train_opt);
    if (predict->parsed()) return detail::run_predict(predict_opt);
    if (eval_cmd->parsed()) return detail::run_eval(eval_opt);
    if (lb->parsed()) return detail::run_lowerbound(lb_opt);
    if (bound->parsed()) return detail::run_bound_report(model_log);
  } catch (const MalformedRow& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const EmptyFile& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const LengthMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CorruptFile& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const UnsupportedVersion& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace searn::cli
