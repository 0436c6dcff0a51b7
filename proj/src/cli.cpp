#include "pgrpo/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pgrpo/bench.hpp"
#include "pgrpo/exec.hpp"
#include "pgrpo/format.hpp"

namespace fs = std::filesystem;

namespace pgrpo {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::vector<OpCode> parse_op_list(const std::string& csv) {
  std::vector<OpCode> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto op = binary_op_from_name(item);
    if (!op) throw CLI::ValidationError("ops", "unknown operator: " + item);
    out.push_back(*op);
  }
  if (out.empty()) throw CLI::ValidationError("ops", "operator list is empty");
  return out;
}

std::vector<PairType> parse_pair_types(const std::string& csv) {
  std::vector<PairType> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(pair_type_from_string(item));
  }
  return out;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  return nlohmann::json{{"seed", cfg.seed},
                        {"steps", cfg.steps},
                        {"group_size", cfg.group_size},
                        {"mode", cfg.mode},
                        {"lr", cfg.lr},
                        {"adam", cfg.adam},
                        {"eps_low", cfg.eps_low},
                        {"eps_high", cfg.eps_high},
                        {"corpus", cfg.corpus_path},
                        {"thinkrm", cfg.thinkrm_path},
                        {"plant_hack_bonus", cfg.plant_hack_bonus},
                        {"eval_every", cfg.eval_every},
                        {"out_dir", cfg.out_dir}};
}

void write_checkpoint(const std::string& path, const TabularPolicy& policy, int step) {
  nlohmann::json meta{{"t", "checkpoint_meta"}, {"v", 1}, {"step", step}};
  write_file(path, serialize_policy(policy) + "\n" + meta.dump() + "\n");
}

TabularPolicy load_policy_file(const std::string& path) {
  std::string text = read_file(path);
  // checkpoint files carry a trailing meta record; the policy is line one
  size_t eol = text.find('\n');
  std::string first = eol == std::string::npos ? text : text.substr(0, eol);
  return deserialize_policy(first);
}

}  // namespace

ExperimentSummary run_rl_experiment(const ExperimentConfig& cfg,
                                    const std::vector<Problem>& corpus,
                                    const ThinkRewardModel* thinkmodel) {
  if (cfg.out_dir.empty()) throw std::runtime_error("run directory not set");
  fs::create_directories(cfg.out_dir);

  PgrpoConfig pcfg;
  pcfg.group_size = cfg.group_size;
  pcfg.mode = composition_mode_from_string(cfg.mode);
  pcfg.clip = {cfg.eps_low, cfg.eps_high};

  OptimizerConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.adam = cfg.adam;
  Optimizer optimizer(ocfg);

  ThinkRewardModel planted;
  const ThinkRewardModel* model = thinkmodel;
  if (model && cfg.plant_hack_bonus > 0.0) {
    planted = plant_hack(*model, cfg.plant_hack_bonus);
    model = &planted;
  }

  write_file(cfg.out_dir + "/config.json", config_json(cfg).dump(2) + "\n");

  TabularPolicy policy = make_initial_policy();
  Rng root(cfg.seed);

  ExperimentSummary summary;
  std::ostringstream csv;
  csv << "step,mode,mean_total,mean_r_o,mean_gated_rt,zero_adv_fraction,"
         "eval_success_rate,hack_freq\n";
  for (int step = 1; step <= cfg.steps; ++step) {
    Rng step_rng = root.derive("step").derive(static_cast<uint64_t>(step));
    StepMetrics m = pgrpo_step(&policy, corpus, pcfg, model, &optimizer, step_rng);

    std::string eval_cell;
    bool eval_now = step == cfg.steps ||
                    (cfg.eval_every > 0 && step % cfg.eval_every == 0);
    if (eval_now) {
      double success = greedy_success_rate(policy, corpus);
      eval_cell = format_double(success);
      summary.final_success = success;
    }

    if (step == 1) summary.first_hack_freq = m.hack_freq;
    summary.final_hack_freq = m.hack_freq;
    summary.final_mean_total = m.mean_total;

    csv << step << ',' << cfg.mode << ',' << format_double(m.mean_total) << ','
        << format_double(m.mean_r_o) << ',' << format_double(m.mean_gated_rt) << ','
        << format_double(m.zero_adv_fraction) << ',' << eval_cell << ','
        << format_double(m.hack_freq) << '\n';
  }
  write_file(cfg.out_dir + "/metrics.csv", csv.str());
  write_checkpoint(cfg.out_dir + "/checkpoint_final.jsonl", policy, cfg.steps);
  return summary;
}

RmEvalReport train_rm_with_holdout(const std::vector<Problem>& corpus,
                                   const std::string& method,
                                   const std::vector<PairType>& keep_types, uint64_t seed,
                                   int epochs, double lr, double holdout_frac) {
  // held-out problems are split off before any pair construction
  std::vector<Problem> shuffled = corpus;
  Rng(seed).derive("split").shuffle(shuffled);
  size_t n_hold = static_cast<size_t>(holdout_frac * static_cast<double>(shuffled.size()));
  if (n_hold == 0 && shuffled.size() > 1) n_hold = 1;
  std::vector<Problem> hold(shuffled.begin(), shuffled.begin() + n_hold);
  std::vector<Problem> train(shuffled.begin() + n_hold, shuffled.end());

  ProblemMap all = problem_map(corpus);
  TrainConfig tcfg{epochs, lr, seed};

  RmEvalReport report;
  if (method == "od") {
    std::vector<PreferencePair> pairs = build_od_pairs(train, seed);
    if (!keep_types.empty()) {
      std::erase_if(pairs, [&](const PreferencePair& p) {
        return std::find(keep_types.begin(), keep_types.end(), p.pair_type) ==
               keep_types.end();
      });
    }
    report.train_examples = pairs.size();
    report.model = train_bt(pairs, all, tcfg);
  } else if (method == "score") {
    std::vector<ScoreExample> labeled = build_score_labels(train, seed);
    report.train_examples = labeled.size();
    report.model = train_score_baseline(labeled, all, tcfg);
  } else {
    throw std::invalid_argument("unknown training method: " + method);
  }

  std::vector<PreferencePair> hold_pairs = build_od_pairs(hold, seed + 1);
  report.holdout_problems = hold.size();
  report.holdout_pairs = hold_pairs.size();
  report.holdout_accuracy =
      hold_pairs.empty() ? 0.0 : eval_pairwise_accuracy(report.model, hold_pairs, all);
  return report;
}

namespace {

// --- gen-corpus ---------------------------------------------------------

int cmd_gen_corpus(uint64_t seed, int n, const std::string& ops_csv, int tests,
                   const std::string& out_path) {
  if (n < 1) throw CLI::ValidationError("n", "need at least one problem");
  if (tests < 2) throw CLI::ValidationError("tests", "need at least two test cases");
  ToyCorpusConfig cfg;
  cfg.n_problems = n;
  cfg.operators = parse_op_list(ops_csv);
  cfg.tests_per_problem = tests;
  std::vector<Problem> corpus = generate_corpus(cfg, seed);
  write_file(out_path, serialize_corpus(corpus));

  std::ostringstream refs;
  for (const Problem& p : corpus) refs << p.id << '\t' << reference_program(p) << '\n';
  write_file(out_path + ".refs.tsv", refs.str());

  std::cout << "problems: " << corpus.size() << "\n"
            << "tests per problem: " << tests << "\n"
            << "corpus: " << out_path << "\n"
            << "reference programs: " << out_path << ".refs.tsv\n";
  return 0;
}

// --- train-rm -----------------------------------------------------------

int cmd_train_rm(const std::string& corpus_path, const std::string& method,
                 const std::string& pair_types_csv, uint64_t seed, int epochs, double lr,
                 double holdout_frac, const std::string& out_path) {
  std::vector<Problem> corpus = deserialize_problems(read_file(corpus_path));
  if (corpus.empty()) throw std::runtime_error("empty corpus: " + corpus_path);
  if (method != "od" && method != "score")
    throw CLI::ValidationError("method", "expected od or score");

  std::vector<PairType> keep;
  if (!pair_types_csv.empty()) keep = parse_pair_types(pair_types_csv);
  RmEvalReport report =
      train_rm_with_holdout(corpus, method, keep, seed, epochs, lr, holdout_frac);

  write_file(out_path, serialize_model(report.model));
  std::cout << "method: " << method << "\n"
            << "training examples: " << report.train_examples << "\n"
            << "held-out problems: " << report.holdout_problems << "\n"
            << "held-out pairs: " << report.holdout_pairs << "\n"
            << "held-out pairwise accuracy: " << format_double(report.holdout_accuracy)
            << "\n"
            << "model: " << out_path << "\n";
  return 0;
}

// --- eval-rm ------------------------------------------------------------

int cmd_eval_rm(const std::string& model_path, const std::string& corpus_path,
                const std::string& pairs_path, uint64_t seed) {
  ThinkRewardModel model = deserialize_model(read_file(model_path));
  std::vector<Problem> corpus = deserialize_problems(read_file(corpus_path));
  ProblemMap map = problem_map(corpus);

  std::vector<PreferencePair> pairs;
  if (!pairs_path.empty())
    pairs = deserialize_pairs(read_file(pairs_path));
  else
    pairs = build_od_pairs(corpus, seed);
  if (pairs.empty()) throw std::runtime_error("no pairs to evaluate");

  double acc = eval_pairwise_accuracy(model, pairs, map);
  std::cout << "pairs: " << pairs.size() << "\n"
            << "pairwise accuracy: " << format_double(acc) << "\n";
  return 0;
}

// --- run-rl -------------------------------------------------------------

int cmd_run_rl(const ExperimentConfig& cfg) {
  std::vector<Problem> corpus = deserialize_problems(read_file(cfg.corpus_path));
  if (corpus.empty()) throw std::runtime_error("empty corpus: " + cfg.corpus_path);

  ThinkRewardModel model;
  const ThinkRewardModel* model_ptr = nullptr;
  if (cfg.mode != "outcome_only") {
    if (cfg.thinkrm_path.empty())
      throw CLI::ValidationError("thinkrm", "mode " + cfg.mode + " needs a model file");
    model = deserialize_model(read_file(cfg.thinkrm_path));
    model_ptr = &model;
  }

  run_rl_experiment(cfg, corpus, model_ptr);
  std::cout << "run dir: " << cfg.out_dir << "\n"
            << "steps: " << cfg.steps << "\n"
            << "metrics: " << cfg.out_dir << "/metrics.csv\n";
  return 0;
}

// --- compare ------------------------------------------------------------

struct RunSummary {
  std::string dir;
  std::string mode;
  uint64_t seed = 0;
  int steps = 0;
  double final_success = 0.0;
  double final_total = 0.0;
  double hack_first = 0.0;
  double hack_final = 0.0;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

RunSummary load_run(const std::string& dir) {
  RunSummary s;
  s.dir = dir;
  nlohmann::json cfg = nlohmann::json::parse(read_file(dir + "/config.json"));
  s.mode = cfg.at("mode").get<std::string>();
  s.seed = cfg.at("seed").get<uint64_t>();
  s.steps = cfg.at("steps").get<int>();

  std::istringstream csv(read_file(dir + "/metrics.csv"));
  std::string line;
  std::getline(csv, line);  // header
  bool first_row = true;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < 8) throw std::runtime_error(dir + ": malformed metrics row");
    s.final_total = std::stod(cells[2]);
    if (!cells[6].empty()) s.final_success = std::stod(cells[6]);
    s.hack_final = std::stod(cells[7]);
    if (first_row) {
      s.hack_first = s.hack_final;
      first_row = false;
    }
  }
  return s;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  for (const std::string& dir : run_dirs)
    if (!fs::exists(dir + "/metrics.csv"))
      throw std::runtime_error("missing run dir or metrics: " + dir);

  std::vector<RunSummary> runs;
  for (const std::string& dir : run_dirs) runs.push_back(load_run(dir));
  const RunSummary& base = runs.front();

  std::ostringstream md;
  md << "# Run comparison\n\n"
     << "Baseline: `" << base.dir << "` (" << base.mode << ", seed " << base.seed
     << ").\n\n"
     << "| run | mode | seed | steps | final success | d success | final mean total |"
        " d mean total | hack freq start | hack freq end |\n"
     << "| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n";
  for (const RunSummary& r : runs) {
    md << "| " << r.dir << " | " << r.mode << " | " << r.seed << " | " << r.steps << " | "
       << format_double(r.final_success) << " | "
       << format_double(r.final_success - base.final_success) << " | "
       << format_double(r.final_total) << " | "
       << format_double(r.final_total - base.final_total) << " | "
       << format_double(r.hack_first) << " | " << format_double(r.hack_final) << " |\n";
  }
  std::string report = md.str();
  if (!out_path.empty())
    write_file(out_path, report);
  else
    std::cout << report;
  return 0;
}

// --- build-bench --------------------------------------------------------

int cmd_build_bench(const std::string& corpus_path, const std::string& policy_path, int k,
                    double temperature, uint64_t seed, const std::string& out_path) {
  std::vector<Problem> corpus = deserialize_problems(read_file(corpus_path));
  TabularPolicy policy =
      policy_path.empty() ? make_initial_policy() : load_policy_file(policy_path);

  RuleBasedValidator validator;
  std::vector<CandidateSolution> candidates;
  Rng root = Rng(seed).derive("bench");
  for (const Problem& problem : corpus) {
    Rng prng = root.derive(problem.id);
    for (int i = 0; i < k; ++i) {
      Rng child = prng.derive(static_cast<uint64_t>(i));
      Rollout r = sample_rollout(policy, problem, child, temperature);
      ParsedResponse parsed = parse_response(r.raw_text);
      if (!parsed.format_ok) continue;
      CandidateSolution c;
      c.problem_id = problem.id;
      c.reasoning = parsed.think_text;
      c.answer_text = parsed.answer_text;
      c.outcome = evaluate_outcome(parsed.answer_text, problem);
      validate_candidate(problem, &c, validator);
      candidates.push_back(std::move(c));
    }
  }

  std::vector<PreferencePair> pairs =
      build_benchmark(candidates, problem_map(corpus), seed);
  write_file(out_path, serialize_corpus(pairs));

  ContingencyTable2x2 t = contingency_from_candidates(candidates);
  std::cout << "candidates: " << candidates.size() << "\n"
            << "pairs: " << pairs.size() << "\n"
            << "contingency: [[" << t.a << ", " << t.b << "], [" << t.c << ", " << t.d
            << "]]\n";
  try {
    ChiSquareResult r = chi_square(t);
    std::cout << "chi2 statistic: " << format_double(r.statistic) << "\n"
              << "p-value: " << format_double(r.p_value) << "\n";
  } catch (const DegenerateTable&) {
    std::cout << "chi2: test undefined (zero marginal)\n";
  }
  return 0;
}

// --- chi2 ---------------------------------------------------------------

int cmd_chi2(int64_t a, int64_t b, int64_t c, int64_t d) {
  ContingencyTable2x2 t{a, b, c, d};
  try {
    ChiSquareResult r = chi_square(t);
    std::cout << "statistic: " << format_double(r.statistic) << "\n"
              << "p-value: " << format_double(r.p_value) << "\n";
  } catch (const DegenerateTable& e) {
    std::cout << "test undefined: " << e.what() << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"desk-scale laboratory for gated reward composition in RL on code"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a toy problem corpus");
  uint64_t gen_seed = 0;
  int gen_n = 50, gen_tests = 4;
  std::string gen_ops = "MAX", gen_out = "corpus.jsonl";
  gen->add_option("--seed", gen_seed)->envname("PGRPO_SEED");
  gen->add_option("--n", gen_n, "number of problems");
  gen->add_option("--ops", gen_ops, "comma-separated operators (ADD,SUB,MUL,MAX,MIN)");
  gen->add_option("--tests", gen_tests, "test cases per problem");
  gen->add_option("--out", gen_out, "corpus output path")->envname("PGRPO_CORPUS");

  // train-rm
  auto* trm = app.add_subcommand("train-rm", "train the thinking reward model");
  std::string trm_corpus, trm_method = "od", trm_pair_types, trm_out = "thinkrm.json";
  uint64_t trm_seed = 0;
  int trm_epochs = 200;
  double trm_lr = 0.1, trm_holdout = 0.2;
  trm->add_option("--corpus", trm_corpus)->required()->envname("PGRPO_CORPUS");
  trm->add_option("--method", trm_method, "od or score");
  trm->add_option("--pair-types", trm_pair_types,
                  "comma-separated subset of opt_vs_deg,ori_vs_deg,opt_vs_ori");
  trm->add_option("--seed", trm_seed)->envname("PGRPO_SEED");
  trm->add_option("--epochs", trm_epochs);
  trm->add_option("--lr", trm_lr);
  trm->add_option("--holdout-frac", trm_holdout);
  trm->add_option("--out", trm_out, "model output path");

  // eval-rm
  auto* erm = app.add_subcommand("eval-rm", "pairwise accuracy of a trained model");
  std::string erm_model, erm_corpus, erm_pairs;
  uint64_t erm_seed = 0;
  erm->add_option("--model", erm_model)->required();
  erm->add_option("--corpus", erm_corpus)->required()->envname("PGRPO_CORPUS");
  erm->add_option("--pairs", erm_pairs, "pair file; default rebuilds pairs from corpus");
  erm->add_option("--seed", erm_seed)->envname("PGRPO_SEED");

  // run-rl
  auto* rl = app.add_subcommand("run-rl", "run one policy-optimization experiment");
  ExperimentConfig ecfg;
  rl->add_option("--corpus", ecfg.corpus_path)->required()->envname("PGRPO_CORPUS");
  rl->add_option("--out", ecfg.out_dir, "run directory")->required();
  rl->add_option("--seed", ecfg.seed)->envname("PGRPO_SEED");
  rl->add_option("--steps", ecfg.steps)->envname("PGRPO_STEPS");
  rl->add_option("--g", ecfg.group_size, "rollouts per problem per step");
  rl->add_option("--mode", ecfg.mode, "gated, soft or outcome_only")->envname("PGRPO_MODE");
  rl->add_option("--lr", ecfg.lr);
  rl->add_flag("--adam", ecfg.adam);
  rl->add_option("--eps-low", ecfg.eps_low);
  rl->add_option("--eps-high", ecfg.eps_high);
  rl->add_option("--thinkrm", ecfg.thinkrm_path)->envname("PGRPO_THINKRM");
  rl->add_option("--plant-hack", ecfg.plant_hack_bonus,
                 "pre-sigmoid bonus per hack-token occurrence");
  rl->add_option("--eval-every", ecfg.eval_every);

  // compare
  auto* cmp = app.add_subcommand("compare", "markdown report over finished runs");
  std::vector<std::string> cmp_runs;
  std::string cmp_out;
  cmp->add_option("runs", cmp_runs, "run directories")->expected(2, -1)->required();
  cmp->add_option("--out", cmp_out, "report path; default stdout");

  // build-bench
  auto* bb = app.add_subcommand("build-bench", "sample candidates and build pairs");
  std::string bb_corpus, bb_policy, bb_out = "bench_pairs.jsonl";
  int bb_k = 16;
  double bb_temp = 1.0;
  uint64_t bb_seed = 0;
  bb->add_option("--corpus", bb_corpus)->required()->envname("PGRPO_CORPUS");
  bb->add_option("--policy", bb_policy, "policy or checkpoint file; default initial");
  bb->add_option("--k", bb_k, "samples per problem");
  bb->add_option("--temperature", bb_temp);
  bb->add_option("--seed", bb_seed)->envname("PGRPO_SEED");
  bb->add_option("--out", bb_out, "pair output path");

  // chi2
  auto* chi = app.add_subcommand("chi2", "independence test on a 2x2 table");
  int64_t c_a = 0, c_b = 0, c_c = 0, c_d = 0;
  chi->add_option("a", c_a)->required();
  chi->add_option("b", c_b)->required();
  chi->add_option("c", c_c)->required();
  chi->add_option("d", c_d)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_corpus(gen_seed, gen_n, gen_ops, gen_tests, gen_out);
    if (trm->parsed())
      return cmd_train_rm(trm_corpus, trm_method, trm_pair_types, trm_seed, trm_epochs,
                          trm_lr, trm_holdout, trm_out);
    if (erm->parsed()) return cmd_eval_rm(erm_model, erm_corpus, erm_pairs, erm_seed);
    if (rl->parsed()) return cmd_run_rl(ecfg);
    if (cmp->parsed()) return cmd_compare(cmp_runs, cmp_out);
    if (bb->parsed())
      return cmd_build_bench(bb_corpus, bb_policy, bb_k, bb_temp, bb_seed, bb_out);
    if (chi->parsed()) return cmd_chi2(c_a, c_b, c_c, c_d);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pgrpo
