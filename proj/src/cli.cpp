#include "sbp/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sbp/checkpoint.hpp"
#include "sbp/errors.hpp"
#include "sbp/gradsuite.hpp"
#include "sbp/pipeline.hpp"

namespace sbp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string output_dir;
  std::int64_t seed = -1;
  std::string dataset_path;
  std::string classic_path;
  std::string bgan_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (JSON)");
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--out", opts.output_dir, "override the output directory");
  cmd->add_option("--dataset", opts.dataset_path, "dataset file path override");
  cmd->add_option("--classic-checkpoint", opts.classic_path, "classic checkpoint override");
  cmd->add_option("--bgan-checkpoint", opts.bgan_path, "bgan checkpoint override");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg = opts.config_path.empty()
                             ? config_from_json(json::object())
                             : load_config(opts.config_path);
  if (opts.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(opts.seed);
    cfg.dataset.seed = cfg.seed;
  }
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  cfg.validate();
  return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const char* name) {
  return (fs::path(cfg.output_dir) / name).string();
}

std::string resolve(const std::string& override_path, const ExperimentConfig& cfg,
                    const char* name) {
  return override_path.empty() ? out_path(cfg, name) : override_path;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open for writing: " + path);
  out << content;
}

void echo_config(const ExperimentConfig& cfg) {
  std::cout << "effective config:\n" << config_to_json(cfg).dump(2) << "\n";
}

void check_dataset_matches(const Dataset& ds, const ExperimentConfig& cfg) {
  if (ds.spec.m_classes != cfg.dataset.m_classes)
    throw UsageError("dataset m_classes does not match config");
  if (ds.spec.ctx_dim != cfg.dataset.ctx_dim)
    throw UsageError("dataset ctx_dim does not match config");
  if (ds.spec.scope != cfg.dataset.scope)
    throw UsageError("dataset scope does not match config");
}

void check_checkpoint_matches(const json& file, const ExperimentConfig& cfg,
                              const std::string& path) {
  const json& snap = file.at("config");
  if (!snap.contains("dataset")) throw ParseError("checkpoint " + path + ": missing config");
  std::size_t m = snap.at("dataset").at("m_classes").get<std::size_t>();
  std::size_t dim = snap.at("dataset").at("ctx_dim").get<std::size_t>();
  if (m != cfg.dataset.m_classes)
    throw UsageError("checkpoint " + path + ": m_classes does not match config");
  if (dim != cfg.dataset.ctx_dim)
    throw UsageError("checkpoint " + path + ": ctx_dim does not match config");
}

ClassicModel load_classic(const std::string& path, const ExperimentConfig& cfg) {
  json file = read_checkpoint(path);
  check_checkpoint_matches(file, cfg, path);
  Rng dummy(0);
  ClassicModel model(cfg.dataset.feature_dim(), cfg.dataset.m_classes, dummy);
  bool frozen = apply_checkpoint_model(file, "classic", model.params());
  if (frozen) {
    model.frozen = true;
    model.param_checksum = model.checksum();
  }
  return model;
}

struct LoadedBgan {
  Generator gen;
  Critic critic;
};

LoadedBgan load_bgan(const std::string& path, const ExperimentConfig& cfg) {
  json file = read_checkpoint(path);
  check_checkpoint_matches(file, cfg, path);
  // Network skeletons come from the checkpoint's own config snapshot, so
  // architecture knobs cannot drift between training and evaluation.
  ExperimentConfig snap = config_from_json(file.at("config"));
  Rng dummy(0);
  LoadedBgan out{Generator(snap.bgan.variant, snap.dataset.feature_dim(),
                           snap.dataset.m_classes, snap.bgan, dummy),
                 Critic(snap.bgan.variant, snap.dataset.m_classes, snap.bgan, dummy)};
  apply_checkpoint_model(file, "generator", out.gen.params());
  apply_checkpoint_model(file, "critic", out.critic.params());
  return out;
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string checksum_str(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int cmd_gen_data(const ExperimentConfig& cfg) {
  echo_config(cfg);
  Dataset ds = make_dataset(cfg);
  fs::create_directories(cfg.output_dir);
  save_dataset(ds, out_path(cfg, files::kDataset));

  std::cout << "class weights (head -> tail):\n";
  Vec emp = ds.empirical_train_weights();
  for (std::size_t c = 0; c < ds.class_weights.size(); ++c) {
    char line[96];
    std::snprintf(line, sizeof line, "  class %2zu  weight %.6f  train-freq %.6f\n", c,
                  ds.class_weights[c], emp[c]);
    std::cout << line;
  }
  std::size_t half = ds.class_weights.size() / 2;
  double head = 0.0;
  for (std::size_t c = 0; c < half; ++c) head += ds.class_weights[c];
  char line[128];
  std::snprintf(line, sizeof line,
                "head half holds %.1f%% of the mass; tail half %.1f%%\n", 100.0 * head,
                100.0 * (1.0 - head));
  std::cout << line;
  std::cout << "wrote " << out_path(cfg, files::kDataset) << "\n";
  return 0;
}

int cmd_train_classic(const ExperimentConfig& cfg, const CommonOpts& opts) {
  echo_config(cfg);
  Dataset ds = load_dataset(resolve(opts.dataset_path, cfg, files::kDataset));
  check_dataset_matches(ds, cfg);
  ClassicTrainResult result = run_train_classic(cfg, ds);
  result.model.freeze();
  fs::create_directories(cfg.output_dir);
  save_checkpoint(out_path(cfg, files::kClassicCheckpoint),
                  {{"classic", true, result.model.params()}}, config_to_json(cfg));
  write_text_file(out_path(cfg, files::kClassicTrace), classic_trace_csv(result.loss_trace));
  std::cout << "final loss " << fmt_full(result.loss_trace.back()) << "\n";
  std::cout << "classic checksum " << checksum_str(result.model.param_checksum) << "\n";
  std::cout << "wrote " << out_path(cfg, files::kClassicCheckpoint) << "\n";
  return 0;
}

void write_bgan_outputs(const ExperimentConfig& cfg, Generator& gen, Critic& critic,
                        const BganTrainStats& stats) {
  fs::create_directories(cfg.output_dir);
  save_checkpoint(out_path(cfg, files::kBganCheckpoint),
                  {{"generator", false, gen.params()}, {"critic", false, critic.params()}},
                  config_to_json(cfg));
  write_text_file(out_path(cfg, files::kBganTrace), loss_trace_csv(stats));
  std::cout << "critic updates " << stats.critic_updates << ", generator updates "
            << stats.generator_updates << "\n";
  std::cout << "bias constructions " << stats.constructions << ", min margin "
            << fmt_full(stats.min_margin) << ", margin violations "
            << stats.margin_violations << "\n";
  std::cout << "wrote " << out_path(cfg, files::kBganCheckpoint) << "\n";
}

int cmd_train_bgan(const ExperimentConfig& cfg, const CommonOpts& opts) {
  echo_config(cfg);
  Dataset ds = load_dataset(resolve(opts.dataset_path, cfg, files::kDataset));
  check_dataset_matches(ds, cfg);

  if (cfg.bgan.mode == TrainMode::Integrated) {
    IntegratedResult result = run_train_integrated(cfg, ds);
    fs::create_directories(cfg.output_dir);
    save_checkpoint(out_path(cfg, files::kClassicCheckpoint),
                    {{"classic", true, result.classic.params()}}, config_to_json(cfg));
    write_text_file(out_path(cfg, files::kClassicTrace),
                    classic_trace_csv(result.classic_loss_trace));
    std::cout << "integrated mode: classic trained jointly, frozen at end, checksum "
              << checksum_str(result.classic.param_checksum) << "\n";
    write_bgan_outputs(cfg, result.gen, result.critic, result.stats);
    return 0;
  }

  ClassicModel model = load_classic(resolve(opts.classic_path, cfg, files::kClassicCheckpoint), cfg);
  if (!model.frozen) throw FreezeViolation("train-bgan: classic checkpoint is not frozen");
  std::uint64_t before = model.checksum();
  std::cout << "classic checksum before " << checksum_str(before) << "\n";
  BganResult result = run_train_bgan(cfg, ds, model);
  model.verify_checksum("train-bgan");
  std::cout << "classic checksum after  " << checksum_str(model.checksum())
            << " (verified unchanged)\n";
  write_bgan_outputs(cfg, result.gen, result.critic, result.stats);
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const CommonOpts& opts) {
  echo_config(cfg);
  Dataset ds = load_dataset(resolve(opts.dataset_path, cfg, files::kDataset));
  check_dataset_matches(ds, cfg);
  ClassicModel model = load_classic(resolve(opts.classic_path, cfg, files::kClassicCheckpoint), cfg);
  if (!model.frozen) throw FreezeViolation("evaluate: classic checkpoint is not frozen");

  bool wants_sbp = false;
  for (CorrectorKind k : cfg.eval.correctors)
    if (k == CorrectorKind::Sbp) wants_sbp = true;

  LoadedBgan bgan;
  const Generator* gen = nullptr;
  if (wants_sbp) {
    bgan = load_bgan(resolve(opts.bgan_path, cfg, files::kBganCheckpoint), cfg);
    gen = &bgan.gen;
  }
  GlobalBias gb = make_global_bias(cfg, ds);

  auto reports = run_evaluation(cfg, ds, model, gen, gb);
  fs::create_directories(cfg.output_dir);
  write_text_file(out_path(cfg, files::kReportCsv), report_csv(reports));
  write_text_file(out_path(cfg, files::kFaccCsv), facc_csv(reports));
  write_text_file(out_path(cfg, files::kPerClassCsv), per_class_csv(reports));
  std::string text = report_text(reports);
  write_text_file(out_path(cfg, files::kReportTxt), text);
  std::cout << text;
  std::cout << "wrote " << out_path(cfg, files::kReportCsv) << "\n";
  return 0;
}

// Metric rows of a report, keyed for cross-seed aggregation.
std::vector<std::pair<std::string, double>> metric_rows(const MetricsReport& rep) {
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t i = 0; i < rep.k_values.size(); ++i) {
    std::string k = std::to_string(rep.k_values[i]);
    rows.emplace_back("r_at_" + k, rep.r_at_k[i]);
    rows.emplace_back("mr_at_" + k, rep.mr_at_k[i]);
    rows.emplace_back("a_at_" + k, rep.a_at_k[i]);
  }
  for (std::size_t i = 0; i < rep.top_t_values.size(); ++i)
    rows.emplace_back("f_acc_top" + std::to_string(rep.top_t_values[i]), rep.f_acc_values[i]);
  return rows;
}

int cmd_compare(const ExperimentConfig& cfg) {
  if (cfg.seeds.size() < 2) throw UsageError("compare: need at least 2 seeds");
  bool has_identity = false;
  for (CorrectorKind k : cfg.eval.correctors)
    if (k == CorrectorKind::Identity) has_identity = true;
  if (!has_identity)
    throw UsageError("compare: eval.correctors must include identity (delta baseline)");
  echo_config(cfg);

  // corrector -> metric -> per-seed values
  std::map<std::string, std::map<std::string, Vec>> values;
  std::vector<std::string> corrector_order;

  for (std::uint64_t seed : cfg.seeds) {
    ExperimentConfig run = cfg;
    run.seed = seed;
    run.dataset.seed = seed;
    run.output_dir = (fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed))).string();
    CommonOpts run_opts;  // per-seed runs use their own directories

    int rc = cmd_gen_data(run);
    if (rc != 0) return rc;
    if (run.bgan.mode == TrainMode::Gradual) {
      rc = cmd_train_classic(run, run_opts);
      if (rc != 0) return rc;
    }
    rc = cmd_train_bgan(run, run_opts);
    if (rc != 0) return rc;
    rc = cmd_evaluate(run, run_opts);
    if (rc != 0) return rc;

    Dataset ds = load_dataset((fs::path(run.output_dir) / files::kDataset).string());
    ClassicModel model = load_classic((fs::path(run.output_dir) / files::kClassicCheckpoint).string(), run);
    LoadedBgan bgan = load_bgan((fs::path(run.output_dir) / files::kBganCheckpoint).string(), run);
    GlobalBias gb = make_global_bias(run, ds);
    auto reports = run_evaluation(run, ds, model, &bgan.gen, gb);
    corrector_order.clear();
    for (const auto& [name, rep] : reports) {
      corrector_order.push_back(name);
      for (const auto& [metric, value] : metric_rows(rep)) values[name][metric].push_back(value);
    }
  }

  double n = static_cast<double>(cfg.seeds.size());
  auto mean_of = [&](const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / n;
  };
  auto std_of = [&](const Vec& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / (n - 1.0));
  };

  std::ostringstream csv, txt;
  csv << "corrector,metric,mean,std,delta_vs_identity\n";
  txt << "multi-seed summary over " << cfg.seeds.size() << " seeds\n";
  txt << "corrector              metric          mean     std      delta_vs_identity\n";
  for (const std::string& name : corrector_order) {
    for (auto& [metric, vals] : values[name]) {
      double mean = mean_of(vals);
      double sd = std_of(vals, mean);
      double delta = mean - mean_of(values["identity"][metric]);
      csv << name << ',' << metric << ',' << fmt_full(mean) << ',' << fmt_full(sd) << ','
          << fmt_full(delta) << '\n';
      char line[160];
      std::snprintf(line, sizeof line, "%-22s %-15s %8.4f %8.4f %+8.4f\n", name.c_str(),
                    metric.c_str(), mean, sd, delta);
      txt << line;
    }
  }
  fs::create_directories(cfg.output_dir);
  write_text_file(out_path(cfg, files::kSummaryCsv), csv.str());
  write_text_file(out_path(cfg, files::kSummaryTxt), txt.str());
  std::cout << txt.str();
  std::cout << "wrote " << out_path(cfg, files::kSummaryCsv) << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  auto cases = run_gradient_suite(seed);
  bool all_pass = true;
  for (const GradSuiteCase& c : cases) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  max_rel_err "
              << fmt_full(c.max_rel_err);
    if (!c.pass) std::cout << "  worst " << c.worst_param;
    std::cout << "\n";
    all_pass = all_pass && c.pass;
  }
  std::cout << (all_pass ? "gradient suite passed\n" : "gradient suite FAILED\n");
  return all_pass ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"sample-level bias prediction on synthetic long-tailed benchmarks"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::uint64_t gradcheck_seed = 1234;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, opts);
  CLI::App* classic = app.add_subcommand("train-classic", "train and freeze the biased classifier");
  add_common(classic, opts);
  CLI::App* bgan = app.add_subcommand("train-bgan", "train the bias networks against the frozen classifier");
  add_common(bgan, opts);
  CLI::App* evaluate = app.add_subcommand("evaluate", "apply correctors and compute ranking metrics");
  add_common(evaluate, opts);
  CLI::App* compare = app.add_subcommand("compare", "run the full pipeline over a seed list");
  add_common(compare, opts);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seed", gradcheck_seed, "suite seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed);
    ExperimentConfig cfg = resolve_config(opts);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (classic->parsed()) return cmd_train_classic(cfg, opts);
    if (bgan->parsed()) return cmd_train_bgan(cfg, opts);
    if (evaluate->parsed()) return cmd_evaluate(cfg, opts);
    if (compare->parsed()) return cmd_compare(cfg);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FreezeViolation& e) {
    std::cerr << "freeze violation: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingDivergence& e) {
    std::cerr << "training divergence: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace sbp
