#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbp/checkpoint.hpp"
#include "sbp/cli.hpp"
#include "sbp/config.hpp"

using namespace sbp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "sbp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Small but complete pipeline config.
json tiny_config(const fs::path& out) {
  return json{
      {"seed", 3},
      {"output_dir", out.string()},
      {"dataset", json{{"m_classes", 6}, {"ctx_dim", 16}, {"zipf_s", 1.2},
                       {"n_train", 400}, {"n_test", 80}, {"group_size", 8},
                       {"noise_sigma", 0.3}}},
      {"classic", json{{"lr", 0.01}, {"iters", 200}}},
      {"bgan", json{{"iters", 30}, {"channels", 4}}},
      {"eval", json{{"k_values", std::vector<int>{1, 5}},
                    {"top_t_values", std::vector<int>{1, 3}}}}};
}

std::string write_config(const fs::path& dir, const json& cfg) {
  fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << cfg.dump(2);
  return path.string();
}

}  // namespace

TEST_CASE("full pipeline through the cli produces consistent reports") {
  fs::path out = fresh_dir("pipeline");
  std::string cfg_path = write_config(out, tiny_config(out / "run"));

  CHECK(run_cli({"gen-data", "--config", cfg_path}) == 0);
  CHECK(fs::exists(out / "run" / files::kDataset));

  CHECK(run_cli({"train-classic", "--config", cfg_path}) == 0);
  CHECK(fs::exists(out / "run" / files::kClassicCheckpoint));
  std::string trace = slurp(out / "run" / files::kClassicTrace);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 201);  // header + iters

  CHECK(run_cli({"train-bgan", "--config", cfg_path}) == 0);
  CHECK(fs::exists(out / "run" / files::kBganCheckpoint));
  std::string bgan_trace = slurp(out / "run" / files::kBganTrace);
  CHECK(std::count(bgan_trace.begin(), bgan_trace.end(), '\n') == 31);

  CHECK(run_cli({"evaluate", "--config", cfg_path}) == 0);
  std::string report = slurp(out / "run" / files::kReportCsv);

  // A@K column equals the mean of the R@K and mR@K columns on every row.
  std::istringstream lines(report);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string corrector, k, r, mr, a;
    std::getline(cells, corrector, ',');
    std::getline(cells, k, ',');
    std::getline(cells, r, ',');
    std::getline(cells, mr, ',');
    std::getline(cells, a, ',');
    CHECK(std::stod(a) == (std::stod(r) + std::stod(mr)) / 2.0);
    ++rows;
  }
  CHECK(rows == 8);  // 4 correctors x 2 K values

  // re-running evaluation reproduces the report bytes
  std::string before = slurp(out / "run" / files::kReportCsv);
  CHECK(run_cli({"evaluate", "--config", cfg_path}) == 0);
  CHECK(slurp(out / "run" / files::kReportCsv) == before);
}

TEST_CASE("identity-only evaluation does not need a bgan checkpoint") {
  fs::path out = fresh_dir("identity_only");
  json cfg = tiny_config(out / "run");
  cfg["eval"]["correctors"] = std::vector<std::string>{"identity"};
  std::string cfg_path = write_config(out, cfg);
  CHECK(run_cli({"gen-data", "--config", cfg_path}) == 0);
  CHECK(run_cli({"train-classic", "--config", cfg_path}) == 0);
  CHECK(run_cli({"evaluate", "--config", cfg_path}) == 0);
  std::string report = slurp(out / "run" / files::kReportCsv);
  CHECK(std::count(report.begin(), report.end(), '\n') == 3);  // header + 2 K rows
}

TEST_CASE("usage errors exit with code 1") {
  fs::path out = fresh_dir("usage");
  fs::path cfg_path = out / "bad.json";
  std::ofstream(cfg_path) << R"({"zipf": 2})";
  CHECK(run_cli({"gen-data", "--config", cfg_path.string()}) == 1);
  CHECK(run_cli({"train-classic", "--config", cfg_path.string()}) == 1);
  CHECK(run_cli({"evaluate"}) == 1);  // no dataset in default out dir
  CHECK(run_cli({"no-such-command"}) == 1);
}

TEST_CASE("an unfrozen classic checkpoint is a freeze violation (exit 2)") {
  fs::path out = fresh_dir("unfrozen");
  json cfg = tiny_config(out / "run");
  cfg["classic"]["iters"] = 20;
  std::string cfg_path = write_config(out, cfg);
  CHECK(run_cli({"gen-data", "--config", cfg_path}) == 0);
  CHECK(run_cli({"train-classic", "--config", cfg_path}) == 0);

  // rewrite the checkpoint with frozen=false
  ExperimentConfig parsed = load_config(cfg_path);
  Rng rng(0);
  ClassicModel model(parsed.dataset.feature_dim(), parsed.dataset.m_classes, rng);
  json file = read_checkpoint((out / "run" / files::kClassicCheckpoint).string());
  apply_checkpoint_model(file, "classic", model.params());
  for (Param* p : model.params()) p->frozen = false;
  save_checkpoint((out / "run" / files::kClassicCheckpoint).string(),
                  {{"classic", false, model.params()}}, file.at("config"));

  CHECK(run_cli({"train-bgan", "--config", cfg_path}) == 2);
  CHECK(run_cli({"evaluate", "--config", cfg_path}) == 2);
}

TEST_CASE("checkpoint dimension mismatch is a usage error") {
  fs::path out = fresh_dir("mismatch");
  json cfg = tiny_config(out / "run");
  std::string cfg_path = write_config(out, cfg);
  CHECK(run_cli({"gen-data", "--config", cfg_path}) == 0);
  CHECK(run_cli({"train-classic", "--config", cfg_path}) == 0);

  json other = cfg;
  other["dataset"]["m_classes"] = 8;
  other["output_dir"] = (out / "other").string();
  std::string other_path = (out / "other.json").string();
  std::ofstream(other_path) << other.dump();
  CHECK(run_cli({"gen-data", "--config", other_path}) == 0);
  // evaluate with config M=8 against the M=6 checkpoint
  CHECK(run_cli({"evaluate", "--config", other_path, "--classic-checkpoint",
                 (out / "run" / files::kClassicCheckpoint).string(),
                 "--dataset", (out / "other" / files::kDataset).string()}) == 1);
}

TEST_CASE("gradcheck command passes deterministically") {
  CHECK(run_cli({"gradcheck"}) == 0);
  CHECK(run_cli({"gradcheck", "--seed", "77"}) == 0);
}

TEST_CASE("compare runs the pipeline per seed and emits a summary") {
  fs::path out = fresh_dir("compare");
  json cfg = tiny_config(out / "run");
  cfg["seeds"] = std::vector<int>{4, 9};
  cfg["classic"]["iters"] = 120;
  cfg["bgan"]["iters"] = 15;
  std::string cfg_path = write_config(out, cfg);
  CHECK(run_cli({"compare", "--config", cfg_path}) == 0);
  CHECK(fs::exists(out / "run" / "seed_4" / files::kReportCsv));
  CHECK(fs::exists(out / "run" / "seed_9" / files::kReportCsv));
  std::string summary = slurp(out / "run" / files::kSummaryCsv);

  // identity rows carry exactly zero delta against themselves
  std::istringstream lines(summary);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "corrector,metric,mean,std,delta_vs_identity");
  bool saw_identity = false;
  while (std::getline(lines, line)) {
    if (line.rfind("identity,", 0) != 0) continue;
    saw_identity = true;
    CHECK(line.substr(line.rfind(',') + 1) == "0");
  }
  CHECK(saw_identity);

  json single = cfg;
  single["seeds"] = std::vector<int>{1};
  std::string single_path = (out / "single.json").string();
  std::ofstream(single_path) << single.dump();
  CHECK(run_cli({"compare", "--config", single_path}) == 1);
}

TEST_CASE("integrated mode trains both stages in one command") {
  fs::path out = fresh_dir("integrated");
  json cfg = tiny_config(out / "run");
  cfg["bgan"]["mode"] = "integrated";
  cfg["classic"]["iters"] = 60;
  cfg["bgan"]["iters"] = 60;
  std::string cfg_path = write_config(out, cfg);
  CHECK(run_cli({"gen-data", "--config", cfg_path}) == 0);
  CHECK(run_cli({"train-bgan", "--config", cfg_path}) == 0);
  CHECK(fs::exists(out / "run" / files::kClassicCheckpoint));
  CHECK(fs::exists(out / "run" / files::kBganCheckpoint));
  CHECK(run_cli({"evaluate", "--config", cfg_path}) == 0);
}
