// svdp: corpus generation, source pretraining, adaptation runs, ablations and reports.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "svdp/svdp.hpp"

namespace fs = std::filesystem;
using Real = float;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::vector<std::string> set;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> task;
  std::optional<double> density;
  std::optional<int> rounds;
  std::optional<std::string> checkpoint;
  std::optional<std::string> corpus;
  std::string baseline;
  std::string grid = "table4";
  int seeds = 1;
  std::string in;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw svdp::IoError("cannot write " + path.string());
}

// Output directories must be new or empty.
void claim_output_dir(const std::string& dir) {
  if (dir.empty()) throw svdp::ConfigError("--out is required");
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw svdp::ConfigError("output directory " + dir + " is occupied");
  }
  fs::create_directories(dir);
}

// defaults < config file < --set < named flags
svdp::Settings resolve(const Options& o, bool seed_is_corpus_seed = false) {
  svdp::Settings s;
  if (!o.config.empty()) svdp::apply_config_file(s, o.config);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw svdp::ConfigError("--set expects key=value, got '" + kv + "'");
    svdp::apply_setting(s, svdp::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (o.seed) (seed_is_corpus_seed ? s.corpus_seed : s.adapt.seed) = *o.seed;
  if (o.mode) s.adapt.mode = svdp::parse_mode(*o.mode);
  if (o.task) s.adapt.task = svdp::parse_task(*o.task);
  if (o.density) s.adapt.density = *o.density;
  if (o.rounds) s.adapt.rounds = *o.rounds;
  if (o.checkpoint) s.checkpoint = *o.checkpoint;
  if (o.corpus) s.corpus_dir = *o.corpus;
  svdp::validate(s);
  return s;
}

svdp::Corpus<Real> obtain_corpus(const svdp::Settings& s, nlohmann::ordered_json& manifest) {
  if (!s.corpus_dir.empty()) {
    if (!fs::exists(fs::path(s.corpus_dir) / "manifest.json")) {
      throw svdp::ConfigError("corpus directory " + s.corpus_dir + " has no manifest.json");
    }
    manifest["corpus"] = {{"path", s.corpus_dir}, {"hash", svdp::corpus_hash(s.corpus_dir)}};
    return svdp::load_corpus<Real>(s.corpus_dir);
  }
  manifest["corpus"] = {{"generated_from_seed", s.corpus_seed}};
  return svdp::generate_corpus<Real>(s.corpus_seed, s.corpus);
}

svdp::ParamSet<Real> load_source(const svdp::Settings& s, nlohmann::ordered_json& manifest) {
  if (s.checkpoint.empty()) throw svdp::ConfigError("a source checkpoint is required (--checkpoint)");
  if (!fs::exists(s.checkpoint)) throw svdp::ConfigError("checkpoint " + s.checkpoint + " does not exist");
  const auto bytes = svdp::read_file_bytes(s.checkpoint);
  manifest["checkpoint"] = {{"path", s.checkpoint}, {"git_blob_sha1", svdp::git_blob_hash(bytes)}};
  return svdp::decode_checkpoint<Real>(bytes);
}

nlohmann::ordered_json start_manifest(const std::string& command, const svdp::Settings& s) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["started"] = utc_now();
  m["seed"] = s.adapt.seed;
  nlohmann::ordered_json cfg;
  std::istringstream lines(svdp::dump_config(s));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    cfg[line.substr(0, eq)] = line.substr(eq + 3);
  }
  m["config"] = cfg;
  return m;
}

void finish_manifest(nlohmann::ordered_json& m, const fs::path& dir, const std::vector<std::string>& outputs) {
  m["finished"] = utc_now();
  m["outputs"] = outputs;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// Writes one self-describing run directory.
void write_run_dir(const fs::path& dir, const svdp::RunResult& r, const svdp::Settings& s,
                   nlohmann::ordered_json manifest) {
  fs::create_directories(dir);
  write_text(dir / "config.txt", svdp::dump_config(s));
  svdp::write_step_log(r, (dir / "steps.jsonl").string());
  const auto metrics = svdp::to_json(r);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(dir / "report.md", svdp::render_run_markdown(metrics));
  finish_manifest(manifest, dir, {"config.txt", "steps.jsonl", "metrics.json", "report.md"});
}

int cmd_gen(const Options& o) {
  const auto s = resolve(o, true);
  claim_output_dir(o.out);
  auto manifest = start_manifest("gen", s);
  const auto corpus = svdp::generate_corpus<Real>(s.corpus_seed, s.corpus);
  svdp::save_corpus(corpus, o.out);
  std::cout << "corpus " << o.out << " sha1 " << svdp::corpus_hash(o.out) << "\n";
  return 0;
}

int cmd_pretrain(const Options& o) {
  auto s = resolve(o);
  if (o.seed) s.pretrain.seed = *o.seed;
  claim_output_dir(o.out);
  auto manifest = start_manifest("pretrain", s);
  manifest["seed"] = s.pretrain.seed;
  const auto corpus = obtain_corpus(s, manifest);
  const svdp::Network<Real> net(s.adapt.network_spec());
  svdp::PretrainReport rep;
  const auto params = svdp::pretrain(net, corpus.source, s.pretrain, &rep, [](int e, double loss, double score) {
    std::cerr << "epoch " << e << " loss " << loss << " score " << score << "\n";
  });
  const fs::path dir(o.out);
  svdp::save_checkpoint(params, (dir / "source.ckpt").string());
  nlohmann::ordered_json m;
  m["task"] = svdp::to_string(s.adapt.task);
  m["epochs"] = rep.epochs;
  m[rep.score_name] = rep.score;
  m["target"] = s.pretrain.target_score;
  m["reached_target"] = rep.reached_target;
  m["epoch_loss"] = rep.epoch_loss;
  m["parameters"] = params.parameter_count();
  write_text(dir / "metrics.json", m.dump(2) + "\n");
  write_text(dir / "config.txt", svdp::dump_config(s));
  manifest["checkpoint"] = {{"path", "source.ckpt"},
                            {"git_blob_sha1", svdp::git_blob_hash(svdp::read_file_bytes((dir / "source.ckpt").string()))}};
  finish_manifest(manifest, dir, {"source.ckpt", "metrics.json", "config.txt"});
  std::cout << "checkpoint " << (dir / "source.ckpt").string() << " " << rep.score_name << " " << rep.score
            << (rep.reached_target ? "" : " (target not reached)") << "\n";
  return rep.reached_target ? 0 : kExitRuntime;
}

int cmd_run(const Options& o) {
  const auto s = resolve(o);
  auto manifest = start_manifest("run", s);
  const auto source = load_source(s, manifest);
  claim_output_dir(o.out);
  const auto corpus = obtain_corpus(s, manifest);
  const auto r = o.baseline.empty() || o.baseline == "svdp"
                     ? svdp::run(source, corpus.target, s.adapt)
                     : svdp::run_baseline(o.baseline, source, corpus.target, s.adapt);
  write_run_dir(o.out, r, s, manifest);
  std::cout << svdp::render_run_markdown(svdp::to_json(r));
  return 0;
}

struct Job {
  std::string name;
  svdp::AdaptationConfig cfg;
  std::optional<svdp::AblationRow> row;
  std::string baseline;
};

int cmd_ablate(const Options& o) {
  const auto s = resolve(o);
  if (o.seeds < 1) throw svdp::ConfigError("--seeds must be >= 1");
  auto manifest = start_manifest("ablate", s);
  const auto source = load_source(s, manifest);
  claim_output_dir(o.out);
  const auto corpus = obtain_corpus(s, manifest);

  std::vector<Job> jobs;
  for (int k = 0; k < o.seeds; ++k) {
    auto cfg = s.adapt;
    cfg.seed = s.adapt.seed + static_cast<std::uint64_t>(k);
    const std::string suffix = o.seeds > 1 ? "-s" + std::to_string(cfg.seed) : "";
    if (o.grid == "table4" || o.grid == "all") {
      for (const auto& row : svdp::ablation_grid()) jobs.push_back({row.name + suffix, cfg, row, ""});
    }
    if (o.grid == "density" || o.grid == "all") {
      for (double rho : svdp::kDensityGrid) {
        auto c = cfg;
        c.density = rho;
        std::ostringstream name;
        name << "rho-" << rho << suffix;
        jobs.push_back({name.str(), c, std::nullopt, ""});
      }
    }
    if (o.grid == "beta" || o.grid == "all") {
      for (double b : svdp::kFixedBetas) {
        auto c = cfg;
        c.fixed_beta = b;
        std::ostringstream name;
        name << "beta-" << b << suffix;
        jobs.push_back({name.str(), c, std::nullopt, ""});
      }
      jobs.push_back({"beta-adaptive" + suffix, cfg, std::nullopt, ""});
    }
    if (o.grid == "baselines" || o.grid == "all") {
      for (const auto& b : svdp::kBaselines) jobs.push_back({b + suffix, cfg, std::nullopt, b});
    }
  }
  if (jobs.empty()) throw svdp::ConfigError("unknown grid '" + o.grid + "' (table4|density|beta|baselines|all)");

  std::vector<std::function<svdp::RunResult()>> work;
  for (const auto& j : jobs) {
    work.push_back([&source, &corpus, j] {
      if (j.row) return svdp::run_ablation_row(*j.row, source, corpus.target, j.cfg);
      if (!j.baseline.empty()) return svdp::run_baseline(j.baseline, source, corpus.target, j.cfg);
      return svdp::run(source, corpus.target, j.cfg, j.name);
    });
  }
  const auto results = svdp::parallel_map(work, svdp::worker_limit());

  std::vector<std::pair<std::string, nlohmann::json>> summary;
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto run_settings = s;
    run_settings.adapt = jobs[i].cfg;
    auto run_manifest = start_manifest("ablate:" + jobs[i].name, run_settings);
    run_manifest["checkpoint"] = manifest["checkpoint"];
    run_manifest["corpus"] = manifest["corpus"];
    write_run_dir(fs::path(o.out) / jobs[i].name, results[i], run_settings, run_manifest);
    summary.emplace_back(jobs[i].name, svdp::to_json(results[i]));
    outputs.push_back(jobs[i].name);
  }
  const std::string md = svdp::render_summary_markdown("ablation (" + o.grid + ")", summary);
  write_text(fs::path(o.out) / "summary.md", md);
  write_text(fs::path(o.out) / "summary.csv", svdp::render_summary_csv(summary));
  outputs.insert(outputs.end(), {"summary.md", "summary.csv"});
  finish_manifest(manifest, o.out, outputs);
  std::cout << md;
  return 0;
}

nlohmann::json read_metrics(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw svdp::IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw svdp::IoError("malformed " + path.string() + ": " + e.what());
  }
}

int cmd_report(const Options& o) {
  const fs::path dir(o.in);
  if (!fs::is_directory(dir)) throw svdp::ConfigError("report: " + o.in + " is not a directory");
  std::string md, csv;
  if (fs::exists(dir / "metrics.json")) {
    const auto m = read_metrics(dir / "metrics.json");
    if (!m.contains("cells")) throw svdp::ConfigError("report: " + o.in + " is not a run directory");
    md = svdp::render_run_markdown(m);
    csv = svdp::render_run_csv(m);
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory() && fs::exists(e.path() / "metrics.json")) subdirs.push_back(e.path());
    }
    if (subdirs.empty()) throw svdp::ConfigError("report: no metrics.json under " + o.in);
    std::sort(subdirs.begin(), subdirs.end());
    std::vector<std::pair<std::string, nlohmann::json>> runs;
    for (const auto& p : subdirs) runs.emplace_back(p.filename().string(), read_metrics(p / "metrics.json"));
    md = svdp::render_summary_markdown(dir.filename().string(), runs);
    for (const auto& [_, m] : runs) md += "\n" + svdp::render_run_markdown(m);
    csv = svdp::render_summary_csv(runs);
  }
  if (!o.out.empty()) {
    claim_output_dir(o.out);
    write_text(fs::path(o.out) / "report.md", md);
    write_text(fs::path(o.out) / "report.csv", csv);
  }
  std::cout << md;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse visual domain prompts: test-time adaptation on a synthetic benchmark"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat key = value config file");
    sub->add_option("--set", o.set, "override one config key (key=value), repeatable");
    sub->add_option("--seed", o.seed, "seed");
    sub->add_option("--out", o.out, "output directory (must be new or empty)");
  };
  auto adaptation = [&o](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "tta|ctta");
    sub->add_option("--task", o.task, "seg|depth");
    sub->add_option("--density", o.density, "prompt density in (0,1]");
    sub->add_option("--rounds", o.rounds, "CTTA rounds");
    sub->add_option("--checkpoint", o.checkpoint, "source checkpoint");
    sub->add_option("--corpus", o.corpus, "corpus directory (default: generate from corpus_seed)");
  };

  auto* gen = app.add_subcommand("gen", "write a synthetic corpus");
  common(gen);
  auto* pre = app.add_subcommand("pretrain", "train the source model on the source split");
  common(pre);
  pre->add_option("--task", o.task, "seg|depth");
  pre->add_option("--corpus", o.corpus, "corpus directory (default: generate from corpus_seed)");
  auto* run = app.add_subcommand("run", "adapt over the target stream");
  common(run);
  adaptation(run);
  run->add_option("--baseline", o.baseline, "source|entropy_min|dense_prompt (default: full pipeline)");
  auto* abl = app.add_subcommand("ablate", "component ablation, density sweep, beta sweep, baselines");
  common(abl);
  adaptation(abl);
  abl->add_option("--grid", o.grid, "table4|density|beta|baselines|all");
  abl->add_option("--seeds", o.seeds, "number of consecutive seeds from --seed");
  auto* rep = app.add_subcommand("report", "render Markdown/CSV from a run or ablation directory");
  rep->add_option("dir", o.in, "run or ablation directory")->required();
  rep->add_option("--out", o.out, "write report.md and report.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*pre) return cmd_pretrain(o);
    if (*run) return cmd_run(o);
    if (*abl) return cmd_ablate(o);
    if (*rep) return cmd_report(o);
  } catch (const svdp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
