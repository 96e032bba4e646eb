#include "mmrl/cli.h"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

#include "mmrl/harness.h"
#include "oracle/oracle.h"

namespace mmrl {
namespace {

namespace fs = std::filesystem;

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<TrajectoryFamily> families_from(const std::string& list) {
  RunConfig tmp;
  try {
    set_config_value(&tmp, "families", list == "all" ? "all, random" : list);
  } catch (const ConfigError& e) {
    throw UsageFailure(e.what());
  }
  return tmp.families;
}

ReportFormat format_from(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "table") return ReportFormat::kTable;
  if (name == "summary") return ReportFormat::kSummary;
  throw UsageFailure("unknown format '" + name + "'");
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file(path, text);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Multi-task PPO for mobile-manipulator tracking and grasping",
               "mmrl"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train one policy per seed");
  std::string task, config_path, output, families;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
  std::string resume_path;
  bool quiet = false;
  train->add_option("--task", task, "tracking or grasping");
  train->add_option("--config", config_path, "config file")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", seeds, "seed (repeatable, replaces seeds)");
  train->add_option("--output", output, "output directory");
  train->add_option("--families", families, "comma-separated families");
  train->add_option("--set", overrides, "key=value override (repeatable)");
  train->add_option("--resume", resume_path,
                    "continue this checkpoint (its config unless --config)")
      ->check(CLI::ExistingFile);
  train->add_flag("--quiet", quiet, "no per-iteration log");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt_path, eval_families = "all", format = "table", out_path,
                         eval_config;
  int episodes = 0;
  bool no_noise = false, no_randomization = false;
  double scale = 0;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--families", eval_families,
                   "comma-separated families, or all");
  eval->add_option("--episodes", episodes, "episodes per family")
      ->check(CLI::PositiveNumber);
  eval->add_flag("--no-noise", no_noise, "disable action/observation noise");
  eval->add_flag("--no-randomization", no_randomization,
                 "nominal dynamics");
  eval->add_option("--randomization-scale", scale,
                   "widen dynamics ranges by this factor")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--config", eval_config,
                   "refuse unless this config matches the checkpoint")
      ->check(CLI::ExistingFile);
  eval->add_option("--format", format, "csv, table or summary");
  eval->add_option("--out", out_path, "write here instead of stdout");

  // replay
  auto* rep = app.add_subcommand("replay", "per-step trace of one episode");
  std::string replay_family = "random";
  std::uint64_t replay_seed = 0;
  std::string replay_out;
  bool replay_no_noise = false;
  rep->add_option("--checkpoint", ckpt_path, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--family", replay_family, "trajectory family");
  rep->add_option("--seed", replay_seed, "episode seed");
  rep->add_flag("--no-noise", replay_no_noise, "disable noise");
  rep->add_option("--out", replay_out, "write here instead of stdout");

  // report
  auto* rpt = app.add_subcommand("report", "render stats or eval files");
  std::vector<std::string> stats_files;
  std::string eval_file, report_format = "table";
  rpt->add_option("--stats", stats_files, "training stats CSV (repeatable)")
      ->check(CLI::ExistingFile);
  rpt->add_option("--eval", eval_file, "evaluation CSV")
      ->check(CLI::ExistingFile);
  rpt->add_option("--format", report_format, "table, csv or summary");

  auto* selftest = app.add_subcommand("selftest", "run the oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      std::optional<Checkpoint> resume;
      if (!resume_path.empty()) resume = load_checkpoint(resume_path);
      RunConfig config;
      if (!config_path.empty())
        config = load_config(config_path);
      else if (resume)
        config = resume->config;
      if (!task.empty()) set_config_value(&config, "task", task);
      if (!families.empty()) set_config_value(&config, "families", families);
      for (const std::string& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw UsageFailure("--set expects key=value, got '" + kv + "'");
        set_config_value(&config, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (!seeds.empty()) config.ppo.seeds = seeds;
      if (!output.empty()) config.output_dir = output;
      config.validate();
      fs::path dir = resolve_output_dir(config);
      auto log = [&](const std::string& line) {
        if (!quiet) out << line << "\n" << std::flush;
      };
      TrainOutputs res = resume ? resume_run(*resume, config, dir, log)
                                : train_run(config, dir, log);
      for (const fs::path& p : res.checkpoints)
        out << "checkpoint " << p.string() << "\n";
      out << "stats " << (dir / "stats_mean.csv").string() << "\n";
      return 0;
    }
    if (*eval) {
      Checkpoint ckpt = load_checkpoint(ckpt_path);
      if (!eval_config.empty()) check_config(ckpt, load_config(eval_config));
      EvalConfig ec = ckpt.config.eval;
      if (episodes > 0) ec.episodes = episodes;
      if (no_noise) ec.noise = false;
      if (no_randomization) ec.randomize_dynamics = false;
      if (scale > 0) ec.randomization_scale = scale;
      if (eval->count("--seed")) ec.seed = eval_seed;
      ReportFormat f = format_from(format);
      EvalReport r = evaluate(ckpt, families_from(eval_families), ec);
      emit(report(r, f), out_path, out);
      return 0;
    }
    if (*rep) {
      Checkpoint ckpt = load_checkpoint(ckpt_path);
      auto fam = parse_family(replay_family);
      if (!fam) throw UsageFailure("unknown family '" + replay_family + "'");
      EvalConfig ec = ckpt.config.eval;
      if (replay_no_noise) ec.noise = false;
      auto rows = replay(deterministic_policy(ckpt.model),
                         eval_env_config(ckpt.config, ec), *fam, replay_seed);
      emit(replay_csv(rows), replay_out, out);
      return 0;
    }
    if (*rpt) {
      if (stats_files.empty() && eval_file.empty())
        throw UsageFailure("report needs --stats or --eval");
      ReportFormat f = format_from(report_format);
      for (const std::string& path : stats_files) {
        auto stats = parse_stats_csv(read_file(path));
        out << "# " << path << "\n";
        if (f == ReportFormat::kTable) {
          out << stats_table(stats);
        } else {
          out << stats_csv_header() << "\n";
          for (const TrainStats& s : stats) out << stats_csv_row(s) << "\n";
        }
      }
      if (!eval_file.empty())
        out << report(parse_report_csv(read_file(eval_file)), f);
      return 0;
    }
    if (*selftest) {
      bool ok = true;
      for (const oracle::Check& c : oracle::run_selftest()) {
        out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail
            << "\n";
        ok = ok && c.pass;
      }
      return ok ? 0 : 1;
    }
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mmrl
