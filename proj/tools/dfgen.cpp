#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "df/error.hpp"
#include "df/pipeline/commands.hpp"
#include "df/reward/reward.hpp"
#include "df/threading.hpp"

namespace {

using df::pipeline::RunConfig;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded depth-corruption pipeline: scene rendering, sensor simulation, "
               "conditional diffusion, grafting, and distribution metrics"};
  app.require_subcommand(1);

  std::string config_path, out_override, manifest_path, model_dir, episode_path, audit_out;
  std::string script_name, sets_csv = "sensor,grafted";
  std::uint64_t seed_override = 0, episode_seed = 0;
  bool has_seed = false;
  int threads = -1;

  app.add_option("--config", config_path, "JSON config; defaults apply when omitted");
  app.add_option("--seed", seed_override, "override the global seed")
      ->each([&](const std::string&) { has_seed = true; });
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen", "sample scenes, render, corrupt, compute priors");
  auto* train = app.add_subcommand("train", "train the conditional denoiser");
  train->add_option("--manifest", manifest_path, "dataset manifest (default <out>/data)");
  auto* generate = app.add_subcommand("generate", "sample artifacts and graft them");
  generate->add_option("--manifest", manifest_path, "dataset manifest (default <out>/data)");
  generate->add_option("--model", model_dir, "model directory (default <out>/model)");
  auto* eval = app.add_subcommand("eval", "FID/KID table against the virtual sensor");
  eval->add_option("--manifest", manifest_path, "augmented manifest (default <out>/gen)");
  auto* tsne = app.add_subcommand("tsne", "2-D embedding CSV of selected sets");
  tsne->add_option("--manifest", manifest_path, "augmented manifest (default <out>/gen)");
  tsne->add_option("--sets", sets_csv, "comma list of clean,sensor,random,grafted,predicted");
  auto* audit = app.add_subcommand("reward-audit", "per-step reward breakdown of an episode");
  audit->add_option("--episode", episode_path, "episode CSV to score");
  audit->add_option("--script", script_name, "generate an episode: approach|grasp_lift|jerky");
  audit->add_option("--episode-seed", episode_seed, "seed for --script");
  audit->add_option("--breakdown", audit_out, "output CSV path");
  auto* pipeline = app.add_subcommand("pipeline", "gen + train + generate + eval + checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are validation failures
  }

  try {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : df::pipeline::load_config(config_path);
    if (has_seed) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (threads >= 0) cfg.threads = threads;
    df::set_thread_count(cfg.threads);

    if (gen->parsed()) {
      const auto path = df::pipeline::cmd_gen(cfg);
      std::cout << "manifest: " << path << '\n';
    } else if (train->parsed()) {
      const auto dir = df::pipeline::cmd_train(cfg, manifest_path);
      std::cout << "model: " << dir << '\n';
    } else if (generate->parsed()) {
      const auto path = df::pipeline::cmd_generate(cfg, model_dir, manifest_path);
      std::cout << "manifest: " << path << '\n';
    } else if (eval->parsed()) {
      std::cout << df::pipeline::cmd_eval(cfg, manifest_path);
    } else if (tsne->parsed()) {
      std::cout << df::pipeline::cmd_tsne(cfg, manifest_path, split_csv(sets_csv));
    } else if (audit->parsed()) {
      if (episode_path.empty() && script_name.empty())
        throw df::ValidationError("reward-audit: pass --episode or --script");
      if (!script_name.empty()) {
        const auto kind = df::reward::script_kind_from_string(script_name);
        const auto ep = df::reward::scripted_episode(kind, episode_seed, cfg.reward);
        episode_path = cfg.out_dir + "/" + script_name + "_episode.csv";
        std::filesystem::create_directories(cfg.out_dir);
        df::reward::write_episode_csv(episode_path, ep);
      }
      const auto path = df::pipeline::cmd_reward_audit(cfg, episode_path, audit_out);
      std::cout << "breakdown: " << path << '\n';
    } else if (pipeline->parsed()) {
      const auto rep = df::pipeline::cmd_pipeline(cfg);
      for (const auto& c : rep.checks)
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << '\n';
      std::cout << (rep.ok ? "OK" : "FAILED") << '\n';
      if (!rep.ok) return 2;
    }
    return 0;
  } catch (const df::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const df::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
