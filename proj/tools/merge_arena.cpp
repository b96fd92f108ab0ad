#include <iostream>

#include "CLI11.hpp"
#include "merge_arena/commands.hpp"

namespace ma = merge_arena;

int main(int argc, char** argv) {
  CLI::App app{"Two-lane merge simulator with self-play DDPG training"};
  app.set_version_flag("--version", ma::kVersion);
  app.require_subcommand(1);

  ma::TrainOptions train;
  std::string train_config;
  auto* t = app.add_subcommand("train", "Train the merge and traffic learners");
  t->add_option("--config", train_config, "Sectioned key = value config file");
  t->add_option("--variant", train.variant, "three-vehicle or full-scene");
  t->add_option("--episodes", train.episodes, "Number of training episodes");
  t->add_option("--decay", train.decay, "Exploration noise decay per acting step");
  t->add_option("--seed", train.seed, "Run seed (falls back to MERGE_ARENA_SEED, then the config)");
  t->add_option("--checkpoint-every", train.checkpoint_every, "Episodes between checkpoints");
  t->add_option("--reward-scale", train.reward_scale, "Multiplier applied to every reward");
  t->add_option("--out", train.out_dir, "Output directory")->capture_default_str();
  t->add_flag("--sweep-decay", train.sweep_decay, "Run the three-value exploration decay sweep");
  t->add_flag("--resume", train.resume, "Continue from the latest checkpoint pair in --out");
  t->add_flag("--no-summaries", train.no_summaries, "Skip the standard test at each checkpoint");
  t->add_option("--jobs", train.jobs, "Parallel sweep runs / evaluation threads")->capture_default_str();

  ma::EvaluateOptions eval;
  std::string eval_grid;
  std::vector<double> eval_gaps;
  auto* e = app.add_subcommand("evaluate", "Run the standard collision-table test");
  e->add_option("--merge", eval.merge_checkpoint, "Merge learner checkpoint")->required();
  e->add_option("--traffic", eval.traffic_checkpoint, "Traffic learner checkpoint")->required();
  e->add_option("--grid", eval_grid, "Config file with a [grid] section");
  e->add_option("--gaps", eval_gaps, "Comma-separated gap list")->delimiter(',');
  e->add_option("--policy", eval.policy, "mixture, constant, random or reactive")->capture_default_str();
  e->add_option("--episodes-per-cell", eval.episodes_per_cell, "Episodes per cell per policy");
  e->add_option("--seed", eval.seed, "Grid seed");
  e->add_flag("--oracle", eval.oracle, "Add the ideal-oracle feasibility column and dominance check");
  e->add_option("--out", eval.out_dir, "Output directory")->capture_default_str();
  e->add_option("--jobs", eval.jobs, "Worker threads over cells")->capture_default_str();

  ma::OracleOptions oracle;
  std::string oracle_grid;
  std::vector<double> oracle_gaps, oracle_ramps, oracle_diffs;
  auto* o = app.add_subcommand("oracle", "Ideal collision table by exhaustive plan search");
  o->add_option("--grid", oracle_grid, "Config file with a [grid] section");
  o->add_option("--gaps", oracle_gaps, "Comma-separated gap list")->delimiter(',');
  o->add_option("--ramps", oracle_ramps, "Comma-separated ramp lengths")->delimiter(',');
  o->add_option("--diffs", oracle_diffs, "Comma-separated start differentials")->delimiter(',');
  o->add_option("--mode", oracle.mode, "cooperative or constant")->capture_default_str();
  o->add_flag("--fine", oracle.fine, "0.25 s decisions over five action levels");
  o->add_option("--out", oracle.out_dir, "Output directory")->capture_default_str();
  o->add_option("--jobs", oracle.jobs, "Worker threads over cells")->capture_default_str();

  ma::SelectBestOptions select;
  std::string plot_data;
  auto* s = app.add_subcommand("select-best", "Pick the best checkpoint from its test summaries");
  s->add_option("dir", select.summaries_dir, "Directory of summary JSON files")->required();
  s->add_option("--metric", select.metric, "Selection metric")->capture_default_str();
  s->add_option("--emit-plot-data", plot_data, "Write per-checkpoint metrics to this CSV");

  ma::ExportCurvesOptions curves;
  auto* c = app.add_subcommand("export-curves", "Rebuild training curves from an episode log");
  c->add_option("input", curves.input, "episode_rewards.csv or its run directory")->required();
  c->add_option("--out", curves.output, "Output CSV")->capture_default_str();
  c->add_option("--every", curves.every, "Episodes per block")->capture_default_str();
  c->add_option("--window", curves.window, "Blocks in the moving mean")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (t->parsed()) {
    if (!train_config.empty()) train.config = train_config;
    return ma::cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (!eval_grid.empty()) eval.grid_config = eval_grid;
    if (!eval_gaps.empty()) eval.gaps = eval_gaps;
    return ma::cmd_evaluate(eval, std::cout, std::cerr);
  }
  if (o->parsed()) {
    if (!oracle_grid.empty()) oracle.grid_config = oracle_grid;
    if (!oracle_gaps.empty()) oracle.gaps = oracle_gaps;
    if (!oracle_ramps.empty()) oracle.ramps = oracle_ramps;
    if (!oracle_diffs.empty()) oracle.differentials = oracle_diffs;
    return ma::cmd_oracle(oracle, std::cout, std::cerr);
  }
  if (s->parsed()) {
    if (!plot_data.empty()) select.plot_data = plot_data;
    return ma::cmd_select_best(select, std::cout, std::cerr);
  }
  return ma::cmd_export_curves(curves, std::cout, std::cerr);
}
