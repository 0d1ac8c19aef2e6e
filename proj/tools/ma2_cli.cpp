// Command-line front end: dataset generation, training, evaluation, the
// four experiment suites, and image/report emission.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ma2/checkpoint_io.hpp"
#include "ma2/dataset_io.hpp"
#include "ma2/experiments.hpp"
#include "ma2/image_io.hpp"
#include "ma2/reports.hpp"
#include "ma2/serial.hpp"

namespace {

using namespace ma2;

// MA2_OUT, when set, is the base directory for relative output paths.
std::string out_path(const std::string& name) {
  const char* base = std::getenv("MA2_OUT");
  if (base == nullptr || name.empty() ||
      std::filesystem::path(name).is_absolute()) {
    return name;
  }
  std::filesystem::create_directories(base);
  return (std::filesystem::path(base) / name).string();
}

SceneConfig load_scene(const std::string& scene_path) {
  if (scene_path.empty()) return SceneConfig::default_scene();
  return SceneConfig::from_config(KeyValueConfig::load(scene_path));
}

int default_sample_steps(SamplerKind kind) {
  return kind == SamplerKind::Ddpm ? 100 : 10;
}

struct CommonArgs {
  std::string scene_path;
  std::uint64_t seed = 0;
};

void run_gen_data(const CommonArgs& common, const std::string& task_name,
                  int n_demos, const std::string& out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task(task_name);
  Dataset dataset;
  dataset.scene_hash = scene.hash();
  dataset.task = task_name;
  dataset.width = scene.width;
  dataset.height = scene.height;
  DatasetGenStats stats;
  dataset.demos = generate_dataset(scene, task, n_demos, common.seed,
                                   scene.demo_noise, &stats);
  const std::string path =
      out_path(out.empty() ? task_name + ".ma2d" : out);
  write_dataset(dataset, path);
  std::cout << "wrote " << dataset.demos.size() << " demonstrations to " << path
            << " (" << stats.regenerated << " regenerated)\n";
}

void run_train(const CommonArgs& common, const std::string& data_path,
               const std::string& variant_name, const std::string& sampler_name,
               int sample_steps, int epochs, const std::string& out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const Dataset dataset = read_dataset(data_path);
  if (dataset.scene_hash != scene.hash()) throw SceneMismatch();
  const VariantSpec variant =
      VariantSpec::defaults(variant_kind_from_string(variant_name));
  SamplerConfig sampler;
  sampler.kind = sampler_kind_from_string(sampler_name);
  sampler.sample_steps =
      sample_steps > 0 ? sample_steps : default_sample_steps(sampler.kind);
  OptConfig opt;
  opt.epochs = epochs;
  TrainingLog log;
  const Checkpoint ckpt =
      train_policy(scene, dataset.demos, variant, sampler, NetShape{}, opt,
                   common.seed, hash_file(data_path), &log);
  const std::string path =
      out_path(out.empty() ? variant_name + ".ma2w" : out);
  write_checkpoint(ckpt, path);
  std::cout << "trained " << variant_name << " (" << to_string(sampler.kind)
            << ") for " << epochs << " epochs";
  if (!log.epoch_loss.empty()) {
    std::cout << "; loss " << log.epoch_loss.front() << " -> "
              << log.epoch_loss.back();
  }
  std::cout << "; wrote " << path << "\n";
}

void run_eval(const CommonArgs& common, const std::string& ckpt_path,
              const std::string& task_name, int trials, int distractors,
              bool timing, const std::string& out, const std::string& table_out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task(task_name);
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  EvalOptions opts;
  opts.n_trials = trials;
  opts.distractor_count = distractors;
  opts.collect_timing = timing;
  ResultsTable table;
  table.rows.push_back(evaluate_policy(scene, task, ckpt, common.seed, opts));
  const std::string path = out_path(out.empty() ? "eval.csv" : out);
  write_results_csv(table, path);
  if (!table_out.empty()) {
    std::ofstream f(out_path(table_out), std::ios::binary);
    f << success_rate_table(table, {task_name});
  }
  std::cout << "success_rate=" << format_double(table.rows[0].success_rate)
            << " (" << table.rows[0].successes << "/" << trials << "); wrote "
            << path << "\n";
}

void run_ablate(const CommonArgs& common, int trials, int epochs,
                const std::string& out_prefix) {
  const SceneConfig scene = load_scene(common.scene_path);
  const std::vector<std::string> tasks = {"alternating_place", "key_press",
                                          "two_drawer"};
  ResultsTable table;
  for (const auto& task_name : tasks) {
    const TaskSpec& task = scene.task(task_name);
    for (const auto& variant_name : variant_row_order()) {
      const VariantSpec variant =
          VariantSpec::defaults(variant_kind_from_string(variant_name));
      const Checkpoint ckpt = train_variant(scene, task, variant,
                                            SamplerConfig{}, common.seed, epochs);
      EvalOptions opts;
      opts.n_trials = trials;
      table.rows.push_back(evaluate_policy(scene, task, ckpt, common.seed, opts));
      std::cout << task_name << " " << variant_name << ": "
                << format_double(table.rows.back().success_rate) << "\n";
    }
  }
  write_results_csv(table, out_path(out_prefix + ".csv"));
  std::ofstream f(out_path(out_prefix + ".txt"), std::ios::binary);
  f << success_rate_table(table, tasks);
  std::cout << success_rate_table(table, tasks);
}

void run_disturb(const CommonArgs& common, const std::string& task_name,
                 int trials, int epochs, std::vector<int> counts,
                 const std::string& out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task(task_name);
  if (counts.empty()) counts = {0, 5};
  ResultsTable table;
  for (const auto& variant_name : {std::string("dp"), std::string("tf_full")}) {
    const VariantSpec variant =
        VariantSpec::defaults(variant_kind_from_string(variant_name));
    const Checkpoint ckpt = train_variant(scene, task, variant, SamplerConfig{},
                                          common.seed, epochs);
    for (int count : counts) {
      EvalOptions opts;
      opts.n_trials = trials;
      opts.distractor_count = count;
      ResultsRow row = evaluate_policy(scene, task, ckpt, common.seed, opts);
      row.task = task_name + "+d" + std::to_string(count);
      table.rows.push_back(row);
      std::cout << row.task << " " << variant_name << ": "
                << format_double(row.success_rate) << "\n";
    }
  }
  write_results_csv(table, out_path(out.empty() ? "disturb.csv" : out));
}

void run_bench(const CommonArgs& common, const std::string& task_name,
               int decisions, int warmup, const std::string& out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task(task_name);
  std::string csv =
      "variant,median_decision_ms,median_field_ms,params,cond_pixels,"
      "cond_length\n";
  for (const auto& variant_name :
       {std::string("dp"), std::string("dp_histact"), std::string("tf_full")}) {
    const VariantSpec variant =
        VariantSpec::defaults(variant_kind_from_string(variant_name));
    // Latency does not depend on the weights; an untrained checkpoint is
    // enough to benchmark the decision loop.
    const Checkpoint ckpt = train_variant(scene, task, variant, SamplerConfig{},
                                          common.seed, /*epochs=*/0);
    const BenchRow bench =
        bench_decisions(scene, task, ckpt, decisions, warmup, common.seed);
    csv += bench.variant + ',' + format_double(bench.median_decision_ms) + ',' +
           format_double(bench.median_field_ms) + ',' +
           std::to_string(bench.params) + ',' +
           std::to_string(bench.cond_pixels) + ',' +
           std::to_string(bench.cond_length) + '\n';
    std::cout << bench.variant << ": " << bench.median_decision_ms
              << " ms/decision\n";
  }
  std::ofstream f(out_path(out.empty() ? "bench.csv" : out), std::ios::binary);
  f << csv;
}

void run_mech(const CommonArgs& common, int trials, int epochs,
              const std::string& out) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task("two_drawer");
  ResultsTable table;
  for (const auto& sampler_name : {std::string("ddim"), std::string("fm")}) {
    for (const auto& variant_name :
         {std::string("dp"), std::string("tf_full")}) {
      SamplerConfig sampler;
      sampler.kind = sampler_kind_from_string(sampler_name);
      sampler.sample_steps = default_sample_steps(sampler.kind);
      const VariantSpec variant =
          VariantSpec::defaults(variant_kind_from_string(variant_name));
      const Checkpoint ckpt =
          train_variant(scene, task, variant, sampler, common.seed, epochs);
      EvalOptions opts;
      opts.n_trials = trials;
      table.rows.push_back(evaluate_policy(scene, task, ckpt, common.seed, opts));
      std::cout << sampler_name << " " << variant_name << ": "
                << format_double(table.rows.back().success_rate) << "\n";
    }
  }
  write_results_csv(table, out_path(out.empty() ? "mech.csv" : out));
}

void run_render_field(const CommonArgs& common, const std::string& data_path,
                      int demo_index, const std::string& out_dir) {
  const SceneConfig scene = load_scene(common.scene_path);
  MotionTrace trace;
  GrayImage global = GrayImage::Zero(scene.height, scene.width);
  if (!data_path.empty()) {
    const Dataset dataset = read_dataset(data_path);
    if (demo_index < 0 || demo_index >= static_cast<int>(dataset.demos.size())) {
      throw ConfigError("demo index out of range");
    }
    trace = dataset.demos[demo_index].trace;
    global = dataset.demos[demo_index].observations.back().global;
  }
  const ProjectedTrace projected = project_trace(scene.global_cam, trace);
  const FocusField field =
      render_field(projected.pixels, scene.field, scene.width, scene.height);
  const GrayImage raster =
      rasterize_trace(projected.pixels, scene.width, scene.height);
  const std::string dir = out_path(out_dir.empty() ? "field" : out_dir);
  std::filesystem::create_directories(dir);
  write_pgm(field.values, dir + "/field.pgm");
  write_float_raster(field.values, dir + "/field.f32");
  write_pgm(raster, dir + "/trace.pgm");
  write_pgm(apply_field(global, field), dir + "/modulated.pgm");
  std::cout << "wrote field images to " << dir << "\n";
}

void run_plot(const CommonArgs& common, const std::string& ckpt_path,
              const std::string& task_name, const std::string& out_dir) {
  const SceneConfig scene = load_scene(common.scene_path);
  const TaskSpec& task = scene.task(task_name);
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  const RolloutResult result = rollout(scene, task, ckpt, common.seed);
  const SuccessResult replayed = check_success(result.trajectory, task);
  if (replayed.success != result.success) {
    throw ConfigError("plot: replayed success flag disagrees with the rollout");
  }

  const std::string dir = out_path(out_dir.empty() ? "plot" : out_dir);
  std::filesystem::create_directories(dir);
  const int n_stages = static_cast<int>(task.visit_order.size());
  GrayImage overlay = render(scene, task, result.trajectory.front(),
                             scene.global_cam) * 0.25;
  std::string csv = "step,stage,x,y,z,u,v\n";
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    const EnvState& s = result.trajectory[i];
    const Point3 p_cam = world_to_camera(scene.global_cam.world_to_camera, s.ee);
    double u = -1.0, v = -1.0;
    if (p_cam.z() > 1e-9) {
      const Pixel px = project(scene.global_cam, p_cam);
      u = px.x();
      v = px.y();
      const int col = static_cast<int>(std::lround(px.x()));
      const int row = static_cast<int>(std::lround(px.y()));
      if (row >= 0 && row < overlay.rows() && col >= 0 && col < overlay.cols()) {
        // Stage-coded brightness: later stages draw brighter.
        const double shade =
            0.4 + 0.6 * (static_cast<double>(s.stage_index) / std::max(1, n_stages));
        overlay(row, col) = std::max(overlay(row, col), shade);
      }
    }
    csv += std::to_string(s.step_count) + ',' + std::to_string(s.stage_index) +
           ',' + format_double(s.ee.x()) + ',' + format_double(s.ee.y()) + ',' +
           format_double(s.ee.z()) + ',' + format_double(u) + ',' +
           format_double(v) + '\n';
  }
  write_pgm(overlay, dir + "/trajectory.pgm");
  std::ofstream f(dir + "/trajectory.csv", std::ios::binary);
  f << csv;
  std::cout << "rollout " << (result.success ? "succeeded" : "failed") << " ("
            << result.stages_completed << "/" << n_stages << " stages); wrote "
            << dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale trace-focused generative policy laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  app.add_option("--scene", common.scene_path, "Scene config file (key=value)");
  app.add_option("--seed", common.seed, "Experiment seed");

  auto* gen = app.add_subcommand("gen-data", "Generate expert demonstrations");
  std::string gen_task = "alternating_place", gen_out;
  int gen_n = 30;
  gen->add_option("--task", gen_task, "Task name")->required();
  gen->add_option("--n", gen_n, "Number of demonstrations");
  gen->add_option("--out", gen_out, "Output dataset path");

  auto* train = app.add_subcommand("train", "Train a policy checkpoint");
  std::string train_data, train_variant = "tf_full", train_sampler = "ddpm",
              train_out;
  int train_steps = 0, train_epochs = 150;
  train->add_option("--data", train_data, "Dataset path")->required();
  train->add_option("--variant", train_variant,
                    "dp | dp_histact | tf_trace | tf_full");
  train->add_option("--sampler", train_sampler, "ddpm | ddim | fm");
  train->add_option("--sample-steps", train_steps, "Sampling step count");
  train->add_option("--epochs", train_epochs, "Training epochs (0 = random init)");
  train->add_option("--out", train_out, "Output checkpoint path");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_task = "alternating_place", eval_out, eval_table;
  int eval_trials = 50, eval_distractors = 0;
  bool eval_timing = false;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--task", eval_task, "Task name");
  eval->add_option("--trials", eval_trials, "Rollouts per condition");
  eval->add_option("--distractors", eval_distractors, "Background distractors");
  eval->add_flag("--timing", eval_timing,
                 "Record wall-clock latency (breaks byte-identical re-runs)");
  eval->add_option("--out", eval_out, "Output CSV path");
  eval->add_option("--table", eval_table, "Optional plain-text table path");

  auto* ablate = app.add_subcommand(
      "ablate", "Variant x task success matrix (trains 12 policies)");
  int ablate_trials = 50, ablate_epochs = 150;
  std::string ablate_out = "ablate";
  ablate->add_option("--trials", ablate_trials, "Rollouts per condition");
  ablate->add_option("--epochs", ablate_epochs, "Training epochs");
  ablate->add_option("--out", ablate_out, "Output prefix (.csv/.txt)");

  auto* disturb =
      app.add_subcommand("disturb", "Distractor robustness sweep");
  std::string disturb_task = "alternating_place", disturb_out;
  int disturb_trials = 50, disturb_epochs = 150;
  std::vector<int> disturb_counts;
  disturb->add_option("--task", disturb_task, "Task name");
  disturb->add_option("--trials", disturb_trials, "Rollouts per condition");
  disturb->add_option("--epochs", disturb_epochs, "Training epochs");
  disturb->add_option("--counts", disturb_counts, "Distractor counts");
  disturb->add_option("--out", disturb_out, "Output CSV path");

  auto* bench = app.add_subcommand("bench", "Per-decision latency benchmark");
  std::string bench_task = "alternating_place", bench_out;
  int bench_decisions = 200, bench_warmup = 20;
  bench->add_option("--task", bench_task, "Task name");
  bench->add_option("--decisions", bench_decisions, "Timed decisions");
  bench->add_option("--warmup", bench_warmup, "Warm-up decisions");
  bench->add_option("--out", bench_out, "Output CSV path");

  auto* mech = app.add_subcommand(
      "mech", "Sampler mechanism study on the drawer task");
  int mech_trials = 50, mech_epochs = 150;
  std::string mech_out;
  mech->add_option("--trials", mech_trials, "Rollouts per condition");
  mech->add_option("--epochs", mech_epochs, "Training epochs");
  mech->add_option("--out", mech_out, "Output CSV path");

  auto* render_field_cmd =
      app.add_subcommand("render-field", "Dump field/trace/modulated PGMs");
  std::string rf_data, rf_out;
  int rf_demo = 0;
  render_field_cmd->add_option("--data", rf_data,
                               "Dataset path (omit for an empty trace)");
  render_field_cmd->add_option("--demo", rf_demo, "Demonstration index");
  render_field_cmd->add_option("--out", rf_out, "Output directory");

  auto* plot = app.add_subcommand("plot", "Trajectory overlay + CSV polyline");
  std::string plot_ckpt, plot_task = "alternating_place", plot_out;
  plot->add_option("--ckpt", plot_ckpt, "Checkpoint path")->required();
  plot->add_option("--task", plot_task, "Task name");
  plot->add_option("--out", plot_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      run_gen_data(common, gen_task, gen_n, gen_out);
    } else if (train->parsed()) {
      run_train(common, train_data, train_variant, train_sampler, train_steps,
                train_epochs, train_out);
    } else if (eval->parsed()) {
      run_eval(common, eval_ckpt, eval_task, eval_trials, eval_distractors,
               eval_timing, eval_out, eval_table);
    } else if (ablate->parsed()) {
      run_ablate(common, ablate_trials, ablate_epochs, ablate_out);
    } else if (disturb->parsed()) {
      run_disturb(common, disturb_task, disturb_trials, disturb_epochs,
                  disturb_counts, disturb_out);
    } else if (bench->parsed()) {
      run_bench(common, bench_task, bench_decisions, bench_warmup, bench_out);
    } else if (mech->parsed()) {
      run_mech(common, mech_trials, mech_epochs, mech_out);
    } else if (render_field_cmd->parsed()) {
      run_render_field(common, rf_data, rf_demo, rf_out);
    } else if (plot->parsed()) {
      run_plot(common, plot_ckpt, plot_task, plot_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
