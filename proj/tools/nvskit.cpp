// nvskit command-line driver: compose, render, train, sample, eval,
// schedule-trace, remove, ablate.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nvskit/ablation.hpp"
#include "nvskit/correspondence.hpp"
#include "nvskit/edit.hpp"
#include "nvskit/evaluation.hpp"
#include "nvskit/io/checkpoint.hpp"
#include "nvskit/io/json.hpp"
#include "nvskit/io/png.hpp"
#include "nvskit/io/records.hpp"

namespace fs = std::filesystem;
using nvskit::io::Json;
using namespace nvskit;

namespace {

constexpr const char* kVersion = NVSKIT_VERSION;

/// Error kinds map to exit codes: usage 2, input/schema 3, runtime 1.
struct CliError : std::runtime_error {
  std::string kind;
  int code;
  CliError(std::string k, const std::string& msg, int c) : std::runtime_error(msg), kind(std::move(k)), code(c) {}
};

[[noreturn]] void input_error(const std::string& msg) { throw CliError("input_error", msg, 3); }

void report_error(const std::string& sub, const std::string& kind, const std::string& msg) {
  Json j = {{"error", {{"subcommand", sub}, {"kind", kind}, {"message", msg}}}};
  std::cerr << j.dump() << std::endl;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) input_error("missing file: " + p.string());
}

int default_threads() {
  if (const char* env = std::getenv("NVSKIT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw CliError("usage_error", "NVSKIT_THREADS must be a positive integer", 2);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; the first
/// exception is rethrown after all workers stop.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto work = [&] {
    for (int i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  const int k = std::clamp(threads, 1, std::max(1, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < k; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

Json run_header(const std::string& sub) {
  return {{"schema_version", io::kSchemaVersion}, {"kind", "run_config"}, {"subcommand", sub},
          {"toolkit_version", kVersion}};
}

std::vector<ObjectTemplate> load_catalog(const std::string& path) {
  if (path.empty()) return default_catalog();
  require_file(path);
  return io::catalog_from_json(io::read_json(path));
}

// ---- compose ----------------------------------------------------------------

struct ComposeArgs {
  std::string catalog, out;
  int count = 10;
  std::uint64_t seed = 0;
  int objects = 0;
  int threads = 1;
};

int cmd_compose(const ComposeArgs& a) {
  const auto catalog = load_catalog(a.catalog);
  ComposeOptions opts;
  if (a.objects > 0) opts.forced_count = a.objects;
  fs::create_directories(a.out);
  std::vector<std::string> files(static_cast<std::size_t>(a.count));
  parallel_for(a.count, a.threads, [&](int k) {
    const auto scene = compose_scene(catalog, scene_seed(a.seed, static_cast<std::uint64_t>(k)), opts);
    files[static_cast<std::size_t>(k)] = io::scene_dir_name(k) + ".json";
    io::write_json(fs::path(a.out) / files[static_cast<std::size_t>(k)], io::scene_to_json(scene));
  });
  Json cfg = run_header("compose");
  cfg["args"] = {{"catalog", a.catalog.empty() ? "builtin" : a.catalog}, {"count", a.count}, {"seed", a.seed},
                 {"objects", a.objects ? Json(a.objects) : Json("random 3-6")}};
  cfg["compose"] = {{"min_count", opts.min_count},         {"max_count", opts.max_count},
                    {"push_step", opts.push_step},         {"max_push_steps", opts.max_push_steps},
                    {"category_weights", opts.category_weights}};
  cfg["catalog"] = io::catalog_to_json(catalog);
  io::write_json(fs::path(a.out) / "config.json", cfg);
  io::write_json(fs::path(a.out) / "scenes.json", {{"schema_version", io::kSchemaVersion},
                                                    {"kind", "scene_set"},
                                                    {"count", a.count},
                                                    {"master_seed", a.seed},
                                                    {"files", files}});
  std::cerr << "composed " << a.count << " scenes into " << a.out << "\n";
  return 0;
}

// ---- render -----------------------------------------------------------------

struct RenderArgs {
  std::string scenes, out;
  int views = 12;
  int resolution = 32;
  double fov_deg = 50.0;
  int threads = 1;
};

int cmd_render(const RenderArgs& a) {
  const fs::path idx = fs::path(a.scenes) / "scenes.json";
  require_file(idx);
  const Json set = io::read_json(idx);
  io::check_schema(set, "scene set");
  const auto files = io::get_as<std::vector<std::string>>(set, "files", "scene set");
  const auto master = io::get_as<std::uint64_t>(set, "master_seed", "scene set");
  if (a.views < 2) throw CliError("usage_error", "--views must be at least 2", 2);
  if (a.resolution < 32 || a.resolution > 1024) throw CliError("usage_error", "--resolution must lie in [32, 1024]", 2);
  CameraParams cp;
  cp.intrinsic.width = cp.intrinsic.height = a.resolution;
  cp.intrinsic.vertical_fov = deg2rad(a.fov_deg);
  cp.validate();
  const int n = static_cast<int>(files.size());
  io::DatasetManifest m{n, a.views, a.resolution, master, kVersion, {}};
  for (int k = 0; k < n; ++k) m.scene_dirs.push_back(io::scene_dir_name(k));
  parallel_for(n, a.threads, [&](int k) {
    const fs::path src = fs::path(a.scenes) / files[static_cast<std::size_t>(k)];
    require_file(src);
    const auto scene = io::scene_from_json(io::read_json(src));
    const auto cams = sample_view_set(a.views, camera_seed(master, static_cast<std::uint64_t>(k)), cp);
    const fs::path sdir = fs::path(a.out) / m.scene_dirs[static_cast<std::size_t>(k)];
    io::write_json(sdir / "scene.json", io::scene_to_json(scene));
    for (int v = 0; v < a.views; ++v)
      io::write_view(sdir / io::view_dir_name(v), render_view(scene, cams[static_cast<std::size_t>(v)]),
                     cams[static_cast<std::size_t>(v)]);
  });
  Json cfg = run_header("render");
  cfg["args"] = {{"scenes", a.scenes}, {"views", a.views}, {"resolution", a.resolution}, {"fov_deg", a.fov_deg}};
  cfg["camera"] = {{"radius", {cp.radius_min, cp.radius_max}},
                   {"elevation_deg", {rad2deg(cp.elevation_min), rad2deg(cp.elevation_max)}},
                   {"azimuth_deg", {rad2deg(cp.azimuth_min), rad2deg(cp.azimuth_max)}},
                   {"target_radius", {cp.target_radius_min, cp.target_radius_max}}};
  io::write_json(fs::path(a.out) / "config.json", cfg);
  io::write_json(fs::path(a.out) / "manifest.json", io::manifest_to_json(m));
  std::cerr << "rendered " << n << " scenes x " << a.views << " views into " << a.out << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, scheduler = "ldc";
  int steps = 8000, batch = 16, width = 32, log_every = 100, max_scenes = -1;
  double lr = 1e-4, gamma = 0.1, dropout = 0.1;
  std::uint64_t seed = 0;
  bool no_depth = false, no_mask_head = false, no_mask_input = false;
};

TrainConfig train_config_from(const TrainArgs& a) {
  TrainConfig tc;
  tc.batch_size = a.batch;
  tc.learning_rate = a.lr;
  tc.total_steps = a.steps;
  tc.gamma = a.no_mask_head ? 0.0 : a.gamma;
  tc.cond_dropout_p = a.dropout;
  tc.seed = a.seed;
  try {
    tc.scheduler.variant = parse_variant(a.scheduler);
  } catch (const std::invalid_argument& e) {
    throw CliError("usage_error", e.what(), 2);
  }
  tc.scheduler = tc.scheduler.scaled_to(a.steps);
  tc.validate();
  return tc;
}

ArchConfig arch_from(const TrainArgs& a, int resolution) {
  ArchConfig arch;
  arch.height = arch.width = resolution;
  arch.base_width = a.width;
  arch.depth_input = !a.no_depth;
  arch.mask_input = !a.no_mask_input;
  arch.validate();
  return arch;
}

Dataset load_data(const std::string& dir, int max_scenes) {
  require_file(fs::path(dir) / "manifest.json");
  return io::load_dataset(dir, max_scenes);
}

int cmd_train(const TrainArgs& a) {
  const Dataset ds = load_data(a.data, a.max_scenes);
  const TrainConfig tc = train_config_from(a);
  const ArchConfig arch = arch_from(a, ds.width);
  TrainState st(arch, tc);
  fs::create_directories(a.out);

  Json cfg = run_header("train");
  cfg["args"] = {{"data", a.data}, {"max_scenes", a.max_scenes}, {"no_depth", a.no_depth},
                 {"no_mask_head", a.no_mask_head}, {"no_mask_input", a.no_mask_input}};
  cfg["train"] = io::train_to_json(tc);
  cfg["arch"] = io::arch_to_json(arch);
  cfg["schedule"] = io::schedule_to_json(st.schedule);
  cfg["parameter_count"] = st.net.parameter_count();
  io::write_json(fs::path(a.out) / "config.json", cfg);

  io::LossLog log(fs::path(a.out) / "loss.csv");
  train(st, ds, [&](const StepLog& s, const TrainState&) {
    log.append(s);
    if (a.log_every > 0 && ((s.step + 1) % a.log_every == 0 || s.step + 1 == tc.total_steps))
      std::fprintf(stderr, "step %d  t_mean %.1f  diffusion %.5f  mask %.5f\n", s.step + 1, s.t_mean,
                   s.loss.diffusion, s.loss.mask);
  });
  io::save_checkpoint(fs::path(a.out) / "checkpoint.bin", st.net, cfg);
  std::cerr << "wrote " << (fs::path(a.out) / "checkpoint.bin").string() << "\n";
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint, data, out;
  int steps = 50, pairs_per_scene = 1, max_scenes = -1, trajectories = 2, chunk = 16;
  double guidance = 3.0, eta = 0.0;
  std::uint64_t seed = 0;
};

std::string pair_name(std::size_t scene, int in, int tg) {
  char b[64];
  std::snprintf(b, sizeof b, "s%05zu_v%02d_v%02d", scene, in, tg);
  return b;
}

/// Horizontal strip of selected trajectory states for example n.
ImageF trajectory_strip(const std::vector<std::vector<float>>& traj, int channels, int n, int batch, int h, int w,
                        int tiles) {
  const int steps = static_cast<int>(traj.size());
  tiles = std::min(tiles, steps);
  ImageF out(w * tiles, h, 3, 1.0f);
  const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (int k = 0; k < tiles; ++k) {
    const int s = tiles == 1 ? steps - 1 : k * (steps - 1) / (tiles - 1);
    const auto& v = traj[static_cast<std::size_t>(s)];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          const int src_c = channels == 1 ? 0 : c;
          const float val =
              v[(static_cast<std::size_t>(src_c) * static_cast<std::size_t>(batch) + static_cast<std::size_t>(n)) * hw +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
          out.at(k * w + x, y, c) = std::clamp(0.5f * (val + 1.0f), 0.0f, 1.0f);
        }
  }
  return out;
}

int cmd_sample(const SampleArgs& a) {
  require_file(a.checkpoint);
  auto ck = io::load_checkpoint(a.checkpoint);
  const Dataset ds = load_data(a.data, a.max_scenes);
  if (ds.width != ck.net.config().width || ds.height != ck.net.config().height)
    input_error("dataset resolution does not match the checkpoint");
  const DiffusionSchedule sched =
      ck.config.contains("schedule") ? io::schedule_from_json(ck.config.at("schedule")) : make_schedule();
  SamplerConfig sc{a.steps, a.guidance, a.eta};
  const fs::path out(a.out);
  for (const char* d : {"pred", "masks", "gt", "pairs", "trajectories"}) fs::create_directories(out / d);

  const auto pairs = default_eval_pairs(ds, a.pairs_per_scene);
  const int h = ds.height, w = ds.width;
  std::size_t written_traj = 0;
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(a.chunk)) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(a.chunk));
    std::vector<ConditioningBundle<float>> cond;
    for (std::size_t i = start; i < end; ++i)
      cond.push_back(make_example(ds.scenes[pairs[i].scene], pairs[i].input_view, pairs[i].target_view).cond);
    const auto gen = generate(ck.net, cond, sc, sched, derive_seed(a.seed, start));
    const int batch = static_cast<int>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& p = pairs[i];
      const auto& rec = ds.scenes[p.scene];
      const auto& in = rec.views[static_cast<std::size_t>(p.input_view)];
      const auto& tg = rec.views[static_cast<std::size_t>(p.target_view)];
      const std::string name = pair_name(p.scene, p.input_view, p.target_view);
      const int n = static_cast<int>(i - start);
      const ImageF pred = tensor_to_image(gen.image, n);
      io::write_png(out / "pred" / (name + ".png"), pred);
      Image<std::uint16_t> mask16(w, h, 1);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double v = std::clamp(static_cast<double>(gen.mask.at(0, n, y, x)), -1.0, 1.0);
          mask16.at(x, y) = static_cast<std::uint16_t>(std::lround((v + 1.0) * 0.5 * 65535.0));
        }
      io::write_png_u16(out / "masks" / (name + ".png"), mask16);
      write_gt_entry(out / "gt" / name, in, tg, rec.scene.size());
      io::write_pairs(out / "pairs" / (name + ".gt.jsonl"),
                      geometric_correspondences(in.depth_raw, in.instance_map, in.camera, tg.depth_raw,
                                                tg.instance_map, tg.camera));
      io::write_pairs(out / "pairs" / (name + ".pred.jsonl"), block_match(in.rgb, pred));
      if (written_traj < static_cast<std::size_t>(a.trajectories)) {
        io::write_png(out / "trajectories" / (name + "_x0.png"),
                      trajectory_strip(gen.raw.x0_trajectory, 3, n, batch, h, w, 10));
        io::write_png(out / "trajectories" / (name + "_mask.png"),
                      trajectory_strip(gen.raw.mask_trajectory, 1, n, batch, h, w, 10));
        ++written_traj;
      }
    }
    std::cerr << "sampled " << end << "/" << pairs.size() << "\n";
  }
  Json cfg = run_header("sample");
  cfg["args"] = {{"checkpoint", a.checkpoint}, {"data", a.data}, {"pairs_per_scene", a.pairs_per_scene},
                 {"max_scenes", a.max_scenes}, {"seed", a.seed}, {"chunk", a.chunk}};
  cfg["sampler"] = io::sampler_to_json(sc);
  cfg["checkpoint_config"] = ck.config;
  io::write_json(out / "config.json", cfg);
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, pairs, out;
  double match_threshold = kMatchThreshold;
};

int cmd_eval(const EvalArgs& a) {
  EvalReport r;
  try {
    r = evaluate_run(a.pred, a.gt, a.pairs, a.match_threshold);
  } catch (const std::runtime_error& e) {
    input_error(e.what());
  }
  Json j = report_to_json(r);
  Json cfg = run_header("eval");
  cfg["args"] = {{"pred", a.pred}, {"gt", a.gt}, {"pairs", a.pairs}};
  cfg["match_threshold_px"] = a.match_threshold;
  cfg["foreground_threshold"] = kForegroundThreshold;
  j["config"] = cfg;
  io::write_json(a.out, j);
  const auto& agg = j["aggregate"];
  std::cerr << "evaluated " << agg["count"] << " images (" << agg["error_count"] << " errors): iou " << agg["iou"]
            << " hit_rate " << agg["hit_rate"] << "\n";
  return 0;
}

// ---- schedule-trace ----------------------------------------------------------

struct TraceArgs {
  std::string variant = "ldc", out;
  int stride = 100, draws = 10000, total_steps = 8000;
  std::uint64_t seed = 0;
};

int cmd_schedule_trace(const TraceArgs& a) {
  SchedulerConfig c;
  try {
    c.variant = parse_variant(a.variant);
  } catch (const std::invalid_argument& e) {
    throw CliError("usage_error", e.what(), 2);
  }
  c = c.scaled_to(a.total_steps);
  c.validate();
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) input_error("cannot write " + a.out);
  f << "s,mu,empirical_mean\n";
  Rng rng(a.seed);
  for (const auto& p : trace(c, a.stride)) {
    double sum = 0.0;
    for (int i = 0; i < a.draws; ++i) sum += sample_timestep(p.step, rng, c);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", p.step, p.mu, sum / a.draws);
    f << buf;
  }
  Json cfg = run_header("schedule-trace");
  cfg["args"] = {{"stride", a.stride}, {"draws", a.draws}, {"seed", a.seed}, {"out", a.out}};
  cfg["scheduler"] = io::scheduler_to_json(c);
  io::write_json(out.string() + ".config.json", cfg);
  return 0;
}

// ---- remove -----------------------------------------------------------------

struct RemoveArgs {
  std::string rgb, mask, out;
  int id = 1, n_objects = 1;
  double band = kDefaultRemovalBand;
};

int cmd_remove(const RemoveArgs& a) {
  require_file(a.rgb);
  require_file(a.mask);
  const ImageF rgb = io::read_png_float(a.rgb);
  ImageF m = io::read_png_float(a.mask);
  if (m.channels != 1) input_error("mask PNG must be single channel");
  for (auto& v : m.data) v = 2.0f * v - 1.0f;
  ImageF edited;
  try {
    edited = remove_object(rgb, m, a.id, a.n_objects, a.band);
  } catch (const std::invalid_argument& e) {
    input_error(e.what());
  }
  io::write_png(a.out, edited);
  Json cfg = run_header("remove");
  cfg["args"] = {{"rgb", a.rgb}, {"mask", a.mask}, {"id", a.id}, {"n_objects", a.n_objects}, {"band", a.band}};
  io::write_json(a.out + ".config.json", cfg);
  return 0;
}

// ---- ablate -----------------------------------------------------------------

struct AblateArgs {
  TrainArgs train;
  std::string test_data;
  int test_scenes = -1;
  int steps_sampler = 50;
  double guidance = 3.0;
};

int cmd_ablate(const AblateArgs& a) {
  const Dataset train_set = load_data(a.train.data, a.train.max_scenes);
  const Dataset test_set = load_data(a.test_data.empty() ? a.train.data : a.test_data, a.test_scenes);
  const TrainConfig tc = train_config_from(a.train);
  const ArchConfig arch = arch_from(a.train, train_set.width);
  const auto pairs = default_eval_pairs(test_set);
  const SamplerConfig sc{a.steps_sampler, a.guidance, 0.0};
  const fs::path out(a.train.out);
  fs::create_directories(out);
  Json cfg = run_header("ablate");
  cfg["args"] = {{"data", a.train.data}, {"test_data", a.test_data}, {"test_scenes", a.test_scenes}};
  cfg["train"] = io::train_to_json(tc);
  cfg["arch"] = io::arch_to_json(arch);
  cfg["sampler"] = io::sampler_to_json(sc);
  io::write_json(out / "config.json", cfg);

  Json arms = Json::array();
  for (const auto& arm : component_arms(arch, tc)) {
    std::cerr << "arm " << arm.name << "\n";
    fs::create_directories(out / arm.name);
    io::LossLog log(out / arm.name / "loss.csv");
    const auto r = run_arm(arm, train_set, test_set, pairs, sc, a.train.seed, [&](const StepLog& s, const TrainState&) {
      log.append(s);
    });
    arms.push_back({{"name", r.name},
                    {"arch", io::arch_to_json(arm.arch)},
                    {"train", io::train_to_json(arm.train)},
                    {"psnr", r.score.mean_psnr},
                    {"ssim", r.score.mean_ssim},
                    {"iou", r.score.mean_iou},
                    {"final_diffusion_loss", r.log.back().loss.diffusion},
                    {"loss_log", arm.name + "/loss.csv"}});
    std::cerr << "  iou " << r.score.mean_iou << " psnr " << r.score.mean_psnr << " ssim " << r.score.mean_ssim << "\n";
  }
  io::write_json(out / "report.json", {{"schema_version", io::kSchemaVersion},
                                       {"kind", "ablation_report"},
                                       {"pairs", pairs.size()},
                                       {"arms", arms},
                                       {"config", cfg}});
  return 0;
}

void add_train_flags(CLI::App* sc, TrainArgs& t) {
  sc->add_option("--data", t.data, "rendered dataset directory (contains manifest.json)")->required();
  sc->add_option("--out", t.out, "output directory")->required();
  sc->add_option("--steps", t.steps, "optimizer updates")->check(CLI::PositiveNumber)->capture_default_str();
  sc->add_option("--batch", t.batch, "batch size")->check(CLI::PositiveNumber)->capture_default_str();
  sc->add_option("--lr", t.lr, "learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sc->add_option("--gamma", t.gamma, "mask loss weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  sc->add_option("--cond-dropout", t.dropout, "condition dropout probability")->check(CLI::Range(0.0, 0.999))->capture_default_str();
  sc->add_option("--scheduler", t.scheduler, "uniform | ldc | lind | kms")->capture_default_str();
  sc->add_option("--width", t.width, "base channel width")->check(CLI::PositiveNumber)->capture_default_str();
  sc->add_option("--seed", t.seed, "training seed")->capture_default_str();
  sc->add_option("--max-scenes", t.max_scenes, "use only the first N scenes")->capture_default_str();
  sc->add_option("--log-every", t.log_every, "progress interval (0 = silent)")->capture_default_str();
  sc->add_flag("--no-depth", t.no_depth, "zero the depth conditioning channel");
  sc->add_flag("--no-mask-head", t.no_mask_head, "drop the auxiliary mask loss (gamma = 0)");
  sc->add_flag("--no-mask-input", t.no_mask_input, "zero the instance-mask conditioning channel");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nvskit: compositional novel-view-synthesis toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  int threads = 0;

  ComposeArgs ca;
  auto* compose = app.add_subcommand("compose", "generate collision-free scene composites");
  compose->add_option("--catalog", ca.catalog, "catalog JSON (default: built-in)");
  compose->add_option("--count,--scenes", ca.count, "number of scenes")->check(CLI::PositiveNumber)->capture_default_str();
  compose->add_option("--seed", ca.seed, "master seed")->capture_default_str();
  compose->add_option("--objects", ca.objects, "fixed object count (default 3-6 at random)")->check(CLI::Range(1, 255));
  compose->add_option("--out", ca.out, "output directory")->required();
  compose->add_option("--threads", threads, "worker threads (default $NVSKIT_THREADS or all cores)");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "render views, depth, instance and amodal masks");
  render->add_option("--scenes", ra.scenes, "directory written by compose")->required();
  render->add_option("--out", ra.out, "dataset directory")->required();
  render->add_option("--views", ra.views, "views per scene")->capture_default_str();
  render->add_option("--resolution", ra.resolution, "square image size")->capture_default_str();
  render->add_option("--fov", ra.fov_deg, "vertical field of view in degrees")->check(CLI::Range(1.0, 179.0))->capture_default_str();
  render->add_option("--threads", threads, "worker threads (default $NVSKIT_THREADS or all cores)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train the view-conditioned denoiser");
  add_train_flags(train_cmd, ta);

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "generate novel views and write an evaluation layout");
  sample_cmd->add_option("--checkpoint", sa.checkpoint, "checkpoint.bin from train")->required();
  sample_cmd->add_option("--data", sa.data, "rendered dataset to draw (input, target) pairs from")->required();
  sample_cmd->add_option("--out", sa.out, "output directory")->required();
  sample_cmd->add_option("--steps", sa.steps, "DDIM steps")->check(CLI::PositiveNumber)->capture_default_str();
  sample_cmd->add_option("--guidance", sa.guidance, "classifier-free guidance scale")->capture_default_str();
  sample_cmd->add_option("--eta", sa.eta, "DDIM stochasticity")->check(CLI::NonNegativeNumber)->capture_default_str();
  sample_cmd->add_option("--seed", sa.seed, "sampling seed")->capture_default_str();
  sample_cmd->add_option("--pairs-per-scene", sa.pairs_per_scene, "view pairs per scene")->check(CLI::PositiveNumber)->capture_default_str();
  sample_cmd->add_option("--max-scenes", sa.max_scenes, "use only the first N scenes")->capture_default_str();
  sample_cmd->add_option("--trajectories", sa.trajectories, "pairs to dump denoising strips for")->capture_default_str();
  sample_cmd->add_option("--chunk", sa.chunk, "pairs generated per batch")->check(CLI::PositiveNumber)->capture_default_str();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_cmd->add_option("--pred", ea.pred, "directory of <name>.png predictions")->required();
  eval_cmd->add_option("--gt", ea.gt, "directory of <name>/ ground-truth entries")->required();
  eval_cmd->add_option("--pairs", ea.pairs, "directory of <name>.gt.jsonl / <name>.pred.jsonl")->required();
  eval_cmd->add_option("--out", ea.out, "report JSON path")->required();
  eval_cmd->add_option("--match-threshold", ea.match_threshold, "correspondence gate in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TraceArgs tra;
  auto* trace_cmd = app.add_subcommand("schedule-trace", "tabulate the timestep scheduler mean and sample means");
  trace_cmd->add_option("--variant", tra.variant, "uniform | ldc | lind | kms")->capture_default_str();
  trace_cmd->add_option("--out", tra.out, "CSV path")->required();
  trace_cmd->add_option("--stride", tra.stride, "training-step stride")->check(CLI::PositiveNumber)->capture_default_str();
  trace_cmd->add_option("--draws", tra.draws, "samples per row")->check(CLI::PositiveNumber)->capture_default_str();
  trace_cmd->add_option("--total-steps", tra.total_steps, "training budget the phases scale to")->check(CLI::PositiveNumber)->capture_default_str();
  trace_cmd->add_option("--seed", tra.seed, "RNG seed")->capture_default_str();

  RemoveArgs rma;
  auto* remove_cmd = app.add_subcommand("remove", "erase one object using a predicted instance mask");
  remove_cmd->add_option("--rgb", rma.rgb, "RGB PNG")->required();
  remove_cmd->add_option("--mask", rma.mask, "single-channel PNG of the [-1,1] mask")->required();
  remove_cmd->add_option("--id", rma.id, "instance id to remove")->required();
  remove_cmd->add_option("--n-objects", rma.n_objects, "objects in the scene")->required();
  remove_cmd->add_option("--band", rma.band, "half-width in instance-id units")->capture_default_str();
  remove_cmd->add_option("--out", rma.out, "output PNG")->required();

  AblateArgs aa;
  auto* ablate_cmd = app.add_subcommand("ablate", "train full / no-depth / no-mask / no-scheduler arms and compare");
  add_train_flags(ablate_cmd, aa.train);
  ablate_cmd->add_option("--test-data", aa.test_data, "held-out dataset (default: --data)");
  ablate_cmd->add_option("--test-scenes", aa.test_scenes, "use only the first N test scenes");
  ablate_cmd->add_option("--sample-steps", aa.steps_sampler, "DDIM steps for scoring")->capture_default_str();
  ablate_cmd->add_option("--guidance", aa.guidance, "guidance scale for scoring")->capture_default_str();

  std::string sub = "nvskit";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (!app.get_subcommands().empty()) sub = app.get_subcommands().front()->get_name();
    report_error(sub, "usage_error", e.what());
    return 2;
  }
  sub = app.get_subcommands().front()->get_name();
  try {
    const int nthreads = threads > 0 ? threads : default_threads();
    ca.threads = ra.threads = nthreads;
    if (*compose) return cmd_compose(ca);
    if (*render) return cmd_render(ra);
    if (*train_cmd) return cmd_train(ta);
    if (*sample_cmd) return cmd_sample(sa);
    if (*eval_cmd) return cmd_eval(ea);
    if (*trace_cmd) return cmd_schedule_trace(tra);
    if (*remove_cmd) return cmd_remove(rma);
    if (*ablate_cmd) return cmd_ablate(aa);
  } catch (const CliError& e) {
    report_error(sub, e.kind, e.what());
    return e.code;
  } catch (const io::SchemaError& e) {
    report_error(sub, "schema_error", e.what());
    return 3;
  } catch (const io::PngError& e) {
    report_error(sub, "input_error", e.what());
    return 3;
  } catch (const io::CheckpointError& e) {
    report_error(sub, "input_error", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    report_error(sub, "invalid_argument", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(sub, "runtime_error", e.what());
    return 1;
  }
  return 0;
}
