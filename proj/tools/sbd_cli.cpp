// Command-line driver: dataset generation, score training, separation,
// active sensing, sequential inference, and metric aggregation.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sbd/config.hpp"
#include "sbd/dataset.hpp"
#include "sbd/experiments.hpp"
#include "sbd/metrics.hpp"

using namespace sbd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = "out";
  long long seed = -1;
  std::string rule;
  int frames = -1;
};

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void emit_error_record(const std::string& kind, const std::string& field,
                       const std::string& message) {
  json rec{{"error", kind}, {"message", message}};
  if (!field.empty()) rec["field"] = field;
  std::cerr << rec.dump() << "\n";
}

json config_json(const Config& cfg) {
  json j;
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j;
}

// ---------------------------------------------------------------------------

const ConfigSchema& generate_schema() {
  static const ConfigSchema schema{
      {"scenario.kind", {FieldType::kString, "radar"}},
      {"scenario.count", {FieldType::kInt, "8"}},
      {"scenario.n_fast_time", {FieldType::kInt, "1024"}},
      {"scenario.num_targets", {FieldType::kInt, "3"}},
      {"scenario.num_events", {FieldType::kInt, "3"}},
      {"scenario.duty", {FieldType::kReal, "0.5"}},
      {"scenario.interference_amplitude", {FieldType::kReal, "0.8"}},
      {"scenario.noise_std", {FieldType::kReal, "0.001"}},
      {"scenario.m_samples", {FieldType::kInt, "2048"}},
      {"scenario.num_echoes", {FieldType::kInt, "24"}},
      {"scenario.dynamic_range_db", {FieldType::kReal, "60"}},
      {"scenario.mu", {FieldType::kReal, "255"}},
      {"scenario.side", {FieldType::kInt, "32"}},
      {"scenario.num_components", {FieldType::kInt, "4"}},
      {"scenario.component_std", {FieldType::kReal, "0.12"}},
      {"scenario.prior_seed", {FieldType::kInt, "2"}},
      {"scenario.kspace_noise_std", {FieldType::kReal, "0.08"}},
      {"scenario.tr_ms", {FieldType::kReal, "2500"}},
      {"scenario.split", {FieldType::kString, "train"}},
      {"seed", {FieldType::kInt, "1"}},
  };
  return schema;
}

int cmd_generate(const Config& cfg, const CliArgs& args) {
  const std::string kind = cfg.get_string("scenario.kind");
  const std::uint64_t seed =
      args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");
  const int count = static_cast<int>(cfg.get_int("scenario.count"));
  std::vector<DatasetRecord> records;
  std::map<std::string, std::string> sidecar{{"split", cfg.get_string("scenario.split")},
                                             {"seed", std::to_string(seed)},
                                             {"kind", kind}};
  if (kind == "radar") {
    for (int i = 0; i < count; ++i) {
      Rng rng = make_stream(seed, i);
      RadarScene scene = make_random_radar_scene(
          static_cast<int>(cfg.get_int("scenario.n_fast_time")),
          static_cast<int>(cfg.get_int("scenario.num_targets")),
          static_cast<int>(cfg.get_int("scenario.num_events")), cfg.get_real("scenario.duty"),
          cfg.get_real("scenario.interference_amplitude"), cfg.get_real("scenario.noise_std"),
          rng);
      const RadarDraw draw = gen_radar(scene, rng);
      const std::string tag = std::to_string(i);
      records.push_back(DatasetRecord::complex("x_" + tag, draw.x));
      records.push_back(DatasetRecord::complex("n_" + tag, draw.n));
      records.push_back(DatasetRecord::complex("y_" + tag, draw.y));
      // mask rows serialize per the container contract (0/1 text goes in the
      // sidecar for mask-bearing scenarios; radar has none)
    }
    sidecar["n_fast_time"] = std::to_string(cfg.get_int("scenario.n_fast_time"));
    sidecar["reference_cube"] = "32x256x1024";
  } else if (kind == "hdr_rf") {
    const CompandingParams comp(cfg.get_real("scenario.mu"));
    for (int i = 0; i < count; ++i) {
      Rng rng = make_stream(seed, i);
      HdrRfScene scene =
          make_hdr_scene(static_cast<int>(cfg.get_int("scenario.m_samples")),
                         static_cast<int>(cfg.get_int("scenario.num_echoes")),
                         cfg.get_real("scenario.dynamic_range_db"), rng);
      scene.noise_std = cfg.get_real("scenario.noise_std");
      const HdrDraw draw = gen_hdr_rf(scene, rng, comp);
      const std::string tag = std::to_string(i);
      records.push_back(DatasetRecord::real("x_rf_" + tag, draw.x_rf));
      records.push_back(DatasetRecord::real("n_rf_" + tag, draw.n_rf));
      records.push_back(DatasetRecord::real("y_" + tag, draw.y));
    }
    sidecar["mu"] = format_double(cfg.get_real("scenario.mu"));
  } else if (kind == "phantom") {
    PhantomSpec spec;
    spec.side = static_cast<int>(cfg.get_int("scenario.side"));
    spec.prior = make_phantom_prior(spec.side,
                                    static_cast<int>(cfg.get_int("scenario.num_components")),
                                    cfg.get_real("scenario.component_std"),
                                    cfg.get_int("scenario.prior_seed"));
    spec.kspace_noise_std = cfg.get_real("scenario.kspace_noise_std");
    spec.tr_ms = cfg.get_real("scenario.tr_ms");
    for (int i = 0; i < count; ++i) {
      Rng rng = make_stream(seed, i);
      const PhantomDraw draw = gen_phantom(spec, rng);
      const std::string tag = std::to_string(i);
      records.push_back(DatasetRecord::real("image_" + tag, draw.image));
      records.push_back(DatasetRecord::complex("kspace_" + tag, draw.kspace));
    }
    sidecar["tr_ms"] = format_double(spec.tr_ms);
    sidecar["side"] = std::to_string(spec.side);
  } else {
    throw ConfigError("generate: unknown scenario.kind '" + kind + "'", "scenario.kind");
  }
  const std::string path = (fs::path(args.out_dir) / (kind + "_dataset.bin")).string();
  save_dataset(path, records, sidecar);
  std::cout << "wrote " << records.size() << " records to " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

const ConfigSchema& train_schema() {
  static const ConfigSchema schema{
      {"train.kind", {FieldType::kString, "gmm1d"}},
      {"train.steps", {FieldType::kInt, "8000"}},
      {"train.batch", {FieldType::kInt, "384"}},
      {"train.learning_rate", {FieldType::kReal, "0.002"}},
      {"train.momentum", {FieldType::kReal, "0.9"}},
      {"train.dataset_size", {FieldType::kInt, "10000"}},
      {"train.n_fast_time", {FieldType::kInt, "1024"}},
      {"train.duty", {FieldType::kReal, "0.5"}},
      {"train.num_events", {FieldType::kInt, "3"}},
      {"train.amplitude", {FieldType::kReal, "0.8"}},
      {"seed", {FieldType::kInt, "3"}},
  };
  return schema;
}

int cmd_train(const Config& cfg, const CliArgs& args) {
  const std::string kind = cfg.get_string("train.kind");
  const std::uint64_t seed =
      args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");
  const double t0 = now_seconds();
  const std::string manifest = (fs::path(args.out_dir) / "train_manifest.jsonl").string();
  if (kind == "gmm1d") {
    GmmDsmConfig gc;
    gc.steps = static_cast<int>(cfg.get_int("train.steps"));
    gc.batch = static_cast<int>(cfg.get_int("train.batch"));
    gc.learning_rate = cfg.get_real("train.learning_rate");
    gc.momentum = cfg.get_real("train.momentum");
    gc.dataset_size = static_cast<int>(cfg.get_int("train.dataset_size"));
    gc.seed = seed;
    const GmmDsmResult res = run_gmm_dsm(gc);
    const std::string net_path = (fs::path(args.out_dir) / "gmm1d.scorenet").string();
    res.net.save(net_path);
    MetricTable table;
    table.columns = {"seed", "score_mse", "sign_agreement", "loss_first", "loss_last"};
    table.rows = {{static_cast<double>(seed), res.score_mse, res.sign_agreement, res.loss_first,
                   res.loss_last}};
    write_csv((fs::path(args.out_dir) / "train_metrics.csv").string(), table);
    append_manifest_line(manifest, json{{"record", "train"},
                                        {"kind", kind},
                                        {"config", config_json(cfg)},
                                        {"net", net_path},
                                        {"score_mse", res.score_mse},
                                        {"wall_time_s", now_seconds() - t0}}
                                       .dump());
    std::cout << "gmm1d score_mse=" << res.score_mse << " net=" << net_path << "\n";
  } else if (kind == "chirp") {
    ChirpTrainConfig tc;
    tc.n_fast_time = static_cast<int>(cfg.get_int("train.n_fast_time"));
    tc.dataset_size = static_cast<int>(cfg.get_int("train.dataset_size"));
    tc.steps = static_cast<int>(cfg.get_int("train.steps"));
    tc.batch = static_cast<int>(cfg.get_int("train.batch"));
    tc.learning_rate = cfg.get_real("train.learning_rate");
    tc.duty = cfg.get_real("train.duty");
    tc.num_events = static_cast<int>(cfg.get_int("train.num_events"));
    tc.amplitude = cfg.get_real("train.amplitude");
    tc.seed = seed;
    const ScoreNet net = train_chirp_scorenet(tc);
    const std::string net_path = (fs::path(args.out_dir) / "chirp.scorenet").string();
    net.save(net_path);
    append_manifest_line(manifest, json{{"record", "train"},
                                        {"kind", kind},
                                        {"config", config_json(cfg)},
                                        {"net", net_path},
                                        {"loss_last", net.loss_history().back()},
                                        {"wall_time_s", now_seconds() - t0}}
                                       .dump());
    std::cout << "chirp net trained, loss_last=" << net.loss_history().back()
              << " net=" << net_path << "\n";
  } else {
    throw ConfigError("train: unknown train.kind '" + kind + "'", "train.kind");
  }
  return 0;
}

// ---------------------------------------------------------------------------

const ConfigSchema& separate_schema() {
  static const ConfigSchema schema{
      {"scenario.kind", {FieldType::kString, "radar"}},
      {"scenario.n_fast_time", {FieldType::kInt, "1024"}},
      {"scenario.num_targets", {FieldType::kInt, "3"}},
      {"scenario.num_events", {FieldType::kInt, "2"}},
      {"scenario.duty", {FieldType::kReal, "0.5"}},
      {"scenario.interference_amplitude", {FieldType::kReal, "0.8"}},
      {"scenario.noise_std", {FieldType::kReal, "0.001"}},
      {"scenario.m_samples", {FieldType::kInt, "512"}},
      {"scenario.mu", {FieldType::kReal, "255"}},
      {"prior.lambda0", {FieldType::kReal, "1.8"}},
      {"prior.net_path", {FieldType::kString, ""}},
      {"train.steps", {FieldType::kInt, "2500"}},
      {"train.batch", {FieldType::kInt, "24"}},
      {"train.dataset_size", {FieldType::kInt, "768"}},
      {"train.learning_rate", {FieldType::kReal, "0.001"}},
      {"sampler.steps", {FieldType::kInt, "600"}},
      {"sampler.num_chains", {FieldType::kInt, "4"}},
      {"sampler.zeta", {FieldType::kReal, "30"}},
      {"sampler.zeta_noise", {FieldType::kReal, "60"}},
      {"sampler.alpha_floor", {FieldType::kReal, "0.3"}},
      {"seeds", {FieldType::kInt, "4"}},
      {"seed", {FieldType::kInt, "11"}},
  };
  return schema;
}

int cmd_separate(const Config& cfg, const CliArgs& args) {
  const std::string kind = cfg.get_string("scenario.kind");
  const double t0 = now_seconds();
  const std::string manifest = (fs::path(args.out_dir) / "separate_manifest.jsonl").string();
  if (kind == "radar") {
    RadarSeparationConfig rc;
    rc.n_fast_time = static_cast<int>(cfg.get_int("scenario.n_fast_time"));
    rc.num_targets = static_cast<int>(cfg.get_int("scenario.num_targets"));
    rc.num_events = static_cast<int>(cfg.get_int("scenario.num_events"));
    rc.duty = cfg.get_real("scenario.duty");
    rc.interference_amplitude = cfg.get_real("scenario.interference_amplitude");
    rc.noise_std = cfg.get_real("scenario.noise_std");
    rc.lambda0 = cfg.get_real("prior.lambda0");
    rc.steps = static_cast<int>(cfg.get_int("sampler.steps"));
    rc.num_chains = static_cast<int>(cfg.get_int("sampler.num_chains"));
    rc.zeta = cfg.get_real("sampler.zeta");
    rc.zeta_noise = cfg.get_real("sampler.zeta_noise");
    rc.alpha_floor = cfg.get_real("sampler.alpha_floor");
    rc.num_seeds = static_cast<int>(cfg.get_int("seeds"));
    rc.base_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");

    ScoreNet net = [&] {
      const std::string net_path = cfg.get_string("prior.net_path");
      if (!net_path.empty()) return ScoreNet::load(net_path);
      ChirpTrainConfig tc;
      tc.n_fast_time = rc.n_fast_time;
      tc.dataset_size = static_cast<int>(cfg.get_int("train.dataset_size"));
      tc.steps = static_cast<int>(cfg.get_int("train.steps"));
      tc.batch = static_cast<int>(cfg.get_int("train.batch"));
      tc.learning_rate = cfg.get_real("train.learning_rate");
      tc.duty = rc.duty;
      tc.num_events = rc.num_events;
      tc.amplitude = rc.interference_amplitude;
      tc.seed = rc.base_seed + 1;
      return train_chirp_scorenet(tc);
    }();

    const RadarSeparationResult res = run_radar_separation(rc, net);
    MetricTable table;
    table.columns = {"seed",           "floor_unmitigated_db", "floor_mitigated_db",
                     "improvement_db", "oracle_improvement_db", "residual_rel",
                     "nmse",           "nfe"};
    for (const auto& row : res.rows)
      table.rows.push_back({static_cast<double>(row.seed), row.floor_unmitigated_db,
                            row.floor_mitigated_db, row.improvement_db,
                            row.oracle_improvement_db, row.residual_rel, row.nmse,
                            static_cast<double>(row.nfe)});
    const std::string runs_csv = (fs::path(args.out_dir) / "separate_runs.csv").string();
    write_csv(runs_csv, table);
    write_csv((fs::path(args.out_dir) / "separate_aggregate.csv").string(),
              aggregate_table(table));
    append_manifest_line(manifest, json{{"record", "separate"},
                                        {"kind", kind},
                                        {"config", config_json(cfg)},
                                        {"mean_improvement_db", res.mean_improvement_db},
                                        {"mean_residual_rel", res.mean_residual_rel},
                                        {"runs_csv", runs_csv},
                                        {"wall_time_s", now_seconds() - t0}}
                                       .dump());
    std::cout << "radar separation: mean improvement " << res.mean_improvement_db
              << " dB, mean residual " << res.mean_residual_rel << "\n";
    return 0;
  }
  if (kind == "ultrasound") {
    // companded joint separation on the HDR scene with a sparse echo prior
    // and a Gaussian haze prior
    const int m = static_cast<int>(cfg.get_int("scenario.m_samples"));
    const CompandingParams comp(cfg.get_real("scenario.mu"));
    const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
    const int seeds = static_cast<int>(cfg.get_int("seeds"));
    const std::uint64_t base =
        args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");
    MetricTable table;
    table.columns = {"seed", "residual_rel", "nmse", "gcnr_dehazed", "gcnr_input"};
    for (int s = 0; s < seeds; ++s) {
      Rng rng = make_stream(base, 3000 + s);
      HdrRfScene scene = make_hdr_scene(m, 12, 60.0, rng);
      scene.noise_std = cfg.get_real("scenario.noise_std");
      const HdrDraw draw = gen_hdr_rf(scene, rng, comp);

      SeparationProblem sep;
      sep.y = draw.y;
      sep.model = MeasurementModel(LinearOperator::identity(m), scene.noise_std);
      sep.model.companded = true;
      sep.model.companding = comp;
      sep.prior_x = std::make_shared<SparsityPrior>(m, cfg.get_real("prior.lambda0"));
      sep.prior_n = std::make_shared<GaussianPrior>(Vec::Zero(m).eval(), Vec::Constant(m, 0.05).eval());
      GuidanceConfig guid;
      guid.zeta = cfg.get_real("sampler.zeta");
      TrajectoryConfig traj;
      traj.num_steps = static_cast<int>(cfg.get_int("sampler.steps"));
      traj.seed = splitmix64(base ^ (7001 + s));
      const PosteriorEnsemble ens = joint_separate(
          sep, guid, traj, static_cast<int>(cfg.get_int("sampler.num_chains")), schedule);

      const Vec x_hat = ens.mean();
      const Vec resid = sep.y - sep.model.companding.compand(
                                    (sep.model.companding.expand(x_hat.cwiseMin(1.0).cwiseMax(
                                         -1.0)) +
                                     sep.model.companding.expand(
                                         ens.noise_mean().cwiseMin(1.0).cwiseMax(-1.0)))
                                        .cwiseMin(1.0)
                                        .cwiseMax(-1.0));
      // gCNR between echo-bearing and echo-free regions of the estimate
      std::vector<double> sig_region, bg_region, sig_in, bg_in;
      const Vec x_clean_comp = comp.compand(draw.x_rf);
      for (int i = 0; i < m; ++i) {
        if (std::abs(x_clean_comp[i]) > 0.15) {
          sig_region.push_back(std::abs(x_hat[i]));
          sig_in.push_back(std::abs(draw.y[i]));
        } else {
          bg_region.push_back(std::abs(x_hat[i]));
          bg_in.push_back(std::abs(draw.y[i]));
        }
      }
      MetricReportRow:
      MetricTable dummy;
      (void)dummy;
      const double g_dehazed =
          (sig_region.size() > 2 && bg_region.size() > 2) ? gcnr(sig_region, bg_region, 64) : 0.0;
      const double g_input =
          (sig_in.size() > 2 && bg_in.size() > 2) ? gcnr(sig_in, bg_in, 64) : 0.0;
      table.rows.push_back({static_cast<double>(traj.seed),
                            resid.norm() / std::max(sep.y.norm(), 1e-12),
                            nmse(x_hat, x_clean_comp), g_dehazed, g_input});
    }
    const std::string runs_csv = (fs::path(args.out_dir) / "separate_runs.csv").string();
    write_csv(runs_csv, table);
    write_csv((fs::path(args.out_dir) / "separate_aggregate.csv").string(),
              aggregate_table(table));
    append_manifest_line(manifest, json{{"record", "separate"},
                                        {"kind", kind},
                                        {"config", config_json(cfg)},
                                        {"runs_csv", runs_csv},
                                        {"wall_time_s", now_seconds() - t0}}
                                       .dump());
    std::cout << "ultrasound separation on " << seeds << " seeds written to " << runs_csv << "\n";
    return 0;
  }
  throw ConfigError("separate: unknown scenario.kind '" + kind + "'", "scenario.kind");
}

// ---------------------------------------------------------------------------

const ConfigSchema& active_schema() {
  static const ConfigSchema schema{
      {"active.rule", {FieldType::kString, "entropy"}},
      {"active.budget", {FieldType::kInt, "8"}},
      {"active.entropy_sigma_factor", {FieldType::kReal, "0.1"}},
      {"active.ads_checkpoint_head", {FieldType::kReal, "0.2"}},
      {"scenario.side", {FieldType::kInt, "32"}},
      {"scenario.num_components", {FieldType::kInt, "4"}},
      {"scenario.component_std", {FieldType::kReal, "0.12"}},
      {"scenario.prior_seed", {FieldType::kInt, "2"}},
      {"scenario.kspace_noise_std", {FieldType::kReal, "0.08"}},
      {"sampler.steps", {FieldType::kInt, "64"}},
      {"sampler.num_chains", {FieldType::kInt, "16"}},
      {"sampler.zeta", {FieldType::kReal, "2.0"}},
      {"seeds", {FieldType::kInt, "50"}},
      {"seed", {FieldType::kInt, "101"}},
  };
  return schema;
}

PhantomActiveConfig phantom_config_from(const Config& cfg, const CliArgs& args) {
  PhantomActiveConfig pc;
  pc.side = static_cast<int>(cfg.get_int("scenario.side"));
  pc.num_components = static_cast<int>(cfg.get_int("scenario.num_components"));
  pc.component_std = cfg.get_real("scenario.component_std");
  pc.prior_seed = cfg.get_int("scenario.prior_seed");
  pc.kspace_noise_std = cfg.get_real("scenario.kspace_noise_std");
  pc.budget = static_cast<int>(cfg.get_int("active.budget"));
  pc.steps = static_cast<int>(cfg.get_int("sampler.steps"));
  pc.num_chains = static_cast<int>(cfg.get_int("sampler.num_chains"));
  pc.zeta = cfg.get_real("sampler.zeta");
  pc.entropy_sigma_factor = cfg.get_real("active.entropy_sigma_factor");
  pc.ads_checkpoint_head = cfg.get_real("active.ads_checkpoint_head");
  pc.num_seeds = static_cast<int>(cfg.get_int("seeds"));
  pc.base_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");
  return pc;
}

int cmd_active(const Config& cfg, const CliArgs& args) {
  const double t0 = now_seconds();
  const PhantomActiveConfig pc = phantom_config_from(cfg, args);
  const ActiveRule rule =
      active_rule_from_string(!args.rule.empty() ? args.rule : cfg.get_string("active.rule"));

  MetricTable table;
  table.columns = {"seed", "mse_final", "nfe"};
  for (int t = 0; t <= pc.budget; ++t) table.columns.push_back("mse_step_" + std::to_string(t));
  for (int s = 0; s < pc.num_seeds; ++s) {
    const PhantomActiveRow row = run_phantom_active_single(pc, rule, s);
    std::vector<double> cells{static_cast<double>(s), row.mse_final,
                              static_cast<double>(row.nfe)};
    for (int t = 0; t <= pc.budget; ++t)
      cells.push_back(t < static_cast<int>(row.mse_per_step.size()) ? row.mse_per_step[t]
                                                                    : row.mse_final);
    table.rows.push_back(cells);
  }
  const std::string runs_csv =
      (fs::path(args.out_dir) / ("active_" + to_string(rule) + "_runs.csv")).string();
  write_csv(runs_csv, table);
  write_csv((fs::path(args.out_dir) / ("active_" + to_string(rule) + "_aggregate.csv")).string(),
            aggregate_table(table));
  append_manifest_line((fs::path(args.out_dir) / "active_manifest.jsonl").string(),
                       json{{"record", "active"},
                            {"rule", to_string(rule)},
                            {"config", config_json(cfg)},
                            {"runs_csv", runs_csv},
                            {"wall_time_s", now_seconds() - t0}}
                           .dump());
  std::cout << "active rule=" << to_string(rule) << " written to " << runs_csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

const ConfigSchema& sequential_schema() {
  static const ConfigSchema schema{
      {"scenario.dim", {FieldType::kInt, "64"}},
      {"scenario.frames", {FieldType::kInt, "10"}},
      {"scenario.drift_angle", {FieldType::kReal, "0.08"}},
      {"scenario.meas_rows", {FieldType::kInt, "32"}},
      {"scenario.noise_std", {FieldType::kReal, "0.35"}},
      {"scenario.abrupt_frame", {FieldType::kInt, "-1"}},
      {"sampler.steps", {FieldType::kInt, "200"}},
      {"sampler.num_chains", {FieldType::kInt, "8"}},
      {"sampler.tau_prime", {FieldType::kReal, "0.2"}},
      {"sampler.zeta", {FieldType::kReal, "0"}},
      {"seeds", {FieldType::kInt, "20"}},
      {"seed", {FieldType::kInt, "51"}},
  };
  return schema;
}

int cmd_sequential(const Config& cfg, const CliArgs& args) {
  const double t0 = now_seconds();
  SequentialExpConfig sc;
  sc.dim = static_cast<int>(cfg.get_int("scenario.dim"));
  sc.num_frames =
      args.frames > 0 ? args.frames : static_cast<int>(cfg.get_int("scenario.frames"));
  sc.drift_angle = cfg.get_real("scenario.drift_angle");
  sc.meas_rows = static_cast<int>(cfg.get_int("scenario.meas_rows"));
  sc.noise_std = cfg.get_real("scenario.noise_std");
  sc.abrupt_frame = static_cast<int>(cfg.get_int("scenario.abrupt_frame"));
  sc.steps = static_cast<int>(cfg.get_int("sampler.steps"));
  sc.num_chains = static_cast<int>(cfg.get_int("sampler.num_chains"));
  sc.tau_prime = cfg.get_real("sampler.tau_prime");
  sc.zeta = cfg.get_real("sampler.zeta");
  sc.num_seeds = static_cast<int>(cfg.get_int("seeds"));
  sc.base_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.get_int("seed");

  MetricTable table;
  table.columns = {"seed",           "nmse_warm",           "nmse_full",
                   "warm_steps_per_frame", "full_steps_per_frame", "fallback_count"};
  for (int s = 0; s < sc.num_seeds; ++s) {
    const SequentialExpRow row = run_sequential_single(sc, s);
    table.rows.push_back({static_cast<double>(s), row.nmse_warm, row.nmse_full,
                          static_cast<double>(row.warm_steps_per_frame),
                          static_cast<double>(row.full_steps_per_frame),
                          static_cast<double>(row.fallback_count)});
  }
  const std::string runs_csv = (fs::path(args.out_dir) / "sequential_runs.csv").string();
  write_csv(runs_csv, table);
  write_csv((fs::path(args.out_dir) / "sequential_aggregate.csv").string(),
            aggregate_table(table));
  append_manifest_line((fs::path(args.out_dir) / "sequential_manifest.jsonl").string(),
                       json{{"record", "sequential"},
                            {"config", config_json(cfg)},
                            {"runs_csv", runs_csv},
                            {"wall_time_s", now_seconds() - t0}}
                           .dump());
  std::cout << "sequential study written to " << runs_csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

const ConfigSchema& eval_schema() {
  static const ConfigSchema schema{
      {"eval.input", {FieldType::kString, "out/separate_runs.csv"}},
      {"eval.output", {FieldType::kString, ""}},
  };
  return schema;
}

int cmd_eval(const Config& cfg, const CliArgs& args) {
  const std::string input = cfg.get_string("eval.input");
  std::string output = cfg.get_string("eval.output");
  if (output.empty()) output = (fs::path(args.out_dir) / "eval_aggregate.csv").string();
  const MetricTable table = read_csv(input);
  write_csv(output, aggregate_table(table));
  std::cout << "aggregate of " << input << " written to " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score-based diffusion posterior sampling for sensor inverse problems"};
  app.require_subcommand(1);

  CliArgs args;
  app.add_option("--config", args.config_path, "configuration file (key = value lines)");
  app.add_option("--seed", args.seed, "override the base seed");
  app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--rule", args.rule, "active-sensing rule (random|gas|entropy|adasense|ads)");
  app.add_option("--frames", args.frames, "frame count for the sequential pipeline");

  auto* c_generate = app.add_subcommand("generate", "write synthetic datasets");
  auto* c_train = app.add_subcommand("train", "train a score network");
  auto* c_separate = app.add_subcommand("separate", "joint signal/noise separation");
  auto* c_active = app.add_subcommand("active", "active compressed sensing on phantoms");
  auto* c_sequential = app.add_subcommand("sequential", "warm-started frame pipeline");
  auto* c_eval = app.add_subcommand("eval", "recompute metric aggregates from a runs CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(args.out_dir);
    auto load = [&](const ConfigSchema& schema) {
      return args.config_path.empty() ? Config::defaults(schema)
                                      : Config::from_file(args.config_path, schema);
    };
    if (c_generate->parsed()) return cmd_generate(load(generate_schema()), args);
    if (c_train->parsed()) return cmd_train(load(train_schema()), args);
    if (c_separate->parsed()) return cmd_separate(load(separate_schema()), args);
    if (c_active->parsed()) return cmd_active(load(active_schema()), args);
    if (c_sequential->parsed()) return cmd_sequential(load(sequential_schema()), args);
    if (c_eval->parsed()) return cmd_eval(load(eval_schema()), args);
  } catch (const ConfigError& e) {
    emit_error_record("config", e.field(), e.what());
    return 2;
  } catch (const SamplerDivergence& e) {
    const std::string diag = (fs::path(args.out_dir) / "divergence_diagnostics.txt").string();
    std::ofstream f(diag);
    f << e.what() << "\n";
    emit_error_record("divergence", "", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error_record("runtime", "", e.what());
    return 1;
  }
  return 0;
}
