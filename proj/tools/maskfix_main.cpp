// maskfix: train / sample / eval / orders over self-correcting multi-token
// masked generation. Files are the data interface; stdout stays quiet,
// stderr carries progress and diagnostics.

#include <array>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maskfix/checkpoint.hpp"
#include "maskfix/config.hpp"
#include "maskfix/dataset.hpp"
#include "maskfix/errors.hpp"
#include "maskfix/evalbench.hpp"
#include "maskfix/micro.hpp"
#include "maskfix/pixel_codec.hpp"
#include "maskfix/sampling.hpp"
#include "maskfix/sequencing.hpp"
#include "maskfix/synthetic.hpp"
#include "maskfix/training.hpp"

namespace {

using namespace maskfix;

namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitOutput = 5;

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buffer;
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw OutputError("cannot create output directory " + out_dir);
  }
}

// Every subcommand writes this before doing real work, so a run can be
// reproduced from its output directory alone.
void write_manifest(
    const std::string& out_dir, const std::string& command,
    std::uint64_t seed, const std::string& checkpoint_path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  ensure_out_dir(out_dir);
  std::string path = (fs::path(out_dir) / "manifest.txt").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path);
  out << "command = " << command << "\n";
  out << "start_time = " << timestamp_utc() << "\n";
  out << "seed = " << seed << "\n";
  out << "out_dir = " << out_dir << "\n";
  out << "checkpoint = " << checkpoint_path << "\n";
  for (const auto& [key, value] : entries) {
    out << key << " = " << value << "\n";
  }
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

ModelConfig model_config_for(const TrainRunConfig& config,
                             const Dataset& data) {
  ModelConfig model{config.layers,
                    config.hidden_dim,
                    config.heads,
                    data.vocab,
                    data.height * data.width,
                    data.num_classes,
                    config.train.dropout};
  model.validate();
  return model;
}

Predictor wrap_model(const Parameters& params) {
  Predictor predictor;
  predictor.null_label = params.config.null_label();
  predictor.logits = [&params](const TokenGrid& grid, int label) -> Logits {
    return forward(params, grid, label).cast<double>();
  };
  return predictor;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config_path;
  std::string resume_path;
  std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& args) {
  TrainRunConfig config = parse_train_config_file(args.config_path);
  for (const std::string& entry : args.overrides) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + entry + "' is not key=value", entry);
    }
    apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
  }
  config.validate();

  Dataset data = load_dataset(config);
  long long cells = static_cast<long long>(data.height) * data.width;
  if (config.train.steps > cells) {
    throw ConfigError("steps (" + std::to_string(config.train.steps) +
                          ") exceeds grid cells (" + std::to_string(cells) +
                          ")",
                      "steps");
  }
  ModelConfig model_config = model_config_for(config, data);

  write_manifest(config.out_dir, "train", config.train.seed, args.resume_path,
                 dump_config(config));

  Parameters params;
  AdamState state;
  long long start_step = 0;
  if (args.resume_path.empty()) {
    params = init_parameters<float>(model_config, config.train.seed);
    state = make_adam_state(params);
  } else {
    Checkpoint ckpt = load_checkpoint(args.resume_path);
    if (!(ckpt.config == model_config)) {
      throw CheckpointError(
          "checkpoint configuration does not match this run's model");
    }
    if (!ckpt.opt.has_value()) {
      throw CheckpointError(
          "checkpoint has no optimizer state; it cannot resume training");
    }
    if (ckpt.seed != config.train.seed) {
      throw CheckpointError("checkpoint seed " + std::to_string(ckpt.seed) +
                            " does not match config seed " +
                            std::to_string(config.train.seed));
    }
    if (ckpt.step >= config.train.total_steps) {
      throw CheckpointError("checkpoint is already at step " +
                            std::to_string(ckpt.step));
    }
    params = std::move(ckpt.params);
    state = std::move(*ckpt.opt);
    start_step = ckpt.step;
  }

  std::string metrics_path =
      (fs::path(config.out_dir) / "metrics.csv").string();
  bool fresh_log = start_step == 0 || !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path,
                        fresh_log ? std::ios::trunc : std::ios::app);
  if (!metrics) throw OutputError("cannot write " + metrics_path);
  if (fresh_log) metrics << "step,loss_next,loss_context,loss,grad_norm,lr\n";
  metrics << std::setprecision(10);

  const auto& examples = data.examples;
  for (long long step = start_step; step < config.train.total_steps; ++step) {
    Rng batch_rng = derive_rng(config.train.seed, stream::kBatch,
                               static_cast<std::uint64_t>(step));
    std::vector<std::pair<TokenGrid, int>> batch;
    batch.reserve(static_cast<std::size_t>(config.train.batch_size));
    for (int b = 0; b < config.train.batch_size; ++b) {
      std::size_t pick = static_cast<std::size_t>(
          batch_rng.below(static_cast<std::uint64_t>(examples.size())));
      batch.push_back(examples[pick]);
    }

    TrainMetrics m = training_step(params, state, batch, config.train, step);
    if ((step + 1) % config.log_every == 0) {
      metrics << step << "," << m.loss_next << "," << m.loss_context << ","
              << m.loss << "," << m.grad_norm << "," << m.lr << "\n";
    }
    if (config.checkpoint_every > 0 &&
        (step + 1) % config.checkpoint_every == 0 &&
        step + 1 < config.train.total_steps) {
      std::string path =
          (fs::path(config.out_dir) /
           ("ckpt_" + std::to_string(step + 1) + ".bin")).string();
      save_checkpoint(path, params, step + 1, config.train.seed, &state);
    }
    if ((step + 1) % 100 == 0 || step + 1 == config.train.total_steps) {
      std::fprintf(stderr, "step %lld/%lld loss %.4f\n", step + 1,
                   config.train.total_steps, m.loss);
    }
  }
  metrics.flush();
  if (!metrics) throw OutputError("failed while writing " + metrics_path);

  std::string final_path =
      (fs::path(config.out_dir) / "ckpt_final.bin").string();
  save_checkpoint(final_path, params, config.train.total_steps,
                  config.train.seed, &state);
  std::fprintf(stderr, "wrote %s\n", final_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string checkpoint_path;
  std::string out_dir = "runs/sample";
  int height = 0;
  int width = 0;
  int class_id = 0;
  int count = 1;
  int bins = 0;  // 0 = no PPM output
  SampleConfig config;
  std::string order_name = "halton";
  std::string scheduler_name = "arccos";
  std::string correction = "off";
};

void write_grid_text(const TokenGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (x > 0) out << " ";
      out << grid.cell(flat_index(y, x, grid.width()));
    }
    out << "\n";
  }
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

void write_trace_csv(const SampleTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path);
  out << "step,position,old,new\n";
  for (const StepTrace& step : trace.steps) {
    for (const Correction& c : step.corrections) {
      out << step.step << "," << c.position << "," << c.old_value << ","
          << c.new_value << "\n";
    }
  }
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

int cmd_sample(const SampleArgs& args_in) {
  SampleArgs args = args_in;
  try {
    args.config.order = order_kind_from_string(args.order_name);
    args.config.scheduler = schedule_kind_from_string(args.scheduler_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), "order");
  }
  if (args.correction == "on") {
    args.config.correction.enabled = true;
  } else if (args.correction == "off") {
    args.config.correction.enabled = false;
  } else {
    throw ConfigError("correction must be 'on' or 'off'", "correction");
  }

  Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const ModelConfig& model_config = ckpt.config;

  int height = args.height;
  int width = args.width;
  if (height == 0 && width == 0) {
    // Infer a square grid when possible.
    int side = 1;
    while (side * side < model_config.positions) ++side;
    if (side * side != model_config.positions) {
      throw CheckpointError(
          "grid is not square; pass --height and --width explicitly");
    }
    height = width = side;
  }
  if (height < 1 || width < 1 || height * width != model_config.positions) {
    throw CheckpointError(
        "requested grid " + std::to_string(height) + "x" +
        std::to_string(width) + " does not match the checkpoint's " +
        std::to_string(model_config.positions) + " positions");
  }
  if (args.class_id < 0 || args.class_id >= model_config.num_classes) {
    throw CheckpointError("class id outside the checkpoint's classes");
  }
  if (args.bins > 0 &&
      QuantizerConfig{args.bins}.vocab() != model_config.vocab) {
    throw CheckpointError(
        "bins^3 does not match the checkpoint's vocabulary");
  }
  if (args.count < 1) throw ConfigError("count must be >= 1", "count");
  try {
    args.config.validate();
  } catch (const std::invalid_argument& e) {
    std::string message = e.what();
    throw ConfigError(message, message.substr(0, message.find(' ')));
  }
  if (args.config.steps > height * width) {
    throw ConfigError("steps (" + std::to_string(args.config.steps) +
                          ") exceeds grid cells (" +
                          std::to_string(height * width) + ")",
                      "steps");
  }

  std::vector<std::pair<std::string, std::string>> manifest_entries = {
      {"height", std::to_string(height)},
      {"width", std::to_string(width)},
      {"class_id", std::to_string(args.class_id)},
      {"count", std::to_string(args.count)},
      {"bins", std::to_string(args.bins)},
      {"steps", std::to_string(args.config.steps)},
      {"order", to_string(args.config.order)},
      {"scheduler", to_string(args.config.scheduler)},
      {"temperature", std::to_string(args.config.temperature)},
      {"cfg_weight", std::to_string(args.config.cfg_weight)},
      {"correction", args.config.correction.enabled ? "on" : "off"},
      {"correction_start_step",
       std::to_string(args.config.correction.start_step)},
      {"correction_margin", std::to_string(args.config.correction.margin)},
      {"correction_budget",
       std::to_string(args.config.correction.max_per_step)},
      {"random_roll", args.config.random_roll ? "true" : "false"},
      {"roll_offset", std::to_string(args.config.roll_offset)},
  };
  write_manifest(args.out_dir, "sample", args.config.seed,
                 args.checkpoint_path, manifest_entries);

  Predictor predictor = wrap_model(ckpt.params);
  Vocabulary vocab(model_config.vocab);

  for (int i = 0; i < args.count; ++i) {
    SampleConfig config = args.config;
    config.seed = args.config.seed + static_cast<std::uint64_t>(i);

    auto [grid, trace] =
        sample(predictor, vocab, height, width, args.class_id, config);

    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "%04d", i);
    fs::path base = fs::path(args.out_dir);
    write_grid_text(grid, (base / ("sample_" + std::string(suffix) + ".txt"))
                              .string());
    write_trace_csv(trace, (base / ("trace_" + std::string(suffix) + ".csv"))
                               .string());
    if (args.bins > 0) {
      write_ppm(decode_grid(grid, args.bins),
                (base / ("sample_" + std::string(suffix) + ".ppm")).string());
    }
    std::fprintf(stderr, "sample %d: corrected %d tokens\n", i,
                 trace.corrected_total());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string experiment = "xor";
  std::string out_dir = "runs/eval";
  long long draws = 10000;
  std::uint64_t seed = 0;
};

void write_eval_rows(
    const std::string& path,
    const std::vector<std::array<std::string, 6>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputError("cannot write " + path);
  out << "metric,category,value,count,draws,seed\n";
  for (const auto& row : rows) {
    out << row[0] << "," << row[1] << "," << row[2] << "," << row[3] << ","
        << row[4] << "," << row[5] << "\n";
  }
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

std::string fmt(double value) {
  std::ostringstream out;
  out << std::setprecision(10) << value;
  return out.str();
}

// The coupled-pair suite: parallel reveal of a two-token grid whose cells
// must agree, with and without the correction pass.
int eval_xor(const EvalArgs& args) {
  write_manifest(args.out_dir, "eval", args.seed, "",
                 {{"experiment", "xor"},
                  {"draws", std::to_string(args.draws)}});

  MicroDistribution micro = xor_pair_micro();
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(micro.vocab());

  SampleConfig base;
  base.steps = 1;
  base.order = OrderKind::raster;
  base.scheduler = ScheduleKind::constant;
  base.seed = args.seed;

  SampleConfig corrected = base;
  corrected.correction.enabled = true;
  corrected.correction.start_step = 0;
  corrected.correction.margin = 0.0;
  corrected.correction.max_per_step = 1;

  auto agree = [](const TokenGrid& g) { return g.cell(0) == g.cell(1); };

  std::vector<TokenGrid> plain_samples, fixed_samples;
  long long corrected_tokens = 0;
  Rng seeder = derive_rng(args.seed, stream::kDraw);
  for (long long i = 0; i < args.draws; ++i) {
    std::uint64_t seed = seeder.raw();
    SampleConfig a = base;
    a.seed = seed;
    SampleConfig b = corrected;
    b.seed = seed;
    auto [g1, t1] = sample(oracle, vocab, 1, 2, 0, a);
    auto [g2, t2] = sample(oracle, vocab, 1, 2, 0, b);
    (void)t1;
    plain_samples.push_back(std::move(g1));
    fixed_samples.push_back(std::move(g2));
    corrected_tokens += t2.corrected_total();
  }
  double rate_plain = violation_rate(plain_samples, agree);
  double rate_fixed = violation_rate(fixed_samples, agree);

  DistributionReport tv_plain = empirical_vs_exact(oracle, micro, base,
                                                   args.draws);
  DistributionReport tv_fixed = empirical_vs_exact(oracle, micro, corrected,
                                                   args.draws);

  std::string draws = std::to_string(args.draws);
  std::string seed = std::to_string(args.seed);
  write_eval_rows(
      (fs::path(args.out_dir) / "report.csv").string(),
      {{"violation_rate", "no_correction", fmt(rate_plain), draws, draws,
        seed},
       {"violation_rate", "corrected", fmt(rate_fixed), draws, draws, seed},
       {"tv", "no_correction", fmt(tv_plain.tv), draws, draws, seed},
       {"tv", "corrected", fmt(tv_fixed.tv), draws, draws, seed},
       {"corrected_tokens", "corrected",
        fmt(corrected_tokens / static_cast<double>(args.draws)), draws, draws,
        seed}});
  std::fprintf(stderr,
               "violation rate %.4f without correction, %.4f with\n",
               rate_plain, rate_fixed);
  return 0;
}

// Sequential one-token-per-step sampling against the exact joint.
int eval_sequential(const EvalArgs& args) {
  write_manifest(args.out_dir, "eval", args.seed, "",
                 {{"experiment", "sequential"},
                  {"draws", std::to_string(args.draws)}});

  MicroDistribution micro = random_micro(2, 2, 2, 2024);
  Predictor oracle = make_oracle_predictor(micro);

  SampleConfig config;
  config.steps = micro.size();
  config.order = OrderKind::raster;
  config.scheduler = ScheduleKind::constant;
  config.seed = args.seed;

  DistributionReport report = empirical_vs_exact(oracle, micro, config,
                                                 args.draws);
  std::string draws = std::to_string(args.draws);
  std::string seed = std::to_string(args.seed);
  std::vector<std::array<std::string, 6>> rows = {
      {"tv", "sequential", fmt(report.tv),
       std::to_string(report.exact.size()), draws, seed}};
  for (std::size_t g = 0; g < report.exact.size(); ++g) {
    rows.push_back({"probability", "outcome_" + std::to_string(g),
                    fmt(report.empirical[g]) + ";exact=" + fmt(report.exact[g]),
                    "1", draws, seed});
  }
  write_eval_rows((fs::path(args.out_dir) / "report.csv").string(), rows);
  std::fprintf(stderr, "sequential TV %.5f over %lld draws\n", report.tv,
               args.draws);
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  if (args.draws < 1) throw ConfigError("draws must be >= 1", "draws");
  if (args.experiment == "xor") return eval_xor(args);
  if (args.experiment == "sequential") return eval_sequential(args);
  throw ConfigError("unknown experiment '" + args.experiment + "'",
                    "experiment");
}

// ---------------------------------------------------------------------------
// orders

struct OrdersArgs {
  int size = 16;
  std::string kind = "all";
  std::string out_dir = "runs/orders";
  std::uint64_t seed = 0;
};

int cmd_orders(const OrdersArgs& args) {
  if (args.size < 1) throw ConfigError("size must be >= 1", "size");
  std::vector<OrderKind> kinds;
  if (args.kind == "all") {
    kinds = {OrderKind::halton, OrderKind::raster, OrderKind::spiral,
             OrderKind::random};
  } else {
    try {
      kinds = {order_kind_from_string(args.kind)};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), "kind");
    }
  }
  write_manifest(args.out_dir, "orders", args.seed, "",
                 {{"size", std::to_string(args.size)}, {"kind", args.kind}});

  const int n = args.size * args.size;
  for (OrderKind kind : kinds) {
    OrderPlan plan = make_order(kind, args.size, args.size, args.seed);
    // Gray level = visit rank, so early cells are dark and late ones bright.
    std::vector<int> ranks(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      ranks[static_cast<std::size_t>(plan.order[i])] = i;
    }
    int maxval = std::min(n - 1, 65535);
    for (int& r : ranks) r = std::min(r, maxval);
    std::string path =
        (fs::path(args.out_dir) / ("order_" + to_string(kind) + ".pgm"))
            .string();
    write_pgm(ranks, args.size, args.size, maxval, path);
    std::fprintf(stderr, "wrote %s\n", path.c_str());
  }
  return 0;
}

template <typename Fn>
int run_mapped(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "maskfix: config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DatasetError& e) {
    std::fprintf(stderr, "maskfix: dataset error: %s\n", e.what());
    return kExitDataset;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "maskfix: checkpoint error: %s\n", e.what());
    return kExitCheckpoint;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "maskfix: checkpoint error: %s\n", e.what());
    return kExitCheckpoint;
  } catch (const OutputError& e) {
    std::fprintf(stderr, "maskfix: output error: %s\n", e.what());
    return kExitOutput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "maskfix: error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-correcting multi-token masked generation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", train_args.config_path, "config file path")
      ->required();
  train->add_option("--resume", train_args.resume_path,
                    "checkpoint to resume from");
  train->add_option("--set", train_args.overrides,
                    "key=value config override (repeatable)");

  SampleArgs sample_args;
  CLI::App* smp = app.add_subcommand("sample", "generate from a checkpoint");
  smp->add_option("--checkpoint", sample_args.checkpoint_path,
                  "trained checkpoint")
      ->required();
  smp->add_option("--out", sample_args.out_dir, "output directory");
  smp->add_option("--height", sample_args.height, "grid height");
  smp->add_option("--width", sample_args.width, "grid width");
  smp->add_option("--class-id", sample_args.class_id, "conditioning class");
  smp->add_option("--count", sample_args.count, "number of samples");
  smp->add_option("--bins", sample_args.bins,
                  "quantizer bins; enables PPM output");
  smp->add_option("--steps", sample_args.config.steps, "reveal steps");
  smp->add_option("--order", sample_args.order_name,
                  "halton|raster|spiral|random");
  smp->add_option("--scheduler", sample_args.scheduler_name,
                  "arccos|cosine|square|linear|root|constant");
  smp->add_option("--temperature", sample_args.config.temperature,
                  "sampling temperature");
  smp->add_option("--cfg", sample_args.config.cfg_weight, "guidance weight");
  smp->add_option("--correction", sample_args.correction,
                  "correction pass: on|off");
  smp->add_option("--start-step", sample_args.config.correction.start_step,
                  "first step the correction pass runs at");
  smp->add_option("--margin", sample_args.config.correction.margin,
                  "correction probability-gap threshold");
  smp->add_option("--budget", sample_args.config.correction.max_per_step,
                  "max corrections per step");
  smp->add_flag("--random-roll", sample_args.config.random_roll,
                "roll the order by a seeded random offset");
  smp->add_option("--roll", sample_args.config.roll_offset,
                  "fixed order roll offset");
  smp->add_option("--seed", sample_args.config.seed, "sampling seed");

  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "run a verification experiment");
  ev->add_option("--experiment", eval_args.experiment, "xor|sequential");
  ev->add_option("--out", eval_args.out_dir, "output directory");
  ev->add_option("--draws", eval_args.draws, "number of sampler draws");
  ev->add_option("--seed", eval_args.seed, "experiment seed");

  OrdersArgs orders_args;
  CLI::App* ord = app.add_subcommand("orders",
                                     "render visit orders as PGM images");
  ord->add_option("--size", orders_args.size, "grid side length");
  ord->add_option("--kind", orders_args.kind,
                  "halton|raster|spiral|random|all");
  ord->add_option("--out", orders_args.out_dir, "output directory");
  ord->add_option("--seed", orders_args.seed, "seed for the random order");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return run_mapped([&] { return cmd_train(train_args); });
  if (smp->parsed()) return run_mapped([&] { return cmd_sample(sample_args); });
  if (ev->parsed()) return run_mapped([&] { return cmd_eval(eval_args); });
  if (ord->parsed()) return run_mapped([&] { return cmd_orders(orders_args); });
  return 1;
}
