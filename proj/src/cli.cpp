#include "lews/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "lews/augment.hpp"
#include "lews/evalkit.hpp"
#include "lews/geogrid.hpp"
#include "lews/motion.hpp"
#include "lews/nowcast.hpp"
#include "lews/pipeline.hpp"
#include "lews/run_config.hpp"
#include "lews/synth.hpp"
#include "lews/training.hpp"

namespace lews {

namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigFile = "config.txt";

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
};

struct Context {
  RunConfig cfg;
  fs::path out;
  std::ostream& log;

  fs::path data() const { return cfg.data_dir; }
};

RunConfig resolve(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  cfg.propagate();
  cfg.validate();
  return cfg;
}

void prepare_output(const Context& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw IoError("cannot create output directory '" + ctx.out.string() + "': " + ec.message());
  ctx.cfg.save(ctx.out / kConfigFile);
}

std::vector<Sample> load_samples(const Context& ctx, RainSetting setting, bool train_part) {
  const Dataset ds = read_dataset(ctx.data());
  const auto samples = build_dataset_samples(ds, setting, ctx.cfg.flow, ctx.cfg.sample);
  const auto idx = chrono_split_indices(samples, ctx.cfg.sample.train_fraction);
  return select(samples, train_part ? idx.train : idx.test);
}

void report_training(const Context& ctx, const TrainResult& r, const std::string& what) {
  ctx.log << what << ": probe loss " << format_real(r.history.front().probe_loss) << " -> "
          << format_real(r.history.back().probe_loss) << " over " << (r.history.size() - 1) << " epochs\n";
}

void run_synth(const Context& ctx) {
  prepare_output(ctx);
  const Dataset ds = synth_generate(ctx.cfg.synth);
  write_dataset(ds, ctx.out);
  ctx.log << "synth: " << ds.regions.size() << " regions, " << ds.config.hours << " hours, " << ds.events.events.size()
          << " events -> " << ctx.out.string() << "\n";
}

void write_motion(const MotionField& motion, const fs::path& path) {
  std::ostringstream os;
  os << "y,x,u,v\n";
  for (Eigen::Index y = 0; y < motion.u.rows(); ++y) {
    for (Eigen::Index x = 0; x < motion.u.cols(); ++x) {
      os << y << ',' << x << ',' << format_real(motion.u(y, x)) << ',' << format_real(motion.v(y, x)) << '\n';
    }
  }
  write_text_file(path, os.str());
}

void run_forecast(const Context& ctx, const std::string& input) {
  const RainfallSequence seq = read_rainfall_stack(input);
  if (seq.size() < 3) throw ValidationError("forecast: the stack needs at least three frames");
  const std::size_t n = seq.size();
  const MotionField motion = estimate_flow(seq[n - 3], seq[n - 2], seq[n - 1], ctx.cfg.flow);
  RainfallSequence out;
  out.fields = forecast(seq[n - 1], motion, ctx.cfg.forecast_horizon);
  prepare_output(ctx);
  write_rainfall_stack(out, ctx.out / "forecast.rain");
  write_motion(motion, ctx.out / "motion.csv");
  ctx.log << "forecast: " << out.size() << " frames -> " << (ctx.out / "forecast.rain").string() << "\n";
}

void run_augment(const Context& ctx, const std::string& input, int view) {
  const RainfallSequence seq = read_rainfall_stack(input);
  Rng rng = derive_stream(ctx.cfg.seed, 0, static_cast<std::uint64_t>(view), 0);
  const DisplacementPath path = sample_displacement_path(static_cast<int>(seq.size()), ctx.cfg.augment, rng);
  const RainfallSequence shifted = apply_displacement(seq, path);
  prepare_output(ctx);
  write_rainfall_stack(shifted, ctx.out / "augmented.rain");
  write_text_file(ctx.out / "displacement.csv", format_displacement_path(path));
  ctx.log << "augment: " << seq.size() << " frames -> " << (ctx.out / "augmented.rain").string() << "\n";
}

void run_pretrain(const Context& ctx) {
  const auto train = load_samples(ctx, RainSetting::ObservedRainfall, true);
  prepare_output(ctx);
  const TrainResult r = pretrain_rmcl(train, ctx.cfg.train);
  write_checkpoint(r.params, ctx.out / "encoder.ckpt");
  write_loss_csv(r.history, ctx.out / "pretrain_loss.csv");
  report_training(ctx, r, "pretrain");
}

void run_finetune(const Context& ctx, const std::string& encoder_path) {
  const ModelParams<float> start = read_checkpoint(encoder_path);
  const auto train = load_samples(ctx, RainSetting::ObservedRainfall, true);
  prepare_output(ctx);
  const TrainResult r = finetune(train, start, ctx.cfg.train, ctx.cfg.train.finetune_augment);
  write_checkpoint(r.params, ctx.out / "model.ckpt");
  write_loss_csv(r.history, ctx.out / "finetune_loss.csv");
  report_training(ctx, r, "finetune");
}

RainSetting setting_for(TrainMode mode) {
  return mode == TrainMode::EndToEndForecast ? RainSetting::ForecastedRainfall : RainSetting::ObservedRainfall;
}

void run_baseline(const Context& ctx, const std::string& mode_name) {
  const TrainMode mode = parse_train_mode(mode_name);
  if (mode == TrainMode::RMCL) throw ValidationError("train-baseline: use pretrain and finetune for rmcl");
  const auto train = load_samples(ctx, setting_for(mode), true);
  prepare_output(ctx);
  const TrainResult r = train_baseline(train, mode, ctx.cfg.train);
  write_checkpoint(r.params, ctx.out / "model.ckpt");
  write_loss_csv(r.history, ctx.out / "loss.csv");
  report_training(ctx, r, mode_name);
}

std::string pr_curve_csv(const PRCurve& curve) {
  std::ostringstream os;
  os << "threshold,precision,recall,tp,fp,fn,tn\n";
  for (const auto& p : curve.points) {
    os << format_real(p.threshold) << ',' << format_real(p.precision()) << ',' << format_real(p.recall()) << ','
       << p.tp << ',' << p.fp << ',' << p.fn << ',' << p.tn << '\n';
  }
  return os.str();
}

void run_evaluate(const Context& ctx, const std::string& model_path, const std::string& setting_name) {
  const ModelParams<float> params = read_checkpoint(model_path);
  const RainSetting setting = parse_rain_setting(setting_name);
  const auto test = load_samples(ctx, setting, false);
  const auto scores = score_samples(params, test);
  std::vector<int> labels;
  for (const auto& s : test) labels.push_back(s.label);
  const PRCurve curve = pr_curve(scores, labels);
  const PRPoint& op = operating_point(curve, ctx.cfg.target_recall);
  prepare_output(ctx);
  write_text_file(ctx.out / "pr_curve.csv", pr_curve_csv(curve));
  Manifest metrics;
  metrics.set("setting", to_string(setting));
  metrics.set("samples", static_cast<std::int64_t>(curve.total));
  metrics.set("positives", static_cast<std::int64_t>(curve.positives));
  metrics.set("target_recall", ctx.cfg.target_recall);
  metrics.set("precision", op.precision());
  metrics.set("recall", op.recall());
  metrics.set("threshold", op.threshold);
  metrics.write(ctx.out / "metrics.txt");
  ctx.log << "evaluate: precision " << format_real(op.precision()) << " at recall " << format_real(op.recall())
          << " on " << curve.total << " " << to_string(setting) << " test samples\n";
}

void run_ablate(const Context& ctx) {
  const Dataset ds = read_dataset(ctx.data());
  const auto observed = build_dataset_samples(ds, RainSetting::ObservedRainfall, ctx.cfg.flow, ctx.cfg.sample);
  const auto forecasted = build_dataset_samples(ds, RainSetting::ForecastedRainfall, ctx.cfg.flow, ctx.cfg.sample);
  const auto idx = chrono_split_indices(observed, ctx.cfg.sample.train_fraction);
  const auto obs_train = select(observed, idx.train), obs_test = select(observed, idx.test);
  const auto fc_train = select(forecasted, idx.train), fc_test = select(forecasted, idx.test);
  prepare_output(ctx);

  std::map<TrainMode, ModelParams<float>> models;
  for (const TrainMode mode : {TrainMode::RMCL, TrainMode::EndToEnd, TrainMode::EndToEndForecast}) {
    const TrainResult r = mode == TrainMode::RMCL ? train_rmcl(obs_train, ctx.cfg.train)
                                                  : train_baseline(mode == TrainMode::EndToEnd ? obs_train : fc_train,
                                                                   mode, ctx.cfg.train);
    write_checkpoint(r.params, ctx.out / (to_string(mode) + ".ckpt"));
    write_loss_csv(r.history, ctx.out / (to_string(mode) + "_loss.csv"));
    report_training(ctx, r, to_string(mode));
    models[mode] = r.params;
  }
  const AblationReport report = robustness_ablation(models, obs_test, fc_test, ctx.cfg.target_recall);
  write_text_file(ctx.out / "ablation.csv", report.to_csv());
  write_text_file(ctx.out / "ablation.txt", report.to_text());
  ctx.log << report.to_text();
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Landslide early-warning toolkit", "lews"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration (section.key = value)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--data", g.data_dir, "Dataset directory");

  std::string input, model_path, encoder_path, mode_name, setting_name = "observed";
  int view = 1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* fc = app.add_subcommand("forecast", "Estimate motion from the last three frames of a stack and advect");
  fc->add_option("--input", input, "Rainfall stack manifest")->required();
  auto* aug = app.add_subcommand("augment", "Write a displaced view of a rainfall stack");
  aug->add_option("--input", input, "Rainfall stack manifest")->required();
  aug->add_option("--view", view, "View index selecting the random stream");
  auto* pre = app.add_subcommand("pretrain", "Contrastive pretraining on the training split");
  auto* fine = app.add_subcommand("finetune", "Focal-loss fine-tuning from an encoder checkpoint");
  fine->add_option("--encoder", encoder_path, "Encoder checkpoint")->required();
  auto* base = app.add_subcommand("train-baseline", "End-to-end focal-loss training");
  base->add_option("--mode", mode_name, "end-to-end or end-to-end-forecast")->required();
  auto* eval = app.add_subcommand("evaluate", "Precision-recall analysis on the test split");
  eval->add_option("--model", model_path, "Model checkpoint")->required();
  eval->add_option("--setting", setting_name, "observed or forecast");
  auto* abl = app.add_subcommand("ablate", "Train all three modes and score both test settings");
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    Context ctx{resolve(g), {}, out};
    ctx.out = ctx.cfg.out_dir;
    if (synth->parsed()) run_synth(ctx);
    if (fc->parsed()) run_forecast(ctx, input);
    if (aug->parsed()) run_augment(ctx, input, view);
    if (pre->parsed()) run_pretrain(ctx);
    if (fine->parsed()) run_finetune(ctx, encoder_path);
    if (base->parsed()) run_baseline(ctx, mode_name);
    if (eval->parsed()) run_evaluate(ctx, model_path, setting_name);
    if (abl->parsed()) run_ablate(ctx);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace lews
