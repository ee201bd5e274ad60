// pcsm: train the point-cloud classifier, compute saliency maps, and run the
// point-dropping experiment suite. All outputs are deterministic in the flag
// set; CSV files are written atomically (temp file + rename).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pcsm/common.hpp"
#include "pcsm/dropping.hpp"
#include "pcsm/experiments.hpp"
#include "pcsm/io.hpp"
#include "pcsm/model.hpp"
#include "pcsm/saliency.hpp"
#include "pcsm/shapes.hpp"

namespace fs = std::filesystem;
using namespace pcsm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Dataset source shared by most subcommands: either a bundle directory with
// train/ and test/ subdirectories, or a generated synthetic set.
struct DataFlags {
  std::string bundle_dir;
  std::string synthetic;
  // Zero / negative sentinels: "not given", the preset value applies.
  std::size_t points = 0;
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  double sigma = -1.0;
  std::uint64_t data_seed = 1;

  void attach(CLI::App* cmd, bool positional) {
    if (positional) {
      cmd->add_option("dataset", bundle_dir,
                      "Bundle directory holding train/ and test/ subsets");
    }
    cmd->add_option("--synthetic", synthetic,
                    "Generate the synthetic shape set: 'default' or 'tiny'");
    cmd->add_option("--points", points, "Synthetic: points per cloud");
    cmd->add_option("--train-per-class", train_per_class,
                    "Synthetic: training clouds per class");
    cmd->add_option("--test-per-class", test_per_class,
                    "Synthetic: test clouds per class");
    cmd->add_option("--sigma", sigma, "Synthetic: surface jitter");
    cmd->add_option("--data-seed", data_seed, "Synthetic: generation seed");
  }

  ShapeSpec spec() const {
    ShapeSpec s;  // the "default" preset
    if (synthetic == "tiny") {
      s.points_per_cloud = 64;
      s.train_per_class = 10;
      s.test_per_class = 5;
    } else if (synthetic != "default") {
      throw StructuralError("unknown synthetic preset: " + synthetic);
    }
    if (points > 0) s.points_per_cloud = points;
    if (train_per_class > 0) s.train_per_class = train_per_class;
    if (test_per_class > 0) s.test_per_class = test_per_class;
    if (sigma >= 0.0) s.jitter_sigma = sigma;
    s.seed = data_seed;
    return s;
  }

  SyntheticData load() const {
    if (!synthetic.empty() && !bundle_dir.empty()) {
      throw StructuralError("give either a dataset directory or --synthetic");
    }
    if (!synthetic.empty()) {
      return generate_shapes(spec());
    }
    if (bundle_dir.empty()) {
      throw StructuralError("a dataset directory or --synthetic is required");
    }
    SyntheticData data;
    const fs::path root(bundle_dir);
    if (fs::exists(root / "train" / "labels.csv")) {
      data.train = load_dataset_bundle(root / "train");
    }
    data.test = load_dataset_bundle(root / "test");
    const int k = std::max(data.train.class_count, data.test.class_count);
    data.train.class_count = data.test.class_count = k;
    return data;
  }
};

std::vector<DropScheme> parse_schemes(const std::string& csv) {
  std::vector<DropScheme> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string name = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) out.push_back(scheme_from_name(name));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw StructuralError("no schemes given");
  return out;
}

std::vector<std::size_t> parse_grid(const std::string& csv) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string tok = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) {
      try {
        out.push_back(static_cast<std::size_t>(std::stoull(tok)));
      } catch (const std::exception&) {
        throw StructuralError("bad grid value: " + tok);
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw StructuralError("empty grid");
  return out;
}

Cloud load_cloud_file(const std::string& file, std::size_t off_points,
                      std::uint64_t sample_seed, bool normalize) {
  const fs::path path(file);
  const std::string ext = path.extension().string();
  Cloud cloud;
  if (ext == ".xyz") {
    cloud = load_xyz(path);
  } else if (ext == ".off") {
    cloud = load_off(path, off_points, sample_seed);
  } else if (ext == ".ply") {
    cloud = read_ply(path);
  } else {
    throw FormatError("unsupported cloud file type: " + file);
  }
  return normalize ? normalize_unit_sphere(cloud) : cloud;
}

std::string eval_csv_row(const std::string& prefix, const EvalSummary& s) {
  return prefix + "," + format_double(s.accuracy) + "," +
         format_double(s.mean_loss) + "\n";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  DataFlags data;
  std::string out;
  TrainConfig config;
  std::string optimizer = "momentum";
};

void run_train(const TrainArgs& args) {
  if (args.optimizer != "sgd" && args.optimizer != "momentum") {
    throw StructuralError("optimizer must be sgd or momentum");
  }
  SyntheticData data = args.data.load();
  if (data.train.items.empty()) {
    throw StructuralError("train: dataset has no training split");
  }
  TrainConfig config = args.config;
  config.optimizer =
      args.optimizer == "sgd" ? Optimizer::sgd : Optimizer::momentum;
  const TrainResult result = train(data.train, config);
  save_checkpoint(result.model, args.out);
  std::printf("train_accuracy %s\n",
              format_double(result.final_train_accuracy).c_str());
  if (!data.test.items.empty()) {
    std::printf("test_accuracy %s\n",
                format_double(accuracy(result.model, data.test)).c_str());
  }
  std::printf("checkpoint %s\n", args.out.c_str());
}

// ---- saliency -------------------------------------------------------------

struct SaliencyArgs {
  std::string checkpoint;
  std::string cloud_file;
  double alpha = 1.0;
  int label = -1;
  std::size_t off_points = 1024;
  std::uint64_t sample_seed = 0;
  bool no_normalize = false;
  std::string out_csv;
  std::string out_ply;
};

void run_saliency(const SaliencyArgs& args) {
  const ModelParams model = load_checkpoint(args.checkpoint);
  const Cloud cloud = load_cloud_file(args.cloud_file, args.off_points,
                                      args.sample_seed, !args.no_normalize);
  int label = args.label;
  std::string label_source = "given";
  if (label < 0) {
    label = forward(model, cloud).predicted_class;
    label_source = "predicted";
  } else if (label >= model.class_count()) {
    throw FormatError("label " + std::to_string(label) +
                      " out of range for checkpoint with k=" +
                      std::to_string(model.class_count()));
  }
  SaliencyConfig config;
  config.alpha = args.alpha;
  const SaliencyMap map = saliency_scores(model, cloud, label, config);
  const Prediction pred = forward(model, cloud);
  const double loss_value = loss(model, cloud, label);

  const std::string metadata =
      "label_source=" + label_source + " label=" + std::to_string(label) +
      " alpha=" + format_double(args.alpha) + " core=" +
      format_double(map.core[0]) + ";" + format_double(map.core[1]) + ";" +
      format_double(map.core[2]);
  if (!args.out_csv.empty()) {
    write_saliency_csv(cloud, map, args.out_csv, metadata);
  }
  if (!args.out_ply.empty()) {
    write_ply_colored(cloud, map, args.out_ply);
  }
  std::printf("predicted_class %d\n", pred.predicted_class);
  std::printf("loss %s\n", format_double(loss_value).c_str());
}

// ---- drop -----------------------------------------------------------------

struct DropArgs {
  std::string checkpoint;
  std::string cloud_file;
  std::string scheme = "high";
  std::size_t n = 0;
  std::size_t iterations = 0;  // 0: default plan
  double alpha = 1.0;
  std::uint64_t seed = 0;
  int label = -1;
  std::size_t off_points = 1024;
  bool no_normalize = false;
  std::string out_csv;
  std::string out_xyz;
};

void run_drop_cmd(const DropArgs& args) {
  const ModelParams model = load_checkpoint(args.checkpoint);
  const Cloud cloud =
      load_cloud_file(args.cloud_file, args.off_points, 0, !args.no_normalize);
  int label = args.label;
  if (label < 0) {
    label = forward(model, cloud).predicted_class;
  } else if (label >= model.class_count()) {
    throw FormatError("label out of range for checkpoint");
  }
  DropConfig config;
  config.scheme = scheme_from_name(args.scheme);
  const DropPlan plan = args.iterations > 0
                            ? DropPlan{(args.n / args.iterations) * args.iterations,
                                       args.iterations}
                            : default_drop_plan(config.scheme, args.n);
  config.n = plan.points;
  config.T = plan.iterations;
  config.alpha = args.alpha;
  config.seed = args.seed;
  const DropResult result = run_drop(model, cloud, label, config);
  if (!args.out_csv.empty()) {
    write_drop_csv(result, config.n / config.T, args.out_csv);
  }
  if (!args.out_xyz.empty()) {
    write_xyz(result.remaining, args.out_xyz);
  }
  std::printf("dropped %zu\n", result.dropped.size());
  std::printf("final_loss %s\n", format_double(result.losses.back()).c_str());
  std::printf("final_prediction %d\n", result.predictions.back());
}

// ---- curve ----------------------------------------------------------------

struct CurveArgs {
  std::string checkpoint;
  DataFlags data;
  std::string schemes = "high,low,random,critical,furthest";
  std::string grid = "0,10,20,30,40,50";
  std::size_t iterations = 0;  // 0: default T rule
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_curve(const CurveArgs& args) {
  const ModelParams model = load_checkpoint(args.checkpoint);
  const SyntheticData data = args.data.load();
  CurveOptions options;
  options.schemes = parse_schemes(args.schemes);
  options.grid = parse_grid(args.grid);
  options.alpha = args.alpha;
  options.seed = args.seed;
  if (args.iterations > 0) options.iterations_override = args.iterations;
  const std::vector<RobustnessCurve> curves =
      robustness_curves(model, data.test, options);
  std::string csv = "scheme,points_dropped,iterations,accuracy,mean_loss\n";
  for (const RobustnessCurve& curve : curves) {
    for (const CurveRow& row : curve.rows) {
      csv += std::string(scheme_name(curve.scheme)) + "," +
             std::to_string(row.points_dropped) + "," +
             std::to_string(row.iterations) + "," +
             format_double(row.accuracy) + "," +
             format_double(row.mean_loss) + "\n";
    }
  }
  atomic_write_file(args.out, csv);
  std::printf("curve %s\n", args.out.c_str());
}

// ---- consistency ----------------------------------------------------------

struct ConsistencyArgs {
  std::string checkpoint;
  DataFlags data;
  std::size_t n = 25;
  std::string schemes = "high,random,furthest";
  std::uint64_t seed = 0;
  double alpha = 1.0;
  std::string out;
};

void run_consistency(const ConsistencyArgs& args) {
  const ModelParams model = load_checkpoint(args.checkpoint);
  const SyntheticData data = args.data.load();
  const ConsistencyReport report = shift_drop_consistency(
      model, data.test, args.n, parse_schemes(args.schemes), args.seed,
      args.alpha);
  std::string csv = "scheme,n,pairs,agreement\n";
  for (const SchemeAgreement& a : report.agreements) {
    csv += std::string(scheme_name(a.scheme)) + "," + std::to_string(report.n) +
           "," + std::to_string(report.pair_count) + "," +
           format_double(a.agreement) + "\n";
  }
  atomic_write_file(args.out, csv);
  std::printf("consistency %s\n", args.out.c_str());
}

// ---- paramstudy -----------------------------------------------------------

struct ParamStudyArgs {
  std::string checkpoint;
  DataFlags data;
  std::string study;
  std::size_t n = 0;  // 0: per-study default
  std::uint64_t seed = 0;
  std::string out;
};

void run_paramstudy(const ParamStudyArgs& args) {
  const ModelParams model = load_checkpoint(args.checkpoint);
  const SyntheticData data = args.data.load();
  const std::size_t cloud_points = data.test.items.front().cloud.size();
  std::string csv =
      "study,param,scheme,points_dropped,iterations,accuracy,mean_loss\n";

  if (args.study == "alpha") {
    const std::size_t n = args.n > 0 ? args.n : 50;
    const DropPlan plan = default_drop_plan(DropScheme::high, n);
    for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
      const EvalSummary s = evaluate_dropped(model, data.test, DropScheme::high,
                                             plan, alpha, args.seed);
      csv += "alpha," + format_double(alpha) + ",high," +
             std::to_string(plan.points) + "," +
             std::to_string(plan.iterations) + "," +
             format_double(s.accuracy) + "," + format_double(s.mean_loss) +
             "\n";
    }
  } else if (args.study == "n") {
    // Sweep to 60% of the cloud in steps of 10%.
    for (int pct = 0; pct <= 60; pct += 10) {
      const std::size_t n =
          (cloud_points * static_cast<std::size_t>(pct)) / 100;
      for (DropScheme scheme : {DropScheme::high, DropScheme::random}) {
        const DropPlan plan = default_drop_plan(scheme, n);
        const EvalSummary s =
            evaluate_dropped(model, data.test, scheme, plan, 1.0, args.seed);
        csv += "n," + std::to_string(n) + "," + scheme_name(scheme) + "," +
               std::to_string(plan.points) + "," +
               std::to_string(plan.iterations) + "," +
               format_double(s.accuracy) + "," + format_double(s.mean_loss) +
               "\n";
      }
    }
  } else if (args.study == "T") {
    const std::size_t n = args.n > 0 ? args.n : 60;
    for (std::size_t t : {std::size_t{1}, std::size_t{2}, std::size_t{5},
                          std::size_t{10}, std::size_t{20}}) {
      if (n % t != 0) {
        throw StructuralError("T study: n must be divisible by every T; n=" +
                              std::to_string(n) + " fails T=" +
                              std::to_string(t));
      }
      const EvalSummary s = evaluate_dropped(model, data.test, DropScheme::high,
                                             DropPlan{n, t}, 1.0, args.seed);
      csv += "T," + std::to_string(t) + ",high," + std::to_string(n) + "," +
             std::to_string(t) + "," + format_double(s.accuracy) + "," +
             format_double(s.mean_loss) + "\n";
    }
  } else {
    throw StructuralError("study must be one of alpha, n, T");
  }
  atomic_write_file(args.out, csv);
  std::printf("paramstudy %s\n", args.out.c_str());
}

// ---- generalize -----------------------------------------------------------

struct GeneralizeArgs {
  std::string checkpoint_a;
  std::string checkpoint_b;
  DataFlags data;
  std::size_t n = 50;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  std::string out;
};

void run_generalize(const GeneralizeArgs& args) {
  const ModelParams attacker = load_checkpoint(args.checkpoint_a);
  const ModelParams victim = load_checkpoint(args.checkpoint_b);
  const SyntheticData data = args.data.load();
  const GeneralizationReport report =
      generalization(attacker, victim, data.test, args.n, args.seed, args.alpha);
  std::string csv = "setting,n,accuracy,mean_loss\n";
  csv += eval_csv_row("clean,0", report.clean);
  csv += eval_csv_row(
      "transfer_high," + std::to_string(report.plan.points), report.transfer_high);
  csv += eval_csv_row(
      "rand_baseline," + std::to_string(report.plan.points), report.rand_baseline);
  atomic_write_file(args.out, csv);
  std::printf("generalize %s\n", args.out.c_str());
}

// ---- gendata ---------------------------------------------------------------

struct GendataArgs {
  DataFlags data;
  std::string out;
};

void run_gendata(const GendataArgs& args) {
  DataFlags flags = args.data;
  if (flags.synthetic.empty()) flags.synthetic = "default";
  const SyntheticData data = generate_shapes(flags.spec());
  save_dataset_bundle(data.train, fs::path(args.out) / "train");
  save_dataset_bundle(data.test, fs::path(args.out) / "test");
  std::printf("bundle %s (%zu train, %zu test)\n", args.out.c_str(),
              data.train.items.size(), data.test.items.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud saliency maps and point-dropping experiments"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* cmd_train = app.add_subcommand("train", "Train a classifier");
  train_args.data.attach(cmd_train, true);
  cmd_train->add_option("--out", train_args.out, "Checkpoint path")->required();
  cmd_train->add_option("--epochs", train_args.config.epochs);
  cmd_train->add_option("--batch", train_args.config.batch_size);
  cmd_train->add_option("--lr", train_args.config.learning_rate);
  cmd_train->add_option("--optimizer", train_args.optimizer, "sgd or momentum");
  cmd_train->add_option("--momentum", train_args.config.momentum);
  cmd_train->add_option("--seed", train_args.config.seed);

  SaliencyArgs sal_args;
  auto* cmd_sal = app.add_subcommand("saliency", "Score and export a cloud");
  cmd_sal->add_option("checkpoint", sal_args.checkpoint)->required();
  cmd_sal->add_option("cloud", sal_args.cloud_file)->required();
  cmd_sal->add_option("--alpha", sal_args.alpha);
  cmd_sal->add_option("--label", sal_args.label,
                      "Ground-truth class; the prediction is used if absent");
  cmd_sal->add_option("--points", sal_args.off_points,
                      "Surface samples for OFF meshes");
  cmd_sal->add_option("--sample-seed", sal_args.sample_seed);
  cmd_sal->add_flag("--no-normalize", sal_args.no_normalize,
                    "Skip unit-sphere normalization of the input");
  cmd_sal->add_option("--out-csv", sal_args.out_csv);
  cmd_sal->add_option("--out-ply", sal_args.out_ply);

  DropArgs drop_args;
  auto* cmd_drop = app.add_subcommand("drop", "Drop points from one cloud");
  cmd_drop->add_option("checkpoint", drop_args.checkpoint)->required();
  cmd_drop->add_option("cloud", drop_args.cloud_file)->required();
  cmd_drop->add_option("--scheme", drop_args.scheme,
                       "high, low, random, critical, furthest");
  cmd_drop->add_option("--n", drop_args.n, "Points to drop")->required();
  cmd_drop->add_option("--T", drop_args.iterations, "Iterations (0: default)");
  cmd_drop->add_option("--alpha", drop_args.alpha);
  cmd_drop->add_option("--seed", drop_args.seed);
  cmd_drop->add_option("--label", drop_args.label);
  cmd_drop->add_option("--points", drop_args.off_points);
  cmd_drop->add_flag("--no-normalize", drop_args.no_normalize);
  cmd_drop->add_option("--out-csv", drop_args.out_csv);
  cmd_drop->add_option("--out-xyz", drop_args.out_xyz);

  CurveArgs curve_args;
  auto* cmd_curve = app.add_subcommand("curve", "Robustness curves per scheme");
  cmd_curve->add_option("checkpoint", curve_args.checkpoint)->required();
  curve_args.data.attach(cmd_curve, true);
  cmd_curve->add_option("--schemes", curve_args.schemes);
  cmd_curve->add_option("--grid", curve_args.grid, "Comma-separated drop counts");
  cmd_curve->add_option("--T,--T-rule", curve_args.iterations,
                        "Override iteration count (0: default rule)");
  cmd_curve->add_option("--alpha", curve_args.alpha);
  cmd_curve->add_option("--seed", curve_args.seed);
  cmd_curve->add_option("--out", curve_args.out)->required();

  ConsistencyArgs cons_args;
  auto* cmd_cons =
      app.add_subcommand("consistency", "Shift-vs-drop prediction agreement");
  cmd_cons->add_option("checkpoint", cons_args.checkpoint)->required();
  cons_args.data.attach(cmd_cons, true);
  cmd_cons->add_option("--n", cons_args.n);
  cmd_cons->add_option("--schemes", cons_args.schemes);
  cmd_cons->add_option("--seed", cons_args.seed);
  cmd_cons->add_option("--alpha", cons_args.alpha);
  cmd_cons->add_option("--out", cons_args.out)->required();

  ParamStudyArgs study_args;
  auto* cmd_study = app.add_subcommand("paramstudy", "Hyper-parameter sweeps");
  cmd_study->add_option("checkpoint", study_args.checkpoint)->required();
  study_args.data.attach(cmd_study, true);
  cmd_study->add_option("--study", study_args.study, "alpha, n, or T")
      ->required();
  cmd_study->add_option("--n", study_args.n, "Fixed budget for alpha/T studies");
  cmd_study->add_option("--seed", study_args.seed);
  cmd_study->add_option("--out", study_args.out)->required();

  GeneralizeArgs gen_args;
  auto* cmd_gen = app.add_subcommand(
      "generalize", "Evaluate one model's high-drop subsets under another");
  cmd_gen->add_option("checkpoint_a", gen_args.checkpoint_a, "Attacking model")
      ->required();
  cmd_gen->add_option("checkpoint_b", gen_args.checkpoint_b, "Victim model")
      ->required();
  gen_args.data.attach(cmd_gen, true);
  cmd_gen->add_option("--n", gen_args.n);
  cmd_gen->add_option("--seed", gen_args.seed);
  cmd_gen->add_option("--alpha", gen_args.alpha);
  cmd_gen->add_option("--out", gen_args.out)->required();

  GendataArgs gendata_args;
  auto* cmd_gendata =
      app.add_subcommand("gendata", "Write a synthetic dataset bundle");
  gendata_args.data.attach(cmd_gendata, false);
  cmd_gendata->add_option("--out", gendata_args.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_train->parsed()) run_train(train_args);
    if (cmd_sal->parsed()) run_saliency(sal_args);
    if (cmd_drop->parsed()) run_drop_cmd(drop_args);
    if (cmd_curve->parsed()) run_curve(curve_args);
    if (cmd_cons->parsed()) run_consistency(cons_args);
    if (cmd_study->parsed()) run_paramstudy(study_args);
    if (cmd_gen->parsed()) run_generalize(gen_args);
    if (cmd_gendata->parsed()) run_gendata(gendata_args);
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
