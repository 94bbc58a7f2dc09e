#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <pthread.h>

#include "ideal/cli.hpp"
#include "ideal/data.hpp"
#include "ideal/service.hpp"
#include "ideal/tape.hpp"
#include "ideal/teacher.hpp"
#include "ideal/weights_io.hpp"

namespace ideal::cli {

namespace {

namespace fs = std::filesystem;

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct TeacherArgs {
  std::string arch = "lenet";
  std::string data;
  std::string out;
  int epochs = 10;
  std::int64_t batch_size = 128;
  float lr = 1e-3F;
  std::uint64_t seed = 0;
};

struct ServeArgs {
  std::string weights;
  std::string bind = "127.0.0.1:8080";
  std::uint64_t budget = 25000;
  std::string api_key;
  std::string usage_log;
};

struct DistillArgs {
  TrainConfig config;
  std::string student_arch = "lenet";
  std::string teacher_weights;
  std::string oracle_url;
  std::string out;
  std::string eval_data;
  std::string manifest;
  bool unconditional = false;
  bool no_ce = false;
};

struct EvalArgs {
  std::string weights;
  std::string data;
  std::string split = "test";
};

struct VisualizeArgs {
  std::string generator;
  std::string run;
  std::int64_t rows = 10;
  std::int64_t cols = 10;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_train_teacher(const TeacherArgs& a) {
  const auto train = load_idx_dir(a.data, Split::kTrain);
  const auto test = load_idx_dir(a.data, Split::kTest, train.num_classes);
  TeacherTrainingConfig cfg;
  cfg.arch = parse_arch(a.arch);
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.lr = a.lr;
  cfg.seed = a.seed;
  const auto net = train_teacher(train, cfg, [](int epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << loss << '\n' << std::flush;
  });
  save_weights(net, a.out);
  const double acc = evaluate_accuracy(net, test);
  std::cout << "test_accuracy " << fixed4(acc) << '\n';
  nlohmann::json report{{"arch", a.arch}, {"epochs", a.epochs}, {"seed", a.seed},
                        {"weights", a.out},  {"test_accuracy", acc}};
  std::ofstream(a.out + ".report.json") << report.dump(2) << '\n';
  return kExitOk;
}

int cmd_serve(const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.weights_path = a.weights;
  parse_bind_address(a.bind, cfg);
  std::string key = a.api_key;
  if (key.empty()) {
    if (const char* env = std::getenv("IDEAL_API_KEY")) key = env;
  }
  if (key.empty()) throw CLI::ValidationError("--api-key", "an api key is required (flag or IDEAL_API_KEY)");
  cfg.budgets[key] = a.budget;
  if (!a.usage_log.empty()) cfg.usage_log = a.usage_log;

  // Block termination signals in every thread; the main thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  OracleService service(cfg);
  service.start();
  std::cout << "listening on " << service.url() << " remaining_budget " << service.remaining(key) << '\n'
            << std::flush;
  int sig = 0;
  sigwait(&signals, &sig);
  service.stop();
  std::cout << "stopped; used " << service.used(key) << '\n';
  return kExitOk;
}

int cmd_distill(DistillArgs a) {
  RunManifest manifest;
  if (!a.manifest.empty()) {
    manifest = RunManifest::read(a.manifest);
    if (!a.out.empty()) manifest.out_dir = a.out;
  } else {
    auto& c = a.config;
    c.student_arch = parse_arch(a.student_arch);
    c.conditional = !a.unconditional;
    c.use_ce = !a.no_ce;
    if (a.teacher_weights.empty() == a.oracle_url.empty()) {
      throw CLI::ValidationError("oracle", "give exactly one of --teacher-weights or --oracle-url");
    }
    manifest.config = c;
    manifest.oracle_kind = a.teacher_weights.empty() ? "remote" : "local";
    manifest.teacher_weights = a.teacher_weights;
    manifest.oracle_url = a.oracle_url;
    manifest.eval_data = a.eval_data;
    manifest.out_dir = a.out;
  }
  manifest.config.validate();

  const fs::path out = manifest.out_dir;
  fs::create_directories(out);
  fs::remove(out / "FAILED");
  manifest.write(out / "manifest.json");

  std::unique_ptr<HardLabelOracle> oracle;
  if (manifest.oracle_kind == "local") {
    oracle = make_local_oracle(manifest.teacher_weights, manifest.config.budget);
  } else {
    const char* key = std::getenv("IDEAL_API_KEY");
    oracle = make_http_oracle(manifest.oracle_url, key != nullptr ? key : "");
  }

  std::optional<LabeledDataset> test;
  Evaluator evaluator;
  if (!manifest.eval_data.empty()) {
    test = load_idx_dir(manifest.eval_data, Split::kTest, manifest.config.num_classes);
    evaluator = [&test](const Classifier& net) { return evaluate_accuracy(net, *test); };
  }

  MetricsCsvWriter csv((out / "metrics.csv").string());
  TrainerHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    csv.append(r);
    std::cout << metrics_csv_row(r) << '\n' << std::flush;
  };
  try {
    auto result = run_ideal(manifest.config, *oracle, evaluator, hooks);
    save_weights(result.student, out / "student.w");
    save_weights(result.generator, out / "generator.w");
    if (!result.metrics.empty() && result.metrics.back().test_acc) {
      std::cout << "final_test_accuracy " << fixed4(*result.metrics.back().test_acc) << '\n';
    }
  } catch (const std::exception& e) {
    std::ofstream(out / "FAILED") << e.what() << '\n';
    throw;
  }
  return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
  const auto net = load_classifier(a.weights);
  const auto data = load_idx_dir(a.data, a.split == "train" ? Split::kTrain : Split::kTest);
  std::cout << "accuracy " << fixed4(evaluate_accuracy(net, data)) << '\n';
  return kExitOk;
}

int cmd_visualize(const VisualizeArgs& a) {
  fs::path path = a.generator;
  if (path.empty()) path = fs::path(a.run) / "generator.w";
  if (!fs::exists(path)) throw std::runtime_error("no generator snapshot at '" + path.string() + "'");
  auto gen = load_generator(path);
  gen.set_training(false);
  const auto& cfg = gen.config();
  const auto n = a.rows * a.cols;
  SeededRng rng(a.seed, "visualize");
  const auto z = sample_gaussian(rng, {n, cfg.latent_dim});
  std::vector<std::int64_t> classes;
  for (std::int64_t r = 0; r < a.rows; ++r) {
    for (std::int64_t c = 0; c < a.cols; ++c) classes.push_back(r % cfg.num_classes);
  }
  const auto labels = one_hot(classes, cfg.num_classes);
  NoGradGuard no_grad;
  const auto images = gen.generate(z, cfg.conditional ? &labels : nullptr);
  const auto grid = tile_grid(images, a.rows, a.cols);
  write_netpbm(a.out, grid);
  std::cout << "wrote " << a.out << " (" << grid.width << "x" << grid.height << ")\n";
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Data-free hard-label model distillation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  TeacherArgs teacher;
  auto* t = app.add_subcommand("train-teacher", "Train a teacher classifier on IDX data");
  t->add_option("--arch", teacher.arch, "mlp | lenet | smallcnn")->capture_default_str();
  t->add_option("--data", teacher.data, "Directory with train-*/t10k-* IDX files")->required();
  t->add_option("--out", teacher.out, "Output weights file")->required();
  t->add_option("--epochs", teacher.epochs)->capture_default_str();
  t->add_option("--batch-size", teacher.batch_size)->capture_default_str();
  t->add_option("--lr", teacher.lr)->capture_default_str();
  t->add_option("--seed", teacher.seed)->capture_default_str();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve-teacher", "Serve hard labels over HTTP with a metered budget");
  s->add_option("--weights", serve.weights)->required();
  s->add_option("--bind", serve.bind, "HOST:PORT (port 0 picks a free one)")->capture_default_str();
  s->add_option("--budget", serve.budget)->capture_default_str();
  s->add_option("--api-key", serve.api_key, "Defaults to $IDEAL_API_KEY");
  s->add_option("--usage-log", serve.usage_log, "Append-only charge log, replayed at startup");

  DistillArgs distill;
  auto& c = distill.config;
  auto* d = app.add_subcommand("distill", "Distill a student from a hard-label oracle");
  d->add_option("--seed", c.seed)->capture_default_str();
  d->add_option("--budget", c.budget, "Query budget Q")->capture_default_str();
  d->add_option("--batch-size", c.batch_size, "B")->capture_default_str();
  d->add_option("--gen-rounds", c.gen_rounds, "Generator rounds per epoch")->capture_default_str();
  d->add_option("--lambda", c.lambda, "Weight of the balancing loss")->capture_default_str();
  d->add_option("--lr-gen", c.lr_gen)->capture_default_str();
  d->add_option("--lr-student", c.lr_student)->capture_default_str();
  d->add_option("--inner-steps", c.inner_distill_steps)->capture_default_str();
  d->add_flag("--replay", c.replay, "Reuse labelled batches from earlier epochs");
  d->add_flag("--unconditional", distill.unconditional, "Do not feed labels to the generator");
  d->add_flag("--no-ce", distill.no_ce, "Ablation: drop the cross-entropy term of the generator loss");
  d->add_option("--student-arch", distill.student_arch)->capture_default_str();
  auto* tw = d->add_option("--teacher-weights", distill.teacher_weights, "Local oracle");
  auto* url = d->add_option("--oracle-url", distill.oracle_url, "Remote oracle; key from $IDEAL_API_KEY");
  tw->excludes(url);
  d->add_option("--out", distill.out, "Run directory");
  d->add_option("--eval-data", distill.eval_data, "IDX directory used for test accuracy");
  d->add_option("--eval-every", c.eval_every)->capture_default_str();
  d->add_option("--manifest", distill.manifest, "Re-run the configuration stored in a manifest");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Top-1 accuracy of a classifier on IDX data");
  e->add_option("--weights", eval.weights)->required();
  e->add_option("--data", eval.data)->required();
  e->add_option("--split", eval.split)->check(CLI::IsMember({"test", "train"}))->capture_default_str();

  VisualizeArgs vis;
  auto* v = app.add_subcommand("visualize", "Render generator samples as a Netpbm grid");
  auto* gen_opt = v->add_option("--generator", vis.generator, "Generator weights file");
  auto* run_opt = v->add_option("--run", vis.run, "Run directory holding generator.w");
  gen_opt->excludes(run_opt);
  v->add_option("--rows", vis.rows)->capture_default_str();
  v->add_option("--cols", vis.cols)->capture_default_str();
  v->add_option("--out", vis.out)->required();
  v->add_option("--seed", vis.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
    if (d->parsed() && distill.manifest.empty() && distill.out.empty()) {
      throw CLI::RequiredError("--out");
    }
    if (v->parsed() && vis.generator.empty() && vis.run.empty()) {
      throw CLI::ValidationError("visualize", "give --generator or --run");
    }
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train_teacher(teacher);
    if (s->parsed()) return cmd_serve(serve);
    if (d->parsed()) return cmd_distill(distill);
    if (e->parsed()) return cmd_eval(eval);
    if (v->parsed()) return cmd_visualize(vis);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kExitOk : kExitUsage;
  } catch (const BudgetExhausted& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitBudget;
  } catch (const OracleError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitOracle;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ideal::cli
