// Acceptance suite: one PASS/FAIL line per criterion. Expensive artifacts
// (teachers, distillation runs) are cached in --work-dir so later criteria can
// reuse runs made by earlier ones.
#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <thread>

#include "ideal/data.hpp"
#include "ideal/grad_check.hpp"
#include "ideal/labels.hpp"
#include "ideal/losses.hpp"
#include "ideal/ops.hpp"
#include "ideal/service.hpp"
#include "ideal/tape.hpp"
#include "ideal/teacher.hpp"
#include "ideal/trainer.hpp"
#include "ideal/weights_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ideal;

namespace {

// Pinned thresholds.
constexpr double kLeNetTeacherMin = 0.990;
constexpr double kMlpTeacherMin = 0.975;
constexpr double kTeacherMaxSeconds = 15 * 60;
constexpr double kMnistStudentMin = 0.85;
constexpr double kMnistRunMaxSeconds = 45 * 60;
constexpr double kFmnistStudentMin = 0.70;
constexpr double kNoCeMax = 0.30;
constexpr double kNoInfoSlack = 0.01;
constexpr double kEg3Gap = 0.05;
constexpr double kGradTol = 1e-3;
constexpr double kGradEps = 1e-3;
constexpr double kAnalyticTol = 1e-6;
constexpr double kNumericMaxSeconds = 120;
constexpr double kMonitorFraction = 0.90;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

constexpr int kSkip = 77;

struct Env {
  fs::path data_dir;
  fs::path work_dir;
  bool fresh = false;
};

void say(const std::string& line) { std::cout << line << '\n' << std::flush; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string num(double v, const char* spec = "%.4g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int verdict(const std::string& name, bool pass, const std::string& detail) {
  say(name + ": " + (pass ? "PASS" : "FAIL") + "  " + detail);
  return pass ? 0 : 1;
}

bool has_dataset(const fs::path& dir) {
  return fs::exists(dir / "t10k-labels-idx1-ubyte") || fs::exists(dir / "t10k-labels-idx1-ubyte.gz");
}

std::uint64_t file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
    }
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- datasets

struct Datasets {
  std::map<std::string, LabeledDataset> cache;
  const Env* env = nullptr;

  const LabeledDataset& get(const std::string& name, Split split) {
    const auto key = name + (split == Split::kTrain ? ":train" : ":test");
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, load_idx_dir(env->data_dir / name, split, 10)).first;
    return it->second;
  }
};

// ---------------------------------------------------------------- teachers

struct TeacherInfo {
  fs::path weights;
  double test_acc = 0;
  double seconds = 0;
  bool cached = false;
};

TeacherInfo ensure_teacher(const Env& env, Datasets& data, const std::string& dataset, ClassifierArch arch) {
  const TeacherTrainingConfig cfg{.arch = arch};
  const auto stem = std::string(arch_name(arch)) + "-" + dataset;
  const auto dir = env.work_dir / "teachers";
  fs::create_directories(dir);
  TeacherInfo info{dir / (stem + ".w")};
  const auto report_path = dir / (stem + ".json");
  const json key{{"arch", arch_name(arch)}, {"dataset", dataset}, {"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size}, {"lr", cfg.lr}, {"seed", cfg.seed}};
  if (!env.fresh && fs::exists(report_path) && fs::exists(info.weights)) {
    const auto report = json::parse(std::ifstream(report_path));
    if (report.at("key") == key && report.at("digest") == file_digest(info.weights)) {
      info.test_acc = report.at("test_acc");
      info.seconds = report.at("seconds");
      info.cached = true;
      return info;
    }
  }
  say("  training " + stem + " teacher");
  const auto t0 = std::chrono::steady_clock::now();
  const auto net = train_teacher(data.get(dataset, Split::kTrain), cfg, [](int epoch, double loss) {
    say("    epoch " + std::to_string(epoch) + " loss " + num(loss));
  });
  info.seconds = seconds_since(t0);
  save_weights(net, info.weights);
  info.test_acc = evaluate_accuracy(net, data.get(dataset, Split::kTest));
  std::ofstream(report_path) << json{{"key", key},
                                     {"digest", file_digest(info.weights)},
                                     {"test_acc", info.test_acc},
                                     {"seconds", info.seconds}}
                                    .dump(2);
  return info;
}

// ---------------------------------------------------------------- runs

/// Local oracle that also counts query calls made while stage 1 is active.
class InstrumentedOracle final : public HardLabelOracle {
 public:
  explicit InstrumentedOracle(HardLabelOracle& inner) : inner_(inner) {}
  std::vector<std::int64_t> query(const Tensor& images) override {
    if (in_stage1) ++stage1_calls;
    return inner_.query(images);
  }
  [[nodiscard]] std::uint64_t remaining() const override { return inner_.remaining(); }
  [[nodiscard]] std::uint64_t used() const override { return inner_.used(); }
  bool in_stage1 = false;
  int stage1_calls = 0;

 private:
  HardLabelOracle& inner_;
};

struct RunSummary {
  std::string name;
  fs::path dir;
  double final_acc = 0;
  std::uint64_t used = 0;
  std::uint64_t budget = 0;
  int stage1_calls = 0;
  int epochs = 0;
  int lgen_dropped = 0;  // epochs whose last-round L_gen < first-round L_gen
  int lmd_dropped = 0;   // epochs whose L_md after the inner steps <= before
  double seconds = 0;
  bool cached = false;
};

RunSummary summary_from_json(const json& j, const fs::path& dir) {
  RunSummary s;
  s.name = j.at("name");
  s.dir = dir;
  s.final_acc = j.at("final_acc");
  s.used = j.at("used");
  s.budget = j.at("budget");
  s.stage1_calls = j.at("stage1_calls");
  s.epochs = j.at("epochs");
  s.lgen_dropped = j.at("lgen_dropped");
  s.lmd_dropped = j.at("lmd_dropped");
  s.seconds = j.at("seconds");
  return s;
}

json config_json(const TrainConfig& c) {
  return {{"budget", c.budget},         {"batch_size", c.batch_size},
          {"gen_rounds", c.gen_rounds}, {"lambda", c.lambda},
          {"lr_gen", c.lr_gen},         {"lr_student", c.lr_student},
          {"momentum", c.momentum},     {"seed", c.seed},
          {"student", arch_name(c.student_arch)},
          {"inner_distill_steps", c.inner_distill_steps},
          {"replay", c.replay},         {"conditional", c.conditional},
          {"use_ce", c.use_ce},         {"latent_dim", c.latent_dim},
          {"eval_every", c.eval_every}};
}

enum class OracleKind { kLocal, kHttp };

RunSummary run_cached(const Env& env, Datasets& data, const std::string& name, const std::string& dataset,
                      const TrainConfig& cfg, const TeacherInfo& teacher, OracleKind kind) {
  const auto dir = env.work_dir / "runs" / name;
  const json key{{"config", config_json(cfg)},
                 {"dataset", dataset},
                 {"teacher", file_digest(teacher.weights)},
                 {"oracle", kind == OracleKind::kLocal ? "local" : "http"}};
  const auto summary_path = dir / "summary.json";
  if (!env.fresh && fs::exists(summary_path)) {
    const auto j = json::parse(std::ifstream(summary_path));
    if (j.at("key") == key) {
      auto s = summary_from_json(j, dir);
      s.cached = true;
      return s;
    }
  }
  fs::create_directories(dir);
  fs::remove(summary_path);
  say("  running " + name + " (" + std::to_string(cfg.epochs()) + " epochs)");

  const auto teacher_net = load_classifier(teacher.weights);
  std::unique_ptr<HardLabelOracle> base;
  std::unique_ptr<OracleService> service;
  if (kind == OracleKind::kLocal) {
    base = std::make_unique<LocalOracle>(teacher_net.clone(), cfg.budget);
  } else {
    ServiceConfig sc;
    sc.port = 0;
    sc.budgets = {{"acceptance", cfg.budget}};
    service = std::make_unique<OracleService>(teacher_net.clone(), sc);
    service->start();
    base = make_http_oracle(service->url(), "acceptance");
  }
  InstrumentedOracle oracle(*base);
  const auto& test = data.get(dataset, Split::kTest);

  RunSummary s;
  s.name = name;
  s.dir = dir;
  s.budget = cfg.budget;
  MetricsCsvWriter csv((dir / "metrics.csv").string());
  TrainerHooks hooks;
  hooks.on_generator_init = [&](std::int64_t, const GeneratorNet&) { oracle.in_stage1 = true; };
  hooks.on_stage1 = [&](std::int64_t, const GeneratorNet&, const Stage1Trace& t) {
    oracle.in_stage1 = false;
    if (t.l_gen.back() < t.l_gen.front()) ++s.lgen_dropped;
  };
  hooks.on_stage2 = [&](std::int64_t, const Stage2Trace& t) {
    if (t.l_md_after <= t.l_md.front()) ++s.lmd_dropped;
  };
  hooks.on_epoch = [&](const EpochRecord& r) {
    csv.append(r);
    if (r.test_acc) say("    epoch " + std::to_string(r.epoch) + " test_acc " + pct(*r.test_acc));
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto result =
      run_ideal(cfg, oracle, [&](const Classifier& net) { return evaluate_accuracy(net, test); }, hooks);
  s.seconds = seconds_since(t0);
  if (service) service->stop();
  save_weights(result.student, dir / "student.w");
  s.final_acc = *result.metrics.back().test_acc;
  s.used = oracle.used();
  s.stage1_calls = oracle.stage1_calls;
  s.epochs = static_cast<int>(result.metrics.size());
  const json out{{"key", key},
                 {"name", name},
                 {"final_acc", s.final_acc},
                 {"used", s.used},
                 {"budget", s.budget},
                 {"stage1_calls", s.stage1_calls},
                 {"epochs", s.epochs},
                 {"lgen_dropped", s.lgen_dropped},
                 {"lmd_dropped", s.lmd_dropped},
                 {"seconds", s.seconds}};
  std::ofstream(summary_path) << out.dump(2);
  return s;
}

TrainConfig mnist_config(std::uint64_t seed) {
  TrainConfig c;  // Q 25000, B 250, E_G 5, lambda 5
  c.seed = seed;
  return c;
}

std::string run_name(const std::string& variant, std::uint64_t seed) {
  return "mnist-" + variant + "-s" + std::to_string(seed);
}

std::string describe(const RunSummary& s) {
  return s.name + " " + pct(s.final_acc) + " (" + num(s.seconds / 60.0, "%.1f") + " min" +
         (s.cached ? ", cached" : "") + ")";
}

double mean_acc(const std::vector<RunSummary>& runs) {
  double total = 0;
  for (const auto& r : runs) total += r.final_acc;
  return total / static_cast<double>(runs.size());
}

std::vector<RunSummary> mnist_seeds(const Env& env, Datasets& data, const TeacherInfo& teacher,
                                    const std::string& variant, const std::function<void(TrainConfig&)>& tweak) {
  std::vector<RunSummary> out;
  for (auto seed : kSeeds) {
    auto cfg = mnist_config(seed);
    if (tweak) tweak(cfg);
    out.push_back(run_cached(env, data, run_name(variant, seed), "mnist", cfg, teacher, OracleKind::kLocal));
    say("  " + describe(out.back()));
  }
  return out;
}

// ---------------------------------------------------------------- criteria

int criterion1(const Env& env, Datasets& data) {
  const auto lenet = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  const auto mlp = ensure_teacher(env, data, "mnist", ClassifierArch::kMlp);
  const bool pass = lenet.test_acc >= kLeNetTeacherMin && mlp.test_acc >= kMlpTeacherMin &&
                    lenet.seconds <= kTeacherMaxSeconds && mlp.seconds <= kTeacherMaxSeconds;
  return verdict("criterion 1 (teacher quality)", pass,
                 "lenet " + pct(lenet.test_acc) + " (need >= " + pct(kLeNetTeacherMin) + ", " +
                     num(lenet.seconds / 60, "%.1f") + " min), mlp " + pct(mlp.test_acc) + " (need >= " +
                     pct(kMlpTeacherMin) + ", " + num(mlp.seconds / 60, "%.1f") + " min)");
}

int criterion2(const Env& env, Datasets& data) {
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  const auto runs = mnist_seeds(env, data, teacher, "default", {});
  const double acc = mean_acc(runs);
  double slowest = 0;
  for (const auto& r : runs) slowest = std::max(slowest, r.seconds);
  const bool pass = acc >= kMnistStudentMin && slowest <= kMnistRunMaxSeconds;
  return verdict("criterion 2 (MNIST end to end)", pass,
                 "mean student accuracy " + pct(acc) + " over 3 seeds (need >= " + pct(kMnistStudentMin) +
                     "), slowest run " + num(slowest / 60, "%.1f") + " min");
}

int criterion3(const Env& env, Datasets& data) {
  if (!has_dataset(env.data_dir / "fmnist")) {
    say("criterion 3 (FMNIST end to end): SKIP  no FMNIST data under " + (env.data_dir / "fmnist").string());
    return kSkip;
  }
  const auto teacher = ensure_teacher(env, data, "fmnist", ClassifierArch::kLeNet);
  say("  fmnist lenet teacher " + pct(teacher.test_acc));
  auto cfg = mnist_config(0);
  cfg.budget = 100000;
  cfg.eval_every = 40;
  const auto run = run_cached(env, data, "fmnist-default-s0", "fmnist", cfg, teacher, OracleKind::kLocal);
  return verdict("criterion 3 (FMNIST end to end)", run.final_acc >= kFmnistStudentMin,
                 "student accuracy " + pct(run.final_acc) + " at Q=100000 (need >= " + pct(kFmnistStudentMin) + ")");
}

int criterion4(const Env& env, Datasets& data) {
  // Every completed run in the work dir, plus the seed-0 baseline if absent.
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  run_cached(env, data, run_name("default", 0), "mnist", mnist_config(0), teacher, OracleKind::kLocal);
  int checked = 0;
  bool pass = true;
  std::string bad;
  for (const auto& entry : fs::directory_iterator(env.work_dir / "runs")) {
    const auto path = entry.path() / "summary.json";
    if (!fs::exists(path)) continue;
    const auto s = summary_from_json(json::parse(std::ifstream(path)), entry.path());
    ++checked;
    if (s.used != s.budget || s.stage1_calls != 0) {
      pass = false;
      bad += " " + s.name + "(used " + std::to_string(s.used) + "/" + std::to_string(s.budget) + ", stage-1 calls " +
             std::to_string(s.stage1_calls) + ")";
    }
  }
  return verdict("criterion 4 (query accounting)", pass && checked > 0,
                 std::to_string(checked) + " completed runs: used == Q and zero stage-1 oracle calls" +
                     (bad.empty() ? "" : ";" + bad));
}

int criterion5(const Env& env, Datasets& data) {
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  auto no_ce_cfg = mnist_config(0);
  no_ce_cfg.use_ce = false;
  const auto no_ce = run_cached(env, data, run_name("no-ce", 0), "mnist", no_ce_cfg, teacher, OracleKind::kLocal);
  say("  " + describe(no_ce));
  const auto full = mnist_seeds(env, data, teacher, "default", {});
  const auto no_info = mnist_seeds(env, data, teacher, "no-info", [](TrainConfig& c) { c.lambda = 0.0F; });
  const double full_acc = mean_acc(full), info_acc = mean_acc(no_info);
  const bool pass = no_ce.final_acc <= kNoCeMax && info_acc <= full_acc + kNoInfoSlack;
  return verdict("criterion 5 (ablation direction)", pass,
                 "without L_ce " + pct(no_ce.final_acc) + " (need <= " + pct(kNoCeMax) + "); without L_info " +
                     pct(info_acc) + " vs full " + pct(full_acc) + " (need <= full + 1 point)");
}

int criterion6(const Env& env, Datasets& data) {
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  const auto eg5 = mnist_seeds(env, data, teacher, "default", {});
  const auto eg3 = mnist_seeds(env, data, teacher, "eg3", [](TrainConfig& c) { c.gen_rounds = 3; });
  const double a5 = mean_acc(eg5), a3 = mean_acc(eg3);
  return verdict("criterion 6 (E_G sensitivity)", a3 <= a5 - kEg3Gap,
                 "E_G=3 " + pct(a3) + " vs E_G=5 " + pct(a5) + " (need a gap of at least 5 points)");
}

// Numerical property suite.
int criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  SeededRng rng(7, "acceptance-numeric");
  auto uniform = [&](Shape shape, float lo, float hi) {
    std::vector<float> v(shape_numel(shape));
    for (auto& x : v) x = lo + static_cast<float>(rng.uniform01()) * (hi - lo);
    return Tensor(std::move(shape), std::move(v));
  };
  auto away = [&](Shape shape, float gap, float hi) {
    std::vector<float> v(shape_numel(shape));
    for (auto& x : v) {
      const float m = gap + static_cast<float>(rng.uniform01()) * (hi - gap);
      x = rng.uniform01() < 0.5 ? -m : m;
    }
    return Tensor(std::move(shape), std::move(v));
  };
  // sum(w * y) turns any output into a scalar with a non-trivial gradient
  auto probe = [](const Tensor& y, const Tensor& w) { return ops::sum(ops::mul(y, w)); };

  std::vector<std::pair<std::string, double>> checks;
  auto check = [&](const std::string& what, const std::function<Tensor()>& f, std::vector<Tensor> points) {
    checks.emplace_back(what, grad_check(f, std::move(points), kGradEps));
    Tape::active().clear();
  };
  // Whole networks are reported but do not gate: a 1e-3 weight step moves
  // thousands of pre-activations and some cross a relu kink, where a central
  // difference is meaningless. Every layer is checked on its own above.
  std::vector<std::pair<std::string, double>> network;
  auto check_network = [&](const std::string& what, const std::function<Tensor()>& f, std::vector<Tensor> points) {
    network.emplace_back(what, grad_check(f, std::move(points), kGradEps));
    Tape::active().clear();
  };

  {
    auto a = uniform({3, 4}, -1, 1), b = uniform({4, 2}, -1, 1);
    const auto w = uniform({3, 2}, -1, 1);
    check("matmul", [&] { return probe(ops::matmul(a, b), w); }, {a, b});
  }
  {
    auto x = uniform({2, 2, 5, 5}, -1, 1), k = uniform({3, 2, 3, 3}, -1, 1), b = uniform({3}, -1, 1);
    const auto w = uniform({2, 3, 3, 3}, -1, 1);
    check("conv2d", [&] { return probe(ops::conv2d(x, k, b, {2, 1}), w); }, {x, k, b});
  }
  {
    auto x = uniform({2, 2, 3, 3}, -1, 1), k = uniform({2, 3, 4, 4}, -1, 1), b = uniform({3}, -1, 1);
    const auto w = uniform({2, 3, 6, 6}, -1, 1);
    check("conv_transpose2d", [&] { return probe(ops::conv_transpose2d(x, k, b, {2, 1}), w); }, {x, k, b});
  }
  {
    auto a = uniform({3, 4}, -1, 1), r = uniform({4}, -1, 1), c = uniform({3, 1}, -1, 1);
    const auto w = uniform({3, 4}, -1, 1);
    check("add", [&] { return probe(ops::add(a, r), w); }, {a, r});
    check("sub", [&] { return probe(ops::sub(c, a), w); }, {a, c});
    check("mul", [&] { return probe(ops::mul(a, c), w); }, {a, c});
    check("scale", [&] { return probe(ops::scale(a, -1.7F), w); }, {a});
  }
  {
    auto x = away({4, 5}, 0.05F, 2.0F);
    const auto w = uniform({4, 5}, -1, 1);
    check("relu", [&] { return probe(ops::relu(x), w); }, {x});
    check("leaky_relu", [&] { return probe(ops::leaky_relu(x), w); }, {x});
    check("tanh", [&] { return probe(ops::tanh(x), w); }, {x});
  }
  {
    std::vector<float> v(2 * 2 * 4 * 4);
    std::iota(v.begin(), v.end(), 0.0F);
    rng.shuffle(std::span<float>(v));
    for (auto& e : v) e *= 0.1F;
    auto x = Tensor({2, 2, 4, 4}, v);
    const auto w = uniform({2, 2, 2, 2}, -1, 1);
    check("max_pool2d", [&] { return probe(ops::max_pool2d(x, 2), w); }, {x});
  }
  {
    auto x = uniform({2, 6}, -1, 1);
    const auto w = uniform({3, 4}, -1, 1);
    check("reshape", [&] { return probe(ops::reshape(x, {3, 4}), w); }, {x});
  }
  {
    auto x = uniform({3, 5}, -2, 2);
    const auto w = uniform({3, 5}, -1, 1);
    check("softmax", [&] { return probe(ops::softmax(x), w); }, {x});
    check("log_softmax", [&] { return probe(ops::log_softmax(x), w); }, {x});
  }
  {
    auto x = uniform({3, 4}, 0.5F, 2.0F), y = away({3, 4}, 0.05F, 1.0F);
    const auto w = uniform({3, 4}, -1, 1);
    check("log", [&] { return probe(ops::log(x), w); }, {x});
    check("clamp_min", [&] { return probe(ops::clamp_min(y, 0.0F), w); }, {y});
  }
  {
    auto x = uniform({3, 4}, -1, 1);
    const auto w3 = uniform({3}, -1, 1), w4 = uniform({4}, -1, 1);
    check("mean", [&] { return ops::mean(ops::mul(x, x)); }, {x});
    check("sum", [&] { return ops::sum(ops::mul(x, x)); }, {x});
    check("mean(axis)", [&] { return probe(ops::mean(x, 0), w4); }, {x});
    check("sum(axis)", [&] { return probe(ops::sum(x, 1), w3); }, {x});
  }
  {
    auto x = uniform({3, 2, 3, 3}, -1, 1), g = uniform({2}, 0.5F, 1.5F), b = uniform({2}, -1, 1);
    const auto w = uniform({3, 2, 3, 3}, -1, 1);
    check("batch_norm", [&] { return probe(ops::batch_norm(x, g, b), w); }, {x, g, b});
    const ops::BatchStats stats{{0.1F, -0.2F}, {0.8F, 1.3F}};
    check("batch_norm_fixed", [&] { return probe(ops::batch_norm_fixed(x, g, b, stats), w); }, {x, g, b});
  }
  // losses
  const auto targets = one_hot(std::vector<std::int64_t>{2, 0, 1, 3, 3}, 4);
  {
    auto logits = uniform({5, 4}, -1, 1);
    check("cross_entropy", [&] { return loss::cross_entropy(ops::softmax(logits), targets).tensor; }, {logits});
    check("information_entropy",
          [&] { return loss::information_entropy_loss(loss::average_prediction(ops::softmax(logits))).tensor; },
          {logits});
    check("generator_loss", [&] { return loss::generator_loss(ops::softmax(logits), targets, 5.0F).total.tensor; },
          {logits});
    check("distill_loss", [&] { return loss::distill_loss(ops::softmax(logits), targets).tensor; }, {logits});
  }
  // whole layers: a small generator (every parameter) and a classifier
  {
    GeneratorConfig gc;
    gc.latent_dim = 6;
    gc.num_classes = 4;
    gc.output = {1, 8, 8};
    gc.base_channels = 4;
    gc.mid_channels = 3;
    gc.top_channels = 2;
    GeneratorNet gen(gc, rng);
    // the 0.02-scale init leaves batch-norm inputs with tiny variance, where a
    // 1e-3 step is no longer small; check at well-scaled weights instead
    for (const auto& p : gen.parameters()) {
      Tensor h = p.value;
      const bool gamma = p.name.ends_with(".gamma");
      for (auto& v : h.data()) v = (gamma ? 1.0F : 0.0F) + static_cast<float>(rng.uniform01() - 0.5);
    }
    const auto z = sample_gaussian(rng, {8, 6});
    const auto y = stratified_one_hot_labels(8, 4, rng);
    const auto w = uniform({8, 1, 8, 8}, -1, 1);
    const auto params = gen.parameter_tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      check_network("generator " + gen.parameters()[i].name, [&] { return probe(gen.generate(z, &y), w); }, {params[i]});
    }
  }
  {
    Classifier net(ClassifierArch::kMlp, 3, {1, 4, 4}, rng);
    const auto x = uniform({4, 1, 4, 4}, -1, 1);
    const auto t = one_hot(std::vector<std::int64_t>{0, 1, 2, 1}, 3);
    check_network("mlp classifier", [&] { return loss::cross_entropy(net.predict(x), t).tensor; }, net.parameter_tensors());
  }

  double worst = 0;
  std::string worst_name;
  for (const auto& [name, err] : checks) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
    if (err >= kGradTol) say("  grad_check " + name + " max rel error " + num(err));
  }
  for (const auto& [name, err] : network) say("  info: whole-network grad_check " + name + " " + num(err));

  // analytic values
  const double info_uniform = loss::information_entropy_loss(Tensor({10}, 0.1F)).value;
  const double info_onehot =
      loss::information_entropy_loss(Tensor({10}, std::vector<float>{0, 0, 0, 0, 1, 0, 0, 0, 0, 0})).value;
  const double ce_uniform =
      loss::cross_entropy(Tensor({4, 10}, 0.1F), one_hot(std::vector<std::int64_t>{0, 3, 6, 9}, 10)).value;
  const double e1 = std::abs(info_uniform - 0.1 * std::log(0.1));
  const double e2 = std::abs(info_onehot);
  const double e3 = std::abs(ce_uniform - std::log(10.0));
  const double secs = seconds_since(t0);
  const bool pass = worst < kGradTol && e1 < kAnalyticTol && e2 < kAnalyticTol && e3 < kAnalyticTol &&
                    secs <= kNumericMaxSeconds;
  return verdict("criterion 7 (numerical properties)", pass,
                 std::to_string(checks.size()) + " grad checks, worst " + num(worst) + " (" + worst_name +
                     "); L_info errors " + num(e1) + ", " + num(e2) + "; CE ln10 error " + num(e3) + "; " +
                     num(secs, "%.1f") + " s");
}

bool same_metrics(const fs::path& a, const fs::path& b, std::string& why) {
  const auto ra = read_metrics_csv(a.string());
  const auto rb = read_metrics_csv(b.string());
  if (ra.size() != rb.size()) {
    why = "row counts differ";
    return false;
  }
  for (std::size_t i = 0; i < ra.size(); ++i) {
    auto x = ra[i];
    auto y = rb[i];
    x.seconds = y.seconds = 0;  // wall clock is not part of the comparison
    if (metrics_csv_row(x) != metrics_csv_row(y)) {
      why = "epoch " + std::to_string(i) + " differs";
      return false;
    }
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int criterion8(const Env& env, Datasets& data) {
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  const auto local =
      run_cached(env, data, run_name("default", 0), "mnist", mnist_config(0), teacher, OracleKind::kLocal);
  const auto remote = run_cached(env, data, "mnist-http-s0", "mnist", mnist_config(0), teacher, OracleKind::kHttp);
  std::string why;
  const bool metrics_equal = same_metrics(local.dir / "metrics.csv", remote.dir / "metrics.csv", why);
  const bool weights_equal = slurp(local.dir / "student.w") == slurp(remote.dir / "student.w");

  // Stress: many clients racing for one key's budget.
  constexpr std::uint64_t kBudget = 1000;
  constexpr int kClients = 8, kRequests = 20, kBatch = 7;
  ServiceConfig sc;
  sc.port = 0;
  sc.budgets = {{"stress", kBudget}};
  OracleService svc(load_classifier(teacher.weights), sc);
  svc.start();
  std::atomic<int> granted{0}, refused{0}, other{0};
  std::vector<std::thread> threads;
  for (int c = 0; c < kClients; ++c) {
    threads.emplace_back([&, c] {
      SeededRng rng(static_cast<std::uint64_t>(c), "stress");
      const auto x = sample_gaussian(rng, {kBatch, 1, 28, 28});
      auto client = make_http_oracle(svc.url(), "stress");
      for (int r = 0; r < kRequests; ++r) {
        try {
          client->query(x);
          ++granted;
        } catch (const BudgetExhausted&) {
          ++refused;
        } catch (...) {
          ++other;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto used = svc.used("stress");
  svc.stop();
  const bool stress_ok = used <= kBudget && used == static_cast<std::uint64_t>(granted.load()) * kBatch &&
                         granted.load() == static_cast<int>(kBudget / kBatch) && other.load() == 0;

  return verdict("criterion 8 (local/remote parity)", metrics_equal && weights_equal && stress_ok,
                 std::string("metrics ") + (metrics_equal ? "identical" : "differ: " + why) + ", student weights " +
                     (weights_equal ? "identical" : "differ") + "; stress used " + std::to_string(used) + "/" +
                     std::to_string(kBudget) + " with " + std::to_string(granted.load()) + " granted, " +
                     std::to_string(refused.load()) + " refused, " + std::to_string(other.load()) + " errors");
}

// Loss-trajectory monitors over the default MNIST runs.
int monitors(const Env& env, Datasets& data) {
  const auto teacher = ensure_teacher(env, data, "mnist", ClassifierArch::kLeNet);
  const auto runs = mnist_seeds(env, data, teacher, "default", {});
  int epochs = 0, lgen = 0, lmd = 0;
  for (const auto& r : runs) {
    epochs += r.epochs;
    lgen += r.lgen_dropped;
    lmd += r.lmd_dropped;
  }
  const double f_gen = static_cast<double>(lgen) / epochs, f_md = static_cast<double>(lmd) / epochs;
  return verdict("monitors (loss trajectories)", f_gen >= kMonitorFraction && f_md >= kMonitorFraction,
                 "final-round L_gen below first-round in " + pct(f_gen) + " of epochs, L_md non-increasing in " +
                     pct(f_md) + " (need >= " + pct(kMonitorFraction) + " each)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IDEAL acceptance suite"};
  Env env;
  std::vector<std::string> which;
  env.data_dir = IDEAL_DEFAULT_DATA_DIR;
  env.work_dir = "acceptance_work";
  app.add_option("--data-dir", env.data_dir, "Holds mnist/ and fmnist/ IDX directories")->capture_default_str();
  app.add_option("--work-dir", env.work_dir, "Cache for teachers and runs")->capture_default_str();
  app.add_flag("--fresh", env.fresh, "Ignore cached teachers and runs");
  app.add_option("--criterion", which, "1-8 or 'monitors' (repeatable; default all)");
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {"1", "2", "3", "4", "5", "6", "7", "8", "monitors"};

  if (!has_dataset(env.data_dir / "mnist")) {
    bool only_numeric = std::all_of(which.begin(), which.end(), [](const std::string& w) { return w == "7"; });
    if (!only_numeric) {
      say("MNIST not found under " + (env.data_dir / "mnist").string() + "; skipping data-dependent criteria");
      which.erase(std::remove_if(which.begin(), which.end(), [](const std::string& w) { return w != "7"; }),
                  which.end());
      if (which.empty()) return kSkip;
    }
  }
  fs::create_directories(env.work_dir / "runs");
  Datasets data;
  data.env = &env;

  int failures = 0, skips = 0;
  for (const auto& w : which) {
    int rc = 0;
    try {
      if (w == "1") rc = criterion1(env, data);
      else if (w == "2") rc = criterion2(env, data);
      else if (w == "3") rc = criterion3(env, data);
      else if (w == "4") rc = criterion4(env, data);
      else if (w == "5") rc = criterion5(env, data);
      else if (w == "6") rc = criterion6(env, data);
      else if (w == "7") rc = criterion7();
      else if (w == "8") rc = criterion8(env, data);
      else if (w == "monitors") rc = monitors(env, data);
      else {
        std::cerr << "unknown criterion '" << w << "'\n";
        return 2;
      }
    } catch (const std::exception& e) {
      say("criterion " + w + ": FAIL  error: " + e.what());
      rc = 1;
    }
    if (rc == kSkip) ++skips;
    else if (rc != 0) ++failures;
  }
  if (failures > 0) return 1;
  return skips == static_cast<int>(which.size()) ? kSkip : 0;
}
