#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "ideal/labels.hpp"
#include "ideal/losses.hpp"
#include "ideal/optim.hpp"
#include "ideal/tape.hpp"
#include "ideal/trainer.hpp"

namespace ideal {

namespace {

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<float> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (batch_size < 1) fail("batch size must be positive");
  if (budget == 0) fail("query budget must be positive");
  if (budget % static_cast<std::uint64_t>(batch_size) != 0) {
    fail("query budget " + std::to_string(budget) + " is not a multiple of batch size " +
         std::to_string(batch_size));
  }
  if (gen_rounds < 1) fail("generator rounds must be >= 1");
  if (!(lambda >= 0.0F)) fail("lambda must be >= 0");
  if (!use_ce && lambda == 0.0F) fail("generator loss is empty (no cross-entropy term and lambda = 0)");
  if (!(lr_gen > 0.0F) || !(lr_student > 0.0F)) fail("learning rates must be positive");
  if (inner_distill_steps < 1) fail("inner distillation steps must be >= 1");
  if (eval_every < 0) fail("eval_every must be >= 0");
  if (num_classes < 2) fail("need at least two classes");
  if (latent_dim < 1) fail("latent dimension must be positive");
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.latent_dim = latent_dim;
  g.num_classes = num_classes;
  g.conditional = conditional;
  g.output = image;
  return g;
}

void ReplayBuffer::add(Tensor images, Tensor labels_one_hot) {
  images_.push_back(std::move(images));
  labels_.push_back(std::move(labels_one_hot));
}

std::pair<Tensor, Tensor> ReplayBuffer::sample(SeededRng& rng) const {
  if (images_.empty()) throw std::logic_error("ReplayBuffer::sample on an empty buffer");
  const auto i = static_cast<std::size_t>(rng.uniform_index(images_.size()));
  return {images_[i], labels_[i]};
}

Stage1Trace stage1_generate(GeneratorNet& generator, const Classifier& student, const TrainConfig& config,
                            SeededRng& rng, const std::function<void(const GeneratorNet&)>& on_init) {
  auto init_rng = rng.fork("init");
  generator.reinitialize(init_rng);
  generator.set_training(true);
  if (on_init) on_init(generator);

  FreezeGuard frozen(student.parameter_tensors());
  auto opt = Optimizer::adam(generator.parameter_tensors(), AdamConfig{.lr = config.lr_gen});
  const auto B = config.batch_size;
  Stage1Trace trace;
  for (int round = 0; round < config.gen_rounds; ++round) {
    const auto z = sample_gaussian(rng, {B, config.latent_dim});
    const auto y = stratified_one_hot_labels(B, config.num_classes, rng);
    const auto x = generator.generate(z, config.conditional ? &y : nullptr);
    const auto losses = loss::generator_loss(student.predict(x), y, config.lambda);
    const auto& objective = config.use_ce ? losses.total.tensor : ops::scale(losses.info.tensor, config.lambda);
    opt.zero_grad();
    backward(objective);
    opt.step();
    trace.l_gen.push_back(config.use_ce ? losses.total.value : config.lambda * losses.info.value);
    trace.l_ce.push_back(losses.ce.value);
    trace.l_info.push_back(losses.info.value);
  }
  opt.zero_grad();
  return trace;
}

Stage2Trace stage2_distill(GeneratorNet& generator, Optimizer& student_opt, const Classifier& student,
                           HardLabelOracle& oracle, const TrainConfig& config, SeededRng& rng,
                           ReplayBuffer* replay) {
  const auto B = config.batch_size;
  Tensor images;
  {
    NoGradGuard no_grad;
    generator.set_training(true);
    const auto z = sample_gaussian(rng, {B, config.latent_dim});
    const auto y = stratified_one_hot_labels(B, config.num_classes, rng);
    images = generator.generate(z, config.conditional ? &y : nullptr);
  }

  Stage2Trace trace;
  const auto used_before = oracle.used();
  const auto labels = oracle.query(images);
  trace.queries_charged = oracle.used() - used_before;
  if (labels.size() != static_cast<std::size_t>(B)) {
    throw ProtocolError("oracle returned " + std::to_string(labels.size()) + " labels for " + std::to_string(B) +
                        " images");
  }
  for (auto l : labels) {
    if (l < 0 || l >= config.num_classes) throw ProtocolError("oracle returned label " + std::to_string(l));
  }
  const auto targets = one_hot(labels, config.num_classes);

  for (int step = 0; step < config.inner_distill_steps; ++step) {
    auto batch = images;
    auto batch_targets = targets;
    if (replay != nullptr && !replay->empty()) {
      const auto [old_images, old_targets] = replay->sample(rng);
      batch = concat_rows(images, old_images);
      batch_targets = concat_rows(targets, old_targets);
    }
    student_opt.zero_grad();
    const auto l_md = loss::distill_loss(student.predict(batch), batch_targets);
    backward(l_md.tensor);
    student_opt.step();
    trace.l_md.push_back(l_md.value);
  }
  student_opt.zero_grad();
  {
    NoGradGuard no_grad;
    trace.l_md_after = loss::distill_loss(student.predict(images), targets).value;
  }
  if (replay != nullptr) replay->add(images, targets);
  return trace;
}

RunResult run_ideal(const TrainConfig& config, HardLabelOracle& oracle, const Evaluator& evaluate,
                    const TrainerHooks& hooks) {
  config.validate();
  const SeededRng root(config.seed, "ideal");
  auto student_rng = root.fork("student");
  Classifier student(config.student_arch, config.num_classes, config.image, student_rng);
  auto generator_rng = root.fork("generator");
  GeneratorNet generator(config.generator_config(), generator_rng);
  auto student_opt = Optimizer::sgd_momentum(student.parameter_tensors(),
                                             SgdMomentumConfig{.lr = config.lr_student, .momentum = config.momentum});
  ReplayBuffer replay;
  RunMetrics metrics;
  const auto start = std::chrono::steady_clock::now();
  const auto epochs = static_cast<std::int64_t>(config.epochs());

  for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
    const auto epoch_rng = root.fork("epoch-" + std::to_string(epoch));
    auto stage1_rng = epoch_rng.fork("stage1");
    auto stage2_rng = epoch_rng.fork("stage2");

    const auto used_before = oracle.used();
    std::function<void(const GeneratorNet&)> on_init;
    if (hooks.on_generator_init) on_init = [&](const GeneratorNet& g) { hooks.on_generator_init(epoch, g); };
    const auto s1 = stage1_generate(generator, student, config, stage1_rng, on_init);
    if (oracle.used() != used_before) throw std::logic_error("stage 1 changed the query ledger");
    if (hooks.on_stage1) hooks.on_stage1(epoch, generator, s1);

    const auto s2 = stage2_distill(generator, student_opt, student, oracle, config, stage2_rng,
                                   config.replay ? &replay : nullptr);
    if (hooks.on_stage2) hooks.on_stage2(epoch, s2);

    EpochRecord record;
    record.epoch = epoch;
    auto mean = [](const std::vector<float>& v) {
      double total = 0.0;
      for (float x : v) total += x;
      return total / static_cast<double>(v.size());
    };
    record.l_ce = mean(s1.l_ce);
    record.l_info = mean(s1.l_info);
    record.l_gen = s1.l_gen.back();
    record.l_md = mean(s2.l_md);
    record.queries_used = oracle.used();
    const bool last = epoch + 1 == epochs;
    const bool due = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
    if (evaluate && (due || last)) record.test_acc = evaluate(student);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
  }
  return {std::move(student), std::move(generator), std::move(metrics)};
}

}  // namespace ideal
