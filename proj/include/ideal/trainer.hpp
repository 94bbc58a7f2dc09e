#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ideal/models.hpp"
#include "ideal/optim.hpp"
#include "ideal/oracle.hpp"
#include "ideal/rng.hpp"

namespace ideal {

struct TrainConfig {
  std::uint64_t budget = 25000;  // Q
  std::int64_t batch_size = 250;  // B
  int gen_rounds = 5;             // E_G
  float lambda = 5.0F;
  float lr_gen = 1e-3F;
  float lr_student = 1e-2F;
  float momentum = 0.9F;
  std::uint64_t seed = 0;
  ClassifierArch student_arch = ClassifierArch::kLeNet;
  std::int64_t num_classes = 10;
  ImageShape image{1, 28, 28};
  int inner_distill_steps = 5;
  bool replay = false;
  /// Evaluate every N epochs (and after the last one). 0 = only after the last.
  int eval_every = 10;
  bool conditional = true;
  /// Ablation switch: false drops the cross-entropy term from the generator
  /// loss, leaving lambda * L_info.
  bool use_ce = true;
  std::int64_t latent_dim = 100;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  [[nodiscard]] std::uint64_t epochs() const { return budget / static_cast<std::uint64_t>(batch_size); }
  [[nodiscard]] GeneratorConfig generator_config() const;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double l_ce = 0.0;    // mean over the generator rounds
  double l_info = 0.0;  // mean over the generator rounds
  double l_gen = 0.0;   // last generator round
  double l_md = 0.0;    // mean over the inner distillation steps
  std::uint64_t queries_used = 0;
  std::optional<double> test_acc;
  double seconds = 0.0;  // wall clock since the run started
};

using RunMetrics = std::vector<EpochRecord>;

struct Stage1Trace {
  std::vector<float> l_gen;  // one entry per round
  std::vector<float> l_ce;
  std::vector<float> l_info;
};

struct Stage2Trace {
  std::uint64_t queries_charged = 0;
  std::vector<float> l_md;    // loss seen by each inner step, before its update
  float l_md_after = 0.0F;    // loss on the fresh batch after the last step
};

/// Optional instrumentation; every member may be left empty.
struct TrainerHooks {
  std::function<void(std::int64_t epoch, const GeneratorNet& fresh)> on_generator_init;
  std::function<void(std::int64_t epoch, const GeneratorNet& trained, const Stage1Trace&)> on_stage1;
  std::function<void(std::int64_t epoch, const Stage2Trace&)> on_stage2;
  /// Called once per epoch, after the record is final.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Test-set accuracy of a student snapshot; used for reporting only.
using Evaluator = std::function<double(const Classifier&)>;

/// Stored (synthetic batch, teacher labels) pairs from earlier epochs.
class ReplayBuffer {
 public:
  void add(Tensor images, Tensor labels_one_hot);
  [[nodiscard]] std::size_t size() const { return images_.size(); }
  [[nodiscard]] bool empty() const { return images_.empty(); }
  [[nodiscard]] std::pair<Tensor, Tensor> sample(SeededRng& rng) const;

 private:
  std::vector<Tensor> images_;
  std::vector<Tensor> labels_;
};

/// Stage 1: re-initializes `generator` from `rng` and trains it for
/// config.gen_rounds Adam steps against the frozen student. Has no access to
/// the teacher.
Stage1Trace stage1_generate(GeneratorNet& generator, const Classifier& student, const TrainConfig& config,
                            SeededRng& rng,
                            const std::function<void(const GeneratorNet&)>& on_init = {});

/// Stage 2: one fresh synthetic batch, one oracle query for it, then
/// config.inner_distill_steps SGD-momentum steps on the student.
Stage2Trace stage2_distill(GeneratorNet& generator, Optimizer& student_opt, const Classifier& student,
                           HardLabelOracle& oracle, const TrainConfig& config, SeededRng& rng,
                           ReplayBuffer* replay);

struct RunResult {
  Classifier student;
  GeneratorNet generator;  // the final epoch's generator
  RunMetrics metrics;
};

/// Full run of E = Q / B epochs. Oracle errors propagate after the records of
/// completed epochs have been passed to hooks.on_epoch.
RunResult run_ideal(const TrainConfig& config, HardLabelOracle& oracle, const Evaluator& evaluate = {},
                    const TrainerHooks& hooks = {});

/// CSV header: epoch,l_ce,l_info,l_gen,l_md,queries_used,test_acc,seconds
std::string metrics_csv_header();
std::string metrics_csv_row(const EpochRecord& record);

/// Appends rows as they arrive and flushes after each.
class MetricsCsvWriter {
 public:
  explicit MetricsCsvWriter(const std::string& path);
  void append(const EpochRecord& record);

 private:
  std::string path_;
  std::ofstream out_;
};

RunMetrics read_metrics_csv(const std::string& path);

}  // namespace ideal
