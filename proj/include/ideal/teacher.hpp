#pragma once

#include <cstdint>
#include <functional>

#include "ideal/data.hpp"
#include "ideal/models.hpp"

namespace ideal {

struct TeacherTrainingConfig {
  ClassifierArch arch = ClassifierArch::kLeNet;
  int epochs = 10;
  std::int64_t batch_size = 128;
  float lr = 1e-3F;
  std::uint64_t seed = 0;
};

/// Adam on cross-entropy over shuffled mini-batches of the labelled train split.
/// `on_epoch(epoch, mean_loss)` is optional.
Classifier train_teacher(const LabeledDataset& train, const TeacherTrainingConfig& config,
                         const std::function<void(int, double)>& on_epoch = {});

}  // namespace ideal
