#include <algorithm>
#include <numeric>

#include "ideal/losses.hpp"
#include "ideal/optim.hpp"
#include "ideal/tape.hpp"
#include "ideal/teacher.hpp"

namespace ideal {

Classifier train_teacher(const LabeledDataset& train, const TeacherTrainingConfig& config,
                         const std::function<void(int, double)>& on_epoch) {
  if (train.size() == 0) throw std::invalid_argument("train_teacher: empty dataset");
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("train_teacher: epochs and batch size must be positive");
  }
  const SeededRng root(config.seed, "teacher");
  auto init_rng = root.fork("init");
  Classifier net(config.arch, train.num_classes, train.image_shape(), init_rng);
  auto opt = Optimizer::adam(net.parameter_tensors(), AdamConfig{.lr = config.lr});

  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto shuffle_rng = root.fork("epoch-" + std::to_string(epoch));
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(std::span<std::int64_t>(order));
    double total = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t begin = 0; begin < train.size(); begin += config.batch_size) {
      const auto end = std::min(train.size(), begin + config.batch_size);
      const std::span<const std::int64_t> idx(order.data() + begin, static_cast<std::size_t>(end - begin));
      std::vector<std::int64_t> labels;
      labels.reserve(idx.size());
      for (auto i : idx) labels.push_back(train.labels[static_cast<std::size_t>(i)]);
      const auto loss = loss::cross_entropy(net.predict(train.gather(idx)), one_hot(labels, train.num_classes));
      opt.zero_grad();
      backward(loss.tensor);
      opt.step();
      total += loss.value;
      ++batches;
    }
    if (on_epoch) on_epoch(epoch, total / static_cast<double>(batches));
  }
  opt.zero_grad();
  return net;
}

}  // namespace ideal
