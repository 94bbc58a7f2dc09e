#include <algorithm>

#include "ideal/data.hpp"
#include "ideal/tape.hpp"

namespace ideal {

double evaluate_accuracy(const Classifier& net, const LabeledDataset& dataset, std::int64_t batch_size) {
  if (net.num_classes() != dataset.num_classes) {
    throw std::invalid_argument("evaluate_accuracy: network has " + std::to_string(net.num_classes()) +
                                " classes, dataset has " + std::to_string(dataset.num_classes));
  }
  if (!(net.input_shape() == dataset.image_shape())) {
    throw std::invalid_argument("evaluate_accuracy: network expects " + to_string(net.input_shape()) +
                                " images, dataset has " + to_string(dataset.image_shape()));
  }
  if (dataset.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("evaluate_accuracy: batch_size must be positive");
  NoGradGuard no_grad;
  std::int64_t correct = 0;
  for (std::int64_t begin = 0; begin < dataset.size(); begin += batch_size) {
    const auto end = std::min(dataset.size(), begin + batch_size);
    const auto predicted = argmax_rows(net.predict(dataset.batch(begin, end)));
    for (std::int64_t i = begin; i < end; ++i) {
      if (predicted[static_cast<std::size_t>(i - begin)] == dataset.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace ideal
