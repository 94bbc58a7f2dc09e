#include "ideal/oracle.hpp"
#include "ideal/tape.hpp"
#include "ideal/weights_io.hpp"

namespace ideal {

namespace {

void check_input(const Classifier& teacher, const Tensor& images) {
  const auto& in = teacher.input_shape();
  if (images.rank() != 4 || images.dim(0) < 1 || images.dim(1) != in.channels || images.dim(2) != in.height ||
      images.dim(3) != in.width) {
    throw ShapeError("oracle: teacher expects non-empty (B, " + to_string(in) + ") images, got " +
                     to_string(images.shape()));
  }
}

}  // namespace

std::vector<std::int64_t> hard_labels(const Classifier& teacher, const Tensor& images) {
  check_input(teacher, images);
  NoGradGuard no_grad;
  return argmax_rows(teacher.predict(images));
}

LocalOracle::LocalOracle(Classifier teacher, std::uint64_t budget)
    : teacher_(std::move(teacher)), ledger_(budget) {}

std::vector<std::int64_t> LocalOracle::query(const Tensor& images) {
  // Reject bad shapes before charging so a malformed request costs nothing.
  check_input(teacher_, images);
  ledger_.charge(static_cast<std::uint64_t>(images.dim(0)));
  return hard_labels(teacher_, images);
}

std::unique_ptr<HardLabelOracle> make_local_oracle(const std::filesystem::path& teacher_weights,
                                                   std::uint64_t budget) {
  return std::make_unique<LocalOracle>(load_classifier(teacher_weights), budget);
}

}  // namespace ideal
