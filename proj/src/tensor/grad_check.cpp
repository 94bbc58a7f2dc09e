#include "ideal/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ideal/tape.hpp"

namespace ideal {

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> points, double epsilon) {
  for (auto& p : points) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  Tape::active().clear();
  const Tensor loss = f();
  backward(loss);

  std::vector<std::vector<float>> analytic;
  analytic.reserve(points.size());
  for (auto& p : points) {
    analytic.emplace_back(p.has_grad() ? std::vector<float>(p.grad().begin(), p.grad().end())
                                       : std::vector<float>(p.numel(), 0.0F));
  }

  const auto eval = [&] {
    NoGradGuard guard;
    return static_cast<double>(f().item());
  };

  double worst = 0.0;
  for (std::size_t t = 0; t < points.size(); ++t) {
    auto data = points[t].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float saved = data[i];
      const auto hi = static_cast<float>(saved + epsilon);
      const auto lo = static_cast<float>(saved - epsilon);
      data[i] = hi;
      const double up = eval();
      data[i] = lo;
      const double down = eval();
      data[i] = saved;
      // divide by the step actually representable in float32
      const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double exact = analytic[t][i];
      worst = std::max(worst, std::abs(exact - numeric) / std::max(1.0, std::abs(exact)));
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor point, double epsilon) {
  return grad_check([&] { return f(point); }, {point}, epsilon);
}

}  // namespace ideal
