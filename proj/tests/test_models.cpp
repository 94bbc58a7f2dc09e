#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ideal/models.hpp"
#include "ideal/optim.hpp"
#include "ideal/tape.hpp"
#include "ideal/weights_io.hpp"
#include "test_support.hpp"

using namespace ideal;
using testing::TempDir;
using testing::uniform_tensor;

namespace {

std::vector<float> flat(const std::vector<NamedTensor>& params) {
  std::vector<float> out;
  for (const auto& p : params) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  return out;
}

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

GeneratorConfig small_generator(bool conditional = true) {
  GeneratorConfig g;
  g.latent_dim = 8;
  g.num_classes = 4;
  g.conditional = conditional;
  g.output = {1, 8, 8};
  g.base_channels = 8;
  g.mid_channels = 6;
  g.top_channels = 4;
  return g;
}

}  // namespace

TEST_CASE("classifier parameter counts and output shapes") {
  SeededRng rng(1, "init");
  const Classifier lenet(ClassifierArch::kLeNet, 10, {1, 28, 28}, rng);
  const Classifier mlp(ClassifierArch::kMlp, 10, {1, 28, 28}, rng);
  const Classifier cnn(ClassifierArch::kSmallCnn, 10, {1, 28, 28}, rng);
  // hand-counted from the layer tables in models.hpp
  CHECK(lenet.parameter_count() == 156 + 2416 + 48120 + 10164 + 850);
  CHECK(mlp.parameter_count() == 401920 + 131328 + 2570);
  CHECK(cnn.parameter_count() == 320 + 18496 + 73856 + 295168 + 2570);

  const auto x = uniform_tensor(rng, {3, 1, 28, 28}, -1, 1);
  for (const Classifier* net : {&lenet, &mlp, &cnn}) {
    const auto p = net->predict(x);
    REQUIRE(p.shape() == Shape{3, 10});
    for (std::int64_t r = 0; r < 3; ++r) {
      double total = 0;
      for (std::int64_t c = 0; c < 10; ++c) {
        CHECK(p.at(static_cast<std::size_t>(r * 10 + c)) >= 0.0F);
        total += p.at(static_cast<std::size_t>(r * 10 + c));
      }
      CHECK(std::abs(total - 1.0) <= 1e-5);
    }
  }
  CHECK_THROWS_AS((void)lenet.predict(uniform_tensor(rng, {2, 1, 20, 20}, -1, 1)), ShapeError);
}

TEST_CASE("zero final layer gives uniform predictions") {
  SeededRng rng(2, "init");
  Classifier net(ClassifierArch::kLeNet, 10, {1, 28, 28}, rng);
  for (const auto& p : net.parameters()) {
    if (p.name.starts_with("fc3.")) {
      Tensor h = p.value;
      for (auto& v : h.data()) v = 0.0F;
    }
  }
  const auto probs = net.predict(uniform_tensor(rng, {4, 1, 28, 28}, -1, 1));
  for (float v : probs.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("descriptors round-trip") {
  SeededRng rng(3, "init");
  const Classifier net(ClassifierArch::kSmallCnn, 7, {3, 16, 16}, rng);
  CHECK(net.descriptor() == "classifier:smallcnn:7:3x16x16");
  const auto copy = Classifier::from_descriptor(net.descriptor());
  CHECK(copy.descriptor() == net.descriptor());
  CHECK_THROWS(Classifier::from_descriptor("classifier:resnet:10:1x28x28"));
  CHECK(parse_image_shape("1x28x28") == ImageShape{1, 28, 28});
  CHECK_THROWS(parse_image_shape("28x28"));
}

TEST_CASE("clone is independent") {
  SeededRng rng(4, "init");
  const Classifier net(ClassifierArch::kMlp, 3, {1, 4, 4}, rng);
  auto copy = net.clone();
  CHECK(flat(copy.parameters()) == flat(net.parameters()));
  Tensor h = copy.parameters()[0].value;
  h.data()[0] += 1.0F;
  CHECK(flat(copy.parameters()) != flat(net.parameters()));
}

TEST_CASE("FreezeGuard blocks parameter grads but not input grads") {
  SeededRng rng(5, "init");
  const Classifier net(ClassifierArch::kMlp, 3, {1, 4, 4}, rng);
  auto x = Tensor::parameter({2, 1, 4, 4}, values(uniform_tensor(rng, {2, 1, 4, 4}, -1, 1)));
  {
    FreezeGuard frozen(net.parameter_tensors());
    backward(ops::sum(ops::mul(net.predict(x), Tensor({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6}))));
    CHECK(x.has_grad());
    for (const auto& p : net.parameters()) CHECK_FALSE(p.value.has_grad());
  }
  for (const auto& p : net.parameters()) CHECK(p.value.requires_grad());
}

TEST_CASE("generator: shape and range") {
  SeededRng rng(6, "gen");
  GeneratorNet g(GeneratorConfig{}, rng);
  const auto z = sample_gaussian(rng, {4, 100});
  const auto y = one_hot(std::vector<std::int64_t>{0, 1, 2, 3}, 10);
  const auto x = g.generate(z, &y);
  CHECK(x.shape() == Shape{4, 1, 28, 28});
  for (float v : x.data()) {
    CHECK(v >= -1.0F);
    CHECK(v <= 1.0F);
  }
  Tape::active().clear();
  CHECK(g.descriptor() == "generator:100:10:cond:1x28x28:128-64-32");
}

TEST_CASE("generator: argument validation") {
  SeededRng rng(7, "gen");
  GeneratorNet cond(small_generator(true), rng);
  GeneratorNet uncond(small_generator(false), rng);
  const auto z = sample_gaussian(rng, {2, 8});
  const auto y = one_hot(std::vector<std::int64_t>{0, 1}, 4);
  CHECK_THROWS(cond.generate(z));
  CHECK_THROWS(uncond.generate(z, &y));
  CHECK_THROWS(cond.generate(sample_gaussian(rng, {2, 9}), &y));
  auto bad = small_generator();
  bad.output = {1, 10, 10};
  CHECK_THROWS(GeneratorNet(bad, rng));
  Tape::active().clear();
}

TEST_CASE("generator: seeding and reinitialization") {
  const auto cfg = GeneratorConfig{};
  SeededRng a(1, "g"), b(1, "g"), c(2, "g");
  GeneratorNet ga(cfg, a), gb(cfg, b), gc(cfg, c);
  CHECK(flat(ga.parameters()) == flat(gb.parameters()));
  const auto pa = flat(ga.parameters()), pc = flat(gc.parameters());
  double maxdiff = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) maxdiff = std::max(maxdiff, static_cast<double>(std::abs(pa[i] - pc[i])));
  CHECK(maxdiff > 0.0);

  SUBCASE("at least 99% of coordinates change") {
    const auto before = flat(ga.parameters());
    SeededRng r(99, "reinit");
    ga.reinitialize(r);
    const auto after = flat(ga.parameters());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i] ? 1 : 0;
    CHECK(static_cast<double>(changed) >= 0.99 * static_cast<double>(before.size()));
  }
  SUBCASE("reinitialize with the build seed reproduces the build") {
    SeededRng r(7, "x");
    ga.reinitialize(r);
    SeededRng fresh(7, "x");
    GeneratorNet built(cfg, fresh);
    CHECK(flat(ga.parameters()) == flat(built.parameters()));
  }
  SUBCASE("student parameters untouched") {
    SeededRng s(3, "student");
    const Classifier student(ClassifierArch::kLeNet, 10, {1, 28, 28}, s);
    const auto before = flat(student.parameters());
    SeededRng r(8, "x");
    ga.reinitialize(r);
    CHECK(flat(student.parameters()) == before);
  }
  SUBCASE("init statistics") {
    SeededRng r(9, "x");
    ga.reinitialize(r);
    for (const auto& p : ga.parameters()) {
      double mean = 0, sq = 0;
      for (float v : p.value.data()) mean += v;
      mean /= static_cast<double>(p.value.numel());
      for (float v : p.value.data()) sq += (v - mean) * (v - mean);
      const double sd = std::sqrt(sq / static_cast<double>(p.value.numel()));
      if (p.name.ends_with(".bias") || p.name.ends_with(".beta")) {
        CHECK(sd == 0.0);
        CHECK(mean == 0.0);
      } else if (p.name.ends_with(".gamma")) {
        CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
      } else if (p.value.numel() > 10000) {
        CHECK(mean == doctest::Approx(0.0).epsilon(0.002));
        CHECK(sd == doctest::Approx(0.02).epsilon(0.02));
      }
    }
  }
}

TEST_CASE("generator: different seeds give different images for the same z") {
  const auto cfg = GeneratorConfig{};
  SeededRng zr(1, "z");
  const auto z = sample_gaussian(zr, {8, 100});
  const auto y = one_hot(std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7}, 10);
  SeededRng a(10, "g"), b(11, "g");
  GeneratorNet ga(cfg, a), gb(cfg, b);
  NoGradGuard no_grad;
  const auto xa = ga.generate(z, &y), xb = gb.generate(z, &y);
  double maxdiff = 0;
  for (std::size_t i = 0; i < xa.numel(); ++i) maxdiff = std::max(maxdiff, static_cast<double>(std::abs(xa.at(i) - xb.at(i))));
  CHECK(maxdiff > 0.1);
}

TEST_CASE("generator: eval mode is deterministic and row-independent") {
  SeededRng rng(12, "g");
  GeneratorNet g(small_generator(), rng);
  NoGradGuard no_grad;
  const auto z = sample_gaussian(rng, {4, 8});
  const auto y = one_hot(std::vector<std::int64_t>{0, 1, 2, 3}, 4);
  (void)g.generate(z, &y);  // training mode: records batch statistics
  g.set_training(false);

  const Tensor zero({4, 8}, 0.0F);
  CHECK(values(g.generate(zero, &y)) == values(g.generate(zero, &y)));

  const std::vector<std::int64_t> perm{2, 0, 3, 1};
  std::vector<float> zp, yp;
  for (auto i : perm) {
    for (int k = 0; k < 8; ++k) zp.push_back(z.at(static_cast<std::size_t>(i * 8 + k)));
    for (int k = 0; k < 4; ++k) yp.push_back(y.at(static_cast<std::size_t>(i * 4 + k)));
  }
  const auto out = g.generate(z, &y);
  const auto yperm = Tensor({4, 4}, yp);
  const auto outp = g.generate(Tensor({4, 8}, zp), &yperm);
  const std::size_t per = 64;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t k = 0; k < per; ++k) {
      CHECK(outp.at(r * per + k) == out.at(static_cast<std::size_t>(perm[r]) * per + k));
    }
  }
}

TEST_CASE("Adam on x^2 matches an independent double-precision recurrence") {
  auto x = Tensor::parameter({1}, {1.0F});
  auto opt = Optimizer::adam({x}, AdamConfig{});
  double xd = 1.0, m = 0.0, v = 0.0;
  int first_below = -1;
  double x500 = 0.0;
  for (int t = 1; t <= 2000; ++t) {
    opt.zero_grad();
    backward(ops::sum(ops::mul(x, x)));
    opt.step();
    const double g = 2.0 * xd;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    xd -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(std::abs(x.item() - xd) < 1e-4);
    if (t == 500) x500 = x.item();
    if (first_below < 0 && std::abs(x.item()) < 0.05F) first_below = t;
  }
  CHECK(opt.step_count() == 2000);
  // Frozen from the recurrence: the bound |x| < 0.05 is not reached by step 500.
  CHECK(x500 == doctest::Approx(0.56051).epsilon(1e-4));
  CHECK(first_below >= 1715);
  CHECK(first_below <= 1717);
}

TEST_CASE("SGD with momentum") {
  SUBCASE("first step on x^2 from 1") {
    auto x = Tensor::parameter({1}, {1.0F});
    auto opt = Optimizer::sgd_momentum({x}, SgdMomentumConfig{});
    backward(ops::sum(ops::mul(x, x)));
    opt.step();
    CHECK(x.item() == doctest::Approx(0.98).epsilon(1e-7));
    CHECK(opt.step_count() == 1);
    // grads are left for the caller to clear
    CHECK(x.has_grad());
    opt.zero_grad();
    CHECK(x.grad()[0] == 0.0F);
  }
  SUBCASE("second step includes momentum") {
    auto x = Tensor::parameter({1}, {1.0F});
    auto opt = Optimizer::sgd_momentum({x}, SgdMomentumConfig{});
    for (int i = 0; i < 2; ++i) {
      opt.zero_grad();
      backward(ops::sum(ops::mul(x, x)));
      opt.step();
    }
    // v1 = 2, x1 = 0.98; v2 = 0.9*2 + 1.96 = 3.76, x2 = 0.98 - 0.0376
    CHECK(x.item() == doctest::Approx(0.9424).epsilon(1e-6));
  }
  SUBCASE("zero gradient is a fixed point") {
    auto x = Tensor::parameter({3}, {1, -2, 3});
    auto opt = Optimizer::sgd_momentum({x}, SgdMomentumConfig{});
    x.zero_grad();
    opt.step();
    CHECK(values(x) == std::vector<float>{1, -2, 3});
  }
  SUBCASE("grad shape mismatch") {
    auto x = Tensor::parameter({3}, {1, 2, 3});
    auto opt = Optimizer::sgd_momentum({x}, SgdMomentumConfig{});
    x.impl()->grad.assign(2, 1.0F);
    CHECK_THROWS_AS(opt.step(), ShapeError);
    CHECK(opt.step_count() == 0);
  }
}

TEST_CASE("weight files: bit-exact round trip") {
  TempDir dir("weights");
  SeededRng rng(13, "init");
  for (auto arch : {ClassifierArch::kMlp, ClassifierArch::kLeNet, ClassifierArch::kSmallCnn}) {
    const Classifier net(arch, 10, {1, 28, 28}, rng);
    const auto path = dir / "net.w";
    save_weights(net, path);
    const auto loaded = load_classifier(path);
    CHECK(loaded.descriptor() == net.descriptor());
    CHECK(flat(loaded.parameters()) == flat(net.parameters()));
    const auto x = uniform_tensor(rng, {2, 1, 28, 28}, -1, 1);
    NoGradGuard no_grad;
    CHECK(values(loaded.predict(x)) == values(net.predict(x)));
  }

  GeneratorNet g(small_generator(), rng);
  {
    NoGradGuard no_grad;
    const auto y = one_hot(std::vector<std::int64_t>{0, 1, 2}, 4);
    (void)g.generate(sample_gaussian(rng, {3, 8}), &y);
  }
  save_weights(g, dir / "g.w");
  auto g2 = load_generator(dir / "g.w");
  CHECK(g2.descriptor() == g.descriptor());
  CHECK(flat(g2.parameters()) == flat(g.parameters()));
  CHECK(flat(g2.batch_statistics()) == flat(g.batch_statistics()));
}

TEST_CASE("weight files: error cases") {
  TempDir dir("weights-err");
  SeededRng rng(14, "init");
  const Classifier lenet(ClassifierArch::kLeNet, 10, {1, 28, 28}, rng);
  save_weights(lenet, dir / "lenet.w");

  Classifier mlp(ClassifierArch::kMlp, 10, {1, 28, 28}, rng);
  CHECK_THROWS_AS(load_weights(mlp, dir / "lenet.w"), ArchMismatchError);

  GeneratorNet g(small_generator(), rng);
  save_weights(g, dir / "g.w");
  CHECK_THROWS_AS(load_classifier(dir / "g.w"), ArchMismatchError);
  CHECK_THROWS_AS(load_generator(dir / "lenet.w"), ArchMismatchError);

  std::ifstream in(dir / "lenet.w", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto write = [&](const std::string& name, const std::vector<char>& b) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    return dir / name;
  };
  auto no_magic = bytes;
  no_magic[0] = 'X';
  CHECK_THROWS_AS(load_classifier(write("nomagic.w", no_magic)), WeightFormatError);
  auto truncated = std::vector<char>(bytes.begin(), bytes.end() - 7);
  CHECK_THROWS_AS(load_classifier(write("trunc.w", truncated)), WeightFormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(load_classifier(write("version.w", version)), WeightFormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(load_classifier(write("trailing.w", trailing)), WeightFormatError);
}

TEST_CASE("weight files: header layout") {
  TempDir dir("weights-layout");
  SeededRng rng(15, "init");
  const Classifier net(ClassifierArch::kMlp, 2, {1, 2, 2}, rng);
  save_weights(net, dir / "n.w");
  std::ifstream in(dir / "n.w", std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(b.size() > 10);
  CHECK(std::string(b.begin(), b.begin() + 4) == "IDLW");
  CHECK((b[4] | (b[5] << 8)) == 1);
  const std::string arch = "classifier:mlp:2:1x2x2";
  CHECK((b[6] | (b[7] << 8) | (b[8] << 16) | (b[9] << 24)) == static_cast<int>(arch.size()));
  CHECK(std::string(b.begin() + 10, b.begin() + 10 + static_cast<std::ptrdiff_t>(arch.size())) == arch);
  // 6 tensors; total file size follows from the layout
  std::size_t expected = 4 + 2 + 4 + arch.size() + 4;
  for (const auto& p : net.parameters()) expected += 4 + p.name.size() + 4 + 4 * p.value.rank() + 4 * p.value.numel();
  CHECK(b.size() == expected);
}
