#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ideal/cli.hpp"

namespace ideal::cli {

using nlohmann::json;

std::string RunManifest::to_json() const {
  const auto& c = config;
  json doc;
  doc["tool_version"] = tool_version;
  doc["seed"] = c.seed;
  doc["oracle"] = {{"kind", oracle_kind}, {"teacher_weights", teacher_weights}, {"url", oracle_url}};
  doc["eval_data"] = eval_data;
  doc["out_dir"] = out_dir;
  doc["config"] = {
      {"budget", c.budget},
      {"batch_size", c.batch_size},
      {"gen_rounds", c.gen_rounds},
      {"lambda", c.lambda},
      {"lr_gen", c.lr_gen},
      {"lr_student", c.lr_student},
      {"momentum", c.momentum},
      {"seed", c.seed},
      {"student_arch", std::string(arch_name(c.student_arch))},
      {"num_classes", c.num_classes},
      {"image", to_string(c.image)},
      {"inner_distill_steps", c.inner_distill_steps},
      {"replay", c.replay},
      {"eval_every", c.eval_every},
      {"conditional", c.conditional},
      {"use_ce", c.use_ce},
      {"latent_dim", c.latent_dim},
  };
  return doc.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const auto doc = json::parse(text);
  RunManifest m;
  m.tool_version = doc.at("tool_version").get<std::string>();
  m.oracle_kind = doc.at("oracle").at("kind").get<std::string>();
  m.teacher_weights = doc.at("oracle").at("teacher_weights").get<std::string>();
  m.oracle_url = doc.at("oracle").at("url").get<std::string>();
  m.eval_data = doc.at("eval_data").get<std::string>();
  m.out_dir = doc.at("out_dir").get<std::string>();
  const auto& j = doc.at("config");
  auto& c = m.config;
  c.budget = j.at("budget").get<std::uint64_t>();
  c.batch_size = j.at("batch_size").get<std::int64_t>();
  c.gen_rounds = j.at("gen_rounds").get<int>();
  c.lambda = j.at("lambda").get<float>();
  c.lr_gen = j.at("lr_gen").get<float>();
  c.lr_student = j.at("lr_student").get<float>();
  c.momentum = j.at("momentum").get<float>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.student_arch = parse_arch(j.at("student_arch").get<std::string>());
  c.num_classes = j.at("num_classes").get<std::int64_t>();
  c.image = parse_image_shape(j.at("image").get<std::string>());
  c.inner_distill_steps = j.at("inner_distill_steps").get<int>();
  c.replay = j.at("replay").get<bool>();
  c.eval_every = j.at("eval_every").get<int>();
  c.conditional = j.at("conditional").get<bool>();
  c.use_ce = j.at("use_ce").get<bool>();
  c.latent_dim = j.at("latent_dim").get<std::int64_t>();
  return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  out << to_json() << '\n';
  if (!out) throw std::runtime_error("failed writing manifest '" + path.string() + "'");
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace ideal::cli
