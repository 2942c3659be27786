// SPDX-License-Identifier: Apache-2.0
#include "hca/config_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  // zero is accepted: it freezes the parameters, which tests rely on
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(heatmap_sigma > 0.0)) throw ConfigError("heatmap_sigma must be positive");
  model.validate();
  loss.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (is.fail() || !is.eof()) throw UsageError("config key '" + key + "': cannot parse '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + value + "'");
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T, typename Member>
Field number_field(Member member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_number<T>(k, v);
          },
          [member](const TrainConfig& c) {
            const T v = std::invoke(member, const_cast<TrainConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(v);
            } else {
              return std::to_string(v);
            }
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("epochs", number_field<int>([](TrainConfig& c) -> int& { return c.epochs; }));
    t.emplace_back("batch_size", number_field<int>([](TrainConfig& c) -> int& { return c.batch_size; }));
    t.emplace_back("learning_rate",
                   number_field<double>([](TrainConfig& c) -> double& { return c.learning_rate; }));
    t.emplace_back("optimizer",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                           if (v != "rmsprop") throw UsageError("config key '" + k + "': only 'rmsprop' is supported");
                           c.optimizer = OptimizerKind::rmsprop;
                         },
                         [](const TrainConfig&) { return std::string("rmsprop"); }});
    t.emplace_back("checkpoint_every",
                   number_field<int>([](TrainConfig& c) -> int& { return c.checkpoint_every; }));
    t.emplace_back("heatmap_sigma",
                   number_field<double>([](TrainConfig& c) -> double& { return c.heatmap_sigma; }));
    t.emplace_back("seed", number_field<std::uint64_t>([](TrainConfig& c) -> std::uint64_t& { return c.seed; }));
    t.emplace_back("model.stacks", number_field<int>([](TrainConfig& c) -> int& { return c.model.stacks; }));
    t.emplace_back("model.channels", number_field<int>([](TrainConfig& c) -> int& { return c.model.channels; }));
    t.emplace_back("model.hourglass_depth",
                   number_field<int>([](TrainConfig& c) -> int& { return c.model.hourglass_depth; }));
    t.emplace_back("model.num_discs", number_field<int>([](TrainConfig& c) -> int& { return c.model.num_discs; }));
    t.emplace_back("model.input_size",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                           const auto x = v.find('x');
                           if (x == std::string::npos) {
                             c.model.input_height = c.model.input_width = parse_number<int>(k, v);
                           } else {
                             c.model.input_height = parse_number<int>(k, trim(v.substr(0, x)));
                             c.model.input_width = parse_number<int>(k, trim(v.substr(x + 1)));
                           }
                         },
                         [](const TrainConfig& c) {
                           return std::to_string(c.model.input_height) + "x" + std::to_string(c.model.input_width);
                         }});
    t.emplace_back("model.mlka.scales",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                           try {
                             c.model.scales = parse_scales(v);
                           } catch (const ConfigError& e) {
                             throw UsageError("config key '" + k + "': " + e.what());
                           }
                         },
                         [](const TrainConfig& c) { return format_scales(c.model.scales); }});
    t.emplace_back("model.seed",
                   number_field<std::uint64_t>([](TrainConfig& c) -> std::uint64_t& { return c.model.seed; }));
    t.emplace_back("loss.lambda_sk",
                   number_field<double>([](TrainConfig& c) -> double& { return c.loss.lambda_sk; }));
    t.emplace_back("loss.beta", number_field<double>([](TrainConfig& c) -> double& { return c.loss.beta; }));
    t.emplace_back("loss.alpha", number_field<double>([](TrainConfig& c) -> double& { return c.loss.alpha; }));
    t.emplace_back("loss.samples", number_field<int>([](TrainConfig& c) -> int& { return c.loss.samples; }));
    t.emplace_back("loss.prototype_mode",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                           if (v == "expectation") {
                             c.loss.prototype_mode = PrototypeMode::expectation;
                           } else if (v == "stochastic") {
                             c.loss.prototype_mode = PrototypeMode::stochastic;
                           } else {
                             throw UsageError("config key '" + k + "': expected expectation|stochastic");
                           }
                         },
                         [](const TrainConfig& c) {
                           return std::string(c.loss.prototype_mode == PrototypeMode::expectation ? "expectation"
                                                                                                  : "stochastic");
                         }});
    t.emplace_back("loss.alpha_learnable",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                           c.loss.alpha_learnable = parse_bool(k, v);
                         },
                         [](const TrainConfig& c) { return std::string(c.loss.alpha_learnable ? "true" : "false"); }});
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  std::string valid;
  for (const auto& k : config_keys()) valid += "\n  " + k;
  throw UsageError("unknown config key '" + key + "'; valid keys:" + valid);
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace hca
