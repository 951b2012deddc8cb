#include "ramol/config.hpp"

#include "ramol/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

namespace ramol {

namespace {

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

TauMode parse_tau_mode(std::string_view v) {
  if (v == "fixed") return TauMode::fixed;
  if (v == "running_median") return TauMode::running_median;
  throw ConfigError("tau_mode must be fixed or running_median");
}

std::string_view tau_mode_name(TauMode m) { return m == TauMode::fixed ? "fixed" : "running_median"; }

NoDecayMode parse_no_decay_mode(std::string_view v) {
  if (v == "full_weight") return NoDecayMode::full_weight;
  if (v == "alpha_one") return NoDecayMode::alpha_one;
  throw ConfigError("no_decay_mode must be full_weight or alpha_one");
}

std::string_view no_decay_mode_name(NoDecayMode m) {
  return m == NoDecayMode::full_weight ? "full_weight" : "alpha_one";
}

}  // namespace

void apply_setting(LearnerConfig& c, std::string_view key, std::string_view raw) {
  const auto value = trimmed(raw);
  if (key == "variant") {
    const auto v = parse_variant(value);
    c.variant = v;
    c.horizon = default_config(v).horizon;
  } else if (key == "buffer") {
    c.buffer_capacity = to_size(key, value);
  } else if (key == "k") {
    c.k = to_size(key, value);
  } else if (key == "horizon") {
    if (value == "none") {
      c.horizon.reset();
    } else {
      c.horizon = to_size(key, value);
    }
  } else if (key == "tau") {
    c.tau = to_real(key, value);
  } else if (key == "tau_mode") {
    c.tau_mode = parse_tau_mode(value);
  } else if (key == "rho") {
    c.rho = to_real(key, value);
  } else if (key == "alpha") {
    c.alpha = to_real(key, value);
  } else if (key == "beta") {
    c.beta = to_real(key, value);
  } else if (key == "lr") {
    c.lr = to_real(key, value);
  } else if (key == "lr_decay") {
    c.lr_decay = to_bool(key, value);
  } else if (key == "hidden") {
    c.hidden_dim = to_size(key, value);
  } else if (key == "activation") {
    c.activation = parse_activation(value);
  } else if (key == "seed") {
    c.seed = to_size(key, value);
  } else if (key == "ablation") {
    c.ablation = parse_ablation(value);
  } else if (key == "renormalize") {
    c.renormalize_after_gate = to_bool(key, value);
  } else if (key == "no_decay_mode") {
    c.no_decay_mode = parse_no_decay_mode(value);
  } else if (key == "standardize") {
    c.standardize = to_bool(key, value);
  } else if (key == "clip") {
    c.clip = to_real(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void parse_config(std::istream& in, LearnerConfig& config) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = trimmed(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(config, trimmed(std::string_view(stripped).substr(0, eq)),
                    std::string_view(stripped).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

LearnerConfig load_config_file(const std::filesystem::path& path, LearnerConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  parse_config(in, base);
  return base;
}

nlohmann::json config_to_json(const LearnerConfig& c) {
  nlohmann::json j{{"variant", std::string(to_string(c.variant))},
                   {"buffer", c.buffer_capacity},
                   {"k", c.k},
                   {"horizon", nullptr},
                   {"tau", c.tau},
                   {"tau_mode", std::string(tau_mode_name(c.tau_mode))},
                   {"rho", c.rho},
                   {"alpha", c.alpha},
                   {"beta", c.beta},
                   {"lr", c.lr},
                   {"lr_decay", c.lr_decay},
                   {"hidden", c.hidden_dim},
                   {"activation", std::string(to_string(c.activation))},
                   {"seed", c.seed},
                   {"ablation", to_string(c.ablation)},
                   {"renormalize", c.renormalize_after_gate},
                   {"no_decay_mode", std::string(no_decay_mode_name(c.no_decay_mode))},
                   {"standardize", c.standardize},
                   {"clip", c.clip}};
  if (c.horizon) j["horizon"] = *c.horizon;
  return j;
}

LearnerConfig config_from_json(const nlohmann::json& j) {
  try {
    LearnerConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.buffer_capacity = j.at("buffer").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    if (j.at("horizon").is_null()) {
      c.horizon.reset();
    } else {
      c.horizon = j.at("horizon").get<std::size_t>();
    }
    c.tau = j.at("tau").get<double>();
    c.tau_mode = parse_tau_mode(j.at("tau_mode").get<std::string>());
    c.rho = j.at("rho").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.lr = j.at("lr").get<double>();
    c.lr_decay = j.at("lr_decay").get<bool>();
    c.hidden_dim = j.at("hidden").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.ablation = parse_ablation(j.at("ablation").get<std::string>());
    c.renormalize_after_gate = j.at("renormalize").get<bool>();
    c.no_decay_mode = parse_no_decay_mode(j.at("no_decay_mode").get<std::string>());
    c.standardize = j.at("standardize").get<bool>();
    c.clip = j.at("clip").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
}

}  // namespace ramol
