#pragma once

// key=value training configuration files. '#' starts a comment.

#include <charconv>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "beamparse/errors.hpp"
#include "beamparse/perceptron.hpp"
#include "beamparse/trainer.hpp"

namespace beamparse {

struct PipelineConfig {
  TrainerConfig trainer;
  PerceptronConfig perceptron;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw DataError("config: bad value '" + value + "' for " + key);
  }
  return out;
}

}  // namespace detail

// Applies one setting. Throws DataError for unknown keys or bad values.
inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  auto& t = cfg.trainer;
  auto& p = cfg.perceptron;
  auto split_ints = [&](int* a, int* b, int* c) {
    std::stringstream ss(value);
    std::string part;
    int* targets[] = {a, b, c};
    int n = 0;
    while (std::getline(ss, part, ',')) {
      if (n == 3 || !targets[n]) throw DataError("config: too many values for " + key);
      *targets[n++] = parse_number<int>(key, detail::trim(part));
    }
    if (n == 0 || (c && n != 3) || (!c && n != 2)) throw DataError("config: wrong number of values for " + key);
  };

  if (key == "eta0") t.eta0 = parse_number<double>(key, value);
  else if (key == "mu") t.mu = parse_number<double>(key, value);
  else if (key == "gamma") t.gamma = parse_number<double>(key, value);
  else if (key == "lambda") t.lambda = parse_number<double>(key, value);
  else if (key == "decay") t.decay = parse_number<double>(key, value);
  else if (key == "batch") t.batch = parse_number<int>(key, value);
  else if (key == "seed") t.seed = p.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") t.patience = parse_number<int>(key, value);
  else if (key == "max_epochs") t.max_epochs = parse_number<int>(key, value);
  else if (key == "max_seconds") t.max_seconds = parse_number<double>(key, value);
  else if (key == "alpha_min") t.alpha_min = parse_number<double>(key, value);
  else if (key == "alpha_max") t.alpha_max = parse_number<double>(key, value);
  else if (key == "averaging_rate") t.averaging_rate = parse_number<double>(key, value);
  else if (key == "word_dim") t.word_dim = parse_number<int>(key, value);
  else if (key == "tag_dim") t.tag_dim = parse_number<int>(key, value);
  else if (key == "label_dim") t.label_dim = parse_number<int>(key, value);
  else if (key == "dims") split_ints(&t.word_dim, &t.tag_dim, &t.label_dim);
  else if (key == "hidden1") t.hidden1 = parse_number<int>(key, value);
  else if (key == "hidden2") t.hidden2 = parse_number<int>(key, value);
  else if (key == "hidden") split_ints(&t.hidden1, &t.hidden2, nullptr);
  else if (key == "min_count") t.min_count = parse_number<std::size_t>(key, value);
  else if (key == "init_variance") t.init.weight_variance = parse_number<double>(key, value);
  else if (key == "hidden_bias") t.init.hidden_bias = parse_number<double>(key, value);
  else if (key == "beam") p.beam = parse_number<int>(key, value);
  else if (key == "perceptron_epochs") p.epochs = parse_number<int>(key, value);
  else if (key == "phi") {
    try {
      p.composition = PhiComposition::parse(value);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("config: ") + e.what());
    }
  } else if (key == "averaged") p.averaged = parse_number<int>(key, value) != 0;
  else throw DataError("config: unknown key '" + key + "'");
}

inline void read_config(std::istream& in, PipelineConfig& cfg) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(line_no) + ": expected key=value");
    set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

}  // namespace beamparse
