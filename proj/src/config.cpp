#include "lgn/config.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

namespace lgn {

namespace {

struct PresetValues {
  const char* name;
  int memory_size;
  double lambda_c;
  double lambda_s;
  double lambda;
  double gamma;
};

// Values per dataset: I, lambda_c, lambda_s, lambda, gamma.
constexpr PresetValues kPresets[] = {
    {"ped2", 10, 10.0, 5.0, 0.6, 0.009},
    {"avenue", 10, 10.0, 2.0, 0.5, 0.006},
    {"shanghaitech", 200, 1.0, 1.0, 0.8, 0.0135},
    {"synthetic", 10, 0.1, 0.1, 0.6, 0.1},
};

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UserError(key + ": expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UserError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig RunConfig::from_preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name != p.name) continue;
    RunConfig c;
    c.preset = name;
    if (name == "synthetic") {
      c.dims = ModelDims::synthetic();
      c.train.epochs = 5;
      c.train.learning_rate = 1e-3;
    } else {
      c.dims = ModelDims{};
      c.train.epochs = 60;
      c.train.learning_rate = 2e-4;
    }
    c.dims.memory_size = p.memory_size;
    c.train.batch_size = 8;
    c.train.weights.lambda_c = p.lambda_c;
    c.train.weights.lambda_s = p.lambda_s;
    c.train.weights.alpha = 1.0;
    c.eval.lambda = p.lambda;
    c.eval.gamma = p.gamma;
    return c;
  }
  throw UserError("unknown preset '" + name + "' (expected ped2, avenue, shanghaitech, synthetic)");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "preset", "variant", "data", "out", "checkpoint", "video", "seed", "epochs", "batch_size",
      "learning_rate", "clip_norm", "lambda_c", "lambda_s", "alpha", "lambda", "gamma", "memory_size", "n",
      "input_size", "hidden", "layers"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    if (value != preset) throw UserError("preset must be chosen before other keys are applied");
  } else if (key == "variant") {
    variant = parse_variant(value);
  } else if (key == "data") {
    data = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "video") {
    video = value;
  } else if (key == "seed") {
    train.seed = std::uint64_t(to_int(key, value));
  } else if (key == "epochs") {
    train.epochs = int(to_int(key, value));
  } else if (key == "batch_size") {
    train.batch_size = int(to_int(key, value));
  } else if (key == "learning_rate") {
    train.learning_rate = to_double(key, value);
  } else if (key == "clip_norm") {
    train.clip_norm = to_double(key, value);
  } else if (key == "lambda_c") {
    train.weights.lambda_c = to_double(key, value);
  } else if (key == "lambda_s") {
    train.weights.lambda_s = to_double(key, value);
  } else if (key == "alpha") {
    train.weights.alpha = to_double(key, value);
  } else if (key == "lambda") {
    eval.lambda = to_double(key, value);
    if (eval.lambda < 0.0 || eval.lambda > 1.0) throw UserError("lambda must lie in [0, 1]");
  } else if (key == "gamma") {
    eval.gamma = value == "inf" ? std::numeric_limits<double>::infinity() : to_double(key, value);
  } else if (key == "memory_size") {
    dims.memory_size = int(to_int(key, value));
  } else if (key == "n") {
    dims.inputs = int(to_int(key, value));
  } else if (key == "input_size") {
    dims.input_size = int(to_int(key, value));
  } else if (key == "hidden") {
    dims.hidden = int(to_int(key, value));
  } else if (key == "layers") {
    dims.layers = int(to_int(key, value));
  } else {
    throw UserError("unknown config key '" + key + "'");
  }
}

RunConfig RunConfig::resolve(const KeyValues& file, const KeyValues& flags) {
  std::string preset = "synthetic";
  if (auto it = file.find("preset"); it != file.end()) preset = it->second;
  if (auto it = flags.find("preset"); it != flags.end()) preset = it->second;
  RunConfig c = from_preset(preset);
  for (const auto& [k, v] : file) {
    if (k != "preset") c.set(k, v);
  }
  for (const auto& [k, v] : flags) {
    if (k != "preset") c.set(k, v);
  }
  c.dims.validate();
  c.train.validate();
  return c;
}

std::string RunConfig::dump() const {
  std::ostringstream o;
  o << "preset = " << preset << '\n'
    << "variant = " << to_string(variant) << '\n'
    << "data = " << data.string() << '\n'
    << "out = " << out.string() << '\n'
    << "checkpoint = " << checkpoint.string() << '\n'
    << "seed = " << train.seed << '\n'
    << "epochs = " << train.epochs << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "learning_rate = " << fmt(train.learning_rate) << '\n'
    << "clip_norm = " << fmt(train.clip_norm) << '\n'
    << "lambda_c = " << fmt(train.weights.lambda_c) << '\n'
    << "lambda_s = " << fmt(train.weights.lambda_s) << '\n'
    << "alpha = " << fmt(train.weights.alpha) << '\n'
    << "lambda = " << fmt(eval.lambda) << '\n'
    << "gamma = " << fmt(eval.gamma) << '\n'
    << "memory_size = " << dims.memory_size << '\n'
    << "n = " << dims.inputs << '\n'
    << "input_size = " << dims.input_size << '\n'
    << "hidden = " << dims.hidden << '\n'
    << "layers = " << dims.layers << '\n';
  return o.str();
}

namespace config {

KeyValues parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw UserError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UserError(where + "missing key");
    const auto& known = RunConfig::keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) throw UserError(where + "unknown key '" + key + "'");
    if (kv.count(key)) throw UserError(where + "duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

KeyValues parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"ped2", "avenue", "shanghaitech", "synthetic"};
  return names;
}

}  // namespace config
}  // namespace lgn
