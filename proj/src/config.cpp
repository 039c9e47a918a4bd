#include "subsde/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace subsde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model.name", "model.dim", "model.b", "model.a", "model.x0", "model.potential", "model.strength",
      "subordinator.beta", "subordinator.c", "subordinator.eps",
      "run.t", "run.n", "run.dt_max", "run.seed", "run.threads"};
  return keys;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) {
    std::ostringstream os;
    os << std::setprecision(17) << v.get<double>();
    return os.str();
  }
  throw ConfigError("unsupported JSON value: " + v.dump());
}

void flatten(const nlohmann::json& node, const std::string& prefix, std::map<std::string, std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else if (it->is_array()) {
      std::string joined;
      for (const auto& v : *it) joined += (joined.empty() ? "" : ",") + json_scalar(v);
      out[key] = joined;
    } else {
      out[key] = json_scalar(*it);
    }
  }
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("invalid field " + key + ": expected a number, got '" + text + "'");
  }
  return v;
}

Mat square_from(const std::string& key, const std::vector<double>& v, int d) {
  if (static_cast<int>(v.size()) != d * d) {
    throw ConfigError("invalid field " + key + ": expected " + std::to_string(d * d) + " entries");
  }
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
  return m;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      flatten(nlohmann::json::parse(text), "", cfg.entries_);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    return cfg;
  }
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    cfg.entries_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  // Unsectioned keys first so that no section header captures them.
  for (const auto& [key, value] : entries_) {
    if (key.find('.') == std::string::npos) os << key << " = " << value << '\n';
  }
  std::string current;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (section != current) {
      os << '[' << section << "]\n";
      current = section;
    }
    os << key.substr(dot + 1) << " = " << value << '\n';
  }
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string ExperimentConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : to_double(key, it->second);
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string t = trim(it->second);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("invalid field " + key + ": expected a nonnegative integer, got '" + it->second + "'");
  }
  return v;
}

std::vector<double> ExperimentConfig::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(key, item));
  return out;
}

void ExperimentConfig::validate() const {
  for (const char* key : {"model.name", "subordinator.beta", "subordinator.c"}) {
    if (!has(key)) throw ConfigError(std::string("missing field ") + key);
  }
  for (const auto& [key, value] : entries_) {
    if (key.rfind("experiment.", 0) == 0) continue;
    if (!known_keys().count(key)) throw ConfigError("unknown field " + key);
  }
  const std::string name = model_name();
  static const std::set<std::string> models = {"zero-drift", "linear", "kinetic-linear", "pendulum", "hamiltonian"};
  if (!models.count(name)) throw ConfigError("invalid field model.name: unknown model '" + name + "'");
  try {
    (void)spec();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid field subordinator: ") + e.what());
  }
  const double e = eps();
  if (!(e > 0.0 && e < 1.0)) throw ConfigError("invalid field subordinator.eps: must lie in (0, 1)");
  if (!(horizon() > 0.0)) throw ConfigError("invalid field run.t: must be positive");
  if (dt_max() < 0.0) throw ConfigError("invalid field run.dt_max: must be nonnegative");
  if (has("run.n") && get_u64("run.n", 0) == 0) throw ConfigError("invalid field run.n: must be positive");
  if (threads() == 0) throw ConfigError("invalid field run.threads: must be positive");
  (void)seed();
  const SdeModel m = model();
  const Vec x = x0();
  if (x.size() != m.d) throw ConfigError("invalid field model.x0: expected " + std::to_string(m.d) + " entries");
}

SubordinatorSpec ExperimentConfig::spec() const {
  return SubordinatorSpec::stable(get_double("subordinator.beta", 0.5), get_double("subordinator.c", 1.0));
}

std::size_t ExperimentConfig::paths(std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64("run.n", fallback));
}

SdeModel ExperimentConfig::model() const {
  const std::string name = model_name();
  auto noise = [&](int d, const Mat& fallback) {
    return has("model.a") ? square_from("model.a", get_list("model.a", {}), d) : fallback;
  };
  try {
    if (name == "zero-drift") {
      const int d = static_cast<int>(get_u64("model.dim", 2));
      if (d < 1 || d > kMaxDim) throw ConfigError("invalid field model.dim: out of range");
      return zero_drift_model(noise(d, Mat::Identity(d, d)));
    }
    if (name == "linear") {
      const auto b = get_list("model.b", {});
      const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(b.size()))));
      if (b.empty() || d * d != static_cast<int>(b.size()) || d > kMaxDim) {
        throw ConfigError("invalid field model.b: expected a square matrix, row-major");
      }
      return linear_model(square_from("model.b", b, d), noise(d, Mat::Identity(d, d)));
    }
    if (name == "kinetic-linear") {
      SdeModel m = kinetic_linear_model();
      if (has("model.a")) m.a = noise(2, m.a);
      return m;
    }
    if (name == "pendulum") {
      SdeModel m = pendulum_model();
      if (has("model.a")) m.a = noise(2, m.a);
      return m;
    }
    if (name == "hamiltonian") {
      const int n = static_cast<int>(get_u64("model.dim", 1));
      if (n < 1 || 2 * n > kMaxDim) throw ConfigError("invalid field model.dim: out of range");
      const std::string potential = get_string("model.potential", "harmonic");
      const double k = get_double("model.strength", 1.0);
      Hamiltonian h;
      h.d = n;
      std::function<double(double)> du;
      std::function<double(double)> d2u;
      if (potential == "harmonic") {
        du = [k](double x) { return k * x; };
        d2u = [k](double) { return k; };
      } else if (potential == "cosine") {
        du = [k](double x) { return -k * std::sin(x); };
        d2u = [k](double x) { return -k * std::cos(x); };
      } else if (potential == "double-well") {
        du = [k](double x) { return k * x * (x * x - 1.0); };
        d2u = [k](double x) { return k * (3.0 * x * x - 1.0); };
      } else {
        throw ConfigError("invalid field model.potential: unknown potential '" + potential + "'");
      }
      h.gradient = [n, du](const Vec& x, const Vec& y) {
        Vec g(2 * n);
        for (int i = 0; i < n; ++i) g[i] = du(x[i]);
        g.tail(n) = y;
        return g;
      };
      h.hessian = [n, d2u](const Vec& x, const Vec&) {
        Mat hs = Mat::Zero(2 * n, 2 * n);
        for (int i = 0; i < n; ++i) {
          hs(i, i) = d2u(x[i]);
          hs(n + i, n + i) = 1.0;
        }
        return hs;
      };
      SdeModel m = hamiltonian_model(h, Mat::Identity(n, n));
      if (has("model.a")) m.a = noise(2 * n, m.a);
      m.name = "hamiltonian-" + potential;
      return m;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid field model: ") + e.what());
  }
  throw ConfigError("invalid field model.name: unknown model '" + name + "'");
}

Vec ExperimentConfig::x0() const {
  const int d = model().d;
  if (!has("model.x0")) return Vec::Zero(d);
  const auto v = get_list("model.x0", {});
  if (static_cast<int>(v.size()) != d) {
    throw ConfigError("invalid field model.x0: expected " + std::to_string(d) + " entries");
  }
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = v[static_cast<std::size_t>(i)];
  return x;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace subsde
