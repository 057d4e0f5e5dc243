#include "wdro/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace wdro {

std::string to_string(Study s) { return s == Study::battery ? "battery" : "vehicle"; }

std::string to_string(DepthMode m) { return m == DepthMode::per_depth ? "per_depth" : "one_step"; }

AmbiguityConfig ExperimentConfig::ambiguity() const {
  return study == Study::battery ? AmbiguityConfig{battery.eta, battery.beta}
                                 : AmbiguityConfig{vehicle.eta, vehicle.beta};
}

int ExperimentConfig::n_target() const {
  return study == Study::battery ? battery.n_target : vehicle.n_target;
}

DepthMode ExperimentConfig::depth_mode() const {
  return study == Study::battery ? battery.depth_mode : vehicle.depth_mode;
}

double ExperimentConfig::mutation_fraction() const {
  return study == Study::battery ? battery.mutation_fraction : vehicle.mutation_fraction;
}

void apply_full_scale(ExperimentConfig& config) {
  config.mutants = config.study == Study::battery ? 250000 : 750000;
  config.seeds.clear();
  for (std::uint64_t s = 1; s <= 10; ++s) config.seeds.push_back(s);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(key, "expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(key, "expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected on/off, got '" + s + "'");
}

struct Entry {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string& key, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Access>
Entry real(std::string key, Access access) {
  return {std::move(key),
          [access](ExperimentConfig& c, const std::string& k, std::string_view v) {
            access(c) = parse_double(k, v);
          },
          [access](const ExperimentConfig& c) {
            return fmt(access(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Access>
Entry integer(std::string key, Access access) {
  return {std::move(key),
          [access](ExperimentConfig& c, const std::string& k, std::string_view v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = parse_int<T>(k, v);
          },
          [access](const ExperimentConfig& c) {
            return std::to_string(access(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Access>
Entry boolean(std::string key, Access access) {
  return {std::move(key),
          [access](ExperimentConfig& c, const std::string& k, std::string_view v) {
            access(c) = parse_bool(k, v);
          },
          [access](const ExperimentConfig& c) {
            return std::string(access(const_cast<ExperimentConfig&>(c)) ? "on" : "off");
          }};
}

template <typename Access>
Entry real_list(std::string key, Access access, std::size_t size) {
  return {std::move(key),
          [access, size](ExperimentConfig& c, const std::string& k, std::string_view v) {
            std::vector<double> out;
            for (const auto& part : split(v, ',')) out.push_back(parse_double(k, part));
            if (out.size() != size)
              throw ConfigError(k, "expected " + std::to_string(size) + " comma-separated values");
            access(c) = std::move(out);
          },
          [access](const ExperimentConfig& c) {
            std::string s;
            for (double v : access(const_cast<ExperimentConfig&>(c))) {
              if (!s.empty()) s += ", ";
              s += fmt(v);
            }
            return s;
          }};
}

template <typename Access>
Entry depth_mode(std::string key, Access access) {
  return {std::move(key),
          [access](ExperimentConfig& c, const std::string& k, std::string_view v) {
            const auto s = trim(v);
            if (s == "per_depth") access(c) = DepthMode::per_depth;
            else if (s == "one_step") access(c) = DepthMode::one_step;
            else throw ConfigError(k, "expected per_depth or one_step, got '" + s + "'");
          },
          [access](const ExperimentConfig& c) {
            return to_string(access(const_cast<ExperimentConfig&>(c)));
          }};
}

#define FIELD(expr) [](ExperimentConfig& c) -> auto& { return expr; }

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back({"general.study",
                 [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                   const auto s = trim(v);
                   if (s == "battery") c.study = Study::battery;
                   else if (s == "vehicle") c.study = Study::vehicle;
                   else throw ConfigError(k, "expected battery or vehicle, got '" + s + "'");
                 },
                 [](const ExperimentConfig& c) { return to_string(c.study); }});
    e.push_back(boolean("general.dro", FIELD(c.dro_enabled)));
    e.push_back({"general.seeds",
                 [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                   try {
                     c.seeds = parse_seed_list(v);
                   } catch (const ConfigError&) {
                     throw ConfigError(k, "bad seed list '" + trim(v) + "'");
                   } catch (const std::invalid_argument& err) {
                     throw ConfigError(k, err.what());
                   }
                 },
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (auto seed : c.seeds) {
                     if (!s.empty()) s += ",";
                     s += std::to_string(seed);
                   }
                   return s;
                 }});

    e.push_back(integer("es.mutants", FIELD(c.mutants)));
    e.push_back(integer("es.iterations", FIELD(c.es_iterations)));
    e.push_back(integer("es.threads", FIELD(c.threads)));

    e.push_back(integer("model.hidden", FIELD(c.hidden)));
    e.push_back(boolean("model.predict_increments", FIELD(c.predict_increments)));
    e.push_back({"model.optimizer",
                 [](ExperimentConfig& c, const std::string& k, std::string_view v) {
                   const auto s = trim(v);
                   if (s == "adam") c.train.method = TrainMethod::adam;
                   else if (s == "lm") c.train.method = TrainMethod::levenberg_marquardt;
                   else throw ConfigError(k, "expected adam or lm, got '" + s + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.train.method == TrainMethod::adam ? "adam" : "lm");
                 }});
    e.push_back(integer("model.iterations", FIELD(c.train.iterations)));
    e.push_back(real("model.learning_rate", FIELD(c.train.learning_rate)));
    e.push_back(real("model.lr_decay", FIELD(c.train.lr_decay)));
    e.push_back(real("model.beta1", FIELD(c.train.beta1)));
    e.push_back(real("model.beta2", FIELD(c.train.beta2)));
    e.push_back(real("model.adam_epsilon", FIELD(c.train.adam_epsilon)));
    e.push_back(real("model.lm_mu", FIELD(c.train.lm_mu)));

    e.push_back(integer("residuals.max_starts", FIELD(c.residual_max_starts)));
    e.push_back(integer("residuals.window", FIELD(c.residual_window)));
    e.push_back(real("residuals.c_drift", FIELD(c.c_drift)));

    e.push_back(real("battery.Q", FIELD(c.battery.params.Q)));
    e.push_back(real("battery.R0", FIELD(c.battery.params.R0)));
    e.push_back(real("battery.R1", FIELD(c.battery.params.R1)));
    e.push_back(real("battery.R2", FIELD(c.battery.params.R2)));
    e.push_back(real("battery.C1", FIELD(c.battery.params.C1)));
    e.push_back(real("battery.C2", FIELD(c.battery.params.C2)));
    e.push_back(real("battery.dt", FIELD(c.battery.params.dt)));
    e.push_back(real("battery.ocv_base", FIELD(c.battery.params.ocv_base)));
    e.push_back(real("battery.ocv_slope", FIELD(c.battery.params.ocv_slope)));
    e.push_back(real("battery.soc0", FIELD(c.battery.soc0)));
    e.push_back(real("battery.v_rc1_0", FIELD(c.battery.v_rc1_0)));
    e.push_back(real("battery.v_rc2_0", FIELD(c.battery.v_rc2_0)));
    e.push_back(real("battery.soc_target", FIELD(c.battery.soc_target)));
    e.push_back(real("battery.soc_tolerance", FIELD(c.battery.soc_tolerance)));
    e.push_back(real("battery.v_max", FIELD(c.battery.v_max)));
    e.push_back(real("battery.i_min", FIELD(c.battery.i_min)));
    e.push_back(real("battery.i_max", FIELD(c.battery.i_max)));
    e.push_back(real("battery.i_safe", FIELD(c.battery.i_safe)));
    e.push_back(integer("battery.steps", FIELD(c.battery.steps)));
    e.push_back(real("battery.eta", FIELD(c.battery.eta)));
    e.push_back(real("battery.beta", FIELD(c.battery.beta)));
    e.push_back(integer("battery.n_target", FIELD(c.battery.n_target)));
    e.push_back(real("battery.g_min", FIELD(c.battery.g_min)));
    e.push_back(depth_mode("battery.residual_depths", FIELD(c.battery.depth_mode)));
    e.push_back(real("battery.mutation_fraction", FIELD(c.battery.mutation_fraction)));

    e.push_back(real("vehicle.length", FIELD(c.vehicle.params.length)));
    e.push_back(real("vehicle.dt", FIELD(c.vehicle.params.dt)));
    e.push_back(real("vehicle.x1_0", FIELD(c.vehicle.start.x1)));
    e.push_back(real("vehicle.x2_0", FIELD(c.vehicle.start.x2)));
    e.push_back(real("vehicle.x3_0", FIELD(c.vehicle.start.x3)));
    e.push_back(real("vehicle.x4_0", FIELD(c.vehicle.start.x4)));
    e.push_back(real_list("vehicle.u_min", FIELD(c.vehicle.u_min), 2));
    e.push_back(real_list("vehicle.u_max", FIELD(c.vehicle.u_max), 2));
    e.push_back(real_list("vehicle.bootstrap", FIELD(c.vehicle.bootstrap), 2));
    e.push_back(integer("vehicle.max_steps", FIELD(c.vehicle.max_steps)));
    e.push_back(real("vehicle.eta", FIELD(c.vehicle.eta)));
    e.push_back(real("vehicle.beta", FIELD(c.vehicle.beta)));
    e.push_back(integer("vehicle.n_target", FIELD(c.vehicle.n_target)));
    e.push_back(real("vehicle.g_min", FIELD(c.vehicle.g_min)));
    e.push_back(depth_mode("vehicle.residual_depths", FIELD(c.vehicle.depth_mode)));
    e.push_back(real("vehicle.mutation_fraction", FIELD(c.vehicle.mutation_fraction)));
    e.push_back({"vehicle.field_file",
                 [](ExperimentConfig& c, const std::string&, std::string_view v) { c.vehicle.field_file = trim(v); },
                 [](const ExperimentConfig& c) { return c.vehicle.field_file; }});

    e.push_back(integer("obstacles.count", FIELD(c.vehicle.field.n_gaussians)));
    e.push_back(real("obstacles.amplitude_min", FIELD(c.vehicle.field.amplitude_min)));
    e.push_back(real("obstacles.amplitude_max", FIELD(c.vehicle.field.amplitude_max)));
    e.push_back(real("obstacles.sigma_min", FIELD(c.vehicle.field.sigma_min)));
    e.push_back(real("obstacles.sigma_max", FIELD(c.vehicle.field.sigma_max)));
    e.push_back(real("obstacles.cutoff_quantile", FIELD(c.vehicle.field.cutoff_quantile)));
    e.push_back(real("obstacles.extent", FIELD(c.vehicle.field.extent)));
    e.push_back(real("obstacles.resolution", FIELD(c.vehicle.field.resolution)));
    e.push_back(real("obstacles.corridor_width", FIELD(c.vehicle.field.corridor_width)));
    e.push_back(integer("obstacles.max_attempts", FIELD(c.vehicle.field.max_attempts)));

    e.push_back(boolean("output.timing_in_summary", FIELD(c.timing_in_summary)));
    e.push_back(boolean("output.plots", FIELD(c.write_plots)));
    return e;
  }();
  return entries;
}

#undef FIELD

const Entry* find_entry(std::string_view key) {
  for (const auto& e : schema()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(parse_int<std::uint64_t>("seed", part));
      continue;
    }
    const auto lo = parse_int<std::uint64_t>("seed", part.substr(0, dots));
    const auto hi = parse_int<std::uint64_t>("seed", part.substr(dots + 2));
    if (hi < lo || hi - lo > 100000) throw std::invalid_argument("bad seed range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  const Entry* e = find_entry(k);
  if (!e) throw ConfigError(k, "unknown key");
  e->set(config, k, value);
}

void apply_assignment(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError(trim(assignment), "expected key=value");
  apply_override(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void apply_text(ExperimentConfig& config, std::string_view text) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no), "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    const std::string name = trim(std::string_view(line).substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    apply_override(config, key, std::string_view(line).substr(eq + 1));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(base, ss.str());
  return base;
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& e : schema()) {
    const auto dot = e.key.find('.');
    const std::string sec = e.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += e.key.substr(dot + 1) + " = " + e.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : schema()) keys.push_back(e.key);
  return keys;
}

void ExperimentConfig::validate() const {
  require(!seeds.empty(), "general.seeds", "at least one seed required");
  require(mutants >= 1, "es.mutants", "must be >= 1");
  require(es_iterations >= 1, "es.iterations", "must be >= 1");
  require(threads >= 1 && threads <= 256, "es.threads", "must be in [1, 256]");
  require(hidden >= 1 && hidden <= kMaxHidden, "model.hidden", "must be in [1, 64]");
  require(train.iterations >= 0, "model.iterations", "must be >= 0");
  require(train.learning_rate > 0.0, "model.learning_rate", "must be > 0");
  require(train.lr_decay > 0.0 && train.lr_decay <= 1.0, "model.lr_decay", "must be in (0, 1]");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0, "model.beta1", "must be in [0, 1)");
  require(train.beta2 >= 0.0 && train.beta2 < 1.0, "model.beta2", "must be in [0, 1)");
  require(train.adam_epsilon > 0.0, "model.adam_epsilon", "must be > 0");
  require(train.lm_mu > 0.0, "model.lm_mu", "must be > 0");
  require(residual_max_starts >= 1, "residuals.max_starts", "must be >= 1");
  require(c_drift >= 0.0, "residuals.c_drift", "must be >= 0");

  const auto& b = battery;
  const auto& p = b.params;
  require(p.Q > 0, "battery.Q", "must be > 0");
  require(p.R0 > 0, "battery.R0", "must be > 0");
  require(p.R1 > 0, "battery.R1", "must be > 0");
  require(p.R2 > 0, "battery.R2", "must be > 0");
  require(p.C1 > 0, "battery.C1", "must be > 0");
  require(p.C2 > 0, "battery.C2", "must be > 0");
  require(p.dt > 0, "battery.dt", "must be > 0");
  require(b.soc0 >= 0.0 && b.soc0 <= 1.0, "battery.soc0", "must be in [0, 1]");
  require(b.soc_target > 0.0 && b.soc_target <= 1.0, "battery.soc_target", "must be in (0, 1]");
  require(b.soc_tolerance >= 0.0 && b.soc_tolerance < b.soc_target, "battery.soc_tolerance",
          "must be in [0, soc_target)");
  require(b.mutation_fraction > 0.0 && b.mutation_fraction <= 10.0, "battery.mutation_fraction",
          "must be in (0, 10]");
  require(b.i_min < b.i_max, "battery.i_max", "must exceed battery.i_min");
  require(b.i_safe >= b.i_min && b.i_safe <= b.i_max, "battery.i_safe",
          "must lie in [i_min, i_max]");
  require(b.steps >= 1, "battery.steps", "must be >= 1");
  require(b.eta > 0.0 && b.eta < 1.0, "battery.eta", "must be in (0, 1)");
  require(b.beta >= 0.0 && b.beta < 1.0, "battery.beta", "must be in [0, 1)");
  require(b.n_target >= 1 && b.n_target <= 64, "battery.n_target", "must be in [1, 64]");
  require(b.g_min < b.v_max, "battery.g_min", "must be below battery.v_max");

  const auto& v = vehicle;
  require(v.params.length > 0, "vehicle.length", "must be > 0");
  require(v.params.dt > 0, "vehicle.dt", "must be > 0");
  for (std::size_t i = 0; i < 2; ++i) {
    require(v.u_min[i] < v.u_max[i], "vehicle.u_max", "must exceed vehicle.u_min");
    require(v.bootstrap[i] >= v.u_min[i] && v.bootstrap[i] <= v.u_max[i], "vehicle.bootstrap",
            "must lie inside the input box");
  }
  require(v.max_steps >= 1, "vehicle.max_steps", "must be >= 1");
  require(v.mutation_fraction > 0.0 && v.mutation_fraction <= 10.0, "vehicle.mutation_fraction",
          "must be in (0, 10]");
  require(v.eta > 0.0 && v.eta < 1.0, "vehicle.eta", "must be in (0, 1)");
  require(v.beta >= 0.0 && v.beta < 1.0, "vehicle.beta", "must be in [0, 1)");
  require(v.n_target >= 1 && v.n_target <= 64, "vehicle.n_target", "must be in [1, 64]");
  const auto& f = v.field;
  require(f.n_gaussians >= 0, "obstacles.count", "must be >= 0");
  require(f.amplitude_min > 0 && f.amplitude_min <= f.amplitude_max, "obstacles.amplitude_min",
          "need 0 < amplitude_min <= amplitude_max");
  require(f.sigma_min > 0 && f.sigma_min <= f.sigma_max, "obstacles.sigma_min",
          "need 0 < sigma_min <= sigma_max");
  require(f.cutoff_quantile > 0 && f.cutoff_quantile < 1, "obstacles.cutoff_quantile",
          "must be in (0, 1)");
  require(f.extent > 0, "obstacles.extent", "must be > 0");
  require(f.resolution > 0 && f.resolution <= f.extent, "obstacles.resolution",
          "must be in (0, extent]");
  require(f.corridor_width >= 0, "obstacles.corridor_width", "must be >= 0");
  require(f.max_attempts >= 1, "obstacles.max_attempts", "must be >= 1");
}

}  // namespace wdro
