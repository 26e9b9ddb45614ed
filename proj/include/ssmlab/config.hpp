#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmlab/errors.hpp"
#include "ssmlab/optimize.hpp"

namespace ssmlab {

using Json = nlohmann::json;

struct TeacherConfig {
  std::string kind = "canonical";  // canonical | diag
  std::size_t d = 0;               // canonical only
  std::vector<double> values;      // diag only
  std::size_t head_width = 0;      // 0: linear teacher
};

struct HeadConfig {
  bool mlp = false;
  std::size_t width = 0;
  double init_sd = 0.03;
};

struct StudentConfig {
  std::size_t d = 0;
  bool train_bc = false;
  HeadConfig head;
};

struct SequenceGroup {
  std::vector<std::size_t> indices;  // 1-based
  std::size_t count = 0;
};

struct DataConfig {
  std::size_t kappa = 0;
  std::string preset;  // "", "s1" or "s2"
  std::optional<SequenceGroup> baseline;
  std::optional<SequenceGroup> special;
  bool use_special = false;
};

/// Either a literal gap or scale * exp(exponent * log10(sd_a)).
struct DiffRule {
  std::optional<double> value;
  double scale = 0.0;
  double exponent = 0.0;

  double resolve(double sd_a) const {
    return value ? *value : scale * std::exp(exponent * std::log10(sd_a));
  }
};

struct InitConfig {
  double sd_a = 0.0;
  std::optional<double> sd_bc;
  DiffRule diff;
  std::vector<double> extension_factors;
  double shift_a = 0.0;
  double shift_b = 0.0;
  bool absolute = true;
};

struct EvalConfig {
  std::size_t gen_length = 40;
  std::size_t test_set_size = 2000;
  std::size_t test_length = 40;
};

struct ExperimentConfig {
  std::string name;
  std::string arm;  // empty unless the file declares arms
  TeacherConfig teacher;
  StudentConfig student;
  DataConfig data;
  InitConfig init;
  OptimizerSpec optimizer;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds;

  /// File stem used for artifacts: name, or name-arm.
  std::string label() const { return arm.empty() ? name : name + "-" + arm; }
};

namespace detail {

/// Typed access to one JSON object with field-path error messages and a
/// check for unknown keys.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "required field is missing");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "expected a finite number");
    return x;
  }
  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    return has(key) ? number(key) : fallback;
  }

  std::size_t count(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(at(key), "expected a non-negative integer");
    return v.get<std::size_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    seen_.insert(key);
    return has(key) ? count(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() < 0)
        throw ConfigError(at(key) + "[" + std::to_string(i) + "]",
                          "expected a non-negative integer");
      out.push_back(v[i].get<std::size_t>());
    }
    return out;
  }

  ObjectReader object(const std::string& key) { return ObjectReader(raw(key), at(key)); }

  void mark(const std::string& key) { seen_.insert(key); }

  /// Throw on any key that no accessor asked for.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(at(k), "unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline SequenceGroup parse_group(ObjectReader r, std::size_t kappa) {
  SequenceGroup g;
  g.indices = r.counts("indices");
  g.count = r.count("count");
  for (std::size_t i = 0; i < g.indices.size(); ++i)
    if (g.indices[i] == 0 || g.indices[i] > kappa)
      throw ConfigError(r.at("indices") + "[" + std::to_string(i) + "]",
                        "index " + std::to_string(g.indices[i]) + " outside [1, " +
                            std::to_string(kappa) + "] (data.kappa)");
  if (g.indices.empty()) throw ConfigError(r.at("indices"), "must list at least one index");
  r.finish();
  return g;
}

inline OptimizerKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "gradient_flow") return OptimizerKind::gradient_flow;
  if (s == "adaptive_gd") return OptimizerKind::adaptive_gd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError(path, "unknown optimizer '" + s + "' (gradient_flow | adaptive_gd | adam)");
}

inline OptimizerSpec parse_optimizer(ObjectReader r) {
  OptimizerSpec o;
  o.kind = parse_kind(r.string("kind"), r.at("kind"));
  o.base_lr = r.number("base_lr", o.base_lr);
  o.beta = r.number("beta", o.beta);
  o.softening = r.number("softening", o.softening);
  o.adam_beta1 = r.number("adam_beta1", o.adam_beta1);
  o.adam_beta2 = r.number("adam_beta2", o.adam_beta2);
  o.adam_eps = r.number("adam_eps", o.adam_eps);
  o.ode_rel_tol = r.number("ode_rel_tol", o.ode_rel_tol);
  o.ode_abs_tol = r.number("ode_abs_tol", o.ode_abs_tol);
  o.steady_loss = r.number("steady_loss", o.steady_loss);
  o.max_iters = r.count("max_iters", o.max_iters);
  o.loss_stop = r.number("loss_stop", o.loss_stop);
  o.extra_iters_after_stop = r.count("extra_iters_after_stop", o.extra_iters_after_stop);
  o.log_every = r.count("log_every", o.log_every);
  if (r.has("timestamps")) {
    const Json& ts = r.raw("timestamps");
    if (ts.is_array()) {
      o.timestamps = r.numbers("timestamps");
    } else {
      ObjectReader tr(ts, r.at("timestamps"));
      const double end = tr.number("end");
      const std::size_t count = tr.count("count");
      if (!(end > 0.0)) throw ConfigError(tr.at("end"), "must be positive");
      if (count < 2) throw ConfigError(tr.at("count"), "must be at least 2");
      tr.finish();
      o.timestamps = linspace_times(end, count);
    }
  } else {
    r.mark("timestamps");
  }
  r.finish();
  if (o.kind == OptimizerKind::gradient_flow && o.timestamps.empty())
    throw ConfigError(r.at("timestamps"), "gradient_flow requires timestamps");
  try {
    o.validate();
  } catch (const DomainError& e) {
    throw ConfigError(r.at("kind"), e.what());
  }
  return o;
}

}  // namespace detail

/// Parse one fully merged experiment object (no "arms").
inline ExperimentConfig parse_experiment(const Json& j) {
  detail::ObjectReader r(j, "");
  ExperimentConfig c;
  c.name = r.string("name");
  if (c.name.empty()) throw ConfigError("name", "must be non-empty");
  c.arm = r.string("arm", "");

  {
    auto t = r.object("teacher");
    c.teacher.kind = t.string("kind");
    if (c.teacher.kind == "canonical") {
      c.teacher.d = t.count("d");
      if (c.teacher.d < 2) throw ConfigError(t.at("d"), "canonical teacher needs d >= 2");
    } else if (c.teacher.kind == "diag") {
      c.teacher.values = t.numbers("values");
      if (c.teacher.values.empty()) throw ConfigError(t.at("values"), "must be non-empty");
    } else {
      throw ConfigError(t.at("kind"), "unknown teacher kind '" + c.teacher.kind +
                                          "' (canonical | diag)");
    }
    c.teacher.head_width = t.count("head_width", 0);
    t.finish();
  }

  {
    auto s = r.object("student");
    c.student.d = s.count("d");
    if (c.student.d == 0) throw ConfigError(s.at("d"), "must be positive");
    c.student.train_bc = s.boolean("train_bc", false);
    if (s.has("head")) {
      auto h = s.object("head");
      const auto kind = h.string("kind");
      if (kind == "mlp") {
        c.student.head.mlp = true;
        c.student.head.width = h.count("width");
        c.student.head.init_sd = h.number("init_sd", c.student.head.init_sd);
        if (c.student.head.width == 0) throw ConfigError(h.at("width"), "must be positive");
        if (c.student.head.width != c.teacher.head_width)
          throw ConfigError(h.at("width"), "must equal teacher.head_width (" +
                                               std::to_string(c.teacher.head_width) + ")");
      } else if (kind != "none") {
        throw ConfigError(h.at("kind"), "unknown head kind '" + kind + "' (none | mlp)");
      } else {
        h.mark("width");
        h.mark("init_sd");
      }
      h.finish();
    } else {
      s.mark("head");
    }
    if (!c.student.head.mlp && c.teacher.head_width != 0)
      throw ConfigError(s.at("head"), "teacher has an MLP head but the student does not");
    s.finish();
  }

  {
    auto d = r.object("data");
    c.data.kappa = d.count("kappa");
    if (c.data.kappa < 2) throw ConfigError(d.at("kappa"), "must be at least 2");
    c.data.preset = d.string("preset", "");
    if (!c.data.preset.empty()) {
      if (c.data.preset != "s1" && c.data.preset != "s2")
        throw ConfigError(d.at("preset"), "unknown preset '" + c.data.preset + "' (s1 | s2)");
      if (c.teacher.kind != "canonical")
        throw ConfigError(d.at("preset"), "presets are labeled by a canonical teacher");
      for (const char* k : {"baseline", "special", "use_special"})
        if (d.has(k)) throw ConfigError(d.at(k), "not allowed together with a preset");
      d.mark("baseline");
      d.mark("special");
      d.mark("use_special");
    } else {
      c.data.baseline = detail::parse_group(d.object("baseline"), c.data.kappa);
      if (d.has("special")) c.data.special = detail::parse_group(d.object("special"), c.data.kappa);
      else d.mark("special");
      c.data.use_special = d.boolean("use_special", c.data.special.has_value());
      if (c.data.use_special && !c.data.special)
        throw ConfigError(d.at("use_special"), "true but no special group is given");
    }
    d.finish();
  }

  {
    auto in = r.object("init");
    c.init.sd_a = in.number("sd_a");
    if (!(c.init.sd_a > 0.0)) throw ConfigError(in.at("sd_a"), "must be positive");
    if (in.has("sd_bc")) {
      c.init.sd_bc = in.number("sd_bc");
      if (!(*c.init.sd_bc > 0.0)) throw ConfigError(in.at("sd_bc"), "must be positive");
    } else {
      in.mark("sd_bc");
    }
    const Json& diff = in.raw("diff");
    if (diff.is_number()) {
      c.init.diff.value = in.number("diff");
    } else {
      detail::ObjectReader dr(diff, in.at("diff"));
      c.init.diff.scale = dr.number("scale");
      c.init.diff.exponent = dr.number("exponent");
      dr.finish();
    }
    if (!(c.init.diff.resolve(c.init.sd_a) >= 0.0))
      throw ConfigError(in.at("diff"), "must resolve to a non-negative gap");
    if (in.has("extension_factors")) c.init.extension_factors = in.numbers("extension_factors");
    else in.mark("extension_factors");
    c.init.shift_a = in.number("shift_a", 0.0);
    c.init.shift_b = in.number("shift_b", 0.0);
    c.init.absolute = in.boolean("absolute", true);
    if (c.init.extension_factors.size() + 2 > c.student.d && !c.init.extension_factors.empty())
      throw ConfigError(in.at("extension_factors"), "more factors than student entries allow");
    in.finish();
  }

  c.optimizer = detail::parse_optimizer(r.object("optimizer"));
  c.optimizer.train_bc = c.student.train_bc;
  if (c.student.train_bc && !c.init.sd_bc)
    throw ConfigError("init.sd_bc", "required when student.train_bc is true");

  if (r.has("eval")) {
    auto e = r.object("eval");
    c.eval.gen_length = e.count("gen_length", c.eval.gen_length);
    c.eval.test_set_size = e.count("test_set_size", c.eval.test_set_size);
    c.eval.test_length = e.count("test_length", c.eval.test_length);
    if (c.eval.gen_length == 0) throw ConfigError(e.at("gen_length"), "must be positive");
    if (c.eval.test_length < 2) throw ConfigError(e.at("test_length"), "must be at least 2");
    e.finish();
  } else {
    r.mark("eval");
  }

  {
    const auto seeds = r.counts("seeds");
    if (seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
    std::set<std::size_t> unique;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!unique.insert(seeds[i]).second)
        throw ConfigError("seeds[" + std::to_string(i) + "]",
                          "duplicate seed " + std::to_string(seeds[i]));
      c.seeds.push_back(seeds[i]);
    }
  }
  r.finish();
  return c;
}

/// Normalized form: every field explicit, timestamps expanded.
inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  if (!c.arm.empty()) j["arm"] = c.arm;
  Json t = {{"kind", c.teacher.kind}, {"head_width", c.teacher.head_width}};
  if (c.teacher.kind == "canonical") t["d"] = c.teacher.d;
  else t["values"] = c.teacher.values;
  j["teacher"] = t;
  Json head = c.student.head.mlp ? Json{{"kind", "mlp"},
                                        {"width", c.student.head.width},
                                        {"init_sd", c.student.head.init_sd}}
                                 : Json{{"kind", "none"}};
  j["student"] = {{"d", c.student.d}, {"train_bc", c.student.train_bc}, {"head", head}};
  Json data = {{"kappa", c.data.kappa}};
  if (!c.data.preset.empty()) {
    data["preset"] = c.data.preset;
  } else {
    data["baseline"] = {{"indices", c.data.baseline->indices}, {"count", c.data.baseline->count}};
    if (c.data.special)
      data["special"] = {{"indices", c.data.special->indices}, {"count", c.data.special->count}};
    data["use_special"] = c.data.use_special;
  }
  j["data"] = data;
  Json init = {{"sd_a", c.init.sd_a},
               {"extension_factors", c.init.extension_factors},
               {"shift_a", c.init.shift_a},
               {"shift_b", c.init.shift_b},
               {"absolute", c.init.absolute}};
  if (c.init.sd_bc) init["sd_bc"] = *c.init.sd_bc;
  if (c.init.diff.value) init["diff"] = *c.init.diff.value;
  else init["diff"] = {{"scale", c.init.diff.scale}, {"exponent", c.init.diff.exponent}};
  j["init"] = init;
  const auto& o = c.optimizer;
  Json opt = {{"kind", to_string(o.kind)},
              {"base_lr", o.base_lr},
              {"beta", o.beta},
              {"softening", o.softening},
              {"adam_beta1", o.adam_beta1},
              {"adam_beta2", o.adam_beta2},
              {"adam_eps", o.adam_eps},
              {"ode_rel_tol", o.ode_rel_tol},
              {"ode_abs_tol", o.ode_abs_tol},
              {"steady_loss", o.steady_loss},
              {"max_iters", o.max_iters},
              {"loss_stop", o.loss_stop},
              {"extra_iters_after_stop", o.extra_iters_after_stop},
              {"log_every", o.log_every}};
  if (!o.timestamps.empty()) opt["timestamps"] = o.timestamps;
  j["optimizer"] = opt;
  j["eval"] = {{"gen_length", c.eval.gen_length},
               {"test_set_size", c.eval.test_set_size},
               {"test_length", c.eval.test_length}};
  j["seeds"] = c.seeds;
  return j;
}

/// Expand a config document into one experiment per arm. An "arms" array of
/// {"name": ..., <partial config>} entries is merge-patched onto the rest of
/// the document.
inline std::vector<ExperimentConfig> parse_document(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  if (!doc.contains("arms")) return {parse_experiment(doc)};
  const Json& arms = doc.at("arms");
  if (!arms.is_array() || arms.empty()) throw ConfigError("arms", "expected a non-empty array");
  Json base = doc;
  base.erase("arms");
  std::vector<ExperimentConfig> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const std::string path = "arms[" + std::to_string(i) + "]";
    if (!arms[i].is_object() || !arms[i].contains("name") || !arms[i].at("name").is_string())
      throw ConfigError(path + ".name", "each arm needs a string name");
    Json patch = arms[i];
    const auto name = patch.at("name").get<std::string>();
    if (!names.insert(name).second) throw ConfigError(path + ".name", "duplicate arm '" + name + "'");
    patch.erase("name");
    Json merged = base;
    merged.merge_patch(patch);
    merged["arm"] = name;
    try {
      out.push_back(parse_experiment(merged));
    } catch (const ConfigError& e) {
      throw ConfigError(path + "/" + e.path(), std::string(e.what()).substr(e.path().size() + 2));
    }
  }
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::vector<ExperimentConfig> load_config(const std::string& path) {
  return parse_document(read_json_file(path));
}

}  // namespace ssmlab
