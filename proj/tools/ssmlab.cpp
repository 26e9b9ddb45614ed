// Command-line front end: run experiment configs, sweep them, and run the
// verification suites.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssmlab/analysis.hpp"
#include "ssmlab/checks.hpp"
#include "ssmlab/config.hpp"
#include "ssmlab/runner.hpp"

namespace {

using namespace ssmlab;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;
constexpr int kVerifyFailed = 3;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text << '\n';
}

struct ArmResult {
  const ExperimentConfig* cfg;
  std::vector<RunSummary> runs;
};

/// Run every (arm, seed) of a parsed document; results keep config order.
std::vector<ArmResult> execute(const std::vector<ExperimentConfig>& arms) {
  std::vector<std::function<RunSummary()>> tasks;
  for (const auto& cfg : arms)
    for (auto seed : cfg.seeds) tasks.push_back([&cfg, seed] { return run_single(cfg, seed); });
  auto flat = run_parallel(tasks, worker_count());
  std::vector<ArmResult> out;
  std::size_t k = 0;
  for (const auto& cfg : arms) {
    ArmResult r{&cfg, {}};
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) r.runs.push_back(std::move(flat[k++]));
    out.push_back(std::move(r));
  }
  return out;
}

Json summary_json(const std::vector<ArmResult>& results) {
  if (results.size() == 1 && results[0].cfg->arm.empty()) {
    Json j = summarize(results[0].cfg->label(), results[0].runs);
    j["name"] = results[0].cfg->name;
    return j;
  }
  Json j;
  j["name"] = results.front().cfg->name;
  for (const auto& r : results) j["arms"][r.cfg->arm] = summarize(r.cfg->label(), r.runs);
  return j;
}

int worst_code(const std::vector<ArmResult>& results) {
  int code = kOk;
  for (const auto& r : results)
    for (const auto& run : r.runs)
      if (!run.ok) {
        std::cerr << r.cfg->label() << " seed " << run.seed << ": " << run.message << '\n';
        code = std::max(code, run.exit_code);
      }
  return code;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const auto arms = load_config(config_path);
  fs::create_directories(out_dir);
  const auto results = execute(arms);
  for (const auto& r : results)
    for (const auto& run : r.runs)
      if (run.ok)
        write_csv((fs::path(out_dir) / (r.cfg->label() + "_" + std::to_string(run.seed) + ".csv"))
                      .string(),
                  run.result.log, r.cfg->student.d);
  const auto summary = summary_json(results);
  write_file(fs::path(out_dir) / (arms.front().name + "_summary.json"), summary.dump(2));
  std::cout << summary.dump(2) << '\n';
  return worst_code(results);
}

/// Parse "v1,v2,..." into JSON scalars; non-JSON tokens become strings.
std::vector<Json> parse_list(const std::string& text) {
  std::vector<Json> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(Json::parse(item));
    } catch (const Json::parse_error&) {
      out.push_back(item);
    }
  }
  return out;
}

void set_path(Json& doc, const std::string& dotted, const Json& value) {
  Json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError(dotted, "empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = Json::object();
    node = &(*node)[parts[i]];
    if (!node->is_object()) throw ConfigError(dotted, "override path crosses a non-object field");
  }
  (*node)[parts.back()] = value;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& out_dir) {
  Json doc = read_json_file(config_path);
  std::vector<std::pair<std::string, std::vector<Json>>> axes;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError(s, "override must look like key=v1,v2,...");
    const std::string key = s.substr(0, eq);
    auto values = parse_list(s.substr(eq + 1));
    if (values.empty()) throw ConfigError(key, "override lists no values");
    if (key == "seeds") {
      std::set<std::string> seen;
      for (const auto& v : values)
        if (!seen.insert(v.dump()).second)
          throw ConfigError("seeds", "duplicate seed " + v.dump());
      doc["seeds"] = values;
      continue;
    }
    axes.emplace_back(key, std::move(values));
  }

  // Cartesian product over the non-seed axes.
  std::vector<std::vector<std::size_t>> cells{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& c : cells)
      for (std::size_t i = 0; i < axis.second.size(); ++i) {
        auto e = c;
        e.push_back(i);
        next.push_back(std::move(e));
      }
    cells = std::move(next);
  }

  fs::create_directories(out_dir);
  Json report;
  report["name"] = doc.value("name", "");
  report["cells"] = Json::array();
  int code = kOk;
  for (const auto& cell : cells) {
    Json cdoc = doc;
    Json overrides = Json::object();
    for (std::size_t k = 0; k < axes.size(); ++k) {
      set_path(cdoc, axes[k].first, axes[k].second[cell[k]]);
      overrides[axes[k].first] = axes[k].second[cell[k]];
    }
    const auto arms = parse_document(cdoc);
    const auto results = execute(arms);
    code = std::max(code, worst_code(results));
    report["cells"].push_back({{"overrides", overrides}, {"summary", summary_json(results)}});
  }
  write_file(fs::path(out_dir) / (report["name"].get<std::string>() + "_sweep.json"),
             report.dump(2));
  std::cout << report.dump(2) << '\n';
  return code;
}

int cmd_verify(const std::string& suite, const std::string& json_out) {
  SuiteReport rep;
  if (suite == "dynamics") rep = verify_dynamics();
  else if (suite == "saddle") rep = verify_saddle();
  else if (suite == "linearization") rep = verify_linearization();
  else if (suite == "vandermonde") rep = verify_vandermonde();
  else if (suite == "pl") rep = verify_pl();
  else throw ConfigError("suite", "unknown suite '" + suite + "'");
  const auto j = rep.to_json();
  if (!json_out.empty()) write_file(json_out, j.dump(2));
  std::cout << j.dump(2) << '\n';
  return rep.passed() ? kOk : kVerifyFailed;
}

int cmd_saddle(std::size_t d, std::size_t L) {
  const auto r = find_saddle(d, L);
  const Json j = {{"d", r.d},
                  {"L", r.L},
                  {"s", r.s},
                  {"loss_at_s", r.loss_at_s},
                  {"lambda_plus", r.lambda_plus},
                  {"lambda_minus", r.lambda_minus}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_adversarial(std::size_t kappa, std::size_t d, double eps) {
  const auto teacher = canonical_teacher(d);
  const auto student = adversarial_zero_loss(teacher, kappa, d, eps);
  const Json j = {{"kappa", kappa},
                  {"d", d},
                  {"eps", eps},
                  {"a", student.a()},
                  {"b", student.b()},
                  {"c", student.c()},
                  {"teacher_markov", impulse_response(teacher, kappa + 1)},
                  {"student_markov", impulse_response(student, kappa + 1)},
                  {"gen_error_kappa", generalization_error(student, teacher, kappa)},
                  {"gen_error_kappa_plus_1", generalization_error(student, teacher, kappa + 1)}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagonal SSM teacher-student lab"};
  app.require_subcommand(1);

  std::string config, out_dir = ".", suite, json_out;
  std::vector<std::string> sets;
  std::size_t d = 0, L = 0, kappa = 0;
  double eps = 0.0;

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a config over a grid of overrides");
  sweep->add_option("config", config, "JSON config file")->required();
  sweep->add_option("--set", sets, "key=v1,v2,... (repeatable)");
  sweep->add_option("--out", out_dir, "Output directory");

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", suite, "dynamics | saddle | linearization | vandermonde | pl")
      ->required();
  verify->add_option("--json", json_out, "Also write the report to this file");

  auto* saddle = app.add_subcommand("saddle-report", "Saddle of the two-example objective");
  saddle->add_option("--d", d)->required();
  saddle->add_option("--L", L)->required();

  auto* adv = app.add_subcommand("adversarial", "Zero-loss student with a planted error");
  adv->add_option("--kappa", kappa)->required();
  adv->add_option("--d", d)->required();
  adv->add_option("--eps", eps)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out_dir);
    if (*sweep) return cmd_sweep(config, sets, out_dir);
    if (*verify) return cmd_verify(suite, json_out);
    if (*saddle) return cmd_saddle(d, L);
    if (*adv) return cmd_adversarial(kappa, d, eps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kOk;
}
