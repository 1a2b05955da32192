// heatlab command-line front end. Talks to the library only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "heatlab/heatlab.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;
constexpr int kExitOther = 4;

struct CliError {
  hl_status status;
  std::string message;
};

int exit_code(hl_status s) {
  switch (s) {
    case HL_OK: return kExitOk;
    case HL_ERR_VERIFY_FAILED: return kExitVerify;
    case HL_ERR_INVALID_ARGUMENT:
    case HL_ERR_INVALID_CONFIG: return kExitConfig;
    case HL_ERR_RESOURCE_LIMIT: return kExitResource;
    default: return kExitOther;
  }
}

void check(hl_status s) {
  if (s != HL_OK && s != HL_ERR_VERIFY_FAILED) throw CliError{s, hl_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  hl_string_free(s);
  return out;
}

struct EnvDeleter {
  void operator()(hl_env* e) const { hl_env_free(e); }
};
struct FieldDeleter {
  void operator()(hl_field* f) const { hl_field_free(f); }
};
struct AdjointDeleter {
  void operator()(hl_adjoint* a) const { hl_adjoint_free(a); }
};
using EnvPtr = std::unique_ptr<hl_env, EnvDeleter>;
using FieldPtr = std::unique_ptr<hl_field, FieldDeleter>;
using AdjointPtr = std::unique_ptr<hl_adjoint, AdjointDeleter>;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{HL_ERR_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError{HL_ERR_IO, "cannot write " + tmp};
    out << text;
    if (!out.flush()) throw CliError{HL_ERR_IO, "cannot write " + tmp};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CliError{HL_ERR_IO, "cannot rename " + tmp + " to " + path};
}

// Inline JSON, or a path to a JSON file.
json json_arg(const std::string& text) {
  if (text.empty()) return json::object();
  const auto first = text.find_first_not_of(" \t\n");
  const std::string body = (first != std::string::npos && (text[first] == '{' || text[first] == '[')) ? text : slurp(text);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw CliError{HL_ERR_INVALID_CONFIG, e.what()};
  }
}

// "1,-2" or "[1,-2]".
std::vector<int64_t> point_arg(const std::string& text, int dim) {
  std::string s = text;
  for (char& c : s)
    if (c == '[' || c == ']' || c == ',') c = ' ';
  std::istringstream in(s);
  std::vector<int64_t> p;
  long long v;
  while (in >> v) p.push_back(v);
  if (p.empty() && text.empty()) p.assign(static_cast<std::size_t>(dim), 0);
  if (static_cast<int>(p.size()) != dim)
    throw CliError{HL_ERR_INVALID_ARGUMENT, "point '" + text + "' needs " + std::to_string(dim) + " coordinates"};
  return p;
}

// Accepts plain bytes or K/M/G suffixes.
std::size_t bytes_arg(const std::string& text) {
  if (text.empty()) return 0;
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw CliError{HL_ERR_INVALID_ARGUMENT, "bad byte count '" + text + "'"};
  }
  double mult = 1;
  if (pos < text.size()) {
    switch (std::toupper(static_cast<unsigned char>(text[pos]))) {
      case 'K': mult = 1024.0; break;
      case 'M': mult = 1024.0 * 1024; break;
      case 'G': mult = 1024.0 * 1024 * 1024; break;
      default: throw CliError{HL_ERR_INVALID_ARGUMENT, "bad byte count '" + text + "'"};
    }
  }
  return static_cast<std::size_t>(v * mult);
}

EnvPtr load_env(const std::string& arg) {
  if (arg.empty()) throw CliError{HL_ERR_INVALID_ARGUMENT, "--env is required"};
  hl_env* e = nullptr;
  check(hl_env_from_json(json_arg(arg).dump().c_str(), &e));
  return EnvPtr(e);
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Adjoint from a saved field (metadata next to it as <path>.json) or built fresh.
AdjointPtr adjoint_for(hl_env* env, const std::string& path, const json& build_options) {
  hl_adjoint* a = nullptr;
  if (!path.empty()) {
    hl_field* f = nullptr;
    check(hl_field_read(path.c_str(), hl_env_dim(env), &f));
    FieldPtr fp(f);
    std::string meta = fs::exists(path + ".json") ? slurp(path + ".json") : "{}";
    check(hl_adjoint_from_field(env, fp.get(), meta.c_str(), &a));
  } else {
    check(hl_adjoint_build(env, build_options.dump().c_str(), &a));
  }
  return AdjointPtr(a);
}

void save_adjoint(hl_adjoint* a, const std::string& path) {
  hl_field* f = nullptr;
  check(hl_adjoint_field(a, &f));
  FieldPtr fp(f);
  check(hl_field_write(fp.get(), path.c_str()));
  char* meta = nullptr;
  check(hl_adjoint_metadata(a, &meta));
  write_atomic(path + ".json", take(meta));
}

// Returns the status of hl_verify; the report is written either way.
hl_status run_verify(hl_env* env, hl_adjoint* a, const std::string& estimate, const json& grid, std::string& report) {
  char* out = nullptr;
  const hl_status s = hl_verify(env, a, estimate.c_str(), grid.dump().c_str(), &out);
  check(s);
  report = take(out);
  return s;
}

std::string histogram_csv(const json& counts, int dim, std::uint64_t paths, bool with_time) {
  std::string out;
  for (int i = 0; i < dim; ++i) out += "x" + std::to_string(i + 1) + ",";
  out += with_time ? "t,count,frequency\n" : "count,frequency\n";
  char buf[64];
  for (const auto& row : counts) {
    const std::size_t n = row.size();
    for (std::size_t i = 0; i + 1 < n; ++i) out += std::to_string(row[i].get<long long>()) + ",";
    const auto c = row[n - 1].get<std::uint64_t>();
    std::snprintf(buf, sizeof buf, "%llu,%.17g\n", static_cast<unsigned long long>(c),
                  static_cast<double>(c) / static_cast<double>(paths));
    out += buf;
  }
  return out;
}

// Declarative run: environment, optional adjoint, a list of estimates.
int run_config(const std::string& config_path, unsigned jobs_flag, std::uint64_t seed_flag, bool seed_given) {
  const auto t0 = std::chrono::steady_clock::now();
  const json cfg = json_arg(config_path);
  if (!cfg.is_object() || !cfg.contains("env"))
    throw CliError{HL_ERR_INVALID_CONFIG, "run config needs an 'env' entry"};
  const std::string out_dir = cfg.value("output", std::string("heatlab-out"));
  const std::uint64_t seed = seed_given ? seed_flag : cfg.value("seed", std::uint64_t{1});
  fs::create_directories(out_dir);

  const json env_spec = cfg["env"].is_string() ? json_arg(cfg["env"].get<std::string>()) : cfg["env"];
  hl_env* e = nullptr;
  check(hl_env_from_json(env_spec.dump().c_str(), &e));
  EnvPtr env(e);

  json manifest = {{"config_hash", fnv1a(cfg.dump())}, {"version", hl_version()}, {"output", out_dir}};
  char* h = nullptr;
  check(hl_env_hash(env.get(), &h));
  manifest["env_hash"] = take(h);

  AdjointPtr adj;
  const json verify = cfg.value("verify", json::array());
  bool needs = cfg.contains("adjoint");
  for (const auto& v : verify) needs = needs || hl_estimate_needs_adjoint(v.value("estimate", std::string()).c_str());
  if (needs) {
    adj = adjoint_for(env.get(), cfg.value("adjoint_field", std::string()), cfg.value("adjoint", json::object()));
    if (!cfg.contains("adjoint_field")) save_adjoint(adj.get(), (fs::path(out_dir) / "M.bin").string());
  }

  bool all_passed = true;
  json steps = json::array();
  for (const auto& v : verify) {
    const std::string name = v.value("estimate", std::string());
    json grid = v.value("grid", json::object());
    if (!grid.contains("seed")) grid["seed"] = seed;
    std::string report;
    const hl_status s = run_verify(env.get(), adj.get(), name, grid, report);
    const std::string file = v.value("output", name + ".json");
    write_atomic((fs::path(out_dir) / file).string(), report);
    steps.push_back({{"estimate", name}, {"report", file}, {"passed", s == HL_OK}});
    all_passed = all_passed && s == HL_OK;
  }
  (void)jobs_flag;
  manifest["steps"] = steps;
  manifest["passed"] = all_passed;
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic((fs::path(out_dir) / "manifest.json").string(), dump(manifest));
  std::cout << dump(manifest);
  return all_passed ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heatlab: random walks in inhomogeneous environments on Z^d"};
  app.require_subcommand(1);
  std::string env_arg, out_path, budget_text;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  app.add_option("--env", env_arg, "environment spec (file or inline JSON)");
  app.add_option("-o,--output", out_path, "output path");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--budget-mem", budget_text, "memory budget, e.g. 2G");
  app.fallthrough();
  app.set_version_flag("--version", std::string(hl_version()));

  int code = kExitOk;

  // env
  auto* env_cmd = app.add_subcommand("env", "validate or generate environments");
  env_cmd->require_subcommand(1);
  std::string spec_file;
  auto* env_validate = env_cmd->add_subcommand("validate", "check sum-to-one, symmetry and ellipticity");
  env_validate->add_option("spec", spec_file, "spec file")->required();
  std::string tab_lo, tab_hi, tab_ext = "periodic";
  auto* env_generate = env_cmd->add_subcommand("generate", "write the canonical spec, optionally tabulated");
  env_generate->add_option("spec", spec_file, "spec file")->required();
  env_generate->add_option("--lo", tab_lo, "tabulate from this corner");
  env_generate->add_option("--hi", tab_hi, "tabulate to this corner");
  env_generate->add_option("--extension", tab_ext, "periodic or constant");

  // kernel
  auto* kernel_cmd = app.add_subcommand("kernel", "heat kernel rows");
  kernel_cmd->require_subcommand(1);
  std::string x_text;
  long n_steps = 0;
  auto* kernel_row = kernel_cmd->add_subcommand("row", "p_n(x, .)");
  kernel_row->add_option("--x", x_text, "start point");
  kernel_row->add_option("--n", n_steps, "steps")->required();

  // green
  auto* green_cmd = app.add_subcommand("green", "Green function rows");
  green_cmd->require_subcommand(1);
  std::string center_text, method = "auto";
  double radius = 0;
  auto* green_row = green_cmd->add_subcommand("row", "G(x, .) on a ball");
  green_row->add_option("--center", center_text, "ball center");
  green_row->add_option("--radius", radius, "ball radius")->required();
  green_row->add_option("--x", x_text, "pole");
  green_row->add_option("--method", method, "auto, direct or series");

  // adjoint
  auto* adj_cmd = app.add_subcommand("adjoint", "global adjoint solution M");
  adj_cmd->require_subcommand(1);
  long window = 16;
  double tol = 1e-8;
  int l_max = 0;
  bool extrapolate = false;
  auto* adj_build = adj_cmd->add_subcommand("build", "build M on [-W, W]^d");
  adj_build->add_option("--window", window, "window half-width");
  adj_build->add_option("--tol", tol, "convergence tolerance");
  adj_build->add_option("--l-max", l_max, "largest level");
  adj_build->add_flag("--extrapolate", extrapolate, "Richardson-combine consecutive levels");

  // verify
  std::string estimate, adjoint_path, grid_text;
  auto* verify_cmd = app.add_subcommand("verify", "run one empirical check");
  verify_cmd->add_option("estimate", estimate, "estimate name")->required();
  verify_cmd->add_option("--adjoint", adjoint_path, "saved M field (metadata in <path>.json)");
  verify_cmd->add_option("--grid", grid_text, "parameter grid (file or inline JSON)");
  verify_cmd->add_option("--window", window, "window half-width when M is built on the fly");
  verify_cmd->add_flag("--extrapolate", extrapolate, "Richardson-combine levels when building M");

  // mc
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo sampling");
  mc_cmd->require_subcommand(1);
  double paths_d = 1e6;
  std::string cyl_text;
  long t0 = 0;
  auto* mc_kernel = mc_cmd->add_subcommand("kernel", "endpoint histogram of n-step paths");
  mc_kernel->add_option("--x", x_text, "start point");
  mc_kernel->add_option("--n", n_steps, "steps")->required();
  mc_kernel->add_option("--paths", paths_d, "number of paths");
  auto* mc_exit = mc_cmd->add_subcommand("exit", "space-time exit histogram");
  mc_exit->add_option("--cylinder", cyl_text, "cylinder (file or inline JSON)")->required();
  mc_exit->add_option("--x", x_text, "start point");
  mc_exit->add_option("--t", t0, "start time")->required();
  mc_exit->add_option("--paths", paths_d, "number of paths");

  // report
  auto* report_cmd = app.add_subcommand("report", "report utilities");
  report_cmd->require_subcommand(1);
  std::vector<std::string> report_files;
  auto* report_merge = report_cmd->add_subcommand("merge", "combine reports into one document");
  report_merge->add_option("reports", report_files, "report files")->required();

  // run
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "execute a run config");
  run_cmd->add_option("config", config_path, "run config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const std::size_t budget = bytes_arg(budget_text);
    if (*env_validate) {
      char* out = nullptr;
      const hl_status s = hl_env_validate(json_arg(spec_file).dump().c_str(), &out);
      if (out) {
        write_atomic(out_path, take(out));
      } else {
        check(s);
      }
      if (s != HL_OK) std::cerr << "heatlab: " << hl_last_error() << "\n";
      return exit_code(s);
    }
    if (*env_generate) {
      EnvPtr env = load_env(spec_file);
      char* out = nullptr;
      if (!tab_lo.empty() || !tab_hi.empty()) {
        const int d = hl_env_dim(env.get());
        const auto lo = point_arg(tab_lo, d), hi = point_arg(tab_hi, d);
        check(hl_env_tabulate(env.get(), lo.data(), hi.data(), tab_ext.c_str(), &out));
      } else {
        check(hl_env_spec(env.get(), &out));
      }
      write_atomic(out_path, take(out));
      return kExitOk;
    }
    if (*kernel_row) {
      EnvPtr env = load_env(env_arg);
      const auto x = point_arg(x_text, hl_env_dim(env.get()));
      hl_field* f = nullptr;
      check(hl_kernel_row(env.get(), x.data(), n_steps, budget, &f));
      FieldPtr fp(f);
      if (out_path.empty()) throw CliError{HL_ERR_INVALID_ARGUMENT, "-o is required"};
      check(hl_field_write(fp.get(), out_path.c_str()));
      return kExitOk;
    }
    if (*green_row) {
      EnvPtr env = load_env(env_arg);
      const int d = hl_env_dim(env.get());
      const auto c = point_arg(center_text, d), x = point_arg(x_text, d);
      hl_field* f = nullptr;
      check(hl_green_row(env.get(), c.data(), radius, x.data(), json{{"method", method}}.dump().c_str(), &f));
      FieldPtr fp(f);
      if (out_path.empty()) throw CliError{HL_ERR_INVALID_ARGUMENT, "-o is required"};
      check(hl_field_write(fp.get(), out_path.c_str()));
      return kExitOk;
    }
    if (*adj_build) {
      EnvPtr env = load_env(env_arg);
      AdjointPtr a = adjoint_for(env.get(), "", {{"window", window}, {"tol", tol}, {"l_max", l_max}, {"extrapolate", extrapolate}});
      if (out_path.empty()) throw CliError{HL_ERR_INVALID_ARGUMENT, "-o is required"};
      save_adjoint(a.get(), out_path);
      char* meta = nullptr;
      check(hl_adjoint_metadata(a.get(), &meta));
      std::cout << take(meta);
      return kExitOk;
    }
    if (*verify_cmd) {
      EnvPtr env = load_env(env_arg);
      AdjointPtr a;
      if (hl_estimate_needs_adjoint(estimate.c_str()) || !adjoint_path.empty())
        a = adjoint_for(env.get(), adjoint_path, {{"window", window}, {"extrapolate", extrapolate}});
      json grid = json_arg(grid_text);
      if (*seed_opt || !grid.contains("seed")) grid["seed"] = seed;
      if (budget) grid["budget"] = budget;
      std::string report;
      const hl_status s = run_verify(env.get(), a.get(), estimate, grid, report);
      write_atomic(out_path, report);
      if (s != HL_OK) std::cerr << "heatlab: " << hl_last_error() << "\n";
      return exit_code(s);
    }
    if (*mc_kernel || *mc_exit) {
      EnvPtr env = load_env(env_arg);
      const int d = hl_env_dim(env.get());
      const auto x = point_arg(x_text, d);
      const auto paths = static_cast<std::uint64_t>(paths_d);
      char* out = nullptr;
      if (*mc_kernel)
        check(hl_mc_kernel(env.get(), x.data(), n_steps, paths, seed, jobs, &out));
      else
        check(hl_mc_exit(env.get(), json_arg(cyl_text).dump().c_str(), x.data(), t0, paths, seed, jobs, &out));
      json result = json::parse(take(out));
      if (!out_path.empty()) write_atomic(out_path, histogram_csv(result["counts"], d, paths, static_cast<bool>(*mc_exit)));
      result.erase("counts");
      std::cout << dump(result);
      return kExitOk;
    }
    if (*report_merge) {
      json reports = json::array();
      bool passed = true;
      for (const auto& f : report_files) {
        json r = json_arg(f);
        passed = passed && r.value("passed", false);
        reports.push_back(std::move(r));
      }
      std::stable_sort(reports.begin(), reports.end(), [](const json& a, const json& b) {
        return a.value("estimate", std::string()) < b.value("estimate", std::string());
      });
      write_atomic(out_path, dump({{"passed", passed}, {"reports", reports}}));
      return passed ? kExitOk : kExitVerify;
    }
    if (*run_cmd) return run_config(config_path, jobs, seed, static_cast<bool>(*seed_opt));
  } catch (const CliError& e) {
    std::cerr << "heatlab: " << hl_status_name(e.status) << ": " << e.message << "\n";
    return exit_code(e.status);
  } catch (const json::exception& e) {
    std::cerr << "heatlab: invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "heatlab: " << e.what() << "\n";
    return kExitOther;
  }
  return code;
}
