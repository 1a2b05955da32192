#include "heatlab/heatlab.h"

#include <cstring>
#include <new>
#include <string>

#include "adjoint.hpp"
#include "io.hpp"
#include "montecarlo.hpp"
#include "verify.hpp"

#ifndef HEATLAB_VERSION
#define HEATLAB_VERSION "0.0.0"
#endif

using namespace heatlab;
using nlohmann::json;

struct hl_env {
  Environment env;
};
struct hl_field {
  int dim = 1;
  LatticeFunction f;
  std::int64_t time = 0;
};
struct hl_adjoint {
  AdjointSolution M;
};

namespace {

thread_local std::string g_last_error;

hl_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return HL_ERR_INVALID_ARGUMENT;
    case ErrorCode::InvalidConfig: return HL_ERR_INVALID_CONFIG;
    case ErrorCode::ResourceLimit: return HL_ERR_RESOURCE_LIMIT;
    case ErrorCode::NonConvergence: return HL_ERR_NON_CONVERGENCE;
    case ErrorCode::Io: return HL_ERR_IO;
    case ErrorCode::Numeric: return HL_ERR_NUMERIC;
  }
  return HL_ERR_INTERNAL;
}

template <typename Fn>
hl_status guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return HL_ERR_INVALID_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HL_ERR_RESOURCE_LIMIT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HL_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

Point read_point(const int64_t* x, int dim) {
  need(x, "point");
  Point p;
  for (int i = 0; i < dim; ++i) p[i] = x[i];
  return p;
}

json parse_opt(const char* text) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, e.what());
  }
}

Point json_point(const json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    fail(ErrorCode::InvalidConfig, std::string(what) + " must be a point of dimension " + std::to_string(dim));
  Point p;
  for (int i = 0; i < dim; ++i) p[i] = j[static_cast<std::size_t>(i)].get<Coord>();
  return p;
}

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

Cylinder parse_cylinder(const json& j, int dim) {
  Cylinder c;
  if (j.contains("ball")) {
    const json& b = j.at("ball");
    c.base = Domain::ball(Ball{dim, json_point(b.at("center"), dim, "ball.center"), b.at("radius").get<double>()});
  } else if (j.contains("box")) {
    const json& b = j.at("box");
    const Box box(dim, json_point(b.at("lo"), dim, "box.lo"), json_point(b.at("hi"), dim, "box.hi"));
    c.base = Domain(box, [](const Point&) { return true; });
  } else {
    fail(ErrorCode::InvalidConfig, "cylinder needs a 'ball' or a 'box'");
  }
  c.bottom = j.at("bottom").get<long>();
  c.top = j.at("top").get<long>();
  if (c.bottom >= c.top) fail(ErrorCode::InvalidConfig, "cylinder needs bottom < top");
  if (c.base.count() == 0) fail(ErrorCode::InvalidConfig, "cylinder base is empty");
  return c;
}

hl_field* make_field(int dim, LatticeFunction f, std::int64_t time) {
  auto* out = new hl_field;
  out->dim = dim;
  out->f = std::move(f);
  out->time = time;
  return out;
}

}  // namespace

extern "C" {

void hl_string_free(char* s) { std::free(s); }
const char* hl_last_error(void) { return g_last_error.c_str(); }
const char* hl_version(void) { return HEATLAB_VERSION; }

const char* hl_status_name(hl_status status) {
  switch (status) {
    case HL_OK: return "ok";
    case HL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HL_ERR_INVALID_CONFIG: return "invalid config";
    case HL_ERR_RESOURCE_LIMIT: return "resource limit";
    case HL_ERR_NON_CONVERGENCE: return "non-convergence";
    case HL_ERR_IO: return "i/o error";
    case HL_ERR_NUMERIC: return "numerical failure";
    case HL_ERR_VERIFY_FAILED: return "verification failed";
    case HL_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

hl_status hl_env_from_json(const char* spec_json, hl_env** out) {
  return guard([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    *out = nullptr;
    const auto spec = EnvironmentSpec::from_json(parse_opt(spec_json));
    *out = new hl_env{generate(spec)};
    return HL_OK;
  });
}

hl_status hl_env_load(const char* path, hl_env** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new hl_env{generate(EnvironmentSpec::from_json(read_json(path)))};
    return HL_OK;
  });
}

void hl_env_free(hl_env* env) { delete env; }
int hl_env_dim(const hl_env* env) { return env ? env->env.dim() : 0; }

hl_status hl_env_hash(const hl_env* env, char** out) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    *out = dup(env->env.hash());
    return HL_OK;
  });
}

hl_status hl_env_spec(const hl_env* env, char** out_json) {
  return guard([&] {
    need(env, "env");
    need(out_json, "out_json");
    *out_json = dup(dump_json(env->env.spec().to_json()));
    return HL_OK;
  });
}

hl_status hl_env_pi(const hl_env* env, const int64_t* x, double* out, size_t width) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    if (width != env->env.gamma().size()) fail(ErrorCode::InvalidArgument, "width must equal |Gamma|");
    env->env.probabilities(read_point(x, env->env.dim()), std::span<double>(out, width));
    return HL_OK;
  });
}

hl_status hl_env_validate(const char* spec_json, char** out_json) {
  return guard([&] {
    need(spec_json, "spec_json");
    need(out_json, "out_json");
    *out_json = nullptr;
    const auto spec = EnvironmentSpec::from_json(parse_opt(spec_json));
    const Environment env = Environment::from_spec(spec);
    const auto vs = validate(env);
    json report = {{"env_hash", env.hash()}, {"violations", to_json(vs, env.dim())}, {"valid", vs.empty()}};
    *out_json = dup(dump_json(report));
    if (!vs.empty()) {
      g_last_error = std::to_string(vs.size()) + " violation(s)";
      return HL_ERR_INVALID_CONFIG;
    }
    return HL_OK;
  });
}

hl_status hl_env_tabulate(const hl_env* env, const int64_t* lo, const int64_t* hi, const char* extension,
                          char** out_json) {
  return guard([&] {
    need(env, "env");
    need(out_json, "out_json");
    const int d = env->env.dim();
    const std::string ext = extension ? extension : "periodic";
    Extension e = Extension::Periodic;
    if (ext == "constant" || ext == "constant-outside") e = Extension::ConstantOutside;
    else if (ext != "periodic") fail(ErrorCode::InvalidArgument, "unknown extension '" + ext + "'");
    const auto spec = tabulate(env->env, Box(d, read_point(lo, d), read_point(hi, d)), e);
    *out_json = dup(dump_json(spec.to_json()));
    return HL_OK;
  });
}

void hl_field_free(hl_field* f) { delete f; }
int hl_field_dim(const hl_field* f) { return f ? f->dim : 0; }

void hl_field_box(const hl_field* f, int64_t* lo, int64_t* hi) {
  if (!f) return;
  for (int i = 0; i < f->dim; ++i) {
    if (lo) lo[i] = f->f.box.lo()[i];
    if (hi) hi[i] = f->f.box.hi()[i];
  }
}

size_t hl_field_size(const hl_field* f) { return f ? f->f.values.size() : 0; }
const double* hl_field_values(const hl_field* f) { return f ? f->f.values.data() : nullptr; }

double hl_field_get(const hl_field* f, const int64_t* x) {
  if (!f || !x) return 0.0;
  Point p;
  for (int i = 0; i < f->dim; ++i) p[i] = x[i];
  return f->f.value_or(p, 0.0);
}

int64_t hl_field_time(const hl_field* f) { return f ? f->time : 0; }
double hl_field_total(const hl_field* f) { return f ? compensated_total(f->f.values) : 0.0; }

hl_status hl_field_write(const hl_field* f, const char* path) {
  return guard([&] {
    need(f, "field");
    need(path, "path");
    write_field(path, f->f, f->dim, f->time);
    return HL_OK;
  });
}

hl_status hl_field_read(const char* path, int dim, hl_field** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    if (dim < 1 || dim > kMaxDim) fail(ErrorCode::InvalidArgument, "dimension must be 1, 2 or 3");
    *out = make_field(dim, read_field(path, dim), 0);
    return HL_OK;
  });
}

hl_status hl_kernel_row(const hl_env* env, const int64_t* x, long n, size_t budget_bytes, hl_field** out) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    *out = nullptr;
    KernelOptions o;
    if (budget_bytes) o.memory_budget = budget_bytes;
    MassField m = kernel_row(env->env, read_point(x, env->env.dim()), n, o);
    *out = make_field(env->env.dim(), std::move(m.mass), m.time);
    return HL_OK;
  });
}

hl_status hl_killed_kernel(const hl_env* env, const int64_t* center, double radius, const int64_t* x, long t,
                           hl_field** out) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    *out = nullptr;
    const int d = env->env.dim();
    MassField m = killed_kernel(env->env, Ball{d, read_point(center, d), radius}, read_point(x, d), t);
    *out = make_field(d, std::move(m.mass), m.time);
    return HL_OK;
  });
}

hl_status hl_green_row(const hl_env* env, const int64_t* center, double radius, const int64_t* x,
                       const char* options_json, hl_field** out) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    *out = nullptr;
    const int d = env->env.dim();
    const json o = parse_opt(options_json);
    GreenOptions go;
    const std::string method = o.value("method", std::string("auto"));
    if (method == "direct") go.method = GreenMethod::Direct;
    else if (method == "series") go.method = GreenMethod::Series;
    else if (method != "auto") fail(ErrorCode::InvalidConfig, "unknown Green method '" + method + "'");
    go.series_tolerance = o.value("tol", go.series_tolerance);
    GreenRow g = green_row(env->env, Ball{d, read_point(center, d), radius}, read_point(x, d), go);
    *out = make_field(d, std::move(g.values), 0);
    return HL_OK;
  });
}

hl_status hl_caloric_measure(const hl_env* env, const char* cylinder_json, const int64_t* x, long t, char** out_json) {
  return guard([&] {
    need(env, "env");
    need(out_json, "out_json");
    const int d = env->env.dim();
    const Cylinder c = parse_cylinder(parse_opt(cylinder_json), d);
    const CaloricMeasure m = caloric_measure(env->env, c, {read_point(x, d), t});
    json atoms = json::array();
    for (const auto& a : m.atoms) atoms.push_back({{"x", point_json(a.at.x, d)}, {"t", a.at.t}, {"mass", a.mass}});
    *out_json = dup(dump_json({{"base", {{"x", point_json(m.base.x, d)}, {"t", m.base.t}}},
                               {"total", m.total()},
                               {"atoms", atoms}}));
    return HL_OK;
  });
}

hl_status hl_adjoint_build(const hl_env* env, const char* options_json, hl_adjoint** out) {
  return guard([&] {
    need(env, "env");
    need(out, "out");
    *out = nullptr;
    const int d = env->env.dim();
    const json o = parse_opt(options_json);
    AdjointOptions ao;
    ao.window = o.value("window", ao.window);
    ao.tol = o.value("tol", ao.tol);
    ao.l_max = o.value("l_max", ao.l_max);
    ao.extrapolate = o.value("extrapolate", ao.extrapolate);
    if (o.contains("center")) ao.center = json_point(o.at("center"), d, "center");
    *out = new hl_adjoint{build_M(env->env, ao)};
    return HL_OK;
  });
}

hl_status hl_adjoint_from_field(const hl_env* env, const hl_field* values, const char* metadata_json,
                                hl_adjoint** out) {
  return guard([&] {
    need(env, "env");
    need(values, "values");
    need(out, "out");
    *out = nullptr;
    if (values->dim != env->env.dim()) fail(ErrorCode::InvalidArgument, "field dimension does not match the environment");
    *out = new hl_adjoint{adjoint_from_field(env->env, values->f, parse_opt(metadata_json))};
    return HL_OK;
  });
}

void hl_adjoint_free(hl_adjoint* a) { delete a; }

hl_status hl_adjoint_metadata(const hl_adjoint* a, char** out_json) {
  return guard([&] {
    need(a, "adjoint");
    need(out_json, "out_json");
    *out_json = dup(dump_json(a->M.metadata()));
    return HL_OK;
  });
}

hl_status hl_adjoint_field(const hl_adjoint* a, hl_field** out) {
  return guard([&] {
    need(a, "adjoint");
    need(out, "out");
    *out = make_field(a->M.dim, a->M.values, 0);
    return HL_OK;
  });
}

hl_status hl_adjoint_at(const hl_adjoint* a, const int64_t* x, double* out) {
  return guard([&] {
    need(a, "adjoint");
    need(out, "out");
    *out = a->M.at(read_point(x, a->M.dim));
    return HL_OK;
  });
}

hl_status hl_estimate_names(char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    *out_json = dup(json(estimate_names()).dump());
    return HL_OK;
  });
}

int hl_estimate_needs_adjoint(const char* estimate) { return estimate && estimate_needs_adjoint(estimate) ? 1 : 0; }

hl_status hl_verify(const hl_env* env, const hl_adjoint* adjoint, const char* estimate, const char* grid_json,
                    char** out_report_json) {
  return guard([&] {
    need(env, "env");
    need(estimate, "estimate");
    need(out_report_json, "out_report_json");
    *out_report_json = nullptr;
    if (adjoint && adjoint->M.env_hash != env->env.hash())
      fail(ErrorCode::InvalidArgument, "adjoint solution was built for a different environment");
    const EstimateReport r = run_estimate(estimate, env->env, adjoint ? &adjoint->M : nullptr, parse_opt(grid_json));
    *out_report_json = dup(dump_json(r.to_json()));
    if (!r.passed()) {
      g_last_error = "verification failed for " + std::string(estimate);
      return HL_ERR_VERIFY_FAILED;
    }
    return HL_OK;
  });
}

hl_status hl_mc_kernel(const hl_env* env, const int64_t* x, long n, uint64_t paths, uint64_t seed, unsigned jobs,
                       char** out_json) {
  return guard([&] {
    need(env, "env");
    need(out_json, "out_json");
    const int d = env->env.dim();
    const Point x0 = read_point(x, d);
    const EmpiricalKernel e = sample_paths(env->env, x0, n, paths, seed, {jobs});
    const MassField exact = kernel_row(env->env, x0, n);
    json counts = json::array();
    for (const auto& [p, c] : e.counts) {
      json row = point_json(p, d);
      row.push_back(c);
      counts.push_back(row);
    }
    const auto mean = e.mean_displacement();
    json mj = json::array();
    for (int i = 0; i < d; ++i) mj.push_back(mean[static_cast<std::size_t>(i)]);
    *out_json = dup(dump_json({{"origin", point_json(x0, d)},
                               {"steps", n},
                               {"paths", paths},
                               {"seed", seed},
                               {"counts", counts},
                               {"mean_displacement", mj},
                               {"tv_distance", e.tv_distance(exact)}}));
    return HL_OK;
  });
}

hl_status hl_mc_exit(const hl_env* env, const char* cylinder_json, const int64_t* x, long t, uint64_t paths,
                     uint64_t seed, unsigned jobs, char** out_json) {
  return guard([&] {
    need(env, "env");
    need(out_json, "out_json");
    const int d = env->env.dim();
    const Cylinder c = parse_cylinder(parse_opt(cylinder_json), d);
    ClosureChain chain(env->env, c.base);
    const SpaceTimePoint x0{read_point(x, d), t};
    const EmpiricalExit e = sample_exit(chain, c.bottom, c.top, x0, paths, seed, {jobs});
    const CaloricMeasure exact = caloric_measure(chain, c.bottom, c.top, x0);
    const ExitComparison cmp = compare_exit(e, exact);
    json counts = json::array();
    for (const auto& [p, n] : e.counts) {
      json row = point_json(p.x, d);
      row.push_back(p.t);
      row.push_back(n);
      counts.push_back(row);
    }
    *out_json = dup(dump_json({{"base", {{"x", point_json(x0.x, d)}, {"t", x0.t}}},
                               {"paths", paths},
                               {"seed", seed},
                               {"counts", counts},
                               {"comparison",
                                {{"atoms", cmp.atoms},
                                 {"max_abs_z", cmp.max_abs_z},
                                 {"worst", {{"x", point_json(cmp.worst.x, d)}, {"t", cmp.worst.t}}},
                                 {"beyond_3sigma", cmp.beyond_3sigma},
                                 {"off_support", cmp.off_support}}}}));
    return HL_OK;
  });
}

}  // extern "C"
