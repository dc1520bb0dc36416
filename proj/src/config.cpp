#include "fkmc/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "fkmc/errors.hpp"

namespace fkmc {

namespace {

using nlohmann::json;

/// Strict object view: every key must be consumed exactly once.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }
  ~Obj() = default;

  const json* opt(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& req(const std::string& key) {
    const json* v = opt(key);
    if (!v) throw ConfigError(path_ + "." + key + ": required field missing");
    return *v;
  }
  std::string sub(const std::string& key) const { return path_ + "." + key; }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError(path_ + "." + it.key() + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<std::int64_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected a boolean");
  return j.get<bool>();
}

std::vector<double> as_point(const json& j, const std::string& path, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ConfigError(path + ": expected an array of " + std::to_string(n) +
                      " numbers");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = as_double(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ConfigError(path + ": expected a nonempty array of numbers");
  std::vector<double> out(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    out[i] = as_double(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

cxd as_complex(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError(path + ": expected a [re, im] pair");
  return {as_double(j[0], path + "[0]"), as_double(j[1], path + "[1]")};
}

/// Matrix literal: array of rows, each entry a [re, im] pair.
Matrix as_matrix(const json& j, const std::string& path, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ConfigError(path + ": expected " + std::to_string(d) + " rows");
  Matrix m(d);
  for (int r = 0; r < d; ++r) {
    const json& row = j[r];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != d)
      throw ConfigError(rp + ": expected " + std::to_string(d) + " entries");
    for (int c = 0; c < d; ++c)
      m(r, c) = as_complex(row[c], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

std::vector<cxd> as_cvector(const json& j, const std::string& path, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ConfigError(path + ": expected " + std::to_string(d) +
                      " [re, im] pairs");
  std::vector<cxd> out(d);
  for (int i = 0; i < d; ++i)
    out[i] = as_complex(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

std::shared_ptr<TabulatedGrid> load_grid(const std::string& file,
                                         const std::string& base_dir,
                                         const std::string& path, int n,
                                         int values_per_node) {
  namespace fs = std::filesystem;
  fs::path p(file);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  std::ifstream is(p);
  if (!is) throw ConfigError(path + ": cannot open table file " + p.string());
  try {
    return std::make_shared<TabulatedGrid>(
        TabulatedGrid::read(is, n, values_per_node));
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

GaugeField parse_gauge(const json& j, const std::string& path, int n, int d,
                       const std::string& base_dir) {
  Obj o(j, path);
  const std::string preset = as_string(o.req("preset"), o.sub("preset"));
  GaugeField out;
  try {
    if (preset == "zero") {
      out = make_zero_gauge(n, d);
    } else if (preset == "constant") {
      const json& mats = o.req("matrices");
      if (!mats.is_array() || static_cast<int>(mats.size()) != n)
        throw ConfigError(o.sub("matrices") + ": expected " +
                          std::to_string(n) + " matrices");
      std::vector<Matrix> alphas;
      for (int i = 0; i < n; ++i)
        alphas.push_back(as_matrix(
            mats[i], o.sub("matrices") + "[" + std::to_string(i) + "]", d));
      out = make_constant_gauge(std::move(alphas));
    } else if (preset == "scalar_magnetic") {
      if (d != 1)
        throw ConfigError(path + ": scalar_magnetic requires fiber_dim 1");
      out = make_scalar_magnetic(as_point(o.req("b"), o.sub("b"), n));
    } else if (preset == "pauli_like") {
      out = make_pauli_like(as_point(o.req("b"), o.sub("b"), n), d);
    } else if (preset == "su2_rotation") {
      if (d != 2)
        throw ConfigError(path + ": su2_rotation requires fiber_dim 2");
      out = make_su2_rotation(
          as_double(o.req("amplitude"), o.sub("amplitude")),
          as_point(o.req("wavevector"), o.sub("wavevector"), n));
    } else if (preset == "tabulated") {
      out = make_tabulated_gauge(
          load_grid(as_string(o.req("file"), o.sub("file")), base_dir,
                    o.sub("file"), n, n * d * d),
          d);
    } else {
      throw ConfigError(o.sub("preset") + ": unknown gauge preset " + preset);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (out.space_dim != n || out.fiber_dim != d)
    throw ConfigError(path + ": preset dimensions inconsistent with (space_dim, fiber_dim)");
  o.finish();
  return out;
}

Potential parse_potential(const json& j, const std::string& path, int n, int d,
                          const std::string& base_dir) {
  Obj o(j, path);
  const std::string preset = as_string(o.req("preset"), o.sub("preset"));
  Potential out;
  try {
    if (preset == "zero") {
      out = make_zero_potential(n, d);
    } else if (preset == "constant") {
      out = make_constant_potential(n,
                                    as_matrix(o.req("matrix"), o.sub("matrix"), d));
    } else if (preset == "diagonal_well") {
      auto weights = as_point(o.req("weights"), o.sub("weights"), d);
      auto offsets = as_point(o.req("offsets"), o.sub("offsets"), d);
      out = make_diagonal_polynomial_well(n, weights, offsets);
    } else if (preset == "tabulated") {
      out = make_tabulated_potential(
          load_grid(as_string(o.req("file"), o.sub("file")), base_dir,
                    o.sub("file"), n, d * d),
          d);
    } else {
      throw ConfigError(o.sub("preset") + ": unknown potential preset " +
                        preset);
    }
    if (const json* tr = o.opt("truncate"))
      out = truncate_potential(out, as_double(*tr, o.sub("truncate")));
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (const json* pol = o.opt("singular_policy")) {
    Obj po(*pol, o.sub("singular_policy"));
    if (const json* clip = po.opt("clip")) {
      out.policy = SingularPolicy::clip;
      out.clip_max_norm = as_double(*clip, po.sub("clip"));
    } else {
      po.req("reject");
      out.policy = SingularPolicy::reject;
    }
    po.finish();
  }
  if (out.space_dim != n || out.fiber_dim != d)
    throw ConfigError(path + ": preset dimensions inconsistent with (space_dim, fiber_dim)");
  o.finish();
  return out;
}

VectorField parse_vector_field(const json& j, const std::string& path, int n,
                               int d, const std::string& base_dir) {
  Obj o(j, path);
  const std::string preset = as_string(o.req("preset"), o.sub("preset"));
  VectorField out;
  try {
    if (preset == "gaussian_bump") {
      out = make_gaussian_bump(
          as_point(o.req("center"), o.sub("center"), n),
          as_double(o.req("width"), o.sub("width")),
          as_cvector(o.req("direction"), o.sub("direction"), d));
    } else if (preset == "coordinate_indicator") {
      out = make_coordinate_indicator(
          n, d,
          static_cast<int>(as_int(o.req("component"), o.sub("component"))));
    } else if (preset == "tabulated") {
      out = make_tabulated_vector_field(
          load_grid(as_string(o.req("file"), o.sub("file")), base_dir,
                    o.sub("file"), n, d),
          d);
    } else {
      throw ConfigError(o.sub("preset") + ": unknown field preset " + preset);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  o.finish();
  return out;
}

AxisGrid parse_axis(const json& j, const std::string& path) {
  Obj o(j, path);
  AxisGrid g;
  g.min = as_double(o.req("min"), o.sub("min"));
  g.max = as_double(o.req("max"), o.sub("max"));
  g.count = static_cast<int>(as_int(o.req("count"), o.sub("count")));
  if (!(g.max > g.min) || g.count < 1)
    throw ConfigError(path + ": need max > min and count >= 1");
  o.finish();
  return g;
}

void require_positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path + ": must be positive");
}

}  // namespace

const char* command_name(Command cmd) {
  switch (cmd) {
    case Command::semigroup: return "semigroup";
    case Command::kernel: return "kernel";
    case Command::heatmap: return "heatmap";
    case Command::trace: return "trace";
    case Command::kato: return "kato";
    case Command::validate: return "validate";
    case Command::selftest: return "selftest";
  }
  return "?";
}

RunConfig parse_config(const nlohmann::json& doc, Command cmd,
                       const std::string& base_dir) {
  RunConfig cfg;
  cfg.command = cmd;
  Obj o(doc, "config");

  cfg.schema_version =
      static_cast<int>(as_int(o.req("schema_version"), o.sub("schema_version")));
  if (cfg.schema_version != 1)
    throw ConfigError("config.schema_version: unsupported version");

  cfg.space_dim =
      static_cast<int>(as_int(o.req("space_dim"), o.sub("space_dim")));
  cfg.fiber_dim =
      static_cast<int>(as_int(o.req("fiber_dim"), o.sub("fiber_dim")));
  if (cfg.space_dim < 1) throw ConfigError("config.space_dim: must be >= 1");
  if (cfg.fiber_dim < 1) throw ConfigError("config.fiber_dim: must be >= 1");

  cfg.steps = static_cast<int>(as_int(o.req("steps"), o.sub("steps")));
  if (cfg.steps < 1) throw ConfigError("config.steps: must be >= 1");
  cfg.n_paths = as_int(o.req("n_paths"), o.sub("n_paths"));
  if (cfg.n_paths < 1) throw ConfigError("config.n_paths: must be >= 1");
  cfg.seed = static_cast<std::uint64_t>(as_int(o.req("seed"), o.sub("seed")));

  if (const json* w = o.opt("workers")) {
    cfg.workers = static_cast<int>(as_int(*w, o.sub("workers")));
    if (cfg.workers < 0) throw ConfigError("config.workers: must be >= 0");
  }

  const bool needs_time = cmd != Command::kato;
  if (needs_time) {
    cfg.time = as_double(o.req("time"), o.sub("time"));
    require_positive(cfg.time, o.sub("time"));
    cfg.scheme.tag = parse_scheme(as_string(o.req("scheme"), o.sub("scheme")));
  } else {
    if (const json* t = o.opt("time")) cfg.time = as_double(*t, o.sub("time"));
    if (const json* s = o.opt("scheme"))
      cfg.scheme.tag = parse_scheme(as_string(*s, o.sub("scheme")));
  }

  if (cmd == Command::kato) {
    if (const json* g = o.opt("gauge"))
      cfg.gauge = parse_gauge(*g, o.sub("gauge"), cfg.space_dim, cfg.fiber_dim,
                              base_dir);
    else
      cfg.gauge = make_zero_gauge(cfg.space_dim, cfg.fiber_dim);
  } else {
    cfg.gauge = parse_gauge(o.req("gauge"), o.sub("gauge"), cfg.space_dim,
                            cfg.fiber_dim, base_dir);
  }
  cfg.potential = parse_potential(o.req("potential"), o.sub("potential"),
                                  cfg.space_dim, cfg.fiber_dim, base_dir);

  cfg.output = as_string(o.req("output"), o.sub("output"));

  switch (cmd) {
    case Command::semigroup: {
      Obj b(o.req("semigroup"), o.sub("semigroup"));
      SemigroupBlock s;
      s.f = parse_vector_field(b.req("f"), b.sub("f"), cfg.space_dim,
                               cfg.fiber_dim, base_dir);
      s.x = as_point(b.req("x"), b.sub("x"), cfg.space_dim);
      if (const json* dom = b.opt("domination"))
        s.domination = as_bool(*dom, b.sub("domination"));
      b.finish();
      cfg.semigroup = std::move(s);
      break;
    }
    case Command::kernel: {
      Obj b(o.req("kernel"), o.sub("kernel"));
      KernelBlock k;
      k.x = as_point(b.req("x"), b.sub("x"), cfg.space_dim);
      k.y = as_point(b.req("y"), b.sub("y"), cfg.space_dim);
      if (const json* sp = b.opt("symmetric_pair"))
        k.symmetric_pair = as_bool(*sp, b.sub("symmetric_pair"));
      b.finish();
      cfg.kernel = std::move(k);
      break;
    }
    case Command::heatmap: {
      if (cfg.space_dim != 1)
        throw ConfigError("config.heatmap: only space_dim 1 is supported");
      Obj b(o.req("heatmap"), o.sub("heatmap"));
      HeatmapBlock h;
      h.x_grid = parse_axis(b.req("x_grid"), b.sub("x_grid"));
      h.y_grid = parse_axis(b.req("y_grid"), b.sub("y_grid"));
      b.finish();
      cfg.heatmap = std::move(h);
      break;
    }
    case Command::trace: {
      Obj b(o.req("trace"), o.sub("trace"));
      TraceBlock t;
      t.box_lo = as_point(b.req("box_lo"), b.sub("box_lo"), cfg.space_dim);
      t.box_hi = as_point(b.req("box_hi"), b.sub("box_hi"), cfg.space_dim);
      t.resolution = as_double(b.req("resolution"), b.sub("resolution"));
      require_positive(t.resolution, b.sub("resolution"));
      b.finish();
      cfg.trace = std::move(t);
      break;
    }
    case Command::kato: {
      Obj b(o.req("kato"), o.sub("kato"));
      KatoBlock k;
      const json& probes = b.req("probes");
      if (!probes.is_array() || probes.empty())
        throw ConfigError(b.sub("probes") + ": expected a nonempty array");
      for (size_t i = 0; i < probes.size(); ++i)
        k.probes.push_back(as_point(
            probes[i], b.sub("probes") + "[" + std::to_string(i) + "]",
            cfg.space_dim));
      k.times = as_vector(b.req("times"), b.sub("times"));
      for (double t : k.times) require_positive(t, b.sub("times"));
      b.finish();
      cfg.kato = std::move(k);
      break;
    }
    case Command::validate: {
      Obj b(o.req("validate"), o.sub("validate"));
      ValidateBlock v;
      v.f = parse_vector_field(b.req("f"), b.sub("f"), cfg.space_dim,
                               cfg.fiber_dim, base_dir);
      const json& xs = b.req("x_probes");
      if (!xs.is_array() || xs.empty())
        throw ConfigError(b.sub("x_probes") + ": expected a nonempty array");
      for (size_t i = 0; i < xs.size(); ++i)
        v.x_probes.push_back(as_point(
            xs[i], b.sub("x_probes") + "[" + std::to_string(i) + "]",
            cfg.space_dim));
      const json& pairs = b.req("kernel_pairs");
      if (!pairs.is_array())
        throw ConfigError(b.sub("kernel_pairs") + ": expected an array");
      for (size_t i = 0; i < pairs.size(); ++i) {
        Obj po(pairs[i],
               b.sub("kernel_pairs") + "[" + std::to_string(i) + "]");
        v.kernel_pairs.emplace_back(
            as_point(po.req("x"), po.sub("x"), cfg.space_dim),
            as_point(po.req("y"), po.sub("y"), cfg.space_dim));
        po.finish();
      }
      v.box_lo = as_point(b.req("box_lo"), b.sub("box_lo"), cfg.space_dim);
      v.box_hi = as_point(b.req("box_hi"), b.sub("box_hi"), cfg.space_dim);
      const json& mesh = b.req("mesh");
      if (!mesh.is_array() || static_cast<int>(mesh.size()) != cfg.space_dim)
        throw ConfigError(b.sub("mesh") + ": expected per-axis node counts");
      for (size_t i = 0; i < mesh.size(); ++i)
        v.mesh.push_back(static_cast<int>(
            as_int(mesh[i], b.sub("mesh") + "[" + std::to_string(i) + "]")));
      if (const json* s = b.opt("sigma")) v.sigma = as_double(*s, b.sub("sigma"));
      if (const json* s = b.opt("semigroup_rel_floor"))
        v.semigroup_rel_floor = as_double(*s, b.sub("semigroup_rel_floor"));
      if (const json* s = b.opt("kernel_rel_floor"))
        v.kernel_rel_floor = as_double(*s, b.sub("kernel_rel_floor"));
      if (const json* s = b.opt("kernel_paths"))
        v.kernel_paths = as_int(*s, b.sub("kernel_paths"));
      b.finish();
      cfg.validate = std::move(v);
      break;
    }
    case Command::selftest:
      break;
  }

  o.finish();
  return cfg;
}

RunConfig load_config_file(const std::string& path, Command cmd) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  const std::string base =
      std::filesystem::path(path).parent_path().string();
  return parse_config(doc, cmd, base.empty() ? "." : base);
}

}  // namespace fkmc
