#include "qfilter/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qfilter/errors.hpp"

namespace qfilter {

using nlohmann::json;

namespace {

// Collects field issues while reading a document section by section.
class Reader {
 public:
  std::vector<FieldIssue> issues;

  void fail(const std::string& path, const std::string& message) { issues.push_back({path, message}); }

  const json* section(const json& doc, const std::string& key, const std::string& path) {
    if (!doc.contains(key)) return nullptr;
    const json& s = doc.at(key);
    if (!s.is_object()) {
      fail(path, "must be an object");
      return nullptr;
    }
    return &s;
  }

  void unknown_keys(const json* s, const std::string& prefix, std::initializer_list<const char*> known) {
    if (s == nullptr) return;
    std::set<std::string> allowed(known.begin(), known.end());
    for (auto it = s->begin(); it != s->end(); ++it)
      if (!allowed.count(it.key())) fail(prefix + it.key(), "unknown field");
  }

  template <class T>
  void number(const json* s, const char* key, const std::string& path, T& out, bool required = false) {
    if (s == nullptr || !s->contains(key)) {
      if (required) fail(path, "missing required field");
      return;
    }
    const json& v = s->at(key);
    if (!v.is_number()) {
      fail(path, "must be a number");
      return;
    }
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        fail(path, "must be a non-negative integer");
        return;
      }
      out = v.get<T>();
    } else {
      out = v.get<T>();
      if (!std::isfinite(out)) fail(path, "must be finite");
    }
  }

  void string(const json* s, const char* key, const std::string& path, std::string& out, bool required = false) {
    if (s == nullptr || !s->contains(key)) {
      if (required) fail(path, "missing required field");
      return;
    }
    const json& v = s->at(key);
    if (!v.is_string()) {
      fail(path, "must be a string");
      return;
    }
    out = v.get<std::string>();
  }

  void numbers(const json* s, const char* key, const std::string& path, std::vector<double>& out) {
    if (s == nullptr || !s->contains(key)) return;
    const json& v = s->at(key);
    if (!v.is_array()) {
      fail(path, "must be an array of numbers");
      return;
    }
    std::vector<double> tmp;
    for (const auto& e : v) {
      if (!e.is_number()) {
        fail(path, "must be an array of numbers");
        return;
      }
      tmp.push_back(e.get<double>());
    }
    out = std::move(tmp);
  }
};

bool parse_complex(const json& v, Complex& out) {
  if (v.is_number()) {
    out = Complex(v.get<double>(), 0.0);
    return true;
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    out = Complex(v[0].get<double>(), v[1].get<double>());
    return true;
  }
  return false;
}

json complex_json(Complex c) {
  if (c.imag() == 0.0) return c.real();
  return json::array({c.real(), c.imag()});
}

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

const std::set<std::string> kQubitObservables{"sigma_x", "sigma_y", "sigma_z", "L"};
const std::set<std::string> kGridObservables{"x", "x2", "p", "L"};

json resolved_document(const RunConfig& c) {
  json model{{"kind", c.model.kind}};
  if (c.model.kind == "qubit") {
    model["qubit"] = {{"h_field", c.model.h_field}, {"channel", c.model.channel}};
  } else {
    json pot{{"preset", c.model.potential.preset}};
    if (c.model.potential.preset == "harmonic") pot["omega"] = c.model.potential.omega;
    if (c.model.potential.preset == "barrier") {
      pot["height"] = c.model.potential.height;
      pot["width"] = c.model.potential.width;
    }
    if (c.model.potential.preset == "table") pot["values"] = c.model.potential.values;
    model["grid"] = {{"x_min", c.model.grid.x_min},
                     {"x_max", c.model.grid.x_max},
                     {"n_points", c.model.grid.n_points},
                     {"potential", pot},
                     {"mass", c.model.mass}};
  }
  json initial;
  if (c.model.kind == "qubit") {
    json amps = json::array();
    for (Complex a : c.initial.amplitudes) amps.push_back(complex_json(a));
    initial["amplitudes"] = amps;
  } else {
    initial["gaussian"] = {{"x0", c.initial.x0}, {"p0", c.initial.p0}, {"sigma", c.initial.sigma}};
  }
  json obs = json::array();
  for (const auto& o : c.sim.observables) {
    if (o.matrix)
      obs.push_back({{"name", o.name}, {"matrix", matrix_json(*o.matrix)}});
    else
      obs.push_back(o.name);
  }
  return json{
      {"model", model},
      {"constants", {{"hbar", c.hbar}, {"lambda", c.lambda}}},
      {"initial", initial},
      {"sim",
       {{"dt", c.sim.dt},
        {"t_final", c.sim.t_final},
        {"scheme", std::string(to_string(c.sim.scheme))},
        {"record_stride", c.sim.record_stride},
        {"observables", obs}}},
      {"ensemble", {{"n_trajectories", c.ensemble.n_trajectories}, {"master_seed", c.ensemble.master_seed}}},
      {"output", {{"directory", c.output.directory}, {"formats", c.output.formats}}},
      {"verify",
       {{"n_seeds", c.verify.n_seeds},
        {"checkpoints", c.verify.checkpoints},
        {"dts", c.verify.dts},
        {"order_seeds", c.verify.order_seeds},
        {"order_t_final", c.verify.order_t_final},
        {"filtering_dts", c.verify.filtering_dts},
        {"filtering_seeds", c.verify.filtering_seeds},
        {"observable", c.verify.observable}}},
  };
}

}  // namespace

std::size_t RunConfig::n_steps() const {
  return static_cast<std::size_t>(std::ceil(sim.t_final / sim.dt - 1e-9));
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set", "expected KEY=VALUE, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw ValidationError("--set", "empty path component in '" + path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ValidationError(path, "cannot override inside a non-object field");
      *node = json::object();
    }
    node = &(*node)[parts[i]];
  }
  *node = std::move(value);
}

RunConfig parse_config(const json& input, const std::vector<std::string>& overrides) {
  json doc = input;
  for (const auto& o : overrides) apply_override(doc, o);
  if (!doc.is_object()) throw ValidationError("", "configuration must be a JSON object");

  RunConfig c;
  Reader r;
  r.unknown_keys(&doc, "", {"model", "constants", "initial", "sim", "ensemble", "output", "verify"});

  // model
  const json* model = r.section(doc, "model", "model");
  if (model == nullptr) r.fail("model", "missing required field");
  r.unknown_keys(model, "model.", {"kind", "qubit", "grid"});
  r.string(model, "kind", "model.kind", c.model.kind, true);
  const bool is_qubit = c.model.kind == "qubit";
  const bool is_grid = c.model.kind == "grid1d";
  if (model != nullptr && model->contains("kind") && !is_qubit && !is_grid)
    r.fail("model.kind", "must be 'qubit' or 'grid1d'");

  if (is_qubit) {
    const json* q = model ? r.section(*model, "qubit", "model.qubit") : nullptr;
    r.unknown_keys(q, "model.qubit.", {"h_field", "channel"});
    std::vector<double> h(c.model.h_field.begin(), c.model.h_field.end());
    r.numbers(q, "h_field", "model.qubit.h_field", h);
    if (h.size() != 3)
      r.fail("model.qubit.h_field", "must have three components");
    else
      std::copy(h.begin(), h.end(), c.model.h_field.begin());
    r.string(q, "channel", "model.qubit.channel", c.model.channel);
    if (c.model.channel != "sigma_x" && c.model.channel != "sigma_y" && c.model.channel != "sigma_z")
      r.fail("model.qubit.channel", "must be sigma_x, sigma_y or sigma_z");
  }
  if (is_grid) {
    const json* g = model ? r.section(*model, "grid", "model.grid") : nullptr;
    if (g == nullptr) r.fail("model.grid", "missing required field");
    r.unknown_keys(g, "model.grid.", {"x_min", "x_max", "n_points", "potential", "mass"});
    r.number(g, "x_min", "model.grid.x_min", c.model.grid.x_min, true);
    r.number(g, "x_max", "model.grid.x_max", c.model.grid.x_max, true);
    r.number(g, "n_points", "model.grid.n_points", c.model.grid.n_points, true);
    r.number(g, "mass", "model.grid.mass", c.model.mass);
    if (g != nullptr && g->contains("x_min") && g->contains("x_max") && !(c.model.grid.x_max > c.model.grid.x_min))
      r.fail("model.grid.x_max", "must exceed x_min");
    if (g != nullptr && g->contains("n_points") && c.model.grid.n_points < 8)
      r.fail("model.grid.n_points", "must be at least 8");
    if (!(c.model.mass > 0.0)) r.fail("model.grid.mass", "must be positive");

    const json* p = g ? r.section(*g, "potential", "model.grid.potential") : nullptr;
    r.unknown_keys(p, "model.grid.potential.", {"preset", "omega", "height", "width", "values"});
    auto& pot = c.model.potential;
    r.string(p, "preset", "model.grid.potential.preset", pot.preset);
    r.number(p, "omega", "model.grid.potential.omega", pot.omega);
    r.number(p, "height", "model.grid.potential.height", pot.height);
    r.number(p, "width", "model.grid.potential.width", pot.width);
    r.numbers(p, "values", "model.grid.potential.values", pot.values);
    if (pot.preset == "table") {
      if (pot.values.size() != c.model.grid.n_points)
        r.fail("model.grid.potential.values", "must have n_points entries");
    } else if (pot.preset == "barrier") {
      if (!(pot.width > 0.0)) r.fail("model.grid.potential.width", "must be positive");
    } else if (pot.preset != "free" && pot.preset != "harmonic") {
      r.fail("model.grid.potential.preset", "must be free, harmonic, barrier or table");
    }
  }

  // constants
  const json* consts = r.section(doc, "constants", "constants");
  r.unknown_keys(consts, "constants.", {"hbar", "lambda"});
  r.number(consts, "hbar", "constants.hbar", c.hbar);
  r.number(consts, "lambda", "constants.lambda", c.lambda, true);
  if (!(c.hbar > 0.0)) r.fail("constants.hbar", "must be positive");
  if (c.lambda < 0.0) r.fail("constants.lambda", "must be non-negative");

  // initial
  const json* init = r.section(doc, "initial", "initial");
  if (is_qubit) {
    r.unknown_keys(init, "initial.", {"amplitudes"});
    c.initial.amplitudes = {Complex(1.0, 0.0), Complex(1.0, 0.0)};
    if (init != nullptr && init->contains("amplitudes")) {
      const json& a = init->at("amplitudes");
      std::vector<Complex> amps;
      bool ok = a.is_array() && a.size() == 2;
      for (std::size_t i = 0; ok && i < a.size(); ++i) {
        Complex z;
        ok = parse_complex(a[i], z);
        amps.push_back(z);
      }
      if (!ok)
        r.fail("initial.amplitudes", "must be two numbers or [re, im] pairs");
      else
        c.initial.amplitudes = amps;
    }
    double n2 = 0.0;
    for (Complex z : c.initial.amplitudes) n2 += std::norm(z);
    if (!(n2 > 0.0) || !std::isfinite(n2)) {
      r.fail("initial.amplitudes", "must not be the zero vector");
    } else {
      for (Complex& z : c.initial.amplitudes) z /= std::sqrt(n2);
    }
  }
  if (is_grid) {
    r.unknown_keys(init, "initial.", {"gaussian"});
    const json* gauss = init ? r.section(*init, "gaussian", "initial.gaussian") : nullptr;
    r.unknown_keys(gauss, "initial.gaussian.", {"x0", "p0", "sigma"});
    r.number(gauss, "x0", "initial.gaussian.x0", c.initial.x0);
    r.number(gauss, "p0", "initial.gaussian.p0", c.initial.p0);
    r.number(gauss, "sigma", "initial.gaussian.sigma", c.initial.sigma);
    if (!(c.initial.sigma > 0.0)) r.fail("initial.gaussian.sigma", "must be positive");
  }

  // sim
  const json* sim = r.section(doc, "sim", "sim");
  if (sim == nullptr) r.fail("sim", "missing required field");
  r.unknown_keys(sim, "sim.", {"dt", "t_final", "scheme", "record_stride", "observables"});
  r.number(sim, "dt", "sim.dt", c.sim.dt, true);
  r.number(sim, "t_final", "sim.t_final", c.sim.t_final, true);
  r.number(sim, "record_stride", "sim.record_stride", c.sim.record_stride);
  const bool has_dt = sim != nullptr && sim->contains("dt");
  if (has_dt && !(c.sim.dt > 0.0)) r.fail("sim.dt", "must be positive");
  if (has_dt && c.sim.dt > 0.0 && sim->contains("t_final") && !(c.sim.t_final >= c.sim.dt))
    r.fail("sim.t_final", "must be at least dt");
  if (c.sim.record_stride < 1) r.fail("sim.record_stride", "must be at least 1");
  std::string scheme_name(to_string(c.sim.scheme));
  r.string(sim, "scheme", "sim.scheme", scheme_name);
  try {
    c.sim.scheme = parse_scheme(scheme_name);
  } catch (const ValidationError& e) {
    r.fail("sim.scheme", "unknown scheme '" + scheme_name + "' (nonlinear, linear, gauge)");
  }

  const std::size_t dim = is_qubit ? 2 : c.model.grid.n_points;
  const auto& presets = is_qubit ? kQubitObservables : kGridObservables;
  if (sim != nullptr && sim->contains("observables")) {
    const json& list = sim->at("observables");
    if (!list.is_array()) r.fail("sim.observables", "must be an array");
    for (std::size_t i = 0; list.is_array() && i < list.size(); ++i) {
      const std::string path = "sim.observables[" + std::to_string(i) + "]";
      const json& o = list[i];
      if (o.is_string()) {
        const std::string name = o.get<std::string>();
        if ((is_qubit || is_grid) && !presets.count(name))
          r.fail(path, "unknown observable '" + name + "'");
        c.sim.observables.push_back({name, std::nullopt});
        continue;
      }
      if (!o.is_object() || !o.contains("name") || !o["name"].is_string() || !o.contains("matrix")) {
        r.fail(path, "must be a name or {name, matrix}");
        continue;
      }
      const json& m = o["matrix"];
      bool ok = m.is_array() && m.size() == dim;
      CMatrix mat(dim, dim);
      for (std::size_t row = 0; ok && row < dim; ++row) {
        ok = m[row].is_array() && m[row].size() == dim;
        for (std::size_t col = 0; ok && col < dim; ++col) {
          Complex z;
          ok = parse_complex(m[row][col], z);
          mat(row, col) = z;
        }
      }
      if (!ok) {
        r.fail(path + ".matrix", "must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
        continue;
      }
      if ((mat - mat.adjoint()).cwiseAbs().maxCoeff() > Operator::kHermitianTol)
        r.fail(path + ".matrix", "must be hermitian");
      c.sim.observables.push_back({o["name"].get<std::string>(), mat});
    }
  } else if (is_qubit) {
    c.sim.observables = {{"sigma_x", std::nullopt}, {"sigma_y", std::nullopt}, {"sigma_z", std::nullopt}};
  } else {
    c.sim.observables = {{"x", std::nullopt}, {"x2", std::nullopt}, {"p", std::nullopt}};
  }
  std::set<std::string> seen;
  for (const auto& o : c.sim.observables)
    if (!seen.insert(o.name).second) r.fail("sim.observables", "duplicate observable '" + o.name + "'");

  // ensemble
  const json* ens = r.section(doc, "ensemble", "ensemble");
  r.unknown_keys(ens, "ensemble.", {"n_trajectories", "master_seed"});
  r.number(ens, "n_trajectories", "ensemble.n_trajectories", c.ensemble.n_trajectories);
  r.number(ens, "master_seed", "ensemble.master_seed", c.ensemble.master_seed);
  if (c.ensemble.n_trajectories < 1) r.fail("ensemble.n_trajectories", "must be at least 1");

  // output
  const json* out = r.section(doc, "output", "output");
  r.unknown_keys(out, "output.", {"directory", "formats"});
  r.string(out, "directory", "output.directory", c.output.directory);
  if (out != nullptr && out->contains("formats")) {
    const json& f = out->at("formats");
    c.output.formats.clear();
    if (!f.is_array()) r.fail("output.formats", "must be an array");
    for (std::size_t i = 0; f.is_array() && i < f.size(); ++i) {
      if (!f[i].is_string() || (f[i] != "csv" && f[i] != "record" && f[i] != "binary"))
        r.fail("output.formats[" + std::to_string(i) + "]", "must be csv, record or binary");
      else
        c.output.formats.push_back(f[i].get<std::string>());
    }
  }

  // verify
  const json* ver = r.section(doc, "verify", "verify");
  r.unknown_keys(ver, "verify.",
                 {"n_seeds", "checkpoints", "dts", "order_seeds", "order_t_final", "filtering_dts", "filtering_seeds",
                  "observable"});
  r.number(ver, "n_seeds", "verify.n_seeds", c.verify.n_seeds);
  r.number(ver, "checkpoints", "verify.checkpoints", c.verify.checkpoints);
  r.numbers(ver, "dts", "verify.dts", c.verify.dts);
  r.number(ver, "order_seeds", "verify.order_seeds", c.verify.order_seeds);
  r.number(ver, "order_t_final", "verify.order_t_final", c.verify.order_t_final);
  r.numbers(ver, "filtering_dts", "verify.filtering_dts", c.verify.filtering_dts);
  r.number(ver, "filtering_seeds", "verify.filtering_seeds", c.verify.filtering_seeds);
  r.string(ver, "observable", "verify.observable", c.verify.observable);
  if (c.verify.n_seeds < 1) r.fail("verify.n_seeds", "must be at least 1");
  if (c.verify.checkpoints < 1) r.fail("verify.checkpoints", "must be at least 1");
  if (c.verify.order_seeds < 1) r.fail("verify.order_seeds", "must be at least 1");
  if (c.verify.filtering_seeds < 1) r.fail("verify.filtering_seeds", "must be at least 1");
  if (!(c.verify.order_t_final > 0.0)) r.fail("verify.order_t_final", "must be positive");
  for (double d : c.verify.dts)
    if (!(d > 0.0)) r.fail("verify.dts", "entries must be positive");
  for (double d : c.verify.filtering_dts)
    if (!(d > 0.0)) r.fail("verify.filtering_dts", "entries must be positive");
  if (c.verify.observable.empty()) c.verify.observable = is_grid ? "x" : "sigma_z";
  if ((is_qubit || is_grid) && !presets.count(c.verify.observable)) {
    bool custom = false;
    for (const auto& o : c.sim.observables) custom = custom || o.name == c.verify.observable;
    if (!custom) r.fail("verify.observable", "unknown observable '" + c.verify.observable + "'");
  }

  if (!r.issues.empty()) throw ValidationError(std::move(r.issues));
  c.resolved = resolved_document(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config", "cannot read '" + path.string() + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("--config", "'" + path.string() + "' is not valid JSON");
  return parse_config(doc, overrides);
}

std::shared_ptr<const ModelSpec> make_model(const RunConfig& cfg) {
  if (cfg.model.kind == "qubit") {
    Operator channel = cfg.model.channel == "sigma_x"   ? sigma_x()
                       : cfg.model.channel == "sigma_y" ? sigma_y()
                                                        : sigma_z();
    return std::make_shared<const ModelSpec>(build_qubit_model(cfg.model.h_field, cfg.lambda, channel, cfg.hbar));
  }
  const Grid& g = cfg.model.grid;
  const auto& p = cfg.model.potential;
  GridPotential pot = p.preset == "harmonic" ? GridPotential::harmonic(g, p.omega, cfg.model.mass)
                      : p.preset == "barrier" ? GridPotential::barrier(g, p.height, p.width)
                      : p.preset == "table"   ? GridPotential::table(g, p.values)
                                              : GridPotential::free(g);
  return std::make_shared<const ModelSpec>(build_grid_model(g, pot, cfg.model.mass, cfg.lambda, cfg.hbar));
}

StateVector make_initial_state(const RunConfig& cfg, const ModelSpec& model) {
  if (model.is_grid()) return gaussian_packet(model.basis, cfg.initial.x0, cfg.initial.p0, cfg.initial.sigma, cfg.hbar);
  CVector v(2);
  v << cfg.initial.amplitudes[0], cfg.initial.amplitudes[1];
  return StateVector(model.basis, v);
}

Operator resolve_observable(const RunConfig& cfg, const ModelSpec& model, const std::string& name) {
  for (const auto& o : cfg.sim.observables)
    if (o.name == name && o.matrix) return Operator::dense(model.basis, *o.matrix, Hermiticity::hermitian);
  if (name == "L") {
    if (model.channels.empty()) throw ValidationError("observable", "model has no channel");
    return model.channels.front();
  }
  if (model.is_grid()) {
    if (name == "x") return position_operator(model.basis);
    if (name == "x2") return position_squared_operator(model.basis);
    if (name == "p") return momentum_operator(model.basis, model.hbar);
  } else {
    if (name == "sigma_x") return sigma_x();
    if (name == "sigma_y") return sigma_y();
    if (name == "sigma_z") return sigma_z();
  }
  throw ValidationError("observable", "unknown observable '" + name + "'");
}

std::vector<NamedObservable> make_observables(const RunConfig& cfg, const ModelSpec& model) {
  std::vector<NamedObservable> out;
  for (const auto& o : cfg.sim.observables) out.push_back({o.name, resolve_observable(cfg, model, o.name)});
  return out;
}

}  // namespace qfilter
