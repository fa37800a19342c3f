#include "config.hpp"

#include <toml.hpp>

#include "noether/conservation.hpp"
#include "noether/idx.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace noether::app {

namespace {

// A TOML table together with its dotted path. Keys are marked as they are
// read; finish() rejects anything left over.
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return table_ && table_->contains(key); }

  const toml::node* node(const std::string& key) {
    if (!table_) return nullptr;
    used_.insert(key);
    return table_->get(key);
  }

  std::optional<double> number(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw ConfigError(at(key), "expected a number");
  }

  double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(at(key), "must be a positive number");
    return v;
  }

  std::optional<std::int64_t> integer(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    throw ConfigError(at(key), "expected an integer");
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min) {
    const std::int64_t v = integer(key).value_or(fallback);
    if (v < min) throw ConfigError(at(key), "must be >= " + std::to_string(min));
    return v;
  }

  std::optional<std::string> string(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ConfigError(at(key), "expected a string");
  }

  std::string string(const std::string& key, const std::string& fallback) {
    return string(key).value_or(fallback);
  }

  bool boolean(const std::string& key, bool fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ConfigError(at(key), "expected true or false");
  }

  const toml::array* array(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (const auto* a = n->as_array()) return a;
    throw ConfigError(at(key), "expected an array");
  }

  std::optional<std::vector<double>> numbers(const std::string& key) {
    const toml::array* a = array(key);
    if (!a) return std::nullopt;
    std::vector<double> out;
    for (std::size_t j = 0; j < a->size(); ++j) {
      const toml::node& n = *a->get(j);
      if (auto v = n.value_exact<double>()) out.push_back(*v);
      else if (auto iv = n.value_exact<std::int64_t>()) out.push_back(static_cast<double>(*iv));
      else throw ConfigError(at(key) + "[" + std::to_string(j) + "]", "expected a number");
    }
    return out;
  }

  std::optional<Matrix<double>> matrix(const std::string& key) {
    const toml::array* a = array(key);
    if (!a) return std::nullopt;
    Matrix<double> m;
    for (std::size_t r = 0; r < a->size(); ++r) {
      const std::string row_path = at(key) + "[" + std::to_string(r) + "]";
      const auto* row = a->get(r)->as_array();
      if (!row) throw ConfigError(row_path, "expected an array of numbers");
      if (r == 0) m.resize(static_cast<Index>(a->size()), static_cast<Index>(row->size()));
      if (static_cast<Index>(row->size()) != m.cols()) throw ConfigError(row_path, "ragged matrix");
      for (std::size_t c = 0; c < row->size(); ++c) {
        const toml::node& n = *row->get(c);
        if (auto v = n.value_exact<double>()) m(r, c) = *v;
        else if (auto iv = n.value_exact<std::int64_t>()) m(r, c) = static_cast<double>(*iv);
        else throw ConfigError(row_path + "[" + std::to_string(c) + "]", "expected a number");
      }
    }
    return m;
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_)
      if (!used_.count(std::string(k.str()))) throw ConfigError(at(std::string(k.str())), "unknown key");
  }

 private:
  const toml::table* table_;
  std::string path_;
  std::set<std::string> used_;
};

Section section(const toml::table& root, const std::string& name) {
  const toml::node* n = root.get(name);
  if (n && !n->is_table()) throw ConfigError(name, "expected a table");
  return Section(n ? n->as_table() : nullptr, name);
}

// [[name]] arrays of tables.
std::vector<Section> sections(const toml::table& root, const std::string& name) {
  std::vector<Section> out;
  const toml::node* n = root.get(name);
  if (!n) return out;
  const auto* arr = n->as_array();
  if (!arr) throw ConfigError(name, "expected an array of tables ([[" + name + "]])");
  for (std::size_t j = 0; j < arr->size(); ++j) {
    const std::string path = name + "[" + std::to_string(j) + "]";
    const auto* t = arr->get(j)->as_table();
    if (!t) throw ConfigError(path, "expected a table");
    out.emplace_back(t, path);
  }
  return out;
}

template <typename F>
auto rethrow_as_config(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

Activation activation_at(const std::string& path, const std::string& text) {
  return rethrow_as_config(path, [&] { return Activation::parse(text); });
}

void parse_run(const toml::table& root, Config& cfg, std::optional<std::uint64_t> seed_override) {
  Section s = section(root, "run");
  cfg.seed = static_cast<std::uint64_t>(s.integer("seed", 0, 0));
  if (seed_override) cfg.seed = *seed_override;
  cfg.sample_every = static_cast<std::size_t>(s.integer("sample_every", 1, 1));
  cfg.plots = s.boolean("plots", true);
  cfg.output = s.string("output", "out");
  s.finish();
}

void parse_architecture(const toml::table& root, Config& cfg) {
  Section s = section(root, "architecture");
  if (!s.present()) throw ConfigError("architecture", "missing table");
  const auto dims = s.numbers("dims");
  if (!dims) throw ConfigError("architecture.dims", "missing");
  if (dims->size() < 2) throw ConfigError("architecture.dims", "needs at least two entries");
  std::vector<Index> d;
  for (std::size_t j = 0; j < dims->size(); ++j) {
    const double v = (*dims)[j];
    if (v < 1 || v != std::floor(v))
      throw ConfigError("architecture.dims[" + std::to_string(j) + "]", "must be a positive integer");
    d.push_back(static_cast<Index>(v));
  }
  const std::size_t k = d.size() - 1;
  const Activation hidden = activation_at(s.at("activation"), s.string("activation", "relu"));
  const Activation output = activation_at(s.at("output_activation"), s.string("output_activation", "linear"));
  const bool bias = s.boolean("bias", false);
  cfg.arch = Architecture::mlp(d, hidden, output, bias);
  if (const toml::array* acts = s.array("activations")) {
    if (acts->size() != k)
      throw ConfigError(s.at("activations"), "needs one entry per layer (" + std::to_string(k) + ")");
    for (std::size_t j = 0; j < k; ++j) {
      const std::string path = s.at("activations") + "[" + std::to_string(j) + "]";
      auto text = acts->get(j)->value_exact<std::string>();
      if (!text) throw ConfigError(path, "expected a string");
      cfg.arch.activations[j] = activation_at(path, *text);
    }
  }
  s.finish();
}

void parse_initial_state(const toml::table& root, Config& cfg) {
  Section s = section(root, "initial_state");
  cfg.init = rethrow_as_config(s.at("init"), [&] { return InitScheme::parse(s.string("init", "lecun")); });
  cfg.init_seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(cfg.seed), 0));
  if (!s.has("seed")) cfg.init_seed = cfg.seed;
  if (auto w = s.numbers("w")) cfg.w0 = Eigen::Map<const Vector<double>>(w->data(), static_cast<Index>(w->size()));
  if (auto v = s.numbers("v")) cfg.v0 = Eigen::Map<const Vector<double>>(v->data(), static_cast<Index>(v->size()));
  s.finish();
}

void parse_dataset(const toml::table& root, Config& cfg) {
  Section s = section(root, "dataset");
  auto& d = cfg.dataset;
  d.kind = s.string("kind", "none");
  d.seed = s.has("seed") ? static_cast<std::uint64_t>(s.integer("seed", 0, 0)) : cfg.seed;
  static const std::set<std::string> kinds = {"none", "teacher", "sphere", "rotational", "cross_polytope", "idx"};
  if (!kinds.count(d.kind)) throw ConfigError(s.at("kind"), "unknown dataset kind '" + d.kind + "'");
  if (d.kind == "teacher" || d.kind == "sphere" || d.kind == "rotational")
    d.n = static_cast<Index>(s.integer("n", 100, 1));
  if (d.kind == "rotational") {
    d.target = s.string("target", "norm");
    if (d.target != "zero" && d.target != "norm" && d.target != "sin_norm" && d.target != "gaussian")
      throw ConfigError(s.at("target"), "expected zero, norm, sin_norm or gaussian");
  }
  if (d.kind == "cross_polytope") d.point_target = s.numbers("target").value_or(std::vector<double>{1.0});
  if (d.kind == "idx") {
    d.images = s.string("images", "");
    d.labels = s.string("labels", "");
    if (d.images.empty()) throw ConfigError(s.at("images"), "missing");
    if (d.labels.empty()) throw ConfigError(s.at("labels"), "missing");
    if (auto lim = s.integer("limit")) {
      if (*lim < 0) throw ConfigError(s.at("limit"), "must be >= 0");
      d.limit = static_cast<std::size_t>(*lim);
    }
  }
  s.finish();
}

void parse_loss(const toml::table& root, Config& cfg) {
  Section s = section(root, "loss");
  cfg.loss = s.string("kind", cfg.dataset.kind == "none" ? "potential" : "quadratic");
  if (cfg.loss != "quadratic" && cfg.loss != "nll" && cfg.loss != "potential")
    throw ConfigError(s.at("kind"), "expected quadratic, nll or potential");
  if (cfg.loss == "potential") {
    cfg.potential = s.string("potential", "zero");
    if (cfg.potential != "zero" && cfg.potential != "radial_quartic" && cfg.potential != "half_squared_norm")
      throw ConfigError(s.at("potential"), "expected zero, radial_quartic or half_squared_norm");
  } else if (cfg.dataset.kind == "none") {
    throw ConfigError("loss.kind", "'" + cfg.loss + "' needs a [dataset]");
  }
  if (cfg.loss == "nll" && cfg.dataset.kind != "teacher" && cfg.dataset.kind != "idx")
    throw ConfigError("loss.kind", "nll needs a labelled dataset (teacher or idx)");
  if (cfg.loss == "quadratic" && (cfg.dataset.kind == "teacher" || cfg.dataset.kind == "idx"))
    throw ConfigError("loss.kind", "dataset '" + cfg.dataset.kind + "' is labelled; use nll");
  s.finish();
}

void check_kappa(const std::string& path, const std::string& text) {
  std::string body = text;
  if (body.size() > 2 && body.compare(body.size() - 2, 2, "/t") == 0) body.resize(body.size() - 2);
  double c = 0;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), c);
  if (ec != std::errc() || p != body.data() + body.size())
    throw ConfigError(path, "expected a number or '<c>/t', got '" + text + "'");
}

void parse_dynamics(const toml::table& root, Config& cfg) {
  Section s = section(root, "dynamics");
  auto& d = cfg.dynamics;
  d.kind = s.string("kind", "gf");
  if (d.kind != "gf" && d.kind != "nd" && d.kind != "nagd" && d.kind != "nagf" && d.kind != "general")
    throw ConfigError(s.at("kind"), "expected gf, nd, nagd, nagf or general");
  d.eta = s.positive("eta", 0.01);
  d.steps = static_cast<std::size_t>(s.integer("steps", 0, 0));
  if (d.kind == "nagf") {
    d.delta = s.number("delta", -1.0);
    if (s.has("delta") && !(d.delta > 0.0)) throw ConfigError(s.at("delta"), "must be positive");
  }
  if (d.kind == "general") {
    auto kappa = [&](const std::string& key, const std::string& fallback) {
      const toml::node* n = s.node(key);
      if (!n) return fallback;
      if (auto v = n->value_exact<std::string>()) {
        check_kappa(s.at(key), *v);
        return *v;
      }
      if (auto v = n->value_exact<double>()) return std::to_string(*v);
      if (auto v = n->value_exact<std::int64_t>()) return std::to_string(*v);
      throw ConfigError(s.at(key), "expected a number or '<c>/t'");
    };
    d.kappa1 = kappa("kappa1", "0");
    d.kappa2 = kappa("kappa2", "1");
    d.t_start = s.number("t_start", 0.0);
  }
  s.finish();
}

void parse_monitors(const toml::table& root, Config& cfg) {
  static const std::set<std::string> kinds = {
      "norm_gap", "neuron_gap", "balancedness", "rotation_momentum", "angular_momentum",
      "hamiltonian", "kinetic_energy", "total_abs_gap"};
  for (Section& s : sections(root, "monitors")) {
    MonitorConfig m;
    m.kind = s.string("kind", "");
    if (!kinds.count(m.kind)) throw ConfigError(s.at("kind"), "unknown monitor kind '" + m.kind + "'");
    m.name = s.string("name", "");
    if (m.kind == "norm_gap" || m.kind == "neuron_gap" || m.kind == "balancedness")
      m.h = static_cast<Index>(s.integer("h", 1, 1));
    if (m.kind == "neuron_gap") m.i = static_cast<Index>(s.integer("i", 0, 0));
    if (m.kind == "norm_gap" || m.kind == "neuron_gap") m.p = s.number("p");
    if (m.name.empty()) {
      m.name = m.kind;
      if (m.kind == "norm_gap" || m.kind == "balancedness") m.name += "_" + std::to_string(m.h);
      if (m.kind == "neuron_gap") m.name += "_" + std::to_string(m.h) + "_" + std::to_string(m.i);
    }
    s.finish();
    cfg.monitors.push_back(std::move(m));
  }
}

void parse_generators(const toml::table& root, Config& cfg) {
  static const std::set<std::string> families = {"neurons", "homogeneity", "swish", "linear", "rotation"};
  for (Section& s : sections(root, "generators")) {
    GeneratorConfig g;
    g.family = s.string("family", "");
    if (!families.count(g.family))
      throw ConfigError(s.at("family"), "unknown generator family '" + g.family + "'");
    if (g.family == "homogeneity" || g.family == "swish" || g.family == "linear")
      g.h = static_cast<Index>(s.integer("h", 1, 1));
    if (g.family == "homogeneity" || g.family == "swish") g.i = static_cast<Index>(s.integer("i", 0, 0));
    if (g.family == "homogeneity") g.p = s.number("p");
    if (g.family == "linear") {
      g.matrix = s.matrix("A");
      g.count = static_cast<std::size_t>(s.integer("count", 20, 1));
      g.seed = s.has("seed") ? static_cast<std::uint64_t>(s.integer("seed", 0, 0)) : cfg.seed;
    }
    if (g.family == "rotation") g.matrix = s.matrix("P");
    s.finish();
    cfg.generators.push_back(std::move(g));
  }
}

void parse_check(const toml::table& root, Config& cfg) {
  Section s = section(root, "check");
  cfg.check.stride = static_cast<std::size_t>(s.integer("stride", 1, 1));
  cfg.check.eps = s.number("eps", 0.1);
  const std::string force = s.string("force", "finite_difference");
  if (force == "finite_difference") cfg.check.force = ForceEstimate::FiniteDifference;
  else if (force == "ode") cfg.check.force = ForceEstimate::OdeRhs;
  else throw ConfigError(s.at("force"), "expected finite_difference or ode");
  s.finish();
}

void parse_ntk(const toml::table& root, Config& cfg) {
  Section s = section(root, "ntk");
  if (auto widths = s.numbers("widths")) {
    if (widths->empty()) throw ConfigError(s.at("widths"), "needs at least one width");
    cfg.ntk.widths.clear();
    for (std::size_t j = 0; j < widths->size(); ++j) {
      const double w = (*widths)[j];
      if (w < 1 || w != std::floor(w))
        throw ConfigError(s.at("widths") + "[" + std::to_string(j) + "]", "must be a positive integer");
      cfg.ntk.widths.push_back(static_cast<Index>(w));
    }
  }
  s.finish();
}

double radial_target(const std::string& name, double r) {
  if (name == "zero") return 0.0;
  if (name == "norm") return r;
  if (name == "sin_norm") return std::sin(r);
  return std::exp(-0.5 * r * r);
}

std::function<double(double)> kappa_function(const std::string& text) {
  const bool inverse = text.size() > 2 && text.compare(text.size() - 2, 2, "/t") == 0;
  const double c = std::stod(inverse ? text.substr(0, text.size() - 2) : text);
  if (inverse) return [c](double t) { return c / t; };
  return [c](double) { return c; };
}

// p for a layer-h monitor or generator: explicit, or the homogeneity degree
// of layer h (1 for Swish).
double degree_for(const std::string& path, const Network<double>& net, Index h, std::optional<double> p) {
  if (p) return *p;
  if (h < 1 || h > net.depth()) throw ConfigError(path, "layer " + std::to_string(h) + " does not exist");
  if (net.has_beta(h)) return 1.0;
  if (auto deg = net.activation(h).homogeneity_degree()) return *deg;
  throw ConfigError(path, "layer " + std::to_string(h) + " is not homogeneous; give p explicitly");
}

}  // namespace

Config parse_config(const std::string& text, const std::string& source,
                    std::optional<std::uint64_t> seed_override) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ", column " << e.source().begin.column << ")";
    throw ConfigError(source, msg.str());
  }
  static const std::set<std::string> tables = {"run", "architecture", "initial_state", "dataset", "loss",
                                               "dynamics", "monitors", "generators", "check", "ntk"};
  for (const auto& [k, v] : root)
    if (!tables.count(std::string(k.str()))) throw ConfigError(std::string(k.str()), "unknown table");

  Config cfg;
  cfg.source = source;
  parse_run(root, cfg, seed_override);
  parse_architecture(root, cfg);
  parse_initial_state(root, cfg);
  parse_dataset(root, cfg);
  parse_loss(root, cfg);
  parse_dynamics(root, cfg);
  parse_monitors(root, cfg);
  parse_generators(root, cfg);
  parse_check(root, cfg);
  parse_ntk(root, cfg);
  return cfg;
}

Config load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, seed_override);
}

Network<double> build_network(const Config& cfg, const Architecture& arch) {
  Network<double> net = rethrow_as_config("initial_state.init", [&] {
    return initialize<double>(arch, cfg.init, cfg.init_seed);
  });
  if (cfg.w0) {
    if (cfg.w0->size() != net.param_count())
      throw ConfigError("initial_state.w", "needs " + std::to_string(net.param_count()) + " entries, got " +
                                               std::to_string(cfg.w0->size()));
    net.assign(*cfg.w0);
  }
  return net;
}

Network<double> build_network(const Config& cfg) { return build_network(cfg, cfg.arch); }

std::shared_ptr<Dataset<double>> build_dataset(const Config& cfg) {
  const auto& d = cfg.dataset;
  const Index dx = cfg.arch.dims.front();
  const Index dy = cfg.arch.dims.back();
  std::shared_ptr<Dataset<double>> data;
  if (d.kind == "none") return nullptr;
  if (d.kind == "teacher") {
    if (dy < 2) throw ConfigError("dataset.kind", "teacher data needs d_K >= 2 classes");
    data = synth_teacher_classification<double>(d.n, dx, dy, d.seed);
  } else if (d.kind == "sphere") {
    if (dx < 2) throw ConfigError("dataset.kind", "sphere data needs d_0 >= 2");
    data = synth_sphere_regression<double>(d.n, dx, d.seed);
  } else if (d.kind == "rotational") {
    if (dx < 2) throw ConfigError("dataset.kind", "rotational data needs d_0 >= 2");
    const std::string target = d.target;
    data = synth_rotational<double>(d.n, dx, d.seed, [target](double r) { return radial_target(target, r); });
  } else if (d.kind == "cross_polytope") {
    const Vector<double> t = Eigen::Map<const Vector<double>>(d.point_target.data(),
                                                              static_cast<Index>(d.point_target.size()));
    data = cross_polytope<double>(dx, t);
  } else {
    data = rethrow_as_config("dataset.images", [&] { return load_idx_dataset(d.images, d.labels, d.limit); });
    if (data->inputs.cols() != dx)
      throw ConfigError("architecture.dims[0]", "IDX records have " + std::to_string(data->inputs.cols()) +
                                                    " pixels");
  }
  if (data->targets.size() > 0 && data->targets.cols() != dy)
    throw ConfigError("architecture.dims", "output width " + std::to_string(dy) + " does not match " +
                                               std::to_string(data->targets.cols()) + " target columns");
  if (data->size() < 1) throw ConfigError("dataset", "dataset is empty");
  return data;
}

LossSpec<double> build_loss(const Config& cfg, std::shared_ptr<Dataset<double>> data) {
  if (cfg.loss == "potential") {
    if (cfg.potential == "radial_quartic") return LossSpec<double>::from_potential(Potential<double>::radial_quartic());
    if (cfg.potential == "half_squared_norm")
      return LossSpec<double>::from_potential(Potential<double>::half_squared_norm());
    return LossSpec<double>::from_potential(Potential<double>::zero());
  }
  if (!data) throw ConfigError("dataset", "loss '" + cfg.loss + "' needs a dataset");
  if (cfg.loss == "nll") return LossSpec<double>::nll(std::move(data));
  return LossSpec<double>::quadratic(std::move(data));
}

DynamicsSpec<double> build_dynamics(const Config& cfg) {
  const auto& d = cfg.dynamics;
  DynamicsSpec<double> spec;
  if (d.kind == "gf") spec = DynamicsSpec<double>::gradient_flow(d.eta, d.steps);
  else if (d.kind == "nd") spec = DynamicsSpec<double>::newtonian(d.eta, d.steps);
  else if (d.kind == "nagd") spec = DynamicsSpec<double>::nesterov_discrete(d.eta, d.steps);
  else if (d.kind == "nagf") spec = DynamicsSpec<double>::nesterov_flow(d.eta, d.steps, d.delta);
  else
    spec = DynamicsSpec<double>::general(d.eta, d.steps, kappa_function(d.kappa1), kappa_function(d.kappa2),
                                         d.t_start);
  rethrow_as_config("dynamics", [&] {
    spec.validate();
    return 0;
  });
  return spec;
}

std::vector<Monitor<double>> build_monitors(const Config& cfg, const Network<double>& net) {
  std::vector<Monitor<double>> out;
  std::set<std::string> names;
  auto add = [&](const std::string& path, Monitor<double> m) {
    if (!names.insert(m.name).second) throw ConfigError(path + ".name", "duplicate monitor name '" + m.name + "'");
    out.push_back(std::move(m));
  };
  const bool second = cfg.dynamics.kind != "gf";
  for (std::size_t j = 0; j < cfg.monitors.size(); ++j) {
    const auto& m = cfg.monitors[j];
    const std::string path = "monitors[" + std::to_string(j) + "]";
    auto pair_layer = [&] {
      if (m.h >= net.depth())
        throw ConfigError(path + ".h", "needs 1 <= h < K = " + std::to_string(net.depth()));
    };
    auto needs_velocity = [&] {
      if (!second) throw ConfigError(path + ".kind", m.kind + " needs second-order dynamics");
    };
    if (m.kind == "norm_gap") {
      pair_layer();
      add(path, norm_gap_monitor<double>(m.name, m.h, degree_for(path + ".p", net, m.h, m.p)));
    } else if (m.kind == "neuron_gap") {
      pair_layer();
      if (m.i >= net.width(m.h)) throw ConfigError(path + ".i", "neuron outside layer " + std::to_string(m.h));
      add(path, neuron_gap_monitor<double>(m.name, m.h, m.i, degree_for(path + ".p", net, m.h, m.p)));
    } else if (m.kind == "balancedness") {
      pair_layer();
      add(path, balancedness_monitor<double>(m.name, m.h));
    } else if (m.kind == "rotation_momentum") {
      needs_velocity();
      add(path, rotation_momentum_monitor<double>(m.name));
    } else if (m.kind == "angular_momentum") {
      needs_velocity();
      if (net.param_count() != 3)
        throw ConfigError(path + ".kind", "angular momentum needs exactly 3 parameters, the net has " +
                                              std::to_string(net.param_count()));
      for (int k = 0; k < 3; ++k) add(path, angular_momentum_monitor<double>(m.name + "_" + "xyz"[k], k));
    } else if (m.kind == "hamiltonian") {
      needs_velocity();
      add(path, hamiltonian_monitor<double>(m.name));
    } else if (m.kind == "kinetic_energy") {
      needs_velocity();
      add(path, kinetic_energy_monitor<double>(m.name));
    } else {
      add(path, total_abs_gap_monitor<double>(m.name));
    }
  }
  return out;
}

std::vector<Generator<double>> build_generators(const Config& cfg, const Network<double>& net) {
  std::vector<Generator<double>> out;
  for (std::size_t j = 0; j < cfg.generators.size(); ++j) {
    const auto& g = cfg.generators[j];
    const std::string path = "generators[" + std::to_string(j) + "]";
    std::vector<Generator<double>> batch;
    if (g.family == "neurons") {
      batch = neuron_generators(net);
      if (batch.empty()) throw ConfigError(path + ".family", "architecture has no homogeneous or Swish hidden layer");
    } else if (g.family == "homogeneity") {
      batch.push_back(Homogeneity{g.h, g.i, degree_for(path + ".p", net, g.h, g.p),
                                  g.h <= net.depth() && net.has_bias(g.h)});
    } else if (g.family == "swish") {
      batch.push_back(SwishNeuron{g.h, g.i, g.h <= net.depth() && net.has_bias(g.h)});
    } else if (g.family == "linear") {
      if (g.matrix) {
        batch.push_back(LinearLayer<double>{g.h, *g.matrix});
      } else {
        if (g.h >= net.depth()) throw ConfigError(path + ".h", "needs 1 <= h < K");
        Rng rng(g.seed);
        for (std::size_t c = 0; c < g.count; ++c) {
          Matrix<double> a(net.width(g.h), net.width(g.h));
          detail::fill_normal(a, 1.0, rng);
          batch.push_back(LinearLayer<double>{g.h, a});
        }
      }
    } else {
      if (g.matrix) batch.push_back(Rotation<double>{*g.matrix});
      else
        for (auto& p : skew_basis<double>(net.input_dim())) batch.push_back(Rotation<double>{std::move(p)});
      if (batch.empty()) throw ConfigError(path + ".family", "rotations need d_0 >= 2");
    }
    for (const auto& gen : batch) {
      try {
        validate(gen, net);
      } catch (const GeneratorError& e) {
        throw ConfigError(path, e.what());
      }
      out.push_back(gen);
    }
  }
  return out;
}

RunOptions<double> build_run_options(const Config& cfg, const Network<double>& net) {
  RunOptions<double> opts;
  opts.sample_every = cfg.sample_every;
  if (cfg.v0) {
    if (cfg.dynamics.kind == "gf") throw ConfigError("initial_state.v", "gradient flow has no velocity");
    if (cfg.v0->size() != net.param_count())
      throw ConfigError("initial_state.v", "needs " + std::to_string(net.param_count()) + " entries, got " +
                                               std::to_string(cfg.v0->size()));
    opts.initial_velocity = *cfg.v0;
  }
  return opts;
}

}  // namespace noether::app
