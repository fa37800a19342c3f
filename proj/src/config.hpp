#ifndef NOETHER_APP_CONFIG_HPP
#define NOETHER_APP_CONFIG_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "noether/data.hpp"
#include "noether/dynamics.hpp"
#include "noether/loss.hpp"
#include "noether/network.hpp"
#include "noether/symmetry.hpp"

namespace noether::app {

struct DatasetConfig {
  std::string kind = "none";  // none | teacher | sphere | rotational | cross_polytope | idx
  Index n = 0;
  std::uint64_t seed = 0;
  std::string target = "norm";      // rotational: zero | norm | sin_norm | gaussian
  std::vector<double> point_target; // cross_polytope
  std::string images, labels;       // idx
  std::optional<std::size_t> limit;
};

struct DynamicsConfig {
  std::string kind = "gf";  // gf | nd | nagd | nagf | general
  double eta = 0.01;
  std::size_t steps = 0;
  double delta = -1.0;
  // general: "c" for a constant, "c/t" for c / t.
  std::string kappa1 = "0", kappa2 = "1";
  double t_start = 0.0;
};

struct MonitorConfig {
  std::string kind;
  std::string name;
  Index h = 1;
  Index i = 0;
  std::optional<double> p;
};

struct GeneratorConfig {
  std::string family;  // neurons | homogeneity | swish | linear | rotation
  Index h = 1;
  Index i = 0;
  std::optional<double> p;
  std::size_t count = 20;  // linear: random A matrices
  std::uint64_t seed = 0;
  std::optional<Matrix<double>> matrix;  // explicit A or P
};

struct CheckConfig {
  std::size_t stride = 1;
  double eps = 0.1;
  ForceEstimate force = ForceEstimate::FiniteDifference;
};

struct NtkConfig {
  std::vector<Index> widths = {64, 256, 1024};
};

struct Config {
  std::string source;
  std::uint64_t seed = 0;
  std::size_t sample_every = 1;
  bool plots = true;
  std::string output = "out";

  Architecture arch;

  InitScheme init = InitScheme::lecun();
  std::uint64_t init_seed = 0;
  std::optional<Vector<double>> w0, v0;

  DatasetConfig dataset;
  std::string loss = "quadratic";  // quadratic | nll | potential
  std::string potential = "zero";

  DynamicsConfig dynamics;
  std::vector<MonitorConfig> monitors;
  std::vector<GeneratorConfig> generators;
  CheckConfig check;
  NtkConfig ntk;
};

/// Parses TOML text; errors are ConfigError with a dotted field path.
/// `seed_override` replaces [run].seed and every seed derived from it.
Config parse_config(const std::string& text, const std::string& source = "<string>",
                    std::optional<std::uint64_t> seed_override = std::nullopt);
Config load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Initial parameters, with [initial_state].w applied when given.
Network<double> build_network(const Config& cfg, const Architecture& arch);
Network<double> build_network(const Config& cfg);
std::shared_ptr<Dataset<double>> build_dataset(const Config& cfg);
LossSpec<double> build_loss(const Config& cfg, std::shared_ptr<Dataset<double>> data);
DynamicsSpec<double> build_dynamics(const Config& cfg);
std::vector<Monitor<double>> build_monitors(const Config& cfg, const Network<double>& net);
std::vector<Generator<double>> build_generators(const Config& cfg, const Network<double>& net);
RunOptions<double> build_run_options(const Config& cfg, const Network<double>& net);

}  // namespace noether::app

#endif  // NOETHER_APP_CONFIG_HPP
