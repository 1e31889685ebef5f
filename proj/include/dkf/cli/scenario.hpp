#pragma once

// Scenario files: YAML documents carrying the true system, the nominal model,
// the communication graph, the consensus-parameter grid and run settings.
//
// Matrix literals accept
//   [[1, 0], [0, 1]]        rows
//   [1, 0, 0]               a single row (or a vector where one is expected)
//   0.2                     1 x 1
//   {identity: 4, scale: 0.03}
//   {diag: [0, 0.03, 0.03, 0.03]}
//   {zeros: [2, 3]}
//   {blocks: [<matrix>, <matrix>, ...]}   block diagonal

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dkf/analysis.hpp"
#include "dkf/sim.hpp"

namespace dkf::cli {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& field, int line, const std::string& what)
      : std::runtime_error(format(field, line, what)), field_(field), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, int line,
                            const std::string& what) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + what;
  }
  std::string field_;
  int line_;
};

/// Consensus-parameter grid: "10", "1,2,5", "log:FROM:TO:POINTS", each
/// optionally prefixed with "rel:" to scale by the threshold gamma_bar.
struct GammaSpec {
  bool relative = false;
  bool log_range = false;
  std::vector<double> values;  // explicit list
  double from = 0.0, to = 0.0;
  int points = 0;

  std::vector<double> resolve(double gamma_bar) const {
    std::vector<double> out;
    if (log_range) {
      for (int i = 0; i < points; ++i) {
        const double u = points == 1 ? 0.0 : i / double(points - 1);
        out.push_back(from * std::pow(to / from, u));
      }
    } else {
      out = values;
    }
    if (relative)
      for (double& g : out) g *= gamma_bar;
    return out;
  }

  std::string str() const {
    std::ostringstream os;
    os.precision(17);
    if (relative) os << "rel:";
    if (log_range) {
      os << "log:" << from << ':' << to << ':' << points;
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
    }
    return os.str();
  }
};

inline GammaSpec parse_gamma_spec(std::string text) {
  auto fail = [&](const std::string& why) {
    return ParseError("gamma", 0, "'" + text + "': " + why);
  };
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw fail("bad number '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw fail("bad number '" + s + "'");
    return v;
  };
  GammaSpec g;
  if (text.rfind("rel:", 0) == 0) {
    g.relative = true;
    text = text.substr(4);
  }
  std::vector<std::string> parts;
  if (text.rfind("log:", 0) == 0) {
    std::stringstream ss(text.substr(4));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw fail("expected log:FROM:TO:POINTS");
    g.log_range = true;
    g.from = number(parts[0]);
    g.to = number(parts[1]);
    const double pts = number(parts[2]);
    if (pts < 1 || pts != std::floor(pts)) throw fail("POINTS must be a positive integer");
    g.points = static_cast<int>(pts);
    if (!(g.from > 0.0) || !(g.to > 0.0)) throw fail("range must be positive");
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
      p.erase(0, p.find_first_not_of(' '));
      p.erase(p.find_last_not_of(' ') + 1);
      const double v = number(p);
      if (!(v > 0.0)) throw fail("values must be positive");
      g.values.push_back(v);
    }
    if (g.values.empty()) throw fail("empty list");
  }
  return g;
}

/// Settings for the deterministic (ODE) side of the analysis commands.
struct AnalysisConfig {
  TimeGrid grid{1e-3, 10.0, 100};
  SVariant s_variant = SVariant::proof;
  std::optional<double> gamma_u0;
  double gamma_u0_factor = 1.05;
  std::optional<double> lambda_override;
  // Grid for the large-gamma fit, in units of gamma_bar.
  double fit_from = 2.0;
  double fit_to = 200.0;
  int fit_points = 20;

  FilterOptions filter_options() const {
    FilterOptions o;
    o.gamma_u0 = gamma_u0;
    o.gamma_u0_factor = gamma_u0_factor;
    o.lambda_override = lambda_override;
    return o;
  }
};

struct Scenario {
  std::string name;
  TrueSystem truth;
  NominalModel nominal;
  Topology topology{Matrix::Zero(1, 1)};
  GammaSpec gamma = parse_gamma_spec("rel:1.05");
  SimConfig sim;
  AnalysisConfig analysis;
  std::string output_dir = "out";

  void validate() const {
    truth.validate();
    nominal.validate();
    check_pair(truth, nominal);
    if (topology.node_count() != truth.sensor_count()) {
      throw DimensionError("topology has " + std::to_string(topology.node_count()) +
                           " nodes but there are " +
                           std::to_string(truth.sensor_count()) + " sensors");
    }
    sim.validate();
    analysis.grid.validate();
  }
};

namespace detail {

inline int line_of(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? m.line + 1 : 0;
}

inline double scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) throw ParseError(field, line_of(n), "expected a number");
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    throw ParseError(field, line_of(n), "expected a number, got '" + n.Scalar() + "'");
  }
}

inline long integer(const YAML::Node& n, const std::string& field) {
  const double v = scalar(n, field);
  if (v != std::floor(v)) throw ParseError(field, line_of(n), "expected an integer");
  return static_cast<long>(v);
}

inline std::string text(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) throw ParseError(field, line_of(n), "expected a string");
  return n.Scalar();
}

inline Matrix matrix(const YAML::Node& n, const std::string& field);

inline Matrix row_list(const YAML::Node& n, const std::string& field) {
  if (n.size() == 0) throw ParseError(field, line_of(n), "empty matrix");
  if (n[0].IsScalar()) {
    Matrix m(1, n.size());
    for (std::size_t j = 0; j < n.size(); ++j)
      m(0, j) = scalar(n[j], field + "[" + std::to_string(j) + "]");
    return m;
  }
  const auto cols = n[0].size();
  Matrix m(n.size(), cols);
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto row = n[i];
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!row.IsSequence()) throw ParseError(f, line_of(row), "expected a row list");
    if (row.size() != cols) {
      throw ParseError(f, line_of(row), "row has " + std::to_string(row.size()) +
                                            " entries, expected " + std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j)
      m(i, j) = scalar(row[j], f + "[" + std::to_string(j) + "]");
  }
  return m;
}

inline Matrix matrix(const YAML::Node& n, const std::string& field) {
  if (!n) throw ParseError(field, 0, "missing");
  if (n.IsScalar()) return Matrix::Constant(1, 1, scalar(n, field));
  if (n.IsSequence()) return row_list(n, field);
  if (!n.IsMap()) throw ParseError(field, line_of(n), "expected a matrix literal");
  if (n["identity"]) {
    const long d = integer(n["identity"], field + ".identity");
    if (d < 1) throw ParseError(field, line_of(n), "identity size must be positive");
    const double s = n["scale"] ? scalar(n["scale"], field + ".scale") : 1.0;
    return s * Matrix::Identity(d, d);
  }
  if (n["diag"]) {
    const Matrix d = matrix(n["diag"], field + ".diag");
    if (d.rows() != 1) throw ParseError(field, line_of(n), "diag takes a flat list");
    return Matrix(d.row(0).asDiagonal());
  }
  if (n["zeros"]) {
    const auto z = n["zeros"];
    if (!z.IsSequence() || z.size() != 2) {
      throw ParseError(field, line_of(z), "zeros takes [rows, cols]");
    }
    return Matrix::Zero(integer(z[0], field), integer(z[1], field));
  }
  if (n["blocks"]) {
    const auto b = n["blocks"];
    if (!b.IsSequence()) throw ParseError(field, line_of(b), "blocks takes a list");
    std::vector<Matrix> parts;
    for (std::size_t i = 0; i < b.size(); ++i)
      parts.push_back(matrix(b[i], field + ".blocks[" + std::to_string(i) + "]"));
    return block_diag(parts);
  }
  throw ParseError(field, line_of(n), "unknown matrix form");
}

inline Vector vector(const YAML::Node& n, const std::string& field) {
  const Matrix m = matrix(n, field);
  if (m.rows() != 1 && m.cols() != 1) throw ParseError(field, line_of(n), "expected a vector");
  return m.rows() == 1 ? Vector(m.row(0).transpose()) : Vector(m.col(0));
}

inline std::vector<Sensor> sensors(const YAML::Node& n, const std::string& field) {
  if (!n || !n.IsSequence() || n.size() == 0) {
    throw ParseError(field, n ? line_of(n) : 0, "expected a non-empty sensor list");
  }
  std::vector<Sensor> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    out.push_back({matrix(n[i]["C"], f + ".C"), matrix(n[i]["R"], f + ".R")});
  }
  return out;
}

inline void check_keys(const YAML::Node& n, const std::string& field,
                       std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) throw ParseError(field, line_of(n), "expected a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.Scalar();
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) {
      throw ParseError(field.empty() ? key : field + "." + key, line_of(kv.first),
                       "unknown key");
    }
  }
}

inline Topology topology(const YAML::Node& n, long sensors) {
  check_keys(n, "topology", {"ring", "complete", "edges", "adjacency", "nodes",
                             "lambda_override"});
  try {
    if (n["ring"]) return Topology::ring(integer(n["ring"], "topology.ring"));
    if (n["complete"]) return Topology::complete(integer(n["complete"], "topology.complete"));
    if (n["adjacency"]) return Topology(matrix(n["adjacency"], "topology.adjacency"));
    if (n["edges"]) {
      const auto e = n["edges"];
      std::vector<std::pair<int, int>> edges;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string f = "topology.edges[" + std::to_string(i) + "]";
        if (!e[i].IsSequence() || e[i].size() != 2) {
          throw ParseError(f, line_of(e[i]), "expected [a, b]");
        }
        edges.emplace_back(static_cast<int>(integer(e[i][0], f)),
                           static_cast<int>(integer(e[i][1], f)));
      }
      const long nodes = n["nodes"] ? integer(n["nodes"], "topology.nodes") : sensors;
      return Topology::from_edges(nodes, edges);
    }
  } catch (const std::invalid_argument& ex) {
    throw ParseError("topology", line_of(n), ex.what());
  }
  throw ParseError("topology", line_of(n), "need one of ring, complete, edges, adjacency");
}

inline SimScheme scheme(const YAML::Node& n) {
  const auto s = text(n, "sim.scheme");
  if (s == "euler") return SimScheme::euler;
  if (s == "exponential") return SimScheme::exponential;
  throw ParseError("sim.scheme", line_of(n), "expected euler or exponential");
}

inline InitialMode initial_mode(const YAML::Node& n) {
  const auto s = text(n, "initial");
  if (s == "shared") return InitialMode::shared;
  if (s == "independent") return InitialMode::independent;
  throw ParseError("initial", line_of(n), "expected shared or independent");
}

inline TimeGrid time_grid(const YAML::Node& n, const std::string& field, TimeGrid g) {
  if (n["dt"]) g.dt = scalar(n["dt"], field + ".dt");
  if (n["horizon"]) g.horizon = scalar(n["horizon"], field + ".horizon");
  if (n["record_stride"]) g.record_stride = integer(n["record_stride"], field + ".record_stride");
  return g;
}

}  // namespace detail

/// Parses a scenario document; every failure is a ParseError naming the
/// field and, where known, the line.
inline Scenario parse_scenario(const std::string& doc) {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(doc);
  } catch (const YAML::ParserException& ex) {
    throw ParseError("", ex.mark.line + 1, ex.msg);
  }
  if (!root || !root.IsMap()) throw ParseError("", 0, "scenario must be a mapping");
  check_keys(root, "", {"name", "truth", "nominal", "topology", "gamma", "initial",
                        "sim", "analysis", "output"});

  Scenario sc;
  if (root["name"]) sc.name = text(root["name"], "name");

  const auto t = root["truth"];
  if (!t) throw ParseError("truth", 0, "missing");
  check_keys(t, "truth", {"A", "Q", "sensors", "x0", "Sigma0"});
  sc.truth.A = matrix(t["A"], "truth.A");
  sc.truth.Q = matrix(t["Q"], "truth.Q");
  sc.truth.sensors = sensors(t["sensors"], "truth.sensors");
  sc.truth.x0 = vector(t["x0"], "truth.x0");
  sc.truth.Sigma0 = matrix(t["Sigma0"], "truth.Sigma0");

  sc.nominal = NominalModel::exact(sc.truth);
  if (const auto nm = root["nominal"]) {
    check_keys(nm, "nominal", {"A", "Q", "sensors"});
    if (nm["A"]) sc.nominal.A = matrix(nm["A"], "nominal.A");
    if (nm["Q"]) sc.nominal.Q = matrix(nm["Q"], "nominal.Q");
    if (nm["sensors"]) sc.nominal.sensors = sensors(nm["sensors"], "nominal.sensors");
  }

  if (!root["topology"]) throw ParseError("topology", 0, "missing");
  sc.topology = topology(root["topology"], static_cast<long>(sc.truth.sensors.size()));
  if (root["topology"]["lambda_override"]) {
    sc.analysis.lambda_override =
        scalar(root["topology"]["lambda_override"], "topology.lambda_override");
  }

  if (const auto g = root["gamma"]) {
    try {
      sc.gamma = parse_gamma_spec(text(g, "gamma"));
    } catch (const ParseError& ex) {
      throw ParseError("gamma", line_of(g), ex.what());
    }
  }

  InitialMode init = InitialMode::shared;
  if (root["initial"]) init = initial_mode(root["initial"]);
  sc.sim.init = init;

  if (const auto s = root["sim"]) {
    check_keys(s, "sim", {"dt", "horizon", "trials", "seed", "record_stride",
                          "scheme", "threads", "steady_fraction"});
    if (s["dt"]) sc.sim.dt = scalar(s["dt"], "sim.dt");
    if (s["horizon"]) sc.sim.horizon = scalar(s["horizon"], "sim.horizon");
    if (s["trials"]) sc.sim.trials = static_cast<int>(integer(s["trials"], "sim.trials"));
    if (s["seed"]) sc.sim.seed = static_cast<std::uint64_t>(integer(s["seed"], "sim.seed"));
    if (s["record_stride"]) {
      sc.sim.record_stride = static_cast<int>(integer(s["record_stride"], "sim.record_stride"));
    }
    if (s["scheme"]) sc.sim.scheme = scheme(s["scheme"]);
    if (s["threads"]) sc.sim.threads = static_cast<unsigned>(integer(s["threads"], "sim.threads"));
    if (s["steady_fraction"]) {
      sc.sim.steady_fraction = scalar(s["steady_fraction"], "sim.steady_fraction");
    }
  }

  if (const auto a = root["analysis"]) {
    check_keys(a, "analysis", {"dt", "horizon", "record_stride", "s_variant",
                               "gamma_u0", "gamma_u0_factor", "fit_from", "fit_to",
                               "fit_points"});
    sc.analysis.grid = time_grid(a, "analysis", sc.analysis.grid);
    if (a["s_variant"]) {
      const auto v = text(a["s_variant"], "analysis.s_variant");
      if (v == "proof") {
        sc.analysis.s_variant = SVariant::proof;
      } else if (v == "statement") {
        sc.analysis.s_variant = SVariant::statement;
      } else {
        throw ParseError("analysis.s_variant", line_of(a["s_variant"]),
                         "expected proof or statement");
      }
    }
    if (a["gamma_u0"]) sc.analysis.gamma_u0 = scalar(a["gamma_u0"], "analysis.gamma_u0");
    if (a["gamma_u0_factor"]) {
      sc.analysis.gamma_u0_factor = scalar(a["gamma_u0_factor"], "analysis.gamma_u0_factor");
    }
    if (a["fit_from"]) sc.analysis.fit_from = scalar(a["fit_from"], "analysis.fit_from");
    if (a["fit_to"]) sc.analysis.fit_to = scalar(a["fit_to"], "analysis.fit_to");
    if (a["fit_points"]) {
      sc.analysis.fit_points = static_cast<int>(integer(a["fit_points"], "analysis.fit_points"));
    }
  }

  if (const auto o = root["output"]) {
    check_keys(o, "output", {"dir"});
    if (o["dir"]) sc.output_dir = text(o["dir"], "output.dir");
  }

  try {
    sc.validate();
  } catch (const std::exception& ex) {
    throw ParseError("", 0, ex.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", 0, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace dkf::cli
