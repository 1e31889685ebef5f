#pragma once

// Result emission: canonical scenario JSON and its SHA-256, CSV tables with
// round-trip precision, and the per-run metadata document.

#include <fmt/format.h>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "dkf/cli/scenario.hpp"

namespace dkf::cli {

using Json = nlohmann::json;

namespace detail {

inline double canonical_number(double v) { return v == 0.0 ? 0.0 : v; }

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(canonical_number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const std::vector<Sensor>& sensors) {
  Json out = Json::array();
  for (const auto& s : sensors) out.push_back({{"C", to_json(s.C)}, {"R", to_json(s.R)}});
  return out;
}

}  // namespace detail

/// Every field that can change a result; names, output paths and thread
/// counts are left out.
inline Json canonical_json(const Scenario& sc) {
  using detail::to_json;
  Json j;
  j["truth"] = {{"A", to_json(sc.truth.A)},
                {"Q", to_json(sc.truth.Q)},
                {"sensors", to_json(sc.truth.sensors)},
                {"x0", to_json(Matrix(sc.truth.x0))},
                {"Sigma0", to_json(sc.truth.Sigma0)}};
  j["nominal"] = {{"A", to_json(sc.nominal.A)},
                  {"Q", to_json(sc.nominal.Q)},
                  {"sensors", to_json(sc.nominal.sensors)}};
  j["topology"] = {{"adjacency", to_json(sc.topology.adjacency())}};
  if (sc.analysis.lambda_override) j["topology"]["lambda_override"] = *sc.analysis.lambda_override;

  Json g = {{"relative", sc.gamma.relative}};
  if (sc.gamma.log_range) {
    g["log"] = {sc.gamma.from, sc.gamma.to, sc.gamma.points};
  } else {
    g["values"] = sc.gamma.values;
  }
  j["gamma"] = g;

  j["sim"] = {{"dt", sc.sim.dt},
              {"horizon", sc.sim.horizon},
              {"trials", sc.sim.trials},
              {"seed", sc.sim.seed},
              {"record_stride", sc.sim.record_stride},
              {"scheme", to_string(sc.sim.scheme)},
              {"initial", sc.sim.init == InitialMode::shared ? "shared" : "independent"},
              {"steady_fraction", sc.sim.steady_fraction}};
  const auto& a = sc.analysis;
  j["analysis"] = {{"dt", a.grid.dt},
                   {"horizon", a.grid.horizon},
                   {"record_stride", a.grid.record_stride},
                   {"s_variant", a.s_variant == SVariant::proof ? "proof" : "statement"},
                   {"gamma_u0_factor", a.gamma_u0_factor},
                   {"fit", {a.fit_from, a.fit_to, a.fit_points}}};
  if (a.gamma_u0) j["analysis"]["gamma_u0"] = *a.gamma_u0;
  return j;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

inline std::string scenario_hash(const Scenario& sc) {
  return sha256_hex(canonical_json(sc).dump());
}

/// CSV with a fixed header; numbers at 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    line(header);
  }

  struct Cell {
    std::string text;
    Cell(double v) : text(num(v)) {}
    Cell(int v) : text(std::to_string(v)) {}
    Cell(long v) : text(std::to_string(v)) {}
    Cell(std::size_t v) : text(std::to_string(v)) {}
    Cell(const char* s) : text(s) {}
    Cell(std::string s) : text(std::move(s)) {}
  };

  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != columns_) throw std::logic_error("CsvWriter: column count mismatch");
    std::vector<std::string> t;
    for (const auto& c : cells) t.push_back(c.text);
    line(t);
  }

  static std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
  }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ofstream out_;
  std::size_t columns_;
};

/// JSON cannot hold NaN; non-finite values become null.
inline Json finite_or_null(double v) {
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline Json run_metadata(const Scenario& sc, const std::string& command) {
  return {{"tool", "dkf"},
          {"version", DKF_VERSION},
          {"command", command},
          {"scenario", sc.name},
          {"scenario_hash", scenario_hash(sc)},
          {"seed", sc.sim.seed},
          {"trials", sc.sim.trials}};
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dkf::cli
