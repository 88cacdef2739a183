#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "contour.hpp"
#include "corner_theory.hpp"
#include "errors.hpp"
#include "propagator.hpp"
#include "spectrum.hpp"

namespace corner_sgd {

using json = nlohmann::json;

inline json to_json(const SpectralProblem& p) {
  json j{{"eigenvalues", p.eigenvalues}, {"coeffs", p.coeffs}};
  if (p.meta)
    j["meta"] = {{"nu", p.meta->nu}, {"zeta", p.meta->zeta}, {"lambda_scale", p.meta->lambda_scale},
                 {"q_src", p.meta->q_src}};
  return j;
}

inline SpectralProblem problem_from_json(const json& j) {
  SpectralProblem p;
  try {
    p.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    p.coeffs = j.at("coeffs").get<std::vector<double>>();
    if (j.contains("meta")) {
      const auto& m = j.at("meta");
      p.meta = PowerLawMeta{m.at("nu").get<double>(), m.at("zeta").get<double>(), m.value("lambda_scale", 1.0),
                            m.value("q_src", 1.0)};
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("problem json: ") + e.what());
  }
  p.validate();
  return p;
}

inline json to_json(const RationalMap& m) { return {{"p", m.p}, {"q", m.q}}; }

inline RationalMap map_from_json(const json& j) {
  RationalMap m;
  try {
    m.p = j.at("p").get<Poly>();
    m.q = j.at("q").get<Poly>();
  } catch (const json::exception& e) {
    throw config_error(std::string("map json: ") + e.what());
  }
  m.validate();
  return m;
}

inline json to_json(const CornerSpec& s) { return {{"theta", s.theta}, {"a", s.a}, {"m", s.m}, {"l", s.l}}; }

inline json to_json(const MemoryAlgorithm& a) {
  std::vector<std::vector<double>> d(a.memory());
  for (std::size_t i = 0; i < a.memory(); ++i)
    for (std::size_t k = 0; k < a.memory(); ++k)
      d[i].push_back(a.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
  return {{"alpha", a.alpha}, {"b", a.b}, {"c", a.c}, {"d", d}};
}

inline json to_json(const RegimeReport& r) {
  auto num = [](double x) -> json { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {{"regime", std::string(to_string(r.regime))},
          {"u_sigma", num(r.u_sigma)},
          {"v_sigma", num(r.v_sigma)},
          {"xi_u", num(r.xi_u)},
          {"xi_v", num(r.xi_v)},
          {"c_u", num(r.c_u)},
          {"c_v", num(r.c_v)},
          {"predicted_coeff", num(r.predicted_coeff)},
          {"loss_exponent", num(r.loss_exponent)},
          {"near_critical", r.near_critical}};
}

// 64-bit FNV-1a over the canonical (sorted-key, compact) JSON dump.
inline std::string fingerprint(const json& j) {
  std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// Writes to path.tmp then renames, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// CSV with a header row and 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : ncol_(header.size()) {
    os_ << std::setprecision(17);
    row_strings(header);
  }

  template <class... Ts>
  void row(const Ts&... xs) {
    require(sizeof...(xs) == ncol_, "csv: column count mismatch");
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << xs), ...);
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }
  std::size_t ncol_;
  std::ostringstream os_;
};

inline std::string series_csv(const PropagatorSeries& s) {
  CsvTable t({"t", "U", "V"});
  for (std::size_t i = 0; i < s.size(); ++i) t.row(i + 1, s.u[i], s.v[i]);
  return t.str();
}

inline std::string trajectory_csv(const LossTrajectory& l, bool theory_header) {
  CsvTable t({theory_header ? "t" : "step", theory_header ? "L" : "loss"});
  for (std::size_t i = 0; i < l.loss.size(); ++i) t.row(l.steps[i], l.loss[i]);
  return t.str();
}

// Reads the first two numeric columns of a headed CSV.
inline void read_two_columns(const std::filesystem::path& path, std::vector<double>& a, std::vector<double>& b) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string x, y;
    if (!std::getline(ls, x, ',') || !std::getline(ls, y, ',')) throw config_error("malformed csv row: " + line);
    try {
      a.push_back(std::stod(x));
      b.push_back(std::stod(y));
    } catch (const std::exception&) {
      throw config_error("malformed csv row: " + line);
    }
  }
}

}  // namespace corner_sgd
