#pragma once

// On-disk formats: binary field dumps with JSON sidecars, CSV emitters with
// deterministic number formatting, and small JSON manifests.

#include "kinlab/besov.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace kinlab::io {

using nlohmann::json;

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// row-major little-endian float64 plus a JSON sidecar manifest
inline void dump_field(const RealField& f, const std::filesystem::path& base) {
  const GridSpec& g = *f.grid;
  std::ofstream bin(base.string() + ".f64", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(f.values.data()),
            std::streamsize(f.values.size() * sizeof(double)));
  json side = {{"n_x", g.n_x},
               {"n_v", g.n_v},
               {"L_x", g.L_x},
               {"L_v", g.L_v},
               {"kind", "real"}};
  std::ofstream(base.string() + ".json") << side.dump(2) << "\n";
}

inline void dump_field(const SpectralField& f,
                       const std::filesystem::path& base) {
  const GridSpec& g = *f.grid;
  std::ofstream bin(base.string() + ".f64", std::ios::binary);
  // interleaved re/im pairs, row-major
  bin.write(reinterpret_cast<const char*>(f.coeffs.data()),
            std::streamsize(f.coeffs.size() * sizeof(cplx)));
  json side = {{"n_x", g.n_x},
               {"n_v", g.n_v},
               {"L_x", g.L_x},
               {"L_v", g.L_v},
               {"kind", "spectral"}};
  std::ofstream(base.string() + ".json") << side.dump(2) << "\n";
}

inline RealField load_field(const std::filesystem::path& base, GridSpec& g) {
  json side;
  std::ifstream(base.string() + ".json") >> side;
  if (side.at("kind") != "real")
    throw std::runtime_error("load_field: not a real field dump");
  g = GridSpec(side.at("n_x"), side.at("n_v"), side.at("L_x"), side.at("L_v"));
  RealField f(g);
  std::ifstream bin(base.string() + ".f64", std::ios::binary);
  bin.read(reinterpret_cast<char*>(f.values.data()),
           std::streamsize(f.values.size() * sizeof(double)));
  if (!bin) throw std::runtime_error("load_field: short read");
  return f;
}

// BesovReport: rows (j, level_norm), then one JSON footer line
inline void write_besov_csv(const BesovReport& rep, const BesovIndex& idx,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "j,level_norm\n";
  for (auto [j, y] : rep.per_level) out << j << "," << fmt(y) << "\n";
  json footer = {{"s", idx.s},
                 {"p", std::isinf(idx.p) ? json("inf") : json(idx.p)},
                 {"q", std::isinf(idx.q) ? json("inf") : json(idx.q)},
                 {"kappa", idx.weight_kappa ? json(*idx.weight_kappa)
                                            : json(nullptr)},
                 {"norm", rep.norm},
                 {"fitted_slope", rep.fitted_slope},
                 {"window", {rep.window_lo, rep.window_hi}}};
  out << "# " << footer.dump() << "\n";
}

// generic (j, value) series with a JSON metadata footer
inline void write_level_csv(const std::vector<std::pair<int, double>>& rows,
                            const json& meta,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "j,value\n";
  for (auto [j, y] : rows) out << j << "," << fmt(y) << "\n";
  out << "# " << meta.dump() << "\n";
}

inline void write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  for (std::size_t c = 0; c < header.size(); ++c)
    out << header[c] << (c + 1 < header.size() ? "," : "\n");
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c)
      out << fmt(r[c]) << (c + 1 < r.size() ? "," : "\n");
  }
}

}  // namespace kinlab::io
