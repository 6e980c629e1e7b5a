#pragma once

/// \file io.hpp
/// Grid-function files: one JSON header line (dim, cells_per_axis, box_lo,
/// box_hi) followed by raw little-endian float64 values in row-major order.
/// Masks are a parallel file of one byte per cell.

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"

namespace hardy::io {

static_assert(std::endian::native == std::endian::little, "grid files assume a little-endian host");

struct GridHeader {
  std::vector<std::size_t> cells;
  std::vector<double> lo, hi;
};

inline nlohmann::json header_json(const GridDomain& d) {
  return {{"dim", d.dim()}, {"cells_per_axis", d.cells()}, {"box_lo", d.lo()}, {"box_hi", d.hi()}};
}

inline void write_grid_function(const std::string& path, const GridFunction& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << header_json(f.domain()).dump() << '\n';
  out.write(reinterpret_cast<const char*>(f.values().data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_mask(const std::string& path, const Mask& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Mask read_mask(const std::string& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open mask file " + path);
  Mask m(expected);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(expected));
  require(static_cast<std::size_t>(in.gcount()) == expected, "mask file " + path + " is too short");
  in.peek();
  require(in.eof(), "mask file " + path + " is too long");
  return m;
}

/// Reads the header and values; the caller supplies the mask (all-true if absent).
inline GridFunction read_grid_function(const std::string& path, const std::string& mask_path = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open grid file " + path);
  std::string line;
  std::getline(in, line);
  GridHeader h;
  try {
    const auto j = nlohmann::json::parse(line);
    h.cells = j.at("cells_per_axis").get<std::vector<std::size_t>>();
    h.lo = j.at("box_lo").get<std::vector<double>>();
    h.hi = j.at("box_hi").get<std::vector<double>>();
    require(j.at("dim").get<std::size_t>() == h.cells.size(), "grid header dim disagrees with cells_per_axis");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed grid header in " + path + ": " + e.what());
  }
  GridDomain d(h.lo, h.hi, h.cells);
  if (!mask_path.empty()) d.set_mask(read_mask(mask_path, d.size()));
  std::vector<double> v(d.size());
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  require(static_cast<std::size_t>(in.gcount()) == v.size() * sizeof(double), "grid file " + path + " is truncated");
  return GridFunction(share(std::move(d)), std::move(v));
}

}  // namespace hardy::io
