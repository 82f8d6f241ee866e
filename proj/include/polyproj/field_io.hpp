#pragma once

// Field dumps: `<name>.bin` holds raw little-endian float64 values,
// component-major with x fastest inside each component; `<name>.json` holds
// {dim, n, layout, name, time, components}.

#include <filesystem>
#include <string>
#include <vector>

#include "polyproj/grid.hpp"

namespace polyproj {

struct FieldDump {
  int dim = 0;
  int n = 0;
  std::string layout;  ///< "cell", "face" or "node"
  std::string name;
  double time = 0.0;
  int components = 1;
  std::vector<double> data;
};

void write_field(const std::filesystem::path& dir, const std::string& name, const ScalarField& f, double time);
void write_field(const std::filesystem::path& dir, const std::string& name, const VectorField& f, double time);
void write_field(const std::filesystem::path& dir, const std::string& name, const MapField& f, double time);

/// Reads `<dir>/<name>.json` and `<dir>/<name>.bin`.
FieldDump read_field(const std::filesystem::path& dir, const std::string& name);

ScalarField to_scalar_field(const FieldDump& d);
VectorField to_vector_field(const FieldDump& d);
MapField to_map_field(const FieldDump& d);

}  // namespace polyproj
