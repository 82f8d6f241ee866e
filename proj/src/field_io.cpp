#include "polyproj/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "polyproj/errors.hpp"

namespace polyproj {

namespace {

std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((x >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
  return x;
}

void write_dump(const std::filesystem::path& dir, const std::string& name, const Grid& g, const char* layout, int comps,
                double time, const std::vector<double>& data) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream bin(dir / (name + ".bin"), std::ios::binary);
    if (!bin) throw Error("write_field: cannot open " + (dir / (name + ".bin")).string());
    for (double v : data) {
      std::uint64_t u;
      std::memcpy(&u, &v, sizeof u);
      u = to_le(u);
      bin.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
  }
  nlohmann::ordered_json meta;
  meta["dim"] = g.dim();
  meta["n"] = g.n();
  meta["layout"] = layout;
  meta["name"] = name;
  meta["time"] = time;
  meta["components"] = comps;
  std::ofstream js(dir / (name + ".json"));
  js << meta.dump(2) << "\n";
}

}  // namespace

void write_field(const std::filesystem::path& dir, const std::string& name, const ScalarField& f, double time) {
  write_dump(dir, name, f.grid(), "cell", 1, time, std::vector<double>(f.values().begin(), f.values().end()));
}

void write_field(const std::filesystem::path& dir, const std::string& name, const VectorField& f, double time) {
  std::vector<double> data;
  for (int c = 0; c < f.grid().dim(); ++c) data.insert(data.end(), f.comp(c).begin(), f.comp(c).end());
  write_dump(dir, name, f.grid(), "face", f.grid().dim(), time, data);
}

void write_field(const std::filesystem::path& dir, const std::string& name, const MapField& f, double time) {
  std::vector<double> data;
  data.reserve(f.raw().size());
  for (int c = 0; c < f.dim(); ++c)
    for (std::size_t i = 0; i < f.num_nodes(); ++i) data.push_back(f.at(i, c));
  write_dump(dir, name, f.grid(), "node", f.dim(), time, data);
}

FieldDump read_field(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream js(dir / (name + ".json"));
  if (!js) throw Error("read_field: cannot open " + (dir / (name + ".json")).string());
  const nlohmann::json meta = nlohmann::json::parse(js);
  FieldDump d;
  d.dim = meta.at("dim").get<int>();
  d.n = meta.at("n").get<int>();
  d.layout = meta.at("layout").get<std::string>();
  d.name = meta.at("name").get<std::string>();
  d.time = meta.at("time").get<double>();
  d.components = meta.at("components").get<int>();
  std::ifstream bin(dir / (name + ".bin"), std::ios::binary);
  if (!bin) throw Error("read_field: cannot open " + (dir / (name + ".bin")).string());
  std::uint64_t u;
  while (bin.read(reinterpret_cast<char*>(&u), sizeof u)) {
    u = to_le(u);
    double v;
    std::memcpy(&v, &u, sizeof v);
    d.data.push_back(v);
  }
  return d;
}

ScalarField to_scalar_field(const FieldDump& d) {
  if (d.layout != "cell") throw InvalidArgument("to_scalar_field: layout is " + d.layout);
  ScalarField f(Grid(d.dim, d.n));
  if (d.data.size() != f.size()) throw InvalidArgument("to_scalar_field: size mismatch");
  std::copy(d.data.begin(), d.data.end(), f.values().begin());
  return f;
}

VectorField to_vector_field(const FieldDump& d) {
  if (d.layout != "face") throw InvalidArgument("to_vector_field: layout is " + d.layout);
  const Grid g(d.dim, d.n);
  VectorField f(g);
  std::size_t off = 0;
  for (int c = 0; c < g.dim(); ++c) {
    auto& comp = f.comp(c);
    if (off + comp.size() > d.data.size()) throw InvalidArgument("to_vector_field: size mismatch");
    std::copy(d.data.begin() + static_cast<std::ptrdiff_t>(off), d.data.begin() + static_cast<std::ptrdiff_t>(off + comp.size()), comp.begin());
    off += comp.size();
  }
  if (off != d.data.size()) throw InvalidArgument("to_vector_field: size mismatch");
  return f;
}

MapField to_map_field(const FieldDump& d) {
  if (d.layout != "node") throw InvalidArgument("to_map_field: layout is " + d.layout);
  MapField f(Grid(d.dim, d.n));
  if (d.data.size() != f.raw().size()) throw InvalidArgument("to_map_field: size mismatch");
  const std::size_t nn = f.num_nodes();
  for (int c = 0; c < f.dim(); ++c)
    for (std::size_t i = 0; i < nn; ++i) f.at(i, c) = d.data[static_cast<std::size_t>(c) * nn + i];
  return f;
}

}  // namespace polyproj
