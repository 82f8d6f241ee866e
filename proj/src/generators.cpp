#include "polyproj/generators.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "polyproj/errors.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/rng.hpp"

namespace polyproj {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSwirlRadius = 0.4;

double bump(double r, double radius) {
  if (r >= radius) return 0.0;
  const double s = 1.0 - (r / radius) * (r / radius);
  return s * s * s * s;
}

using Stream = std::function<double(double, double, double)>;

// Face fluxes of the curl of psi e_3: exactly divergence-free on the MAC grid.
VectorField curl_of_stream(const Grid& g, const Stream& psi) {
  VectorField v(g);
  const double h = g.h();
  for (int c = 0; c < 2; ++c) {
    const auto fd = g.face_dims(c);
    auto& comp = v.comp(c);
    for (std::size_t i = 0; i < comp.size(); ++i) {
      const auto id = Grid::unindex(fd, i);
      const double z = g.dim() == 3 ? (id[2] + 0.5) * h : 0.0;
      const double x0 = id[0] * h, y0 = id[1] * h;
      if (c == 0)
        comp[i] = (psi(x0, y0 + h, z) - psi(x0, y0, z)) / h;
      else
        comp[i] = -(psi(x0 + h, y0, z) - psi(x0, y0, z)) / h;
    }
  }
  v.zero_boundary_normal();
  return v;
}

}  // namespace

Vec3 swirl_point(const Vec3& x, int dim, double amplitude) {
  const double dx = x[0] - 0.5, dy = x[1] - 0.5;
  const double dz = dim == 3 ? x[2] - 0.5 : 0.0;
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double theta = amplitude * bump(r, kSwirlRadius);
  const double c = std::cos(theta), s = std::sin(theta);
  return {0.5 + c * dx - s * dy, 0.5 + s * dx + c * dy, x[2]};
}

MapField swirl_map(const Grid& g, double amplitude) {
  MapField z = MapField::from_function(g, [&](const Vec3& x) { return swirl_point(x, g.dim(), amplitude); });
  z.set_identity_boundary();
  return z;
}

MapField epsilon_family_map(const Grid& g, double epsilon) {
  MapField u = faces_to_nodes(stream_velocity(g, "vortex-pair", 1.0));
  const int d = g.dim();
  const double peak = ordered_max(g.num_nodes(), [&](std::size_t i) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double x = u.raw()[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
      s += x * x;
    }
    return std::sqrt(s);
  });
  u *= epsilon / peak;
  u += MapField::identity(g);
  u.set_identity_boundary();
  return u;
}

VectorField stream_velocity(const Grid& g, const std::string& name, double amplitude) {
  const bool three = g.dim() == 3;
  auto zfac = [three](double z) {
    if (!three) return 1.0;
    const double s = std::sin(kPi * z);
    return s * s;
  };
  Stream psi;
  if (name == "zero") {
    return VectorField(g);
  } else if (name == "vortex-pair") {
    psi = [&](double x, double y, double z) {
      const double sx = std::sin(kPi * x);
      return amplitude * sx * sx * std::sin(kPi * y) * std::sin(2.0 * kPi * y) * zfac(z);
    };
  } else if (name == "bump-swirl") {
    psi = [&](double x, double y, double z) {
      const double dz = three ? z - 0.5 : 0.0;
      const double r = std::sqrt((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5) + dz * dz);
      return amplitude * bump(r, 0.35);
    };
  } else if (name == "cellular") {
    psi = [&](double x, double y, double z) {
      const double sx = std::sin(kPi * x), sy = std::sin(kPi * y);
      return amplitude * sx * sx * sy * sy * zfac(z);
    };
  } else {
    throw InvalidArgument("unknown velocity field '" + name + "'");
  }
  return curl_of_stream(g, psi);
}

VectorField stream_mode_velocity(const Grid& g, int k, int l, double amplitude) {
  const bool three = g.dim() == 3;
  return curl_of_stream(g, [&](double x, double y, double z) {
    double s = std::sin(kPi * x) * std::sin(kPi * y) * std::sin(k * kPi * x) * std::sin(l * kPi * y);
    if (three) s *= std::sin(kPi * z) * std::sin(k * kPi * z);
    return amplitude * s;
  });
}

VectorField random_stream_velocity(const Grid& g, std::uint64_t seed, int modes, double amplitude) {
  if (modes < 1) throw InvalidArgument("random_stream_velocity: modes must be >= 1");
  CounterRng rng(seed, 0x5eed);
  struct Mode {
    int k, l, m;
    double c;
  };
  std::vector<Mode> ms;
  for (int k = 1; k <= modes; ++k)
    for (int l = 1; l <= modes; ++l) {
      const int m = g.dim() == 3 ? 1 + static_cast<int>(rng.uniform() * modes) : 0;
      ms.push_back({k, l, std::min(m, modes), rng.uniform(-1.0, 1.0) / (k * k + l * l)});
    }
  const bool three = g.dim() == 3;
  const Stream psi = [&](double x, double y, double z) {
    double s = 0.0;
    for (const Mode& md : ms) {
      double t = md.c * std::sin(md.k * kPi * x) * std::sin(md.l * kPi * y);
      if (three) t *= std::sin(md.m * kPi * z);
      s += t;
    }
    double win = std::sin(kPi * x) * std::sin(kPi * y);
    if (three) win *= std::sin(kPi * z);
    return amplitude * win * s;
  };
  return curl_of_stream(g, psi);
}

}  // namespace polyproj
