#include "heavyflow/field_io.hpp"
#include "heavyflow/forces.hpp"
#include "heavyflow/operators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace heavyflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("heavyflow_io_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST(FieldIo, RoundTripAllKinds) {
  TempDir dir;
  GridSpec g(12, 10, 2.0, 1.5, WallMode::PeriodicXSlipWallsY);
  auto s = ScalarField::sample(g, [](double x, double y) { return std::sin(x) * y + 1e-300; });
  auto v = VectorField::sample(g, [](double x, double y) { return x - y; }, [](double x, double y) { return x * y; });
  auto n = NodeField::sample(g, [](double x, double y) { return std::exp(x + y); });
  write_field(dir.file("s.hvf"), s, 42);
  write_field(dir.file("v.hvf"), v, 43);
  write_field(dir.file("n.hvf"), n, 44);

  FieldHeader h;
  auto s2 = std::get<ScalarField>(read_field(dir.file("s.hvf"), &h));
  EXPECT_EQ(h.fingerprint, 42u);
  EXPECT_EQ(h.grid, g);
  EXPECT_TRUE((s2.values() == s.values()).all());
  auto v2 = read_vector_field(dir.file("v.hvf"));
  EXPECT_TRUE((v2.x() == v.x()).all() && (v2.y() == v.y()).all());
  auto n2 = std::get<NodeField>(read_field(dir.file("n.hvf")));
  EXPECT_TRUE((n2.values() == n.values()).all());
  EXPECT_EQ(read_field_header(dir.file("n.hvf")).kind, FieldKind::Node);
  EXPECT_THROW(read_scalar_field(dir.file("v.hvf")), std::runtime_error);
}

TEST(FieldIo, RejectsCorruptFiles) {
  TempDir dir;
  GridSpec g(8, 8);
  write_field(dir.file("s.hvf"), ScalarField::constant(g, 1.0), 1);
  const auto size = fs::file_size(dir.file("s.hvf"));

  fs::copy_file(dir.file("s.hvf"), dir.file("short.hvf"));
  fs::resize_file(dir.file("short.hvf"), size - 8);
  EXPECT_THROW(read_field(dir.file("short.hvf")), std::runtime_error);

  fs::copy_file(dir.file("s.hvf"), dir.file("long.hvf"));
  { std::ofstream(dir.file("long.hvf"), std::ios::app | std::ios::binary) << "x"; }
  EXPECT_THROW(read_field(dir.file("long.hvf")), std::runtime_error);

  fs::copy_file(dir.file("s.hvf"), dir.file("magic.hvf"));
  {
    std::fstream f(dir.file("magic.hvf"), std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(read_field(dir.file("magic.hvf")), std::runtime_error);
  EXPECT_THROW(read_field(dir.file("missing.hvf")), std::runtime_error);
}

TEST(FieldIo, CsvDump) {
  GridSpec g(8, 8);
  ScalarField s(g);
  s(2, 3) = 0.5;
  std::ostringstream out;
  write_field_csv(out, AnyField(s), "hello");
  const std::string text = out.str();
  EXPECT_NE(text.find("# hello"), std::string::npos);
  EXPECT_NE(text.find("component,i,j,x,y,value"), std::string::npos);
  // header + 64 rows + comment
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 66);
  EXPECT_NE(text.find(",2,3,0.3125,0.4375,0.5"), std::string::npos);
}

TEST(FieldIo, Sidecar) {
  TempDir dir;
  Sidecar sc{{"m", "1000"}, {"note", "a = b"}};
  write_sidecar(dir.file("x.txt"), sc);
  EXPECT_EQ(read_sidecar(dir.file("x.txt")), sc);
}

TEST(Forces, VortexNormalizedAndSolenoidal) {
  GridSpec g(32, 32);
  auto f = make_force("vortex", g, 2.5, 4.0);
  EXPECT_NEAR(lp_norm(f, 4.0), 2.5, 1e-12);
  EXPECT_TRUE(f.is_wall_compatible());
  // sampled, not a discrete curl: divergence-free to O(h^2)
  EXPECT_LT(lp_norm(divergence(f), 2.0), 1e-2 * sobolev_norm(f, 1, 2.0));
}

TEST(Forces, PresetsAndErrors) {
  GridSpec g(16, 16);
  for (const auto& name : force_presets())
    EXPECT_TRUE(make_force(name, g, 1.0).all_finite()) << name;
  EXPECT_EQ(lp_norm(make_force("zero", g, 1.0), INFINITY), 0.0);
  auto grad = make_force("gradient", g, 1.0);
  EXPECT_LT(lp_norm(curl2d(grad), INFINITY), 1e-10);
  EXPECT_THROW(make_force("swirl", g, 1.0), std::invalid_argument);
}
