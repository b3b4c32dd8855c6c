#include "heavyflow/field_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace heavyflow {

namespace {

constexpr char kMagic[4] = {'H', 'V', 'F', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error(path + ": truncated field file");
  return v;
}

template <typename Array>
void put_array(std::ofstream& out, const Array& a) {
  out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(sizeof(double) * a.size()));
}

template <typename Array>
void get_array(std::ifstream& in, Array& a, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(sizeof(double) * a.size())))
    throw std::runtime_error(path + ": truncated field file");
}

std::ofstream open_write(const std::string& path, FieldKind kind, const GridSpec& g, std::uint64_t fp) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.wall_mode()));
  put<std::int64_t>(out, g.nx());
  put<std::int64_t>(out, g.ny());
  put<double>(out, g.lx());
  put<double>(out, g.ly());
  put<std::uint64_t>(out, fp);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

FieldHeader read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a heavyflow field file");
  FieldHeader h;
  const auto kind = get<std::uint32_t>(in, path);
  const auto mode = get<std::uint32_t>(in, path);
  const auto nx = get<std::int64_t>(in, path);
  const auto ny = get<std::int64_t>(in, path);
  const auto lx = get<double>(in, path);
  const auto ly = get<double>(in, path);
  h.fingerprint = get<std::uint64_t>(in, path);
  if (kind > 2 || mode > 1 || nx <= 0 || ny <= 0 || nx > (1 << 20) || ny > (1 << 20))
    throw std::runtime_error(path + ": corrupt field header");
  h.kind = static_cast<FieldKind>(kind);
  h.grid = GridSpec(static_cast<int>(nx), static_cast<int>(ny), lx, ly, static_cast<WallMode>(mode));
  return h;
}

std::ifstream open_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

} // namespace

void write_field(const std::string& path, const ScalarField& f, std::uint64_t fp) {
  auto out = open_write(path, FieldKind::Scalar, f.grid(), fp);
  put_array(out, f.values());
  finish(out, path);
}

void write_field(const std::string& path, const VectorField& f, std::uint64_t fp) {
  auto out = open_write(path, FieldKind::Vector, f.grid(), fp);
  put_array(out, f.x());
  put_array(out, f.y());
  finish(out, path);
}

void write_field(const std::string& path, const NodeField& f, std::uint64_t fp) {
  auto out = open_write(path, FieldKind::Node, f.grid(), fp);
  put_array(out, f.values());
  finish(out, path);
}

FieldHeader read_field_header(const std::string& path) {
  auto in = open_read(path);
  return read_header(in, path);
}

AnyField read_field(const std::string& path, FieldHeader* header) {
  auto in = open_read(path);
  const FieldHeader h = read_header(in, path);
  if (header)
    *header = h;
  AnyField result;
  switch (h.kind) {
  case FieldKind::Scalar: {
    ScalarField f(h.grid);
    get_array(in, f.values(), path);
    result = std::move(f);
    break;
  }
  case FieldKind::Vector: {
    VectorField f(h.grid);
    get_array(in, f.x(), path);
    get_array(in, f.y(), path);
    result = std::move(f);
    break;
  }
  case FieldKind::Node: {
    NodeField f(h.grid);
    get_array(in, f.values(), path);
    result = std::move(f);
    break;
  }
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error(path + ": trailing bytes after field payload");
  return result;
}

ScalarField read_scalar_field(const std::string& path) {
  auto f = read_field(path);
  if (auto* s = std::get_if<ScalarField>(&f))
    return std::move(*s);
  throw std::runtime_error(path + ": expected a cell (scalar) field");
}

VectorField read_vector_field(const std::string& path) {
  auto f = read_field(path);
  if (auto* v = std::get_if<VectorField>(&f))
    return std::move(*v);
  throw std::runtime_error(path + ": expected a face (vector) field");
}

void write_field_csv(std::ostream& out, const AnyField& field, const std::string& comment) {
  if (!comment.empty())
    out << "# " << comment << "\n";
  out << "component,i,j,x,y,value\n";
  char buf[128];
  auto row = [&](const char* c, int i, int j, double x, double y, double v) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%.17g\n", c, i, j, x, y, v);
    out << buf;
  };
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        const GridSpec& g = f.grid();
        if constexpr (std::is_same_v<T, ScalarField>) {
          for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i)
              row("s", i, j, g.xc(i), g.yc(j), f(i, j));
        } else if constexpr (std::is_same_v<T, VectorField>) {
          for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i)
              row("x", i, j, g.xn(i), g.yc(j), f.x()(i, j));
          for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i)
              row("y", i, j, g.xc(i), g.yn(j), f.y()(i, j));
        } else {
          for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i)
              row("n", i, j, g.xn(i), g.yn(j), f(i, j));
        }
      },
      field);
}

void write_field_csv(const std::string& path, const AnyField& field, const std::string& comment) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  write_field_csv(out, field, comment);
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

void write_sidecar(const std::string& path, const Sidecar& entries) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : entries)
    out << k << " = " << v << "\n";
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

Sidecar read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  Sidecar s;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (line.empty() || line[0] == '#' || eq == std::string::npos)
      continue;
    s.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return s;
}

} // namespace heavyflow
