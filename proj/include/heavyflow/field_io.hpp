#pragma once

// Binary field files, CSV dumps and key=value sidecars.
//
// Field file layout (little-endian): "HVF1", u32 kind, u32 wall mode, i64 nx,
// i64 ny, f64 Lx, f64 Ly, u64 fingerprint, then the arrays in column-major
// order (vector fields: x components, then y components).

#include "heavyflow/field.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace heavyflow {

enum class FieldKind : std::uint32_t { Scalar = 0, Vector = 1, Node = 2 };

struct FieldHeader {
  FieldKind kind = FieldKind::Scalar;
  GridSpec grid;
  std::uint64_t fingerprint = 0;
};

void write_field(const std::string& path, const ScalarField& f, std::uint64_t fingerprint);
void write_field(const std::string& path, const VectorField& f, std::uint64_t fingerprint);
void write_field(const std::string& path, const NodeField& f, std::uint64_t fingerprint);

using AnyField = std::variant<ScalarField, VectorField, NodeField>;

FieldHeader read_field_header(const std::string& path);
/// Throws std::runtime_error on a bad magic number, truncation or trailing bytes.
AnyField read_field(const std::string& path, FieldHeader* header = nullptr);
ScalarField read_scalar_field(const std::string& path);
VectorField read_vector_field(const std::string& path);

/// Point values with coordinates: "component,i,j,x,y,value".
void write_field_csv(const std::string& path, const AnyField& field, const std::string& comment = "");
void write_field_csv(std::ostream& out, const AnyField& field, const std::string& comment = "");

using Sidecar = std::vector<std::pair<std::string, std::string>>;
void write_sidecar(const std::string& path, const Sidecar& entries);
Sidecar read_sidecar(const std::string& path);

} // namespace heavyflow
