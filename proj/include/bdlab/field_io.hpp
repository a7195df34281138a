#pragma once
// Nodal field files: one JSON header line {nx, ny[, nz], domain, fields, format},
// then either CSV rows (coordinates, then every component of every field)
// or little-endian doubles in the same node-major order.

#include <filesystem>
#include <string>
#include <vector>

#include "bdlab/mesh.hpp"

namespace bdlab {

enum class FieldFormat { Csv, F64le };

template <int Dim>
struct FieldBundle {
  std::shared_ptr<const Grid<Dim>> grid;
  std::vector<std::string> names;
  std::vector<DisplacementField<Dim>> fields;
};

template <int Dim>
void write_fields(const std::filesystem::path& path, const FieldBundle<Dim>& bundle, FieldFormat format);

/// Throws ConfigError on malformed headers or truncated bodies.
template <int Dim>
FieldBundle<Dim> read_fields(const std::filesystem::path& path);

}  // namespace bdlab
