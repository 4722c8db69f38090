#pragma once

#include "curlhom/field.hpp"

#include <string>

namespace curlhom {

/// Contents of one binary field file.
struct FieldDump {
  Grid grid;
  Eigen::MatrixXcd values;  // one column per component
};

/// Writes the little-endian CURLHOM1 format (see README): 64-byte header,
/// 96-byte geometry block (basis, origin), then interleaved complex float64
/// components node by node. Throws std::runtime_error on I/O failure.
void write_field(const std::string& path, const Grid& grid, const Eigen::MatrixXcd& values);
void write_field(const std::string& path, const VectorField& field);
void write_field(const std::string& path, const ScalarField& field);
/// Packed symmetric entries xx, yy, zz, xy, xz, yz as six real components.
void write_field(const std::string& path, const MatrixField& field);

FieldDump read_field(const std::string& path);

}  // namespace curlhom
