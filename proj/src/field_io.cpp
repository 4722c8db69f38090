#include "curlhom/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace curlhom {

namespace {

static_assert(std::endian::native == std::endian::little, "field dumps assume a little-endian host");

constexpr char kMagic[8] = {'C', 'U', 'R', 'L', 'H', 'O', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 64;
constexpr std::size_t kGeometryBytes = 96;

template <class T>
void put(char* dst, std::size_t& off, T v) {
  std::memcpy(dst + off, &v, sizeof(T));
  off += sizeof(T);
}

template <class T>
T get(const char* src, std::size_t& off) {
  T v;
  std::memcpy(&v, src + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void write_field(const std::string& path, const Grid& grid, const Eigen::MatrixXcd& values) {
  if (values.rows() != grid.size()) throw std::invalid_argument("field dump size mismatch");
  char header[kHeaderBytes + kGeometryBytes] = {};
  std::size_t off = 0;
  std::memcpy(header, kMagic, 8);
  off = 8;
  put<std::uint32_t>(header, off, kVersion);
  put<std::uint32_t>(header, off, std::uint32_t(grid.kind()));
  for (int n : grid.resolution()) put<std::uint32_t>(header, off, std::uint32_t(n));
  put<std::uint32_t>(header, off, std::uint32_t(values.cols()));
  put<std::uint32_t>(header, off, std::uint32_t(grid.rule()));
  off = kHeaderBytes;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) put<double>(header, off, grid.lattice().basis()(r, c));
  for (int r = 0; r < 3; ++r) put<double>(header, off, grid.origin()(r));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(header, sizeof(header));
  std::vector<double> row(2 * values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      row[2 * c] = values(i, c).real();
      row[2 * c + 1] = values(i, c).imag();
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * 8));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_field(const std::string& path, const VectorField& field) {
  write_field(path, field.grid, Eigen::MatrixXcd(field.values));
}

void write_field(const std::string& path, const ScalarField& field) {
  write_field(path, field.grid, Eigen::MatrixXcd(field.values));
}

void write_field(const std::string& path, const MatrixField& field) {
  Eigen::MatrixXcd v(field.grid().size(), 6);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (int c = 0; c < 6; ++c) v(i, c) = field.packed(i)[c];
  write_field(path, field.grid(), v);
}

FieldDump read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char header[kHeaderBytes + kGeometryBytes];
  if (!in.read(header, sizeof(header))) throw std::runtime_error("truncated header: " + path);
  if (std::memcmp(header, kMagic, 8) != 0) throw std::runtime_error("not a CURLHOM1 file: " + path);
  std::size_t off = 8;
  if (get<std::uint32_t>(header, off) != kVersion) throw std::runtime_error("unsupported version: " + path);
  const auto kind = GridKind(get<std::uint32_t>(header, off));
  std::array<int, 3> n;
  for (int& x : n) x = int(get<std::uint32_t>(header, off));
  const auto comps = Eigen::Index(get<std::uint32_t>(header, off));
  const auto rule = DerivativeRule(get<std::uint32_t>(header, off));
  off = kHeaderBytes;
  Eigen::Matrix3d basis;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) basis(r, c) = get<double>(header, off);
  Eigen::Vector3d origin;
  for (int r = 0; r < 3; ++r) origin(r) = get<double>(header, off);

  FieldDump d{Grid(kind, Lattice(basis), origin, n, rule), {}};
  d.values.resize(d.grid.size(), comps);
  std::vector<double> row(2 * comps);
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 8)))
      throw std::runtime_error("truncated data: " + path);
    for (Eigen::Index c = 0; c < comps; ++c) d.values(i, c) = Complex(row[2 * c], row[2 * c + 1]);
  }
  return d;
}

}  // namespace curlhom
