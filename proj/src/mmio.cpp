#include "sketchchain/mmio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace skch {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void fail(const std::string& path, const std::string& why) {
  throw numeric_error("matrix market: " + why + " (" + path + ")");
}

}  // namespace

void write_matrix_market(const std::string& path, const DenseMatrix& a) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out << "%%MatrixMarket matrix array real general\n";
  out << a.rows() << " " << a.cols() << "\n";
  out.precision(17);
  // Array format is column-major.
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out << a(i, j) << "\n";
  if (!out) fail(path, "write failed");
}

void write_matrix_market(const std::string& path, const Vector& v) {
  DenseMatrix m(v.size(), 1);
  m.col(0) = v;
  write_matrix_market(path, m);
}

DenseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::string header;
  if (!std::getline(in, header)) fail(path, "empty file");
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix") fail(path, "bad banner");
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer") fail(path, "unsupported field type");
  bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") fail(path, "unsupported symmetry");

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream sz(line);

  if (format == "array") {
    Index r = 0, c = 0;
    sz >> r >> c;
    if (r <= 0 || c <= 0) fail(path, "bad array dimensions");
    DenseMatrix a(r, c);
    for (Index j = 0; j < c; ++j) {
      Index i0 = symmetric ? j : 0;
      for (Index i = i0; i < r; ++i) {
        double v;
        if (!(in >> v)) fail(path, "truncated array data");
        a(i, j) = v;
        if (symmetric) a(j, i) = v;
      }
    }
    return a;
  }
  if (format == "coordinate") {
    Index r = 0, c = 0;
    long long nnz = 0;
    sz >> r >> c >> nnz;
    if (r <= 0 || c <= 0 || nnz < 0) fail(path, "bad coordinate dimensions");
    DenseMatrix a = DenseMatrix::Zero(r, c);
    for (long long e = 0; e < nnz; ++e) {
      Index i, j;
      double v;
      if (!(in >> i >> j >> v)) fail(path, "truncated coordinate data");
      if (i < 1 || i > r || j < 1 || j > c) fail(path, "coordinate out of range");
      a(i - 1, j - 1) = v;
      if (symmetric) a(j - 1, i - 1) = v;
    }
    return a;
  }
  fail(path, "unsupported format");
  return {};
}

Vector read_matrix_market_vector(const std::string& path) {
  DenseMatrix m = read_matrix_market(path);
  if (m.cols() == 1) return Vector(m.col(0));
  if (m.rows() == 1) return Vector(m.row(0).transpose());
  fail(path, "expected a vector");
  return {};
}

void write_spectrum(const std::string& path, const std::vector<double>& sigma) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out.precision(17);
  for (double s : sigma) out << s << "\n";
  if (!out) fail(path, "write failed");
}

std::vector<double> read_spectrum(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::vector<double> sigma;
  double v;
  while (in >> v) sigma.push_back(v);
  if (sigma.empty()) fail(path, "empty spectrum file");
  return sigma;
}

}  // namespace skch
