#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nmf/matrix.hpp"

namespace nmf::bench {

/// Shortest text that parses back to the same double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

}  // namespace detail

/// First line "m,n", then m lines of n comma-separated values.
inline void write_matrix_csv(std::ostream& os, const Matrix& A) {
  os << A.rows() << ',' << A.cols() << '\n';
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (j) os << ',';
      os << format_double(A(i, j));
    }
    os << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      ++lineno;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty matrix file", 1, 0);
  const auto head = detail::split(line, ',');
  std::size_t m = 0, n = 0;
  if (head.size() != 2 || !detail::parse_number(head[0], m) || !detail::parse_number(head[1], n))
    throw ParseError("header must be \"rows,cols\"", lineno, 0);
  Matrix A(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    if (!next_line()) throw ParseError("missing matrix row", lineno + 1, 0);
    const auto cells = detail::split(line, ',');
    if (cells.size() != n)
      throw ParseError("expected " + std::to_string(n) + " values", lineno, 0);
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      if (!detail::parse_number(cells[j], v) || !std::isfinite(v))
        throw ParseError("bad number \"" + std::string(cells[j]) + "\"",
                         lineno, static_cast<std::size_t>(cells[j].data() - line.data()));
      A(i, j) = v;
    }
  }
  if (next_line()) throw ParseError("trailing data after matrix", lineno, 0);
  return A;
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Raster order (row by row), scaled to [0, 1] by maxval.
  Vector pixels;
};

/// Binary PGM (P5), maxval ≤ 255. Comments (#) are allowed in the header.
inline GrayImage read_pgm(std::istream& is) {
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0, line = 1;
  auto skip_space = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        if (bytes[pos] == '\n') ++line;
        ++pos;
      }
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    std::size_t v = 0;
    if (!detail::parse_number(std::string_view(bytes).substr(start, pos - start), v))
      throw ParseError(std::string("PGM: bad ") + what, line, start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ParseError("PGM: missing P5 magic", 1, 0);
  pos = 2;
  GrayImage img;
  img.width = read_int("width");
  img.height = read_int("height");
  const std::size_t maxval = read_int("maxval");
  if (maxval == 0 || maxval > 255) throw ParseError("PGM: maxval must be in 1..255", line, pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ParseError("PGM: expected whitespace before raster", line, pos);
  ++pos;
  const std::size_t count = img.width * img.height;
  if (bytes.size() - pos < count)
    throw ParseError("PGM: raster truncated", line, bytes.size());
  img.pixels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto b = static_cast<unsigned char>(bytes[pos + k]);
    if (b > maxval) throw ParseError("PGM: pixel exceeds maxval", line, pos + k);
    img.pixels[k] = static_cast<double>(b) / static_cast<double>(maxval);
  }
  return img;
}

inline void write_pgm(std::ostream& os, std::size_t width, std::size_t height,
                      std::span<const unsigned char> raster) {
  if (raster.size() != width * height) throw ShapeError("raster size mismatch");
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw InputError("cannot open " + path);
  return is;
}

/// Each image becomes one column; all images must share dimensions.
inline Matrix load_pgm_columns(const std::vector<std::string>& paths) {
  if (paths.empty()) throw InputError("no images given");
  Matrix A;
  std::size_t w = 0, h = 0;
  for (std::size_t j = 0; j < paths.size(); ++j) {
    auto is = open_input(paths[j], true);
    const GrayImage img = read_pgm(is);
    if (j == 0) {
      w = img.width;
      h = img.height;
      A = Matrix(w * h, paths.size());
    } else if (img.width != w || img.height != h) {
      throw InputError("image " + paths[j] + " differs in size");
    }
    A.set_col(j, img.pixels);
  }
  return A;
}

enum class MatrixFormat { Csv, Pgm };

inline MatrixFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  return ext == "pgm" || ext == "PGM" ? MatrixFormat::Pgm : MatrixFormat::Csv;
}

inline Matrix load_matrix(const std::string& path, MatrixFormat format) {
  if (format == MatrixFormat::Pgm) return load_pgm_columns({path});
  auto is = open_input(path);
  return read_matrix_csv(is);
}

inline Matrix load_matrix(const std::string& path) { return load_matrix(path, format_from_path(path)); }

inline void save_matrix(const std::string& path, const Matrix& A) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  write_matrix_csv(os, A);
}

}  // namespace nmf::bench
