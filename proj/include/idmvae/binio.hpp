#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "idmvae/errors.hpp"

namespace idmvae::binio {

// All on-disk numbers are little-endian; this code assumes a little-endian
// host (checked at startup of I/O paths).

inline void check_little_endian() {
  const std::uint16_t probe = 1;
  if (*reinterpret_cast<const std::uint8_t*>(&probe) != 1)
    throw IoError("big-endian hosts are not supported by the file formats");
}

inline void write_f32_rowmajor(std::ostream& os, const Eigen::MatrixXd& m) {
  std::vector<float> buf(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) buf[j] = static_cast<float>(m(i, j));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

inline Eigen::MatrixXd read_f32_rowmajor(std::istream& is, Eigen::Index rows,
                                         Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  std::vector<float> buf(cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw IoError("unexpected end of float32 payload");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = buf[j];
  }
  return m;
}

inline void write_i32(std::ostream& os, const Eigen::VectorXi& v) {
  std::vector<std::int32_t> buf(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) buf[i] = v[i];
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(std::int32_t)));
}

inline Eigen::VectorXi read_i32(std::istream& is, Eigen::Index n) {
  std::vector<std::int32_t> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(std::int32_t)));
  if (!is) throw IoError("unexpected end of int32 payload");
  Eigen::VectorXi v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = buf[i];
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

}  // namespace idmvae::binio
