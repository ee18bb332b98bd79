// Little-endian binary readers/writers for the model bundle format.
#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rebal/common.hpp"

namespace rebal {

static_assert(std::endian::native == std::endian::little,
              "bundle io assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write file: " + path);
  }

  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  void mat(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }

  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("write failed");
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open file: " + path);
  }

  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int64_t i64() { return get<std::int64_t>(); }
  double f64() { return get<double>(); }

  std::string str() {
    auto n = u64();
    check_len(n);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  Eigen::VectorXd vec() {
    auto n = u64();
    check_len(n);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    raw(v.data(), n * sizeof(double));
    return v;
  }
  Eigen::MatrixXd mat() {
    auto r = u64();
    auto c = u64();
    check_len(r);
    check_len(c);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    raw(m.data(), r * c * sizeof(double));
    return m;
  }

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw DataError(path_ + ": truncated bundle");
  }

 private:
  template <typename T>
  T get() {
    T v{};
    raw(&v, sizeof v);
    return v;
  }
  void check_len(std::uint64_t n) const {
    if (n > (1ull << 32)) throw DataError(path_ + ": corrupt bundle (oversized field)");
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace rebal
