#include "binary_io.hpp"

#include "vaer/error.hpp"

namespace vaer::io {

BinaryWriter::BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot write " + path);
}

void BinaryWriter::raw(const void* data, std::size_t bytes) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out_) throw IoError("write failed: " + path_);
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw IoError("write failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("no such file or unreadable: " + path);
}

void BinaryReader::raw(void* data, std::size_t bytes) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in_) throw FormatError("truncated file: " + path_);
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  in_.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in_ || got != tag) throw FormatError(path_ + ": not a " + std::string(tag) + " file");
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const auto n = u64();
  if (n > (1ULL << 32)) throw FormatError(path_ + ": corrupt string length");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

Eigen::MatrixXd BinaryReader::matrix() {
  const auto rows = u64(), cols = u64();
  if (rows * cols > (1ULL << 32)) throw FormatError(path_ + ": corrupt matrix shape");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  raw(m.data(), sizeof(double) * rows * cols);
  return m;
}

Eigen::VectorXd BinaryReader::vector() {
  const auto n = u64();
  if (n > (1ULL << 32)) throw FormatError(path_ + ": corrupt vector length");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  raw(v.data(), sizeof(double) * n);
  return v;
}

}  // namespace vaer::io
