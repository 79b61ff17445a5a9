#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace vaer::io {

// Little-endian host assumed; files are not meant to cross architectures.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);
  void close();

 private:
  void raw(const void* data, std::size_t bytes);

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();

 private:
  void raw(void* data, std::size_t bytes);

  std::string path_;
  std::ifstream in_;
};

}  // namespace vaer::io
