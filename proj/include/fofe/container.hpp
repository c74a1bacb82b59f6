#ifndef FOFE_CONTAINER_HPP
#define FOFE_CONTAINER_HPP

#include <cstdint>
#include <fstream>
#include <string>

#include "fofe/error.hpp"

namespace fofe {

// Versioned binary model container.  Layout (all integers little-endian):
//
//   8 bytes   magic "FOFELM\x01\n"
//   u32       format version (currently 1)
//   string    architecture tag ("base" | "mixture" | "appdep" | "ngram")
//   u64       vocab hash
//   payload   architecture-specific (see serialize.hpp / ngram.cpp)
//
// Strings are u32 length + bytes.  This toolkit only targets
// little-endian hosts; the writer refuses to run elsewhere.

constexpr char kContainerMagic[8] = {'F', 'O', 'F', 'E', 'L', 'M', '\x01', '\n'};
constexpr std::uint32_t kContainerVersion = 1;

class ContainerWriter {
 public:
  explicit ContainerWriter(const std::string& path);

  void magic(const std::string& arch_tag, std::uint64_t vocab_hash);
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s);
  void raw(const void* data, std::size_t n);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class ContainerReader {
 public:
  explicit ContainerReader(const std::string& path);

  // Validates magic and version, returns the architecture tag.
  std::string magic(std::uint64_t* vocab_hash);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  float f32();
  double f64();
  std::string str();
  void raw(void* data, std::size_t n, const char* what);

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace fofe

#endif  // FOFE_CONTAINER_HPP
