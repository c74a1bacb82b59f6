#include "fofe/container.hpp"

#include <bit>
#include <cstring>

namespace fofe {

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

ContainerWriter::ContainerWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) fail(ErrorCode::Io, "cannot write model file '" + path + "'");
}

void ContainerWriter::magic(const std::string& arch_tag, std::uint64_t vocab_hash) {
  raw(kContainerMagic, sizeof kContainerMagic);
  u32(kContainerVersion);
  str(arch_tag);
  u64(vocab_hash);
}

void ContainerWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void ContainerWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) fail(ErrorCode::Io, "short write to '" + path_ + "'");
}

void ContainerWriter::close() {
  out_.close();
  if (!out_) fail(ErrorCode::Io, "error closing '" + path_ + "'");
}

ContainerReader::ContainerReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) fail(ErrorCode::Io, "cannot open model file '" + path + "'");
}

std::string ContainerReader::magic(std::uint64_t* vocab_hash) {
  char m[sizeof kContainerMagic];
  in_.read(m, sizeof m);
  if (in_.gcount() != sizeof m || std::memcmp(m, kContainerMagic, sizeof m) != 0) {
    fail(ErrorCode::BadMagic, "'" + path_ + "' is not a fofelm model file (bad magic)");
  }
  const std::uint32_t version = u32();
  if (version != kContainerVersion) {
    fail(ErrorCode::BadVersion, "'" + path_ + "' has container version " +
                                    std::to_string(version) + ", expected " +
                                    std::to_string(kContainerVersion));
  }
  const std::string tag = str();
  const std::uint64_t hash = u64();
  if (vocab_hash) *vocab_hash = hash;
  return tag;
}

std::uint8_t ContainerReader::u8() {
  std::uint8_t v;
  raw(&v, sizeof v, "u8");
  return v;
}

std::uint32_t ContainerReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v, "u32");
  return v;
}

std::uint64_t ContainerReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v, "u64");
  return v;
}

std::int64_t ContainerReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v, "i64");
  return v;
}

float ContainerReader::f32() {
  float v;
  raw(&v, sizeof v, "f32");
  return v;
}

double ContainerReader::f64() {
  double v;
  raw(&v, sizeof v, "f64");
  return v;
}

std::string ContainerReader::str() {
  const std::uint32_t n = u32();
  std::string s(n, '\0');
  raw(s.data(), n, "string");
  return s;
}

void ContainerReader::raw(void* data, std::size_t n, const char* what) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    fail(ErrorCode::TruncatedBlob,
         "unexpected end of parameter blob in '" + path_ + "' while reading " + what);
  }
}

}  // namespace fofe
