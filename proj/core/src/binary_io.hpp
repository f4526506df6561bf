#pragma once

// Private helpers for the fixed little-endian binary formats (dataset
// frames, map snapshots, discriminator parameter files).

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <type_traits>

namespace scenemem::detail {

static_assert(std::endian::native == std::endian::little,
              "serialised formats are little-endian; add byte swapping before "
              "building on a big-endian target");

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
void write_array(std::ostream& os, const T* data, std::size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!is) throw std::runtime_error(std::string("truncated read: ") + what);
  return value;
}

template <typename T>
void read_array(std::istream& is, T* data, std::size_t count, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
  if (!is) throw std::runtime_error(std::string("truncated read: ") + what);
}

}  // namespace scenemem::detail
