#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nlyap {

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void add(std::string_view bytes);
  void add(double v);
  void add(std::uint64_t v);
  std::uint64_t value() const { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view bytes);

}  // namespace nlyap
