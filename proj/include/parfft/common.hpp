#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace parfft {

/// Thrown on contract violations, malformed input, and transport failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace detail
}  // namespace parfft
