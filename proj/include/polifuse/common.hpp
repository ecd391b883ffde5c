#ifndef POLIFUSE_COMMON_HPP_
#define POLIFUSE_COMMON_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace polifuse {

// All dense math runs on row-major dynamic matrices; scalars are 1x1.
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrixf = MatrixX<float>;
using Matrixd = MatrixX<double>;

using Rng = std::mt19937_64;

// Bad input data or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Round-trip-faithful decimal rendering for CSV and report output.
inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace polifuse

#endif  // POLIFUSE_COMMON_HPP_
