#pragma once

// Shared aliases and small utilities used across the library.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace svctune {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

inline double inf_norm(const Vec& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Shortest round-trip decimal form of a double. Keeps emitted files
// deterministic and exactly re-parsable.
inline std::string num_str(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_num(std::string_view s, bool* ok = nullptr) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);  // "+1" labels
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  bool good = res.ec == std::errc() && res.ptr == s.data() + s.size();
  if (ok) {
    *ok = good;
    return good ? x : 0.0;
  }
  if (!good) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return x;
}

class Stopwatch {
 public:
  Stopwatch() : start_(clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

}  // namespace svctune
