#pragma once
// Reference computations used by the tests. They deliberately avoid the
// library: plain complex arithmetic, brute-force loops and hand-built
// matrices, so a shared bug cannot make both sides agree.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

namespace ref {

using C = std::complex<double>;

inline const double kPi = std::acos(-1.0);

inline std::string case_path(const std::string& name) {
  return (std::filesystem::path(TPOPF_CASES_DIR) / name).string();
}

inline C polar_deg(double mag, double deg) { return std::polar(mag, deg * kPi / 180.0); }

// 1 / (r + jx) = (r - jx) / (r^2 + x^2)
inline C reciprocal(double r, double x) {
  const double d = r * r + x * x;
  return {r / d, -x / d};
}

// Symmetrical components with a = -1/2 + j sqrt(3)/2 written out by hand.
struct Seq {
  C zero, pos, neg;
};
inline Seq sequences(C va, C vb, C vc) {
  const C a(-0.5, std::sqrt(3.0) / 2.0);
  const C a2 = a * a;
  return {(va + vb + vc) / 3.0, (va + a * vb + a2 * vc) / 3.0, (va + a2 * vb + a * vc) / 3.0};
}

inline double vuf(C va, C vb, C vc) {
  const Seq s = sequences(va, vb, vc);
  return std::abs(s.neg) / std::abs(s.pos);
}

// Largest |x_k - mean| / mean by enumerating the three candidates.
inline double max_dev_ratio(double x, double y, double z) {
  const double mean = (x + y + z) / 3.0;
  double worst = 0.0;
  for (double v : {x, y, z}) worst = std::max(worst, std::abs(v - mean));
  return worst / mean;
}

inline double lvur(C va, C vb, C vc) { return max_dev_ratio(std::abs(va - vb), std::abs(vb - vc), std::abs(vc - va)); }
inline double pvur(C va, C vb, C vc) { return max_dev_ratio(std::abs(va), std::abs(vb), std::abs(vc)); }

// Transformer building blocks written entry by entry.
inline Eigen::Matrix3cd y_one(C y) {
  Eigen::Matrix3cd m;
  m << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  return m * y;
}
inline Eigen::Matrix3cd y_two(C y) {
  Eigen::Matrix3cd m;
  m << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  return m * (y / 3.0);
}
inline Eigen::Matrix3cd y_three(C y) {
  Eigen::Matrix3cd m;
  m << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  return m * (y / std::sqrt(3.0));
}

struct Blocks {
  Eigen::Matrix3cd ii, jj, ij, ji;
};

inline Blocks transformer_table(const std::string& code, C y) {
  const auto I = y_one(y), II = y_two(y), III = y_three(y);
  if (code == "YNyn0") return {I, I, -I, -I};
  if (code == "Yy0") return {II, II, -II, -II};
  if (code == "YNd1") return {I, II, III, III.transpose()};
  if (code == "Yd1") return {II, II, III, III.transpose()};
  if (code == "Dyn1") return {II, I, III, III.transpose()};
  if (code == "Dyn11") return {II, I, III.transpose(), III};
  throw std::invalid_argument(code);
}

// Receiving-end voltage of a source 1 + j0 feeding constant power S through
// z, by fixed-point (Gauss-Seidel) iteration V2 = V1 - z conj(S / V2).
inline C two_bus_voltage(C z, C s_load, int iterations = 500) {
  C v(1.0, 0.0);
  for (int k = 0; k < iterations; ++k) v = 1.0 - z * std::conj(s_load / v);
  return v;
}

}  // namespace ref
