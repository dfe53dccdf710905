#ifndef PWDFT_UTIL_HPP
#define PWDFT_UTIL_HPP

#include <cstdint>

#include <Eigen/Dense>

namespace pwdft {

/// Kahan compensated accumulator; keeps grid sums accurate to a few ulps
/// even over hundreds of millions of terms.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }

  void add(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    const double* p = m.data();
    const long n = m.size();
    for (long i = 0; i < n; ++i) add(p[i]);
  }

  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Compensated real part of <a, b> = sum conj(a_i) b_i.
inline double kahanDotReal(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  KahanSum acc;
  for (long i = 0; i < a.size(); ++i)
    acc.add(a[i].real() * b[i].real() + a[i].imag() * b[i].imag());
  return acc.value();
}

/// Compensated squared L2 norm.
inline double kahanSquaredNorm(const Eigen::VectorXcd& a) {
  KahanSum acc;
  for (long i = 0; i < a.size(); ++i) acc.add(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  return acc.value();
}

/// SplitMix64: tiny deterministic mixer used to derive per-mode phases and
/// reproducible substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from a 64-bit word.
inline double uniformFromBits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace pwdft

#endif
