#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

// Plain-loop reference implementations, written independently of the library.
namespace lleda::oracle {

using Mat = Eigen::MatrixXd;

inline double kernel(const Mat& x, Eigen::Index i, const Mat& y, Eigen::Index j, const std::vector<double>& bw) {
  double sq = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double diff = x(i, c) - y(j, c);
    sq += diff * diff;
  }
  double k = 0.0;
  for (double s : bw) k += std::exp(-sq / (2.0 * s * s));
  return k / static_cast<double>(bw.size());
}

/// Biased squared MMD with self-pairs.
inline double mmd(const Mat& s, const Mat& t, const std::vector<double>& bw) {
  const double n = static_cast<double>(s.rows()), m = static_cast<double>(t.rows());
  double ss = 0.0, st = 0.0, tt = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.rows(); ++j) ss += kernel(s, i, s, j, bw);
  }
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.rows(); ++j) st += kernel(s, i, t, j, bw);
  }
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.rows(); ++j) tt += kernel(t, i, t, j, bw);
  }
  return ss / (n * n) - 2.0 * st / (n * m) + tt / (m * m);
}

inline double invariance(const Mat& a, const Mat& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) total += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
  }
  return total / static_cast<double>(a.rows());
}

inline std::vector<double> column_means(const Mat& z) {
  std::vector<double> mu(static_cast<std::size_t>(z.cols()), 0.0);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) mu[static_cast<std::size_t>(c)] += z(i, c);
    mu[static_cast<std::size_t>(c)] /= static_cast<double>(z.rows());
  }
  return mu;
}

inline double variance(const Mat& z, double gamma, double eps) {
  const auto mu = column_means(z);
  double total = 0.0;
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double d = z(i, c) - mu[static_cast<std::size_t>(c)];
      v += d * d;
    }
    v /= static_cast<double>(z.rows() - 1);
    total += std::max(0.0, gamma - std::sqrt(v + eps));
  }
  return total / static_cast<double>(z.cols());
}

inline double covariance(const Mat& z) {
  const auto mu = column_means(z);
  double total = 0.0;
  for (Eigen::Index a = 0; a < z.cols(); ++a) {
    for (Eigen::Index b = 0; b < z.cols(); ++b) {
      if (a == b) continue;
      double c = 0.0;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        c += (z(i, a) - mu[static_cast<std::size_t>(a)]) * (z(i, b) - mu[static_cast<std::size_t>(b)]);
      }
      c /= static_cast<double>(z.rows() - 1);
      total += c * c;
    }
  }
  return total / static_cast<double>(z.cols());
}

/// Rows of +-amplitude whose centred columns are mutually orthogonal: column c
/// follows Walsh function c+1 on 8 points. At most 7 columns.
inline Mat walsh_embeddings(Eigen::Index dims, double amplitude) {
  Mat z(8, dims);
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index c = 0; c < dims; ++c) {
      const int bits = static_cast<int>(i & (c + 1));
      const int parity = __builtin_popcount(static_cast<unsigned>(bits)) & 1;
      z(i, c) = parity ? -amplitude : amplitude;
    }
  }
  return z;
}

}  // namespace lleda::oracle
