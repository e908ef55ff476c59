#ifndef DESPECKLE_IMAGE_HPP
#define DESPECKLE_IMAGE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace despeckle {

/// Dense grayscale image with double-precision pixels, row-major storage.
class Image {
public:
  Image() = default;

  Image(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), px_(rows * cols, value) {
    if (rows == 0 || cols == 0)
      throw std::invalid_argument("Image: dimensions must be >= 1");
  }

  static Image from_data(std::size_t rows, std::size_t cols,
                         std::vector<double> data) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("Image::from_data: size mismatch");
    Image im(rows, cols);
    im.px_ = std::move(data);
    return im;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return px_.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    return px_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return px_[i * cols_ + j];
  }

  const std::vector<double>& pixels() const { return px_; }
  std::vector<double>& pixels() { return px_; }

  bool same_shape(const Image& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Image& operator+=(const Image& o) {
    check_shape(o);
    for (std::size_t k = 0; k < px_.size(); ++k) px_[k] += o.px_[k];
    return *this;
  }
  Image& operator-=(const Image& o) {
    check_shape(o);
    for (std::size_t k = 0; k < px_.size(); ++k) px_[k] -= o.px_[k];
    return *this;
  }
  Image& operator*=(double a) {
    for (double& v : px_) v *= a;
    return *this;
  }

  friend Image operator+(Image a, const Image& b) { return a += b; }
  friend Image operator-(Image a, const Image& b) { return a -= b; }
  friend Image operator*(double a, Image b) { return b *= a; }

  void check_shape(const Image& o) const {
    if (!same_shape(o))
      throw std::invalid_argument("Image: shape mismatch");
  }

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> px_;
};

/// Pair of equally sized images holding the two components of a discrete
/// vector field (gradients, dual variables).
struct VectorField {
  Image z1, z2;

  VectorField() = default;
  VectorField(Image a, Image b) : z1(std::move(a)), z2(std::move(b)) {
    z1.check_shape(z2);
  }
  VectorField(std::size_t rows, std::size_t cols, double value = 0.0)
      : z1(rows, cols, value), z2(rows, cols, value) {}

  std::size_t rows() const { return z1.rows(); }
  std::size_t cols() const { return z1.cols(); }
};

/// Forward-difference gradient with replicated last row/column, so the last
/// row of the first component and the last column of the second are zero.
inline VectorField gradient(const Image& u) {
  const std::size_t m = u.rows(), n = u.cols();
  VectorField g(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g.z1(i, j) = (i + 1 < m) ? u(i + 1, j) - u(i, j) : 0.0;
      g.z2(i, j) = (j + 1 < n) ? u(i, j + 1) - u(i, j) : 0.0;
    }
  }
  return g;
}

/// Backward-difference divergence, the exact negative adjoint of gradient().
/// Boundary convention: the first row enters with a plus sign, the row before
/// last with a minus sign, and the stored last row/column of the field is
/// ignored (gradient() always leaves it zero).
inline Image divergence(const VectorField& z) {
  const std::size_t m = z.rows(), n = z.cols();
  Image d(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      if (m > 1) {
        if (i == 0)
          v += z.z1(0, j);
        else if (i + 1 == m)
          v -= z.z1(i - 1, j);
        else
          v += z.z1(i, j) - z.z1(i - 1, j);
      }
      if (n > 1) {
        if (j == 0)
          v += z.z2(i, 0);
        else if (j + 1 == n)
          v -= z.z2(i, j - 1);
        else
          v += z.z2(i, j) - z.z2(i, j - 1);
      }
      d(i, j) = v;
    }
  }
  return d;
}

/// Isotropic total variation: sum over pixels of the Euclidean norm of the
/// forward-difference gradient.
inline double tv_norm(const Image& u) {
  const std::size_t m = u.rows(), n = u.cols();
  double tv = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = (i + 1 < m) ? u(i + 1, j) - u(i, j) : 0.0;
      const double dy = (j + 1 < n) ? u(i, j + 1) - u(i, j) : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

inline double inner(const Image& a, const Image& b) {
  a.check_shape(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.pixels()[k] * b.pixels()[k];
  return s;
}

inline double inner(const VectorField& a, const VectorField& b) {
  return inner(a.z1, b.z1) + inner(a.z2, b.z2);
}

inline double norm2(const Image& a) { return std::sqrt(inner(a, a)); }
inline double norm2(const VectorField& a) { return std::sqrt(inner(a, a)); }

inline double norm1(const Image& a) {
  double s = 0.0;
  for (double v : a.pixels()) s += std::abs(v);
  return s;
}

inline double norm_inf(const Image& a) {
  double s = 0.0;
  for (double v : a.pixels()) s = std::max(s, std::abs(v));
  return s;
}

inline double mean(const Image& a) {
  double s = 0.0;
  for (double v : a.pixels()) s += v;
  return s / static_cast<double>(a.size());
}

}  // namespace despeckle

#endif  // DESPECKLE_IMAGE_HPP
