#ifndef DESPECKLE_FRAME_HPP
#define DESPECKLE_FRAME_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "despeckle/image.hpp"

namespace despeckle {

/// One coefficient plane of an undecimated transform. Every subband keeps
/// the full image shape. (row_filter, col_filter) identify the separable
/// filter pair; (0,0) is reserved for the single approximation band kept at
/// the deepest level.
struct Subband {
  int level = 0;       // 1..J
  int row_filter = 0;  // 0..4
  int col_filter = 0;  // 0..4
  Image coeffs;

  bool is_approx() const { return row_filter == 0 && col_filter == 0; }
};

/// Structured multiband coefficient set: one approximation band plus 24
/// detail bands per level, all image-shaped.
class FrameCoeffs {
public:
  FrameCoeffs() = default;
  FrameCoeffs(std::size_t rows, std::size_t cols, int levels)
      : rows_(rows), cols_(cols), levels_(levels) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int levels() const { return levels_; }

  std::vector<Subband>& bands() { return bands_; }
  const std::vector<Subband>& bands() const { return bands_; }

  std::size_t band_count() const { return bands_.size(); }
  std::size_t coeff_count() const { return bands_.size() * rows_ * cols_; }

  /// Index of the unique approximation band.
  std::size_t approx_index() const {
    for (std::size_t b = 0; b < bands_.size(); ++b)
      if (bands_[b].is_approx()) return b;
    throw std::logic_error("FrameCoeffs: no approximation band");
  }

  bool same_layout(const FrameCoeffs& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_ || bands_.size() != o.bands_.size())
      return false;
    for (std::size_t b = 0; b < bands_.size(); ++b)
      if (bands_[b].level != o.bands_[b].level ||
          bands_[b].row_filter != o.bands_[b].row_filter ||
          bands_[b].col_filter != o.bands_[b].col_filter)
        return false;
    return true;
  }

  void check_layout(const FrameCoeffs& o) const {
    if (!same_layout(o))
      throw std::invalid_argument("FrameCoeffs: layout mismatch");
  }

private:
  std::size_t rows_ = 0, cols_ = 0;
  int levels_ = 0;
  std::vector<Subband> bands_;
};

inline double inner(const FrameCoeffs& a, const FrameCoeffs& b) {
  a.check_layout(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.band_count(); ++k)
    s += inner(a.bands()[k].coeffs, b.bands()[k].coeffs);
  return s;
}

inline double norm2(const FrameCoeffs& a) { return std::sqrt(inner(a, a)); }

/// Classification of the coefficient index set after hard thresholding:
/// the approximation band is I*, detail coefficients split into I1
/// (survived, |y| > T) and I0 (zeroed, |y| <= T).
struct IndexPartition {
  std::size_t approx_band = 0;
  // Per band, 1 where the detail coefficient survived. Empty for the
  // approximation band.
  std::vector<std::vector<std::uint8_t>> i1;

  std::size_t count_i1() const {
    std::size_t n = 0;
    for (const auto& mask : i1)
      for (std::uint8_t v : mask) n += v;
    return n;
  }

  /// Throws unless the masks line up with the coefficient layout.
  void check_against(const FrameCoeffs& y) const {
    if (i1.size() != y.band_count() || approx_band != y.approx_index())
      throw std::invalid_argument("IndexPartition: band layout mismatch");
    const std::size_t px = y.rows() * y.cols();
    for (std::size_t b = 0; b < i1.size(); ++b) {
      const bool approx = y.bands()[b].is_approx();
      if (!approx && i1[b].size() != px)
        throw std::invalid_argument("IndexPartition: mask size mismatch");
    }
  }
};

/// Undecimated a-trous transform built on the cubic B-spline scaling filter
/// and its four framelet companions sqrt(C(4,j))/16 * (1+z)^(4-j)(1-z)^j.
/// The squared filter responses sum to one at every frequency, so the
/// transform is a tight frame: analysis preserves energy up to the constant
/// c and synthesis is c^-1 times the adjoint, with exact reconstruction.
class TightFrame {
public:
  explicit TightFrame(int levels = 4) : levels_(levels) {
    if (levels < 1) throw std::invalid_argument("TightFrame: levels must be >= 1");
    c_ = measure_frame_constant();
    atom_norms_ = compute_atom_norms();
  }

  int levels() const { return levels_; }
  double frame_constant() const { return c_; }
  const std::string& family() const { return family_; }

  /// l2 norm of the analysis atom of each band, in band order. White noise
  /// of deviation sigma lands on band b with deviation sigma * atom_norms[b],
  /// which is what coefficient thresholds must be compared against: unlike
  /// curvelet atoms, the atoms of a redundancy-25J tight frame are far from
  /// unit norm.
  const std::vector<double>& atom_norms() const { return atom_norms_; }

  /// Analysis operator W.
  FrameCoeffs analyze(const Image& u) const {
    const std::size_t m = u.rows(), n = u.cols();
    FrameCoeffs out(m, n, levels_);
    out.bands().reserve(24 * static_cast<std::size_t>(levels_) + 1);
    Image ll = u;
    std::array<Image, 5> rowpass;
    for (int lev = 1; lev <= levels_; ++lev) {
      const std::size_t spacing = std::size_t{1} << (lev - 1);
      for (int f = 0; f < 5; ++f) rowpass[f] = filter_rows(ll, f, spacing);
      for (int fr = 0; fr < 5; ++fr) {
        for (int fc = 0; fc < 5; ++fc) {
          Image band = filter_cols(rowpass[fr], fc, spacing);
          if (fr == 0 && fc == 0) {
            ll = std::move(band);
          } else {
            out.bands().push_back(Subband{lev, fr, fc, std::move(band)});
          }
        }
      }
    }
    out.bands().push_back(Subband{levels_, 0, 0, std::move(ll)});
    return out;
  }

  /// Synthesis operator, c^-1 W^T. Left inverse of analyze().
  Image synthesize(const FrameCoeffs& x) const {
    if (x.levels() != levels_)
      throw std::invalid_argument("TightFrame::synthesize: level mismatch");
    Image rec = x.bands()[x.approx_index()].coeffs;
    for (int lev = levels_; lev >= 1; --lev) {
      const std::size_t spacing = std::size_t{1} << (lev - 1);
      Image next(x.rows(), x.cols(), 0.0);
      accumulate_adjoint(next, rec, 0, 0, spacing);
      for (const Subband& b : x.bands()) {
        if (b.level == lev && !b.is_approx())
          accumulate_adjoint(next, b.coeffs, b.row_filter, b.col_filter, spacing);
      }
      rec = std::move(next);
    }
    rec *= 1.0 / c_;
    return rec;
  }

private:
  int levels_;
  double c_ = 1.0;
  std::string family_ = "udwt-b3-framelet";
  std::vector<double> atom_norms_;

  // Taps at offsets -2..2. SQ6 = sqrt(6).
  static constexpr double SQ6 = 2.449489742783178098;
  static constexpr std::array<std::array<double, 5>, 5> taps_ = {{
      {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16},
      {2.0 / 16, 4.0 / 16, 0.0, -4.0 / 16, -2.0 / 16},
      {SQ6 / 16, 0.0, -2.0 * SQ6 / 16, 0.0, SQ6 / 16},
      {2.0 / 16, -4.0 / 16, 0.0, 4.0 / 16, -2.0 / 16},
      {1.0 / 16, -4.0 / 16, 6.0 / 16, -4.0 / 16, 1.0 / 16},
  }};

  static std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
    std::ptrdiff_t r = i % nn;
    if (r < 0) r += nn;
    return static_cast<std::size_t>(r);
  }

  // Correlation along rows (index i), taps spaced by the a-trous hole size,
  // periodic extension.
  static Image filter_rows(const Image& u, int f, std::size_t spacing) {
    const std::size_t m = u.rows(), n = u.cols();
    const auto& t = taps_[f];
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(spacing);
    Image out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      std::array<std::size_t, 5> src{};
      for (int k = 0; k < 5; ++k)
        src[k] = wrap(static_cast<std::ptrdiff_t>(i) + (k - 2) * s, m);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += t[k] * u(src[k], j);
        out(i, j) = acc;
      }
    }
    return out;
  }

  static Image filter_cols(const Image& u, int f, std::size_t spacing) {
    const std::size_t m = u.rows(), n = u.cols();
    const auto& t = taps_[f];
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(spacing);
    Image out(m, n);
    std::vector<std::size_t> src(n * 5);
    for (std::size_t j = 0; j < n; ++j)
      for (int k = 0; k < 5; ++k)
        src[j * 5 + k] = wrap(static_cast<std::ptrdiff_t>(j) + (k - 2) * s, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += t[k] * u(i, src[j * 5 + k]);
        out(i, j) = acc;
      }
    }
    return out;
  }

  // Adjoint of the separable correlation pair: gather with negated offsets
  // in both directions, accumulated into `out`.
  static void accumulate_adjoint(Image& out, const Image& band, int fr, int fc,
                                 std::size_t spacing) {
    const std::size_t m = band.rows(), n = band.cols();
    const auto& tr = taps_[fr];
    const auto& tc = taps_[fc];
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(spacing);
    Image tmp(m, n);
    // adjoint of the column pass
    std::vector<std::size_t> src(n * 5);
    for (std::size_t j = 0; j < n; ++j)
      for (int k = 0; k < 5; ++k)
        src[j * 5 + k] = wrap(static_cast<std::ptrdiff_t>(j) - (k - 2) * s, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += tc[k] * band(i, src[j * 5 + k]);
        tmp(i, j) = acc;
      }
    }
    // adjoint of the row pass
    for (std::size_t i = 0; i < m; ++i) {
      std::array<std::size_t, 5> rsrc{};
      for (int k = 0; k < 5; ++k)
        rsrc[k] = wrap(static_cast<std::ptrdiff_t>(i) - (k - 2) * s, m);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += tr[k] * tmp(rsrc[k], j);
        out(i, j) += acc;
      }
    }
  }

  // The frame constant is shape independent (the filter bank is the same at
  // every pixel under periodic extension); measure it once on a delta.
  double measure_frame_constant() {
    c_ = 1.0;
    Image delta(32, 32, 0.0);
    delta(16, 16) = 1.0;
    FrameCoeffs y = analyze(delta);
    double e = 0.0;
    for (const Subband& b : y.bands()) e += inner(b.coeffs, b.coeffs);
    return e;
  }

  // Atom norms from the composed 1-D filters: the separable 2-D atom of a
  // band factors into a row filter and a column filter, so its l2 norm is
  // the product of the 1-D norms. (Exact on images larger than the atom
  // support; tiny images wrap and deviate slightly, which does not matter
  // for a statistical threshold.)
  std::vector<double> compute_atom_norms() const {
    auto upsample = [](const std::array<double, 5>& t, std::size_t s) {
      std::vector<double> out(4 * s + 1, 0.0);
      for (int k = 0; k < 5; ++k) out[static_cast<std::size_t>(k) * s] = t[k];
      return out;
    };
    auto convolve = [](const std::vector<double>& a, const std::vector<double>& b) {
      std::vector<double> out(a.size() + b.size() - 1, 0.0);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
      return out;
    };
    auto l2 = [](const std::vector<double>& a) {
      double s = 0.0;
      for (double v : a) s += v * v;
      return std::sqrt(s);
    };

    std::vector<double> lowpass = {1.0};  // composed low-pass through level-1
    std::vector<double> norms;
    norms.reserve(24 * static_cast<std::size_t>(levels_) + 1);
    double approx_1d = 1.0;
    for (int lev = 1; lev <= levels_; ++lev) {
      const std::size_t s = std::size_t{1} << (lev - 1);
      std::array<double, 5> g{};
      for (int f = 0; f < 5; ++f)
        g[f] = l2(convolve(lowpass, upsample(taps_[f], s)));
      for (int fr = 0; fr < 5; ++fr)
        for (int fc = 0; fc < 5; ++fc)
          if (fr != 0 || fc != 0) norms.push_back(g[fr] * g[fc]);
      lowpass = convolve(lowpass, upsample(taps_[0], s));
      approx_1d = g[0];
    }
    norms.push_back(approx_1d * approx_1d);
    return norms;
  }
};

/// Hard thresholding of the detail coefficients; the approximation band
/// passes through untouched. The threshold applied to band b is
/// threshold * band_scale[b] when scales are given (one entry per band),
/// or the plain scalar otherwise. Detail entries with |y| at or below the
/// threshold are zeroed (set I0), survivors form I1.
inline std::pair<FrameCoeffs, IndexPartition> hard_threshold(
    const FrameCoeffs& y, double threshold,
    const std::vector<double>& band_scale = {}) {
  if (threshold < 0.0 || std::isnan(threshold))
    throw std::invalid_argument("hard_threshold: threshold must be >= 0");
  if (!band_scale.empty() && band_scale.size() != y.band_count())
    throw std::invalid_argument("hard_threshold: band_scale size mismatch");
  FrameCoeffs out = y;
  IndexPartition part;
  part.approx_band = y.approx_index();
  part.i1.resize(y.band_count());
  for (std::size_t b = 0; b < out.band_count(); ++b) {
    Subband& band = out.bands()[b];
    if (band.is_approx()) continue;
    auto& px = band.coeffs.pixels();
    auto& mask = part.i1[b];
    mask.resize(px.size());
    const double tb = band_scale.empty() ? threshold : threshold * band_scale[b];
    for (std::size_t k = 0; k < px.size(); ++k) {
      if (std::abs(px[k]) <= tb) {
        px[k] = 0.0;
        mask[k] = 0;
      } else {
        mask[k] = 1;
      }
    }
  }
  return {std::move(out), std::move(part)};
}

/// Baseline reconstruction: keep the approximation band, hard-threshold the
/// details, synthesize.
inline Image threshold_reconstruct(const TightFrame& frame, const FrameCoeffs& y,
                                   double threshold,
                                   const std::vector<double>& band_scale = {}) {
  return frame.synthesize(hard_threshold(y, threshold, band_scale).first);
}

}  // namespace despeckle

#endif  // DESPECKLE_FRAME_HPP
