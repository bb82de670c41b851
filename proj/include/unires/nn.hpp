#pragma once

#include <Eigen/Dense>

#include <cmath>

// Dense building blocks for the conditional denoiser. Feature maps are
// (pixels x channels) row-major matrices over a square grid.
namespace unires::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// 3x3 zero-padded patches: row p holds the 9 neighbours of pixel p,
/// column (ky * 3 + kx) * channels + c.
template <typename Scalar>
void im2col3x3(const Mat<Scalar>& in, int height, int width, Mat<Scalar>& cols) {
  const int c = int(in.cols());
  cols.setZero(Eigen::Index(height) * width, 9 * c);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Index p = Eigen::Index(y) * width + x;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= width) continue;
          cols.row(p).segment((ky * 3 + kx) * c, c) = in.row(Eigen::Index(sy) * width + sx);
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: scatters patch gradients back onto pixels.
template <typename Scalar>
void col2im3x3(const Mat<Scalar>& cols, int height, int width, int channels, Mat<Scalar>& out) {
  out.setZero(Eigen::Index(height) * width, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Index p = Eigen::Index(y) * width + x;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= width) continue;
          out.row(Eigen::Index(sy) * width + sx) += cols.row(p).segment((ky * 3 + kx) * channels, channels);
        }
      }
    }
  }
}

/// out = cols * weight + bias (broadcast over pixels).
template <typename Scalar, typename W, typename B>
void conv_forward(const Mat<Scalar>& cols, const Eigen::MatrixBase<W>& weight, const Eigen::MatrixBase<B>& bias,
                  Mat<Scalar>& out) {
  out.noalias() = cols * weight;
  out.rowwise() += bias.row(0);
}

/// Gradients of conv_forward. d_cols is skipped when null.
template <typename Scalar, typename W, typename GW, typename GB>
void conv_backward(const Mat<Scalar>& cols, const Eigen::MatrixBase<W>& weight, const Mat<Scalar>& d_out,
                   Eigen::MatrixBase<GW>& d_weight, Eigen::MatrixBase<GB>& d_bias, Mat<Scalar>* d_cols) {
  d_weight.noalias() += cols.transpose() * d_out;
  d_bias.row(0) += d_out.colwise().sum();
  if (d_cols) d_cols->noalias() = d_out * weight.transpose();
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Derived>
auto silu(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x * x.unaryExpr([](S v) { return sigmoid(v); });
}

template <typename Derived>
auto silu_grad(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) {
    const S s = sigmoid(v);
    return s * (S(1) + v * (S(1) - s));
  });
}

}  // namespace unires::nn
