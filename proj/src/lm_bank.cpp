#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "roadblocks/features.hpp"

namespace roadblocks {

namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd remove_mean_l1(Eigen::MatrixXd k) {
  k.array() -= k.mean();
  const double l1 = k.cwiseAbs().sum();
  if (l1 > 0) k /= l1;
  return k;
}

// Smallest n' >= n whose only prime factors are 2, 3 and 5.
int next_smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

// 2-D complex FFT over a row-major buffer, rows then columns.
class Fft2d {
 public:
  Fft2d(int rows, int cols) : rows_(rows), cols_(cols) {}

  void forward(ComplexMatrix& m) { transform(m, false); }
  void inverse(ComplexMatrix& m) { transform(m, true); }

 private:
  void transform(ComplexMatrix& m, bool inverse) {
    run_lines(m, inverse, /*along_rows=*/true);
    run_lines(m, inverse, /*along_rows=*/false);
  }

  void run_lines(ComplexMatrix& m, bool inverse, bool along_rows) {
    const int lines = along_rows ? rows_ : cols_;
    const int len = along_rows ? cols_ : rows_;
    std::vector<Complex> in(len), out(len);
    for (int l = 0; l < lines; ++l) {
      for (int i = 0; i < len; ++i) in[i] = along_rows ? m(l, i) : m(i, l);
      if (inverse) {
        fft_.inv(out, in);
      } else {
        fft_.fwd(out, in);
      }
      for (int i = 0; i < len; ++i) (along_rows ? m(l, i) : m(i, l)) = out[i];
    }
  }

  int rows_;
  int cols_;
  Eigen::FFT<double> fft_;
};

}  // namespace

std::string LmKernel::label() const {
  switch (kind) {
    case LmKind::Edge: return "edge";
    case LmKind::Bar: return "bar";
    case LmKind::Gaussian: return "gaussian";
    case LmKind::LoG: return "log";
  }
  return "unknown";
}

int LmFilterBank::index_of(LmKind kind, int nth) const {
  int seen = 0;
  for (int i = 0; i < size(); ++i) {
    if (kernels[i].kind == kind && seen++ == nth) return i;
  }
  throw std::out_of_range("LmFilterBank::index_of: no such kernel");
}

Eigen::MatrixXd oriented_kernel(int order, double theta, double sigma, double elongation, int support) {
  if (order != 1 && order != 2) throw std::invalid_argument("oriented_kernel: order must be 1 or 2");
  if (support <= 0 || support % 2 == 0) throw std::invalid_argument("oriented_kernel: support must be odd");
  const int half = support / 2;
  const double su = sigma;
  const double sv = elongation * sigma;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::MatrixXd k(support, support);
  for (int row = 0; row < support; ++row) {
    for (int col = 0; col < support; ++col) {
      const double x = col - half;
      const double y = row - half;
      const double u = x * c + y * s;    // across
      const double v = -x * s + y * c;   // along
      const double g = std::exp(-u * u / (2 * su * su)) * std::exp(-v * v / (2 * sv * sv));
      k(row, col) = order == 1 ? -u / (su * su) * g : (u * u - su * su) / (su * su * su * su) * g;
    }
  }
  return remove_mean_l1(std::move(k));
}

LmFilterBank build_lm_bank() {
  LmFilterBank bank;
  bank.support = kLmSupport;
  const int half = kLmSupport / 2;
  for (int order : {1, 2}) {
    for (int i = 0; i < kLmOrientations; ++i) {
      const double theta = std::numbers::pi * i / kLmOrientations;
      bank.kernels.push_back({order == 1 ? LmKind::Edge : LmKind::Bar, theta, kLmSigma,
                              oriented_kernel(order, theta, kLmSigma, kLmElongation, kLmSupport)});
    }
  }

  auto radial = [&](auto&& fn) {
    Eigen::MatrixXd k(kLmSupport, kLmSupport);
    for (int row = 0; row < kLmSupport; ++row) {
      for (int col = 0; col < kLmSupport; ++col) {
        const double x = col - half;
        const double y = row - half;
        k(row, col) = fn(x * x + y * y);
      }
    }
    return k;
  };

  Eigen::MatrixXd gauss = radial([](double r2) { return std::exp(-r2 / (2 * kLmSigma * kLmSigma)); });
  gauss /= gauss.sum();
  bank.kernels.push_back({LmKind::Gaussian, 0.0, kLmSigma, std::move(gauss)});

  for (double sigma : {kLmSigma, 2 * kLmSigma}) {
    Eigen::MatrixXd log = radial([sigma](double r2) {
      const double s2 = sigma * sigma;
      return (r2 - 2 * s2) / (s2 * s2) * std::exp(-r2 / (2 * s2));
    });
    bank.kernels.push_back({LmKind::LoG, 0.0, sigma, remove_mean_l1(std::move(log))});
  }
  return bank;
}

BankResponses convolve_bank(const RealPlane& gray, const LmFilterBank& bank) {
  if (gray.channels() != 1) throw std::invalid_argument("convolve_bank: expected 1-channel input");
  if (bank.size() == 0 || bank.size() > 255) throw std::invalid_argument("convolve_bank: bad bank size");
  const int half = bank.support / 2;
  const int w = gray.width();
  const int h = gray.height();
  const int rows = next_smooth_size(h + 2 * half);
  const int cols = next_smooth_size(w + 2 * half);

  Fft2d fft(rows, cols);

  ComplexMatrix image_spec = ComplexMatrix::Zero(rows, cols);
  for (int y = 0; y < h + 2 * half; ++y) {
    const int sy = std::clamp(y - half, 0, h - 1);
    for (int x = 0; x < w + 2 * half; ++x) {
      image_spec(y, x) = gray(std::clamp(x - half, 0, w - 1), sy);
    }
  }
  fft.forward(image_spec);

  auto kernel_spec = [&](const Eigen::MatrixXd& k) {
    ComplexMatrix spec = ComplexMatrix::Zero(rows, cols);
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        spec((dy + rows) % rows, (dx + cols) % cols) = k(dy + half, dx + half);
      }
    }
    fft.forward(spec);
    return spec;
  };

  BankResponses out;
  out.responses.assign(static_cast<std::size_t>(bank.size()), RealPlane(w, h));

  // Two real correlations per inverse transform: real and imaginary parts.
  ComplexMatrix work(rows, cols);
  for (int k = 0; k < bank.size(); k += 2) {
    const bool pair = k + 1 < bank.size();
    const ComplexMatrix k1 = kernel_spec(bank.kernels[k].weights);
    if (pair) {
      const ComplexMatrix k2 = kernel_spec(bank.kernels[k + 1].weights);
      work = image_spec.cwiseProduct(k1.conjugate() + Complex(0, 1) * k2.conjugate());
    } else {
      work = image_spec.cwiseProduct(k1.conjugate());
    }
    fft.inverse(work);
    RealPlane& r1 = out.responses[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) r1(x, y) = work(y + half, x + half).real();
    }
    if (pair) {
      RealPlane& r2 = out.responses[k + 1];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) r2(x, y) = work(y + half, x + half).imag();
      }
    }
  }

  out.argmax = CodePlane(w, h);
  const std::size_t n = gray.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    double best_mag = std::abs(out.responses[0].data()[p]);
    for (int k = 1; k < bank.size(); ++k) {
      const double mag = std::abs(out.responses[k].data()[p]);
      if (mag > best_mag) {
        best_mag = mag;
        best = k;
      }
    }
    out.argmax.data()[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace roadblocks
