#include "mpm/cwt.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "mpm/error.hpp"
#include "mpm/log.hpp"

namespace mpm {

void CwtConfig::validate() const {
  if (scales.size() < 2) throw Error(ErrorCode::kConfig, "cwt needs at least two scales");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0)) throw Error(ErrorCode::kConfig, "cwt scales must be positive");
    if (i > 0 && !(scales[i] > scales[i - 1])) {
      throw Error(ErrorCode::kConfig, "cwt scales must be strictly increasing");
    }
  }
  if (!(support > 0.0)) throw Error(ErrorCode::kConfig, "cwt support must be positive");
}

double mexican_hat(double t) {
  static const double kNorm = 2.0 / (std::sqrt(3.0) * std::pow(M_PI, 0.25));
  const double t2 = t * t;
  return kNorm * (1.0 - t2) * std::exp(-0.5 * t2);
}

Eigen::VectorXd wavelet_kernel(double scale, const CwtConfig& cfg) {
  const int half = static_cast<int>(std::ceil(cfg.support * scale));
  Eigen::VectorXd h(2 * half + 1);
  const double inv_sqrt = 1.0 / std::sqrt(scale);
  for (int j = -half; j <= half; ++j) h(j + half) = mexican_hat(j / scale) * inv_sqrt;
  return h;
}

int reflect_index(long i, int n) {
  if (n == 1) return 0;
  const long period = 2L * (n - 1);
  long r = i % period;
  if (r < 0) r += period;
  return static_cast<int>(r < n ? r : period - r);
}

Eigen::VectorXd cwt_contour(const Eigen::VectorXd& x, double scale, const CwtConfig& cfg) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw Error(ErrorCode::kEmptyTrack, "cwt of an empty contour");
  const Eigen::VectorXd h = wavelet_kernel(scale, cfg);
  const int half = static_cast<int>(h.size() / 2);
  const int padded = n + 2 * half;
  std::size_t nfft = 1;
  while (nfft < static_cast<std::size_t>(padded + 2 * half)) nfft <<= 1;

  std::vector<double> xs(nfft, 0.0), hs(nfft, 0.0);
  for (int i = 0; i < padded; ++i) xs[static_cast<std::size_t>(i)] = x(reflect_index(i - half, n));
  for (Eigen::Index j = 0; j < h.size(); ++j) hs[static_cast<std::size_t>(j)] = h(j);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> X, H;
  fft.fwd(X, xs);
  fft.fwd(H, hs);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  std::vector<double> y;
  fft.inv(y, X);

  Eigen::VectorXd out(n);
  for (int t = 0; t < n; ++t) out(t) = y[static_cast<std::size_t>(t + 2 * half)];
  return out;
}

std::vector<double> usable_scales(int num_frames, const CwtConfig& cfg) {
  std::vector<double> kept;
  for (double s : cfg.scales) {
    if (s < num_frames) {
      kept.push_back(s);
    } else {
      std::ostringstream msg;
      msg << "cwt scale " << s << " dropped for a " << num_frames << "-frame track";
      warn(msg.str());
    }
  }
  return kept;
}

CwtFeatures cwt_encode(const ProsodyTrack& track, const CwtConfig& cfg) {
  cfg.validate();
  const int n = track.num_frames();
  if (n == 0) throw Error(ErrorCode::kEmptyTrack, "cwt of an empty track");
  if (track.pitch.size() != n || track.energy.size() != n) {
    throw Error(ErrorCode::kAlignment, "track contours differ in length");
  }
  CwtFeatures f;
  f.scales = usable_scales(n, cfg);
  const auto ns = static_cast<Eigen::Index>(f.scales.size());
  f.values.resize(n, 3 * ns);

  Eigen::VectorXd vad(n);
  for (int t = 0; t < n; ++t) vad(t) = track.vad[static_cast<std::size_t>(t)];
  const Eigen::VectorXd* contours[3] = {&track.pitch, &track.energy, &vad};
  for (Eigen::Index c = 0; c < 3; ++c) {
    for (Eigen::Index k = 0; k < ns; ++k) {
      f.values.col(c * ns + k) = cwt_contour(*contours[c], f.scales[static_cast<std::size_t>(k)], cfg);
    }
  }
  return f;
}

std::string to_string(Wavelet) { return "mexican_hat"; }
std::string to_string(Boundary) { return "reflect"; }

}  // namespace mpm
