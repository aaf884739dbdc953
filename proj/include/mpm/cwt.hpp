#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpm/signal_features.hpp"

namespace mpm {

enum class Wavelet { kMexicanHat };
enum class Boundary { kReflect };

struct CwtConfig {
  Wavelet wavelet = Wavelet::kMexicanHat;
  std::vector<double> scales{2, 4, 8, 16, 32, 64};  // in frames
  Boundary boundary = Boundary::kReflect;
  // Kernel half-width in units of scale. The Mexican hat is below 1e-12 past 8.
  double support = 8.0;

  void validate() const;
};

/// num_frames x (3 * scales.size()), feature-major: pitch at every scale,
/// then energy, then vad.
struct CwtFeatures {
  Eigen::MatrixXd values;
  std::vector<double> scales;

  int num_frames() const { return static_cast<int>(values.rows()); }
};

/// Normalized so that the continuous wavelet has unit L2 norm.
double mexican_hat(double t);

/// Taps psi(j / s) / sqrt(s) for j in [-K, K], K = ceil(support * s).
Eigen::VectorXd wavelet_kernel(double scale, const CwtConfig& cfg = {});

/// Whole-sample symmetric reflection (edge sample not repeated), applied
/// repeatedly so any index maps into [0, n).
int reflect_index(long i, int n);

/// y_t = sum_u x_u psi((u - t) / s) / sqrt(s) over the reflect-extended
/// contour, evaluated by FFT.
Eigen::VectorXd cwt_contour(const Eigen::VectorXd& x, double scale, const CwtConfig& cfg = {});

/// Scales that fit inside num_frames; the rest are dropped with a warning.
std::vector<double> usable_scales(int num_frames, const CwtConfig& cfg);

CwtFeatures cwt_encode(const ProsodyTrack& track, const CwtConfig& cfg = {});

std::string to_string(Wavelet w);
std::string to_string(Boundary b);

}  // namespace mpm
