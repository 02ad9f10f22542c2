#include "ecgkit/bandpass.hpp"

#include <cmath>
#include <numbers>

#include "ecgkit/errors.hpp"

namespace ecg {

namespace {

using cd = std::complex<double>;

// Expand prod (x - r_i) into monic polynomial coefficients, highest power first.
std::vector<cd> poly_from_roots(const std::vector<cd>& roots) {
  std::vector<cd> coeffs{cd(1.0, 0.0)};
  for (const cd& r : roots) {
    std::vector<cd> next(coeffs.size() + 1, cd(0.0, 0.0));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= coeffs[i] * r;
    }
    coeffs = std::move(next);
  }
  return coeffs;
}

std::vector<double> real_coeffs(const std::vector<cd>& c) {
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

}  // namespace

void BandpassSpec::validate() const {
  if (order < 1) throw DomainError("bandpass: order must be >= 1");
  if (!(sampling_hz > 0.0)) throw DomainError("bandpass: sampling_hz must be positive");
  const double nyquist = 0.5 * sampling_hz;
  if (!(lowcut_hz > 0.0 && lowcut_hz < highcut_hz && highcut_hz < nyquist))
    throw DomainError("bandpass: need 0 < lowcut (" + std::to_string(lowcut_hz) +
                      ") < highcut (" + std::to_string(highcut_hz) + ") < Nyquist (" +
                      std::to_string(nyquist) + ")");
}

IirCoefficients design_bandpass(const BandpassSpec& spec) {
  spec.validate();
  constexpr double pi = std::numbers::pi;
  const int n = spec.order;

  // Cutoffs as fractions of Nyquist, pre-warped onto the analog axis for a
  // bilinear transform at internal rate fs = 2 (so s = 4 (z-1)/(z+1)).
  const double nyquist = 0.5 * spec.sampling_hz;
  const double wn_lo = spec.lowcut_hz / nyquist;
  const double wn_hi = spec.highcut_hz / nyquist;
  const double fs2 = 4.0;
  const double warped_lo = fs2 * std::tan(pi * wn_lo / 2.0);
  const double warped_hi = fs2 * std::tan(pi * wn_hi / 2.0);
  const double bw = warped_hi - warped_lo;
  const double wo = std::sqrt(warped_lo * warped_hi);

  // Analog low-pass Butterworth prototype: unit cutoff, poles evenly spaced
  // on the left half unit circle, no finite zeros, unit gain.
  constexpr double pi_l = std::numbers::pi;
  std::vector<cd> proto_poles;
  proto_poles.reserve(static_cast<std::size_t>(n));
  for (int m = -n + 1; m < n; m += 2) {
    proto_poles.push_back(-std::exp(cd(0.0, pi_l * m / (2.0 * n))));
  }

  // Low-pass to bandpass: each prototype pole splits into a conjugate pair;
  // n zeros appear at the origin; gain picks up bw^n.
  std::vector<cd> a_poles;
  a_poles.reserve(static_cast<std::size_t>(2 * n));
  for (const cd& p : proto_poles) {
    const cd scaled = p * (bw / 2.0);
    const cd disc = std::sqrt(scaled * scaled - cd(wo * wo, 0.0));
    a_poles.push_back(scaled + disc);
    a_poles.push_back(scaled - disc);
  }
  std::vector<cd> a_zeros(static_cast<std::size_t>(n), cd(0.0, 0.0));
  double gain = std::pow(bw, n);

  // Bilinear transform; the n-pole excess maps to n zeros at z = -1.
  std::vector<cd> d_zeros, d_poles;
  cd num(1.0, 0.0), den(1.0, 0.0);
  for (const cd& z : a_zeros) {
    d_zeros.push_back((cd(fs2, 0.0) + z) / (cd(fs2, 0.0) - z));
    num *= cd(fs2, 0.0) - z;
  }
  for (const cd& p : a_poles) {
    d_poles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
    den *= cd(fs2, 0.0) - p;
  }
  for (int i = 0; i < n; ++i) d_zeros.push_back(cd(-1.0, 0.0));
  gain *= (num / den).real();

  IirCoefficients out;
  out.b = real_coeffs(poly_from_roots(d_zeros));
  for (double& v : out.b) v *= gain;
  out.a = real_coeffs(poly_from_roots(d_poles));  // monic by construction

  for (const cd& p : d_poles) {
    if (std::abs(p) >= 1.0)
      throw DomainError("bandpass: design produced an unstable pole (|p| = " +
                        std::to_string(std::abs(p)) + ")");
  }
  return out;
}

std::vector<double> apply_filter(const IirCoefficients& coeffs, std::span<const double> x) {
  const std::size_t nb = coeffs.b.size();
  const std::size_t na = coeffs.a.size();
  if (nb == 0 || na == 0 || coeffs.a[0] == 0.0)
    throw DomainError("apply_filter: invalid coefficients");
  for (double v : x) {
    if (!std::isfinite(v)) throw DataError("apply_filter: non-finite input sample");
  }

  const std::size_t order = std::max(nb, na) - 1;
  std::vector<double> b(order + 1, 0.0), a(order + 1, 0.0);
  for (std::size_t i = 0; i < nb; ++i) b[i] = coeffs.b[i] / coeffs.a[0];
  for (std::size_t i = 0; i < na; ++i) a[i] = coeffs.a[i] / coeffs.a[0];

  std::vector<double> state(order, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = b[0] * xi + (order > 0 ? state[0] : 0.0);
    for (std::size_t j = 0; j + 1 < order; ++j) {
      state[j] = b[j + 1] * xi + state[j + 1] - a[j + 1] * yi;
    }
    if (order > 0) state[order - 1] = b[order] * xi - a[order] * yi;
    y[i] = yi;
  }
  return y;
}

std::complex<double> frequency_response(const IirCoefficients& coeffs, double omega) {
  const cd z = std::exp(cd(0.0, -omega));
  cd num(0.0, 0.0), den(0.0, 0.0);
  cd zk(1.0, 0.0);
  const std::size_t terms = std::max(coeffs.b.size(), coeffs.a.size());
  for (std::size_t k = 0; k < terms; ++k) {
    if (k < coeffs.b.size()) num += coeffs.b[k] * zk;
    if (k < coeffs.a.size()) den += coeffs.a[k] * zk;
    zk *= z;
  }
  return num / den;
}

}  // namespace ecg
