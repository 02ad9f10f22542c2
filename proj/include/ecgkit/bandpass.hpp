#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ecg {

struct BandpassSpec {
  double lowcut_hz = 5.0;
  double highcut_hz = 15.0;
  int order = 2;
  double sampling_hz = 500.0;

  void validate() const;  // throws DomainError unless 0 < low < high < fs/2 and order >= 1
};

// Normalised so a[0] = 1. For a bandpass of the given order, b and a each
// have 2*order + 1 entries.
struct IirCoefficients {
  std::vector<double> b;
  std::vector<double> a;
};

// Digital Butterworth bandpass: analog low-pass prototype, low-pass-to-bandpass
// transformation, bilinear transform with cutoff pre-warping. Gain at the two
// cutoffs is 1/sqrt(2) of the passband peak. Deterministic: identical spec
// gives bit-identical coefficients.
IirCoefficients design_bandpass(const BandpassSpec& spec);

// Causal direct-form II transposed filter with zero initial state.
// Output length equals input length.
std::vector<double> apply_filter(const IirCoefficients& coeffs, std::span<const double> x);

// H(e^{j*omega}) evaluated from the coefficients; omega in radians/sample.
std::complex<double> frequency_response(const IirCoefficients& coeffs, double omega);

}  // namespace ecg
