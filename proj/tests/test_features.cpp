#include <doctest.h>

#include <cmath>

#include "ecgkit/features.hpp"
#include "support/synthetic.hpp"

using namespace ecg;

TEST_CASE("signal examples are z-scored per lead over the window") {
  nn::ArchSpec arch;
  arch.input_len = 400;
  const EcgRecord rec = testsupport::sine_record(400);
  const nn::Example ex = make_example(rec, arch);
  REQUIRE(ex.input.shape == std::vector<int>({12, 400}));
  for (int l = 0; l < kNumLeads; ++l) {
    double mean = 0.0, var = 0.0;
    const double* row = ex.input.v.data() + static_cast<std::size_t>(l) * 400;
    for (int i = 0; i < 400; ++i) mean += row[i];
    mean /= 400.0;
    for (int i = 0; i < 400; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= 400.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("short records are zero-padded, long ones truncated") {
  nn::ArchSpec arch;
  arch.input_len = 500;
  const EcgRecord rec = testsupport::sine_record(300);
  const nn::Example ex = make_example(rec, arch);
  CHECK(ex.input.dim(1) == 500);

  nn::ArchSpec shorter;
  shorter.input_len = 100;
  const nn::Example trunc = make_example(rec, shorter);
  CHECK(trunc.input.dim(1) == 100);
}

TEST_CASE("a flat record maps to all zeros") {
  nn::ArchSpec arch;
  arch.input_len = 64;
  const nn::Example ex = make_example(testsupport::flat_record(64), arch);
  for (double v : ex.input.v) CHECK(v == 0.0);
}

TEST_CASE("labels carry through; unlabeled records get -1") {
  nn::ArchSpec arch;
  arch.input_len = 64;
  EcgRecord rec = testsupport::sine_record(64);
  CHECK(make_example(rec, arch).label == -1);
  rec.label = ArrhythmiaClass::SB;
  CHECK(make_example(rec, arch).label == 2);
}

TEST_CASE("image examples have the raster shape with pixels in [0,1]") {
  nn::ArchSpec arch;
  arch.kind = nn::ArchKind::cnn2d;
  const nn::Example ex = make_example(testsupport::sine_record(500), arch);
  REQUIRE(ex.input.shape == std::vector<int>({1, 187, 506}));
  for (double v : ex.input.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(ex.input.v[0] == 1.0);  // background is white
}

TEST_CASE("QRS features ride along when the arch asks for them") {
  nn::ArchSpec arch;
  arch.input_len = 4000;
  arch.with_qrs_features = true;
  const EcgRecord rec = testsupport::pulse_record(75.0, 8.0);
  const nn::Example ex = make_example(rec, arch);
  CHECK(ex.aux[0] > 0.0);                                  // beat count
  CHECK(ex.aux[5] == doctest::Approx(75.0).epsilon(0.02));  // heart rate
}
