#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ecgkit/errors.hpp"
#include "ecgkit/record_io.hpp"
#include "ecgkit/rng.hpp"
#include "support/synthetic.hpp"

using namespace ecg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / ("ecgkit_rec_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("lead table is a bijection in canonical order") {
  const char* expected[] = {"I", "II", "III", "aVR", "aVL", "aVF",
                            "V1", "V2", "V3", "V4", "V5", "V6"};
  for (int i = 0; i < kNumLeads; ++i) {
    CHECK(lead_name(i) == expected[i]);
    CHECK(lead_index(expected[i]) == i);
  }
  CHECK(!lead_index("V7"));
  CHECK_THROWS_AS(lead_name(12), DomainError);
}

TEST_CASE("class parsing round-trips, case-insensitively, with the NSR alias") {
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ArrhythmiaClass>(c);
    CHECK(parse_class(class_code(cls)) == cls);
  }
  CHECK(parse_class("af") == ArrhythmiaClass::AF);
  CHECK(parse_class("NSR") == ArrhythmiaClass::SNR);
  CHECK(parse_class("nsr") == ArrhythmiaClass::SNR);
  CHECK(parse_class("stach") == ArrhythmiaClass::STach);
  CHECK(!parse_class("VT"));
}

TEST_CASE("round_half_even matches the stated rule") {
  CHECK(round_half_even(0.5) == 0);
  CHECK(round_half_even(1.5) == 2);
  CHECK(round_half_even(2.5) == 2);
  CHECK(round_half_even(-0.5) == 0);
  CHECK(round_half_even(-1.5) == -2);
  CHECK(round_half_even(-2.5) == -2);
  CHECK(round_half_even(1234.5) == 1234);
  CHECK(round_half_even(2.4999) == 2);
  CHECK(round_half_even(2.5001) == 3);
}

TEST_CASE("write/read round-trip stays within the quantization bound") {
  const fs::path dir = temp_dir();
  SplitMix64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    EcgRecord rec = testsupport::random_record(rng.next(), 50 + static_cast<int>(rng.bounded(200)));
    if (trial % 2 == 0) rec.label = static_cast<ArrhythmiaClass>(trial % kNumClasses);
    const double gain = 500.0 + static_cast<double>(rng.bounded(2000));
    const fs::path p = dir / (rec.record_id + std::to_string(trial));
    write_record(rec, p, gain);
    const EcgRecord back = read_record(p);

    CHECK(back.record_id == rec.record_id);
    CHECK(back.sampling_hz == rec.sampling_hz);
    CHECK(back.label == rec.label);
    REQUIRE(back.n_samples() == rec.n_samples());
    const double bound = 0.5 / gain;
    for (int l = 0; l < kNumLeads; ++l) {
      for (int i = 0; i < rec.n_samples(); ++i) {
        const double err = std::abs(back.leads[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] -
                                    rec.leads[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)]);
        REQUIRE(err <= bound + 1e-12);
      }
    }
  }
}

TEST_CASE("lead order survives the round trip bit-exactly") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(64);
  // stamp each lead with its own index so a swap would be visible
  for (int l = 0; l < kNumLeads; ++l)
    rec.leads[static_cast<std::size_t>(l)].assign(64, static_cast<double>(l));
  write_record(rec, dir / "order", 1000.0);
  const EcgRecord back = read_record(dir / "order");
  for (int l = 0; l < kNumLeads; ++l) {
    CHECK(back.leads[static_cast<std::size_t>(l)][0] == static_cast<double>(l));
  }
}

TEST_CASE("the documented header example parses") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::sine_record(5000, 500.0);
  write_record(rec, dir / "ex", 1000.0);
  // payload must be exactly 12 x 5000 int16
  CHECK(fs::file_size(dir / "ex.raw") == 12u * 5000u * 2u);
  const EcgRecord back = read_record(dir / "ex.json");
  CHECK(back.n_samples() == 5000);
  CHECK(back.sampling_hz == 500.0);
}

TEST_CASE("quantization follows round-half-even at the stored gain") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(2);
  rec.leads[0][0] = 1.2345;  // 1234.5 units at gain 1000 -> 1234
  write_record(rec, dir / "q", 1000.0);
  const EcgRecord back = read_record(dir / "q");
  CHECK(back.leads[0][0] == doctest::Approx(1.234).epsilon(1e-12));
}

TEST_CASE("malformed headers are format errors") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(16);
  write_record(rec, dir / "bad", 1000.0);

  SUBCASE("eleven lead names") {
    std::ifstream in(dir / "bad.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("\"V6\"");
    REQUIRE(pos != std::string::npos);
    text.replace(text.find(",\n    \"V6\""), 11, "");
    std::ofstream out(dir / "bad.json");
    out << text;
    out.close();
    CHECK_THROWS_AS(read_record(dir / "bad"), FormatError);
  }
  SUBCASE("not JSON at all") {
    std::ofstream out(dir / "bad.json");
    out << "not json";
    out.close();
    CHECK_THROWS_AS(read_record(dir / "bad"), FormatError);
  }
  SUBCASE("unknown label") {
    std::ofstream out(dir / "bad.json");
    out << R"({"record_id":"x","sampling_hz":500,"n_samples":16,"gain":1000,
           "lead_names":["I","II","III","aVR","aVL","aVF","V1","V2","V3","V4","V5","V6"],
           "label":"XYZ"})";
    out.close();
    CHECK_THROWS_AS(read_record(dir / "bad"), FormatError);
  }
}

TEST_CASE("a short payload is a truncation error") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(100);
  write_record(rec, dir / "trunc", 1000.0);
  fs::resize_file(dir / "trunc.raw", 12 * 100 * 2 - 2);  // one int16 missing
  CHECK_THROWS_AS(read_record(dir / "trunc"), TruncationError);
}

TEST_CASE("non-finite samples are rejected before anything is written") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(16);
  rec.leads[3][5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(write_record(rec, dir / "nan", 1000.0), DataError);
  CHECK(!fs::exists(dir / "nan.json"));
  CHECK(!fs::exists(dir / "nan.raw"));
}

TEST_CASE("samples that overflow int16 at the gain are rejected") {
  const fs::path dir = temp_dir();
  EcgRecord rec = testsupport::flat_record(4);
  rec.leads[0][0] = 40.0;  // 40000 units at gain 1000
  CHECK_THROWS_AS(write_record(rec, dir / "ovf", 1000.0), DataError);
}

TEST_CASE("CSV import maps columns by name") {
  const fs::path dir = temp_dir();
  const fs::path p = dir / "rec.csv";
  {
    std::ofstream out(p);
    // deliberately shuffled column order
    out << "II,I,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n";
    for (int i = 0; i < 10; ++i) {
      out << (i * 2) << "," << i;
      for (int c = 2; c < 12; ++c) out << "," << 0.25 * c;
      out << "\n";
    }
  }
  const EcgRecord rec = import_csv(p, 500.0, ArrhythmiaClass::SB);
  CHECK(rec.n_samples() == 10);
  CHECK(rec.label == ArrhythmiaClass::SB);
  CHECK(rec.leads[0][3] == 3.0);       // lead I came from column 2
  CHECK(rec.leads[1][3] == 6.0);       // lead II came from column 1
  CHECK(rec.leads[5][0] == doctest::Approx(0.25 * 5));
}

TEST_CASE("CSV rejections") {
  const fs::path dir = temp_dir();
  auto write_text = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << text;
    return p;
  };

  CHECK_THROWS_AS(import_csv(write_text("empty.csv", ""), 500.0), FormatError);
  CHECK_THROWS_AS(
      import_csv(write_text("v7.csv", "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V7\n0,0,0,0,0,0,0,0,0,0,0,0\n0,0,0,0,0,0,0,0,0,0,0,0\n"), 500.0),
      FormatError);
  CHECK_THROWS_AS(
      import_csv(write_text("nonnum.csv", "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n0,0,0,oops,0,0,0,0,0,0,0,0\n0,0,0,0,0,0,0,0,0,0,0,0\n"), 500.0),
      DataError);
  CHECK_THROWS_AS(
      import_csv(write_text("onerow.csv", "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n0,0,0,0,0,0,0,0,0,0,0,0\n"), 500.0),
      FormatError);
}

TEST_CASE("record invariants are enforced") {
  EcgRecord rec = testsupport::flat_record(16);
  rec.leads[4].pop_back();
  CHECK_THROWS_AS(rec.validate(), DomainError);

  EcgRecord one = testsupport::flat_record(1);
  CHECK_THROWS_AS(one.validate(), DomainError);

  EcgRecord bad_fs = testsupport::flat_record(16);
  bad_fs.sampling_hz = 0.0;
  CHECK_THROWS_AS(bad_fs.validate(), DomainError);
}
