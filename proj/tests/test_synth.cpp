#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gaitgate/dataset.hpp"
#include "gaitgate/rng.hpp"
#include "gaitgate/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gaitgate {
namespace {

namespace fs = std::filesystem;
using testing::expect_error;

TEST(Rng, DeterministicAndSeedDependent) {
  Rng a(1), b(1), c(2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng r(5);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(Rng, NormalMoments) {
  Rng r(6);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng r(7);
  const auto picks = r.sample_without_replacement(20, 20);
  EXPECT_EQ(std::set<std::size_t>(picks.begin(), picks.end()).size(), 20u);
}

TEST(Profile, DeterministicAndInRange) {
  EXPECT_EQ(generate_profile(1), generate_profile(1));
  EXPECT_NE(generate_profile(1), generate_profile(2));
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = generate_profile(s);
    EXPECT_GE(p.f0, 1.5);
    EXPECT_LT(p.f0, 2.3);
    EXPECT_GE(p.noise_sigma, 0.01);
    EXPECT_LT(p.noise_sigma, 0.03);
    const double g = std::hypot(p.gravity[0], p.gravity[1], p.gravity[2]);
    EXPECT_NEAR(g, 1.0, 1e-12);
    EXPECT_GE(p.gravity[2], std::cos(0.35) - 1e-12);
    for (const auto& h : p.amp) for (double a : h) EXPECT_GT(a, 0.0);
  }
}

TEST(Session, ConstantMagnitudeWithoutMotion) {
  auto p = generate_profile(3);
  for (auto& h : p.amp) h = {0.0, 0.0, 0.0};
  p.noise_sigma = 0.0;
  const auto s = synth_session(p, baseline_modifier(), 5.0, 100.0, 1);
  ASSERT_EQ(s.samples.size(), 500u);
  for (double m : magnitude(s).values) EXPECT_NEAR(m, 1.0, 1e-12);
}

TEST(Session, SpectralPeakAtStepFrequency) {
  auto p = generate_profile(4);
  for (auto& h : p.amp) h = {0.0, 0.0, 0.0};
  p.amp[0] = {0.0, 0.0, 0.3};
  p.gravity = {0.0, 0.0, 1.0};
  p.noise_sigma = 0.0;
  const auto s = synth_session(p, baseline_modifier(), 20.48, 100.0, 1);
  std::vector<double> z;
  for (const auto& x : s.samples) z.push_back(x.az - 1.0);
  const auto power = oracle::naive_frame_power(z, z.size());
  const auto peak = static_cast<std::size_t>(
      std::max_element(power.begin() + 1, power.end()) - power.begin());
  const double bin_hz = 100.0 / static_cast<double>(z.size());
  EXPECT_NEAR(static_cast<double>(peak) * bin_hz, p.f0, bin_hz);
}

TEST(Session, DeterministicInSeed) {
  const auto p = generate_profile(9);
  const auto a = synth_session(p, baseline_modifier(), 3.0, 100.0, 5);
  const auto b = synth_session(p, baseline_modifier(), 3.0, 100.0, 5);
  const auto c = synth_session(p, baseline_modifier(), 3.0, 100.0, 6);
  std::ostringstream sa, sb, sc;
  write_session_csv(a, sa);
  write_session_csv(b, sb);
  write_session_csv(c, sc);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Modifiers, ShoeRangesAndValidation) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = shoe_modifier(s, 0.25);
    for (double a : m.amp_scale) {
      EXPECT_GE(a, 0.75);
      EXPECT_LE(a, 1.25);
    }
    EXPECT_LE(std::abs(m.f0_offset), 0.05);
  }
  ConditionModifier bad;
  bad.noise_scale = -1.0;
  expect_error([&] { bad.validate(); }, ErrorKind::kInvalidArgument, "");
}

TEST(Modifiers, SurfaceOnlyTouchesUpperHarmonics) {
  const auto m = surface_modifier(3, 0.1);
  EXPECT_EQ(m.amp_scale[0], 1.0);
  EXPECT_EQ(m.amp_scale[1], 1.0);
  EXPECT_GE(m.noise_scale, 1.0);
}

TEST(ConditionGrid, ShoeSurfaceMapping) {
  const auto g = condition_grid(4);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[1].shoe, 0u);
  EXPECT_EQ(g[1].surface, 1u);
  EXPECT_EQ(g[2].shoe, 1u);
  EXPECT_EQ(g[2].surface, 0u);
}

TEST(Journey, AnnotationsAndLength) {
  const auto p = generate_profile(11);
  const auto spec = three_shift_journey(30.0, 1);
  const auto j = synth_journey(p, spec, 100.0, 2);
  EXPECT_EQ(j.series.samples.size(), 12000u);
  ASSERT_EQ(j.annotations.size(), 4u);
  EXPECT_EQ(j.annotations[0].label, "baseline");
  EXPECT_EQ(j.annotations[1].label, "brisk");
  EXPECT_DOUBLE_EQ(j.annotations[2].t_start, 60.0);
  const auto json = annotations_to_json(j.annotations);
  EXPECT_EQ(json[3]["label"], "grass_decline");
}

TEST(Journey, ContinuousAcrossBoundaries) {
  auto p = generate_profile(12);
  p.noise_sigma = 0.0;
  const auto j = synth_journey(p, three_shift_journey(10.0, 1), 100.0, 3);
  double max_step = 0;
  for (std::size_t i = 1; i < j.series.samples.size(); ++i) {
    max_step = std::max(max_step, std::abs(j.series.samples[i].az - j.series.samples[i - 1].az));
  }
  // a 2.5 Hz, ~1 g-peak waveform moves at most ~0.2 g per 10 ms sample
  EXPECT_LT(max_step, 0.25);
}

TEST(Journey, SingleSegmentEqualsSession) {
  const auto p = generate_profile(13);
  const auto s = synth_session(p, baseline_modifier(), 4.0, 100.0, 8);
  const auto j = synth_journey(p, baseline_journey(4.0), 100.0, 8);
  ASSERT_EQ(s.samples.size(), j.series.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) EXPECT_EQ(s.samples[i].az, j.series.samples[i].az);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Dataset, EightySessionsAndByteIdenticalRerun) {
  const auto root = fs::temp_directory_path() / "gaitgate_synth_test";
  fs::remove_all(root);
  DatasetOptions o;
  o.n_users = 20;
  o.conditions = condition_grid(4);
  o.duration_sec = 12.0;
  const auto a = generate_dataset(o, root / "a");
  const auto b = generate_dataset(o, root / "b");
  ASSERT_EQ(a.size(), 80u);
  EXPECT_EQ(a, b);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root / "a" / "sessions")) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(root / "b" / "sessions" / e.path().filename()));
  }
  EXPECT_EQ(files, 80u);
  EXPECT_EQ(slurp(root / "a" / "manifest.json"), slurp(root / "b" / "manifest.json"));

  const auto loaded = load_dataset(root / "a");
  ASSERT_EQ(loaded.size(), 80u);
  EXPECT_EQ(loaded[5].meta, a[5]);
  EXPECT_EQ(loaded[5].series.samples.size(), 1200u);
  const auto mem = synth_corpus(o);
  EXPECT_EQ(loaded[5].series.samples[17].ay, mem[5].series.samples[17].ay);
  fs::remove_all(root);
}

TEST(Dataset, CsvRoundTripIsExact) {
  AccelSeries s;
  s.fs = 100.0;
  s.samples = {{0.0, 0.1, -1e-17, 1.0 / 3.0}, {0.01, 2.5e-300, 7.0, -0.0}};
  std::stringstream ss;
  write_session_csv(s, ss);
  const auto back = read_session_csv(ss, 100.0);
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[0].az, 1.0 / 3.0);
  EXPECT_EQ(back.samples[1].ax, 2.5e-300);
}

TEST(Dataset, MalformedCsv) {
  std::stringstream ss("t,x,y,z\n0,1,2\n");
  try {
    read_session_csv(ss, 100.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
}

}  // namespace
}  // namespace gaitgate
