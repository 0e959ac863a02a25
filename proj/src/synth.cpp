#include "gaitgate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gaitgate/dataset.hpp"
#include "gaitgate/error.hpp"
#include "gaitgate/rng.hpp"

namespace gaitgate {

namespace {

constexpr std::array<double, 3> kAxisScale{0.08, 0.06, 0.20};
constexpr double kCrossfadeSec = 1.0;
constexpr double kMinF0 = 1.0;
constexpr double kMaxF0 = 3.0;

struct Effective {
  double f0 = 0.0;
  std::array<std::array<double, 3>, kHarmonics> amp{};
  double sigma = 0.0;
};

Effective apply(const GaitProfile& p, const ConditionModifier& m) {
  Effective e;
  e.f0 = std::clamp(p.f0 + m.f0_offset, kMinF0, kMaxF0);
  for (std::size_t k = 0; k < kHarmonics; ++k) {
    for (std::size_t a = 0; a < 3; ++a) e.amp[k][a] = p.amp[k][a] * m.amp_scale[k];
  }
  e.sigma = p.noise_sigma * m.noise_scale;
  return e;
}

Effective lerp(const Effective& a, const Effective& b, double w) {
  Effective e;
  e.f0 = a.f0 + w * (b.f0 - a.f0);
  for (std::size_t k = 0; k < kHarmonics; ++k) {
    for (std::size_t ax = 0; ax < 3; ++ax) {
      e.amp[k][ax] = a.amp[k][ax] + w * (b.amp[k][ax] - a.amp[k][ax]);
    }
  }
  e.sigma = a.sigma + w * (b.sigma - a.sigma);
  return e;
}

std::uint64_t tag_of(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void ConditionModifier::validate() const {
  for (double s : amp_scale) {
    require(s >= 0.0 && std::isfinite(s), "condition '" + label + "' has a negative amplitude scale");
  }
  require(noise_scale >= 0.0 && std::isfinite(noise_scale),
          "condition '" + label + "' has a negative noise scale");
  require(std::isfinite(f0_offset), "condition '" + label + "' has a non-finite f0 offset");
}

GaitProfile generate_profile(std::uint64_t user_seed) {
  Rng rng(user_seed);
  GaitProfile p;
  p.user_seed = user_seed;
  p.f0 = std::clamp(rng.uniform(1.5, 2.3), 1.5, 2.3);
  for (std::size_t k = 0; k < kHarmonics; ++k) {
    for (std::size_t a = 0; a < 3; ++a) {
      p.amp[k][a] = kAxisScale[a] * std::exp(0.5 * rng.normal()) / static_cast<double>(k + 1);
      p.phase[k][a] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }
  p.noise_sigma = rng.uniform(0.01, 0.03);
  const double tilt = rng.uniform(0.0, 0.35);
  const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.gravity = {std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt)};
  return p;
}

ConditionModifier baseline_modifier() { return ConditionModifier{}; }

ConditionModifier shoe_modifier(std::uint64_t seed, double strength, std::string label) {
  Rng rng(seed);
  ConditionModifier m;
  m.label = std::move(label);
  for (auto& s : m.amp_scale) s = std::max(0.0, 1.0 + strength * rng.uniform(-1.0, 1.0));
  m.f0_offset = rng.uniform(-0.05, 0.05);
  return m;
}

ConditionModifier surface_modifier(std::uint64_t seed, double strength, std::string label) {
  Rng rng(seed);
  ConditionModifier m;
  m.label = std::move(label);
  for (std::size_t k = 2; k < kHarmonics; ++k) {
    m.amp_scale[k] = std::max(0.0, 1.0 + strength * rng.uniform(-1.0, 1.0));
  }
  m.noise_scale = 1.0 + 5.0 * strength * rng.uniform();
  return m;
}

ConditionModifier pace_modifier(double f0_offset, double amp_scale, std::string label) {
  ConditionModifier m;
  m.label = std::move(label);
  m.f0_offset = f0_offset;
  m.amp_scale.fill(amp_scale);
  return m;
}

ConditionModifier compose(const ConditionModifier& a, const ConditionModifier& b) {
  ConditionModifier m;
  m.label = a.label + "+" + b.label;
  for (std::size_t k = 0; k < kHarmonics; ++k) m.amp_scale[k] = a.amp_scale[k] * b.amp_scale[k];
  m.f0_offset = a.f0_offset + b.f0_offset;
  m.noise_scale = a.noise_scale * b.noise_scale;
  return m;
}

ConditionModifier condition_modifier(const GaitProfile& profile, const ConditionSpec& c,
                                     double shoe_strength, double surface_strength) {
  ConditionModifier m = baseline_modifier();
  if (c.shoe > 0) {
    m = compose(m, shoe_modifier(derive_seed(profile.user_seed, tag_of(c.shoe_id())),
                                 shoe_strength, c.shoe_id()));
  }
  if (c.surface > 0) {
    m = compose(m, surface_modifier(derive_seed(profile.user_seed, tag_of(c.surface_id())),
                                    surface_strength, c.surface_id()));
  }
  m.label = c.shoe_id() + "/" + c.surface_id();
  return m;
}

std::vector<ConditionSpec> condition_grid(std::size_t count) {
  std::vector<ConditionSpec> out;
  for (std::size_t c = 0; c < count; ++c) out.push_back({c / 2, c % 2});
  return out;
}

Journey synth_journey(const GaitProfile& profile, const JourneySpec& journey, double fs,
                      std::uint64_t seed) {
  require(!journey.segments.empty(), "journey needs at least one segment");
  require(fs > 0.0, "sample rate must be positive");
  std::vector<Effective> params;
  std::vector<double> starts;
  std::vector<double> fades;
  double total = 0.0;
  Journey out;
  for (const auto& seg : journey.segments) {
    seg.modifier.validate();
    require(seg.duration_sec > 0.0, "journey segment durations must be positive");
    params.push_back(apply(profile, seg.modifier));
    starts.push_back(total);
    fades.push_back(std::min(kCrossfadeSec, seg.duration_sec));
    out.annotations.push_back({total, seg.modifier.label});
    total += seg.duration_sec;
  }
  require(total > 0.0, "journey duration must be positive");

  // Step cycles accumulated at each segment start.
  std::vector<double> cycles_at(params.size(), 0.0);
  auto cycles_in = [&](std::size_t j, double tau) {
    if (j == 0) return params[0].f0 * tau;
    const double prev = params[j - 1].f0;
    const double cur = params[j].f0;
    const double xf = fades[j];
    if (tau < xf) return cycles_at[j] + prev * tau + (cur - prev) * tau * tau / (2.0 * xf);
    return cycles_at[j] + prev * xf + (cur - prev) * xf / 2.0 + cur * (tau - xf);
  };
  for (std::size_t j = 1; j < params.size(); ++j) {
    cycles_at[j] = cycles_in(j - 1, journey.segments[j - 1].duration_sec);
  }

  const auto n = static_cast<std::size_t>(std::llround(total * fs));
  require(n >= 1, "journey shorter than one sample");
  Rng rng(seed);
  out.series.fs = fs;
  out.series.samples.resize(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    while (j + 1 < starts.size() && t >= starts[j + 1]) ++j;
    const double tau = t - starts[j];
    const Effective& eff =
        (j > 0 && tau < fades[j]) ? lerp(params[j - 1], params[j], tau / fades[j]) : params[j];
    const double cycles = cycles_in(j, tau);
    std::array<double, 3> v = profile.gravity;
    for (std::size_t k = 0; k < kHarmonics; ++k) {
      const double base = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * cycles;
      for (std::size_t a = 0; a < 3; ++a) {
        v[a] += eff.amp[k][a] * std::sin(base + profile.phase[k][a]);
      }
    }
    for (auto& c : v) c += eff.sigma * rng.normal();
    out.series.samples[i] = {t, v[0], v[1], v[2]};
  }
  return out;
}

JourneySpec three_shift_journey(double segment_sec, std::uint64_t seed) {
  require(segment_sec > 0.0, "segment duration must be positive");
  JourneySpec spec;
  spec.segments.push_back({baseline_modifier(), segment_sec});
  spec.segments.push_back({pace_modifier(0.3, 1.15, "brisk"), segment_sec});
  spec.segments.push_back({pace_modifier(-0.25, 1.3, "incline"), segment_sec});
  auto grass = compose(surface_modifier(seed, 0.3), pace_modifier(0.1, 0.85));
  grass.label = "grass_decline";
  spec.segments.push_back({grass, segment_sec});
  return spec;
}

JourneySpec baseline_journey(double duration_sec) {
  return JourneySpec{{{baseline_modifier(), duration_sec}}};
}

nlohmann::ordered_json annotations_to_json(const std::vector<SegmentAnnotation>& annotations) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& a : annotations) out.push_back({{"t_start", a.t_start}, {"label", a.label}});
  return out;
}

AccelSeries synth_session(const GaitProfile& profile, const ConditionModifier& modifier,
                          double duration_sec, double fs, std::uint64_t session_seed) {
  require(duration_sec >= 1.0, "session duration must be at least 1 s");
  JourneySpec spec{{{modifier, duration_sec}}};
  return synth_journey(profile, spec, fs, session_seed).series;
}

std::string user_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "user%03zu", index);
  return buf;
}

std::uint64_t session_seed_for(std::uint64_t user_seed, std::size_t condition,
                               std::size_t session) {
  return derive_seed(user_seed, 1 + condition * 1000 + session);
}

std::vector<SynthSession> synth_corpus(const DatasetOptions& opts) {
  require(opts.n_users >= 1, "dataset needs at least one user");
  require(opts.sessions_per_user >= 1, "dataset needs at least one session per user");
  require(!opts.conditions.empty(), "dataset needs at least one condition");
  std::vector<SynthSession> out;
  for (std::size_t u = 0; u < opts.n_users; ++u) {
    const std::uint64_t user_seed = opts.master_seed + u;
    const GaitProfile profile = generate_profile(user_seed);
    for (std::size_t c = 0; c < opts.conditions.size(); ++c) {
      const auto& cond = opts.conditions[c];
      const auto modifier =
          condition_modifier(profile, cond, opts.shoe_strength, opts.surface_strength);
      for (std::size_t s = 0; s < opts.sessions_per_user; ++s) {
        SynthSession sess;
        sess.meta.user_id = user_id_for(u);
        sess.meta.session_id = "c" + std::to_string(c) + "s" + std::to_string(s);
        sess.meta.shoe_id = cond.shoe_id();
        sess.meta.surface = cond.surface_id();
        sess.meta.fs = opts.fs;
        sess.meta.path = "sessions/" + sess.meta.user_id + "_" + sess.meta.session_id + ".csv";
        sess.series = synth_session(profile, modifier, opts.duration_sec, opts.fs,
                                    session_seed_for(user_seed, c, s));
        out.push_back(std::move(sess));
      }
    }
  }
  return out;
}

std::vector<ManifestEntry> generate_dataset(const DatasetOptions& opts,
                                            const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "sessions", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + (out_dir / "sessions").string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  // one session at a time keeps memory flat for long corpora
  for (std::size_t u = 0; u < opts.n_users; ++u) {
    DatasetOptions one = opts;
    one.n_users = 1;
    one.master_seed = opts.master_seed + u;
    for (auto& sess : synth_corpus(one)) {
      sess.meta.user_id = user_id_for(u);
      sess.meta.path = "sessions/" + sess.meta.user_id + "_" + sess.meta.session_id + ".csv";
      write_session_csv(sess.series, out_dir / sess.meta.path);
      manifest.push_back(sess.meta);
    }
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace gaitgate
