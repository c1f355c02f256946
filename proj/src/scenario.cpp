#include "sbd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace sbd {

void RadarScene::validate() const {
  if (n_fast_time < 2) throw std::domain_error("RadarScene: n_fast_time too small");
  if (static_cast<int>(targets.size()) >= n_fast_time)
    throw std::domain_error("RadarScene: need fewer targets than samples");
  std::set<int> bins;
  for (const auto& [bin, amp] : targets) {
    (void)amp;
    if (bin < 0 || bin >= n_fast_time) throw std::domain_error("RadarScene: target bin out of range");
    if (!bins.insert(bin).second) throw std::domain_error("RadarScene: duplicate target bin");
  }
  for (const auto& e : events) {
    if (e.start < 0 || e.duration < 0 || e.start + e.duration > n_fast_time)
      throw std::domain_error("RadarScene: interference window does not fit");
  }
  if (noise_std < 0.0) throw std::domain_error("RadarScene: negative noise std");
}

RadarDraw gen_radar(const RadarScene& scene, Rng& rng) {
  scene.validate();
  const int n = scene.n_fast_time;
  RadarDraw draw;
  draw.x = CVec::Zero(n);
  for (const auto& [bin, amp] : scene.targets) draw.x[bin] = amp;

  draw.n = CVec::Zero(n);
  for (const auto& e : scene.events) {
    double phase = e.phase;
    double freq = e.start_freq;
    for (int k = 0; k < e.duration; ++k) {
      if (e.freq_steps > 0) {
        // stepped-frequency: the instantaneous frequency holds within a hop
        const int hop = k * e.freq_steps / std::max(1, e.duration);
        freq = e.start_freq + e.chirp_rate * (hop * e.duration / static_cast<double>(e.freq_steps));
      } else {
        freq = e.start_freq + e.chirp_rate * k;
      }
      phase += 2.0 * std::numbers::pi * freq;
      draw.n[e.start + k] += e.amplitude * std::exp(std::complex<double>(0.0, phase));
    }
  }

  draw.y = fft::idft(draw.x) + draw.n;
  if (scene.noise_std > 0.0) {
    const double per_comp = scene.noise_std / std::sqrt(2.0);
    const Vec re = gaussian_vec(n, rng);
    const Vec im = gaussian_vec(n, rng);
    for (int i = 0; i < n; ++i)
      draw.y[i] += std::complex<double>(per_comp * re[i], per_comp * im[i]);
  }
  return draw;
}

RadarScene make_random_radar_scene(int n_fast_time, int num_targets, int num_events, double duty,
                                   double interference_amplitude, double noise_std, Rng& rng) {
  RadarScene scene;
  scene.n_fast_time = n_fast_time;
  scene.noise_std = noise_std;

  std::uniform_int_distribution<int> bin_dist(0, n_fast_time - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::set<int> used;
  while (static_cast<int>(scene.targets.size()) < num_targets) {
    const int bin = bin_dist(rng);
    if (!used.insert(bin).second) continue;
    const double mag = 0.5 + 0.5 * unif(rng);
    const double ph = 2.0 * std::numbers::pi * unif(rng);
    scene.targets.emplace_back(bin, std::polar(mag, ph));
  }

  const int total_cover = static_cast<int>(duty * n_fast_time);
  const int per_event = std::max(8, total_cover / std::max(1, num_events));
  for (int e = 0; e < num_events; ++e) {
    InterferenceEvent ev;
    ev.duration = per_event;
    ev.start = static_cast<int>(unif(rng) * (n_fast_time - ev.duration));
    ev.amplitude = interference_amplitude * (0.7 + 0.6 * unif(rng));
    ev.start_freq = -0.25 + 0.5 * unif(rng);
    // up or down chirps; sweep stays inside the Nyquist band
    const double sweep = (0.15 + 0.3 * unif(rng)) * (unif(rng) < 0.5 ? -1.0 : 1.0);
    ev.chirp_rate = sweep / ev.duration;
    ev.phase = 2.0 * std::numbers::pi * unif(rng);
    if (unif(rng) < 0.25) ev.freq_steps = 4 + static_cast<int>(unif(rng) * 8);
    scene.events.push_back(ev);
  }
  return scene;
}

std::vector<Vec> make_interference_dataset(int n_fast_time, int count, int num_events, double duty,
                                           double amplitude, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(i));
    RadarScene scene =
        make_random_radar_scene(n_fast_time, 0, num_events, duty, amplitude, 0.0, rng);
    RadarDraw draw = gen_radar(scene, rng);
    out.push_back(stack_complex(draw.n));
  }
  return out;
}

// ---------------------------------------------------------------------------

void HdrRfScene::validate() const {
  if (m_samples < 2) throw std::domain_error("HdrRfScene: m_samples too small");
  for (const auto& e : echoes) {
    if (e.delay < 0 || e.delay >= m_samples) throw std::domain_error("HdrRfScene: delay out of range");
    if (e.amplitude <= 0.0) throw std::domain_error("HdrRfScene: amplitudes must be positive");
  }
}

HdrDraw gen_hdr_rf(const HdrRfScene& scene, Rng& rng, const CompandingParams& companding) {
  scene.validate();
  const int m = scene.m_samples;
  HdrDraw draw;
  draw.x_rf = Vec::Zero(m);
  for (const auto& e : scene.echoes) {
    for (int t = e.delay; t < m; ++t) {
      const double dt = static_cast<double>(t - e.delay);
      const double env = e.amplitude * std::exp(-dt / e.decay);
      if (env < e.amplitude * 1e-8) break;
      draw.x_rf[t] += env * std::sin(2.0 * std::numbers::pi * scene.carrier_freq * dt + e.phase);
    }
  }

  // band-limited haze: white field low-passed in the Fourier domain
  {
    int pow2 = 1;
    while (pow2 < m) pow2 <<= 1;
    CVec field(pow2);
    const Vec re = gaussian_vec(pow2, rng);
    const Vec im = gaussian_vec(pow2, rng);
    for (int i = 0; i < pow2; ++i) field[i] = {re[i], im[i]};
    CVec spec = fft::dft(std::move(field));
    const int cutoff = std::max(1, static_cast<int>(scene.haze_cutoff * pow2));
    for (int i = 0; i < pow2; ++i) {
      const int dist = std::min(i, pow2 - i);  // distance from DC
      if (dist > cutoff) spec[i] = 0.0;
    }
    const CVec smooth = fft::idft(std::move(spec));
    draw.n_rf = smooth.real().head(m);
    const double peak = draw.x_rf.cwiseAbs().maxCoeff();
    const double haze_peak = draw.n_rf.cwiseAbs().maxCoeff();
    if (haze_peak > 0.0) draw.n_rf *= scene.haze_amplitude * peak / haze_peak;
  }

  draw.norm_scale = (draw.x_rf + draw.n_rf).cwiseAbs().maxCoeff();
  if (draw.norm_scale == 0.0) draw.norm_scale = 1.0;
  draw.x_rf /= draw.norm_scale;
  draw.n_rf /= draw.norm_scale;

  draw.y = companding.compand(draw.x_rf + draw.n_rf);
  if (scene.noise_std > 0.0) draw.y += scene.noise_std * gaussian_vec(m, rng);
  return draw;
}

HdrRfScene make_hdr_scene(int m_samples, int num_echoes, double dynamic_range_db, Rng& rng) {
  HdrRfScene scene;
  scene.m_samples = m_samples;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < num_echoes; ++k) {
    EchoEvent e;
    e.delay = static_cast<int>(unif(rng) * (m_samples - 64));
    // log-uniform amplitudes covering the requested dynamic range
    e.amplitude = std::pow(10.0, -dynamic_range_db / 20.0 * unif(rng));
    e.decay = 8.0 + 24.0 * unif(rng);
    e.phase = 2.0 * std::numbers::pi * unif(rng);
    scene.echoes.push_back(e);
  }
  return scene;
}

// ---------------------------------------------------------------------------

void PhantomSpec::validate() const {
  if (side < 2 || (side & (side - 1)) != 0)
    throw std::domain_error("PhantomSpec: side must be a power of two");
  if (!prior) throw std::domain_error("PhantomSpec: missing prior");
  if (prior->dim() != side * side) throw std::domain_error("PhantomSpec: prior dimension mismatch");
}

PhantomDraw gen_phantom(const PhantomSpec& spec, Rng& rng) {
  spec.validate();
  PhantomDraw draw;
  draw.component = spec.prior->sample_component(rng);
  const Vec z = gaussian_vec(spec.prior->dim(), rng);
  draw.image = spec.prior->means()[draw.component] +
               (spec.prior->diag_covariances()[draw.component].array().sqrt() * z.array()).matrix();
  CVec img(spec.prior->dim());
  img.real() = draw.image;
  img.imag().setZero();
  draw.kspace = fft::dft2(std::move(img), spec.side, spec.side);
  return draw;
}

std::shared_ptr<const GmmPrior> make_phantom_prior(int side, int num_components,
                                                   double component_std, std::uint64_t seed) {
  const int dim = side * side;
  Rng rng = make_stream(seed, 0xB10B);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> means;
  std::vector<Vec> covs;
  for (int k = 0; k < num_components; ++k) {
    Vec mean = Vec::Zero(dim);
    const int blobs = 2 + (k % 2);
    for (int b = 0; b < blobs; ++b) {
      const double cx = 4.0 + unif(rng) * (side - 8);
      const double cy = 4.0 + unif(rng) * (side - 8);
      const double width = side / 8.0 + unif(rng) * side / 8.0;
      const double amp = 0.6 + 0.8 * unif(rng);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
          const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
          mean[r * side + c] += amp * std::exp(-d2 / (2.0 * width));
        }
    }
    means.push_back(std::move(mean));
    covs.push_back(Vec::Constant(dim, component_std * component_std));
  }
  Vec weights(num_components);
  for (int k = 0; k < num_components; ++k) weights[k] = 1.0 + 0.5 * unif(rng);
  weights /= weights.sum();
  return std::make_shared<GmmPrior>(weights, means, covs);
}

}  // namespace sbd
