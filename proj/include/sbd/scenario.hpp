#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "sbd/companding.hpp"
#include "sbd/operators.hpp"
#include "sbd/priors.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// Radar fast-time scene (desk scale N = 1024; the full production-size cube
// is 32 x 256 x 1024 across channels / slow time / fast time).

struct InterferenceEvent {
  double chirp_rate = 0.0;  // normalized sweep rate, cycles per sample^2
  int start = 0;            // fast-time start sample
  int duration = 0;
  double amplitude = 1.0;
  double start_freq = 0.0;  // normalized cycles per sample
  double phase = 0.0;
  int freq_steps = 0;       // > 0 selects the stepped-frequency family
};

struct RadarScene {
  int n_fast_time = 1024;
  std::vector<std::pair<int, std::complex<double>>> targets;  // (range bin, amplitude)
  std::vector<InterferenceEvent> events;
  double noise_std = 1e-3;

  void validate() const;
};

struct RadarDraw {
  CVec x;  // sparse range-domain signal
  CVec n;  // fast-time interference
  CVec y;  // y = F^H x + n + eps
};

/// Synthesizes one fast-time snapshot per Box-2 style acquisition.
RadarDraw gen_radar(const RadarScene& scene, Rng& rng);

/// Random scene builder used by the experiments: targets at unique bins,
/// windowed up/down chirps (and occasional stepped-frequency events) covering
/// roughly `duty` of the fast-time window.
RadarScene make_random_radar_scene(int n_fast_time, int num_targets, int num_events, double duty,
                                   double interference_amplitude, double noise_std, Rng& rng);

/// Interference-only draws (stacked [Re; Im] vectors) for score training.
std::vector<Vec> make_interference_dataset(int n_fast_time, int count, int num_events, double duty,
                                           double amplitude, std::uint64_t seed);

// ---------------------------------------------------------------------------
// High-dynamic-range RF scene (ultrasound stand-in).

struct EchoEvent {
  int delay = 0;
  double amplitude = 1.0;  // event set spans >= 60 dB by construction
  double decay = 50.0;     // exponential decay constant in samples
  double phase = 0.0;
};

struct HdrRfScene {
  int m_samples = 2048;
  std::vector<EchoEvent> echoes;
  double carrier_freq = 0.1;   // cycles per sample
  double haze_cutoff = 0.03;   // normalized low-pass cutoff of the haze field
  double haze_amplitude = 0.2; // haze peak as a fraction of the signal peak
  double noise_std = 1e-3;

  void validate() const;
};

struct HdrDraw {
  Vec x_rf;  // normalized clean RF
  Vec n_rf;  // normalized haze
  Vec y;     // companded measurement
  double norm_scale = 1.0;
};

HdrDraw gen_hdr_rf(const HdrRfScene& scene, Rng& rng, const CompandingParams& companding);

HdrRfScene make_hdr_scene(int m_samples, int num_echoes, double dynamic_range_db, Rng& rng);

// ---------------------------------------------------------------------------
// GMM phantom for k-space experiments.

struct PhantomSpec {
  int side = 32;  // power of two
  std::shared_ptr<const GmmPrior> prior;
  double kspace_noise_std = 0.05;
  double tr_ms = 2500.0;  // per-line repetition time recorded in metadata

  void validate() const;
};

struct PhantomDraw {
  Vec image;
  CVec kspace;  // full unitary 2-D DFT of the image
  int component = -1;
};

PhantomDraw gen_phantom(const PhantomSpec& spec, Rng& rng);

/// Smooth blob-pattern mixture prior over side x side images.
std::shared_ptr<const GmmPrior> make_phantom_prior(int side, int num_components,
                                                   double component_std, std::uint64_t seed);

}  // namespace sbd
