#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sbd/dataset.hpp"
#include "sbd/metrics.hpp"
#include "sbd/scenario.hpp"

using namespace sbd;

TEST_CASE("gen_radar: unitary inversion recovers the support exactly") {
  RadarScene scene;
  scene.n_fast_time = 256;
  scene.targets = {{10, {1.0, 0.3}}, {100, {0.0, -0.8}}, {200, {0.5, 0.5}}};
  scene.noise_std = 0.0;
  Rng rng = make_stream(60, 0);
  const RadarDraw draw = gen_radar(scene, rng);
  const CVec range = fft::dft(draw.y);  // no interference events configured
  for (int i = 0; i < 256; ++i) {
    const bool target = i == 10 || i == 100 || i == 200;
    if (target)
      CHECK(std::abs(range[i] - draw.x[i]) < 1e-10);
    else
      CHECK(std::abs(range[i]) < 1e-10);
  }
}

TEST_CASE("gen_radar: 50% duty interference raises the range-domain floor") {
  Rng rng = make_stream(60, 1);
  RadarScene clean = make_random_radar_scene(512, 3, 0, 0.0, 0.0, 1e-3, rng);
  RadarScene dirty = clean;
  Rng rng2 = make_stream(60, 2);
  const RadarScene with_intf = make_random_radar_scene(512, 0, 3, 0.5, 0.8, 0.0, rng2);
  dirty.events = with_intf.events;

  std::vector<int> bins;
  for (const auto& [bin, amp] : clean.targets) {
    (void)amp;
    bins.push_back(bin);
  }
  Rng ra = make_stream(60, 3), rb = make_stream(60, 3);
  const double floor_clean = noise_floor_db(fft::dft(gen_radar(clean, ra).y), bins);
  const double floor_dirty = noise_floor_db(fft::dft(gen_radar(dirty, rb).y), bins);
  CHECK(floor_dirty > floor_clean + 10.0);
}

TEST_CASE("gen_radar: measurement identity y - F^H x - n = eps with the right std") {
  Rng rng = make_stream(60, 4);
  RadarScene scene = make_random_radar_scene(1024, 3, 3, 0.5, 0.8, 0.25, rng);
  double acc = 0.0;
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    const RadarDraw draw = gen_radar(scene, rng);
    const CVec eps = draw.y - fft::idft(draw.x) - draw.n;
    acc += eps.squaredNorm();
  }
  const double est = std::sqrt(acc / (draws * 1024.0));
  CHECK(std::abs(est - 0.25) / 0.25 < 0.02);
}

TEST_CASE("gen_radar: full reference cube shape is documented at desk scale") {
  // desk scale runs one fast-time vector of the production 32 x 256 x 1024 cube
  RadarScene scene;
  scene.n_fast_time = 1024;
  scene.validate();
  CHECK(scene.n_fast_time == 1024);
}

TEST_CASE("gen_radar: deterministic given (scene, seed)") {
  Rng rng = make_stream(60, 5);
  const RadarScene scene = make_random_radar_scene(256, 2, 2, 0.4, 0.7, 0.1, rng);
  Rng a = make_stream(61, 9), b = make_stream(61, 9);
  const RadarDraw da = gen_radar(scene, a);
  const RadarDraw db = gen_radar(scene, b);
  CHECK((da.y - db.y).norm() == 0.0);
  CHECK((da.n - db.n).norm() == 0.0);
}

TEST_CASE("gen_hdr_rf: dynamic range, kurtosis reduction, zero echoes") {
  Rng rng = make_stream(60, 6);
  HdrRfScene scene = make_hdr_scene(2048, 12, 60.0, rng);
  scene.noise_std = 0.0;
  const CompandingParams comp(255.0);
  Rng draw_rng = make_stream(60, 7);
  const HdrDraw draw = gen_hdr_rf(scene, draw_rng, comp);

  // 99.9th / 50th percentile amplitude ratio of the clean RF exceeds 100
  std::vector<double> mags;
  for (int i = 0; i < draw.x_rf.size(); ++i) mags.push_back(std::abs(draw.x_rf[i]));
  std::sort(mags.begin(), mags.end());
  const double p999 = mags[static_cast<size_t>(0.999 * (mags.size() - 1))];
  const double p50 = mags[mags.size() / 2];
  CHECK(p999 / std::max(p50, 1e-12) > 100.0);

  // companded signal has lower kurtosis than the raw sum
  const Vec raw = draw.x_rf + draw.n_rf;
  auto kurtosis = [](const Vec& v) {
    const double mean = v.mean();
    double m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < v.size(); ++i) {
      const double d = v[i] - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    m2 /= v.size();
    m4 /= v.size();
    return m4 / (m2 * m2);
  };
  CHECK(kurtosis(draw.y) < kurtosis(raw));

  // the companded amplitude spread shrinks (cf. the HDR histogram story)
  std::vector<double> cmags;
  for (int i = 0; i < draw.y.size(); ++i) cmags.push_back(std::abs(draw.y[i]));
  std::sort(cmags.begin(), cmags.end());
  const double c999 = cmags[static_cast<size_t>(0.999 * (cmags.size() - 1))];
  const double c50 = cmags[cmags.size() / 2];
  CHECK(c999 / std::max(c50, 1e-12) < p999 / std::max(p50, 1e-12));

  HdrRfScene empty = scene;
  empty.echoes.clear();
  Rng r2 = make_stream(60, 8);
  CHECK(gen_hdr_rf(empty, r2, comp).x_rf.norm() == 0.0);
}

TEST_CASE("gen_phantom: DFT round trip and responsibility match") {
  const auto prior = make_phantom_prior(16, 3, 0.15, 3);
  PhantomSpec spec;
  spec.side = 16;
  spec.prior = prior;
  Rng rng = make_stream(60, 9);
  const PhantomDraw draw = gen_phantom(spec, rng);
  CVec img = fft::idft2(draw.kspace, 16, 16);
  CHECK((img.real() - draw.image).norm() < 1e-10);
  CHECK(img.imag().norm() < 1e-10);

  // empirical mixture responsibilities over many draws match the weights
  const NoiseSchedule vp = NoiseSchedule::variance_preserving();
  Vec resp_acc = Vec::Zero(prior->num_components());
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const PhantomDraw d = gen_phantom(spec, rng);
    resp_acc += prior->responsibilities(d.image, 0.0, vp);
  }
  resp_acc /= draws;
  for (int i = 0; i < prior->num_components(); ++i)
    CHECK(std::abs(resp_acc[i] - prior->weights()[i]) < 0.03);
}

TEST_CASE("gen_phantom: side must be a power of two") {
  PhantomSpec spec;
  spec.side = 12;
  spec.prior = make_phantom_prior(16, 2, 0.1, 1);
  CHECK_THROWS_AS(spec.validate(), std::domain_error);
}

TEST_CASE("phantom metadata records the acquisition repetition time") {
  PhantomSpec spec;
  CHECK(spec.tr_ms == doctest::Approx(2500.0));
  CHECK(spec.tr_ms >= 2200.0);
  CHECK(spec.tr_ms <= 3000.0);
}

TEST_CASE("dataset: round trip is bitwise, sidecar carries the split label") {
  const std::string path = (std::filesystem::temp_directory_path() / "sbds_test.bin").string();
  Rng rng = make_stream(60, 10);
  std::vector<DatasetRecord> records;
  records.push_back(DatasetRecord::real("signal", gaussian_vec(37, rng)));
  CVec z(9);
  z.real() = gaussian_vec(9, rng);
  z.imag() = gaussian_vec(9, rng);
  records.push_back(DatasetRecord::complex("spectrum", z));
  save_dataset(path, records, {{"split", "train"}, {"seed", "7"}});

  const auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "signal");
  CHECK((loaded[0].data - records[0].data).norm() == 0.0);
  CHECK((loaded[1].as_complex() - z).norm() == 0.0);
  CHECK(load_sidecar(path).at("split") == "train");
  CHECK_NOTHROW((void)load_dataset_checked(path, "train"));
  CHECK_THROWS_AS((void)load_dataset_checked(path, "eval"), FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".meta");
}

TEST_CASE("dataset: corrupted magic and truncation are detected") {
  const std::string path = (std::filesystem::temp_directory_path() / "sbds_bad.bin").string();
  Rng rng = make_stream(60, 11);
  save_dataset(path, {DatasetRecord::real("x", gaussian_vec(16, rng))});
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f << "ZZZZ";
  }
  CHECK_THROWS_AS((void)load_dataset(path), FormatError);
  save_dataset(path, {DatasetRecord::real("x", gaussian_vec(16, rng))});
  std::filesystem::resize_file(path, 40);  // cut inside the payload
  try {
    (void)load_dataset(path);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset: 10^4-record file round-trips with identical content hash") {
  const std::string path = (std::filesystem::temp_directory_path() / "sbds_big.bin").string();
  Rng rng = make_stream(60, 12);
  std::vector<DatasetRecord> records;
  records.reserve(10000);
  for (int i = 0; i < 10000; ++i)
    records.push_back(DatasetRecord::real("r" + std::to_string(i), gaussian_vec(8, rng)));
  save_dataset(path, records);
  const auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == records.size());
  // FNV-1a over the raw doubles of every record
  auto hash_all = [](const std::vector<DatasetRecord>& rs) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& r : rs)
      for (Eigen::Index i = 0; i < r.data.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &r.data[i], 8);
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xFF;
          h *= 1099511628211ULL;
        }
      }
    return h;
  };
  CHECK(hash_all(loaded) == hash_all(records));
  std::filesystem::remove(path);
}

TEST_CASE("interference dataset: train/eval seeds produce disjoint draws") {
  const auto train = make_interference_dataset(64, 8, 2, 0.4, 0.8, 100);
  const auto eval = make_interference_dataset(64, 8, 2, 0.4, 0.8, 200);
  for (const Vec& a : train)
    for (const Vec& b : eval) CHECK((a - b).norm() > 1e-9);
}
