#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sbd/score_net.hpp"

using namespace sbd;

namespace {
const NoiseSchedule kVp = NoiseSchedule::variance_preserving();

ScoreNet tiny_net(int signal_dim = 2) {
  ScoreNet::Config cfg;
  cfg.hidden_widths = {3};
  cfg.time_embed_dim = 2;
  return ScoreNet(signal_dim, cfg, 77);
}
}  // namespace

TEST_CASE("score_net_eval: purity (bitwise identical outputs)") {
  ScoreNet net = tiny_net();
  Rng rng = make_stream(30, 0);
  const Vec x = gaussian_vec(2, rng);
  const Vec a = net.score(x, 0.4, kVp);
  const Vec b = net.score(x, 0.4, kVp);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("score_net_eval: width mismatch and tau=0 are domain errors") {
  ScoreNet net = tiny_net();
  Rng rng = make_stream(30, 1);
  CHECK_THROWS_AS((void)net.forward(gaussian_vec(3, rng), 0.2), std::domain_error);
  CHECK_THROWS_AS((void)net.score(gaussian_vec(2, rng), 0.0, kVp), std::domain_error);
}

TEST_CASE("dsm gradient matches central finite differences on a small net") {
  ScoreNet net = tiny_net();  // 4*3+3 + 3*2+2 = 23 parameters
  Rng rng = make_stream(30, 2);
  std::vector<Vec> x0{gaussian_vec(2, rng), gaussian_vec(2, rng), gaussian_vec(2, rng)};
  std::vector<double> taus{0.15, 0.5, 0.85};
  std::vector<Vec> zs{gaussian_vec(2, rng), gaussian_vec(2, rng), gaussian_vec(2, rng)};
  Vec grad;
  net.dsm_loss_and_grad(x0, taus, zs, kVp, &grad);
  const Vec theta = net.flatten_params();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
    Vec tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    net.set_params(tp);
    const double lp = net.dsm_loss_and_grad(x0, taus, zs, kVp, nullptr);
    net.set_params(tm);
    const double lm = net.dsm_loss_and_grad(x0, taus, zs, kVp, nullptr);
    net.set_params(theta);
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("weighted dsm loss scales per-sample contributions") {
  ScoreNet net = tiny_net();
  Rng rng = make_stream(30, 6);
  std::vector<Vec> x0{gaussian_vec(2, rng), gaussian_vec(2, rng)};
  std::vector<double> taus{0.3, 0.7};
  std::vector<Vec> zs{gaussian_vec(2, rng), gaussian_vec(2, rng)};
  const double l_uniform = net.dsm_loss_and_grad(x0, taus, zs, kVp, nullptr);
  const double l_weighted = net.dsm_loss_and_grad(x0, taus, zs, kVp, nullptr, {2.0, 0.0});
  std::vector<Vec> first{x0[0]};
  const double l_first = net.dsm_loss_and_grad(first, {taus[0]}, {zs[0]}, kVp, nullptr);
  CHECK(l_weighted == doctest::Approx(l_first).epsilon(1e-12));
  CHECK(l_uniform > 0.0);
}

TEST_CASE("input_vjp matches finite differences of the raw output") {
  ScoreNet net = tiny_net(3);
  Rng rng = make_stream(30, 3);
  const Vec x = gaussian_vec(3, rng);
  const Vec u = gaussian_vec(3, rng);
  auto f = [&](const Vec& xx) { return u.dot(net.forward(xx, 0.45)); };
  const Vec fd = oracle::fd_gradient(f, x, 1e-6);
  const Vec vjp = net.input_vjp(x, 0.45, u);
  CHECK((fd - vjp).norm() < 1e-6 * std::max(1.0, fd.norm()));
}

TEST_CASE("dsm_train: zero steps is a no-op; empty dataset rejected") {
  ScoreNet net = tiny_net();
  const Vec before = net.flatten_params();
  ScoreNet::TrainConfig tc;
  tc.steps = 0;
  Rng rng = make_stream(30, 4);
  std::vector<Vec> data{gaussian_vec(2, rng)};
  dsm_train(net, data, kVp, tc);
  CHECK((net.flatten_params() - before).norm() == 0.0);
  CHECK(net.train_step_count() == 0);
  std::vector<Vec> empty;
  CHECK_THROWS_AS(dsm_train(net, empty, kVp, tc), std::domain_error);
}

TEST_CASE("dsm_train: frozen-batch loss decreases over the budget and is seeded") {
  ScoreNet::Config cfg;
  cfg.hidden_widths = {32, 32};
  cfg.time_embed_dim = 16;
  Rng rng = make_stream(30, 5);
  std::vector<Vec> data;
  for (int i = 0; i < 512; ++i) data.push_back(Vec::Constant(1, (i % 2 ? 1.5 : -1.5)));

  // frozen validation batch
  std::vector<Vec> vx;
  std::vector<double> vt;
  std::vector<Vec> vz;
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int i = 0; i < 256; ++i) {
    vx.push_back(data[i % data.size()]);
    vt.push_back(unif(rng));
    vz.push_back(gaussian_vec(1, rng));
  }

  ScoreNet net_a(1, cfg, 5);
  const double loss0 = net_a.dsm_loss_and_grad(vx, vt, vz, kVp, nullptr);
  ScoreNet::TrainConfig tc;
  tc.steps = 400;
  tc.batch_size = 64;
  tc.learning_rate = 5e-3;
  tc.seed = 17;
  dsm_train(net_a, data, kVp, tc);
  const double loss1 = net_a.dsm_loss_and_grad(vx, vt, vz, kVp, nullptr);
  CHECK(loss1 < loss0);
  CHECK(net_a.train_step_count() == 400);
  CHECK(net_a.loss_history().size() == 400);

  ScoreNet net_b(1, cfg, 5);
  dsm_train(net_b, data, kVp, tc);
  CHECK((net_a.flatten_params() - net_b.flatten_params()).norm() == 0.0);  // deterministic
}

TEST_CASE("serialization round trip is exact; corrupt magic rejected") {
  ScoreNet net = tiny_net();
  const std::string path = (std::filesystem::temp_directory_path() / "sbsn_test.bin").string();
  net.save(path);
  const ScoreNet loaded = ScoreNet::load(path);
  CHECK(loaded.signal_dim() == net.signal_dim());
  CHECK(loaded.time_embed_dim() == net.time_embed_dim());
  CHECK((loaded.flatten_params() - net.flatten_params()).norm() == 0.0);
  Rng rng = make_stream(30, 7);
  const Vec x = gaussian_vec(2, rng);
  CHECK((loaded.forward(x, 0.33) - net.forward(x, 0.33)).norm() == 0.0);

  {
    std::ofstream f(path, std::ios::binary);
    f << "XXXX";
  }
  CHECK_THROWS_AS((void)ScoreNet::load(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("ScoreNetPrior: guidance Jacobian flows through the network") {
  ScoreNet net = tiny_net(4);
  ScoreNetPrior prior(net);
  Rng rng = make_stream(30, 8);
  const Vec x = gaussian_vec(4, rng);
  const Vec u = gaussian_vec(4, rng);
  const double tau = 0.5;
  auto f = [&](const Vec& xx) { return u.dot(prior.denoise(xx, tau, kVp)); };
  const Vec fd = oracle::fd_gradient(f, x, 1e-6);
  const Vec vjp = prior.denoise_vjp(x, tau, kVp, u);
  CHECK((fd - vjp).norm() < 1e-5 * std::max(1.0, fd.norm()));
}
