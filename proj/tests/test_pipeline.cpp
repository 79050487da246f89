#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gvt/harness.hpp"
#include "gvt/ops.hpp"
#include "gvt/pipeline.hpp"

using namespace gvt;

namespace {

Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(nn::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

std::vector<VideoClip> micro_clips(const RunConfig& cfg, std::size_t n, std::uint64_t seed = 0) {
  return synthetic_suite(n, cfg.model.frame_height, cfg.model.frame_width, cfg.model.frames(), seed);
}

}  // namespace

TEST_CASE("encoder shapes") {
  auto cfg = micro_config();
  cfg.model.time_steps = 5;
  nn::ParameterStore store;
  std::mt19937_64 rng(1);
  Encoder enc(store, cfg.model, rng);
  const auto out = enc(random_tensor({17, 32, 32, 3}, 2));
  CHECK(out.shape() == nn::Shape{5, 8, 8, cfg.model.encoder_width});
  CHECK(enc(random_tensor({1, 32, 32, 3}, 3)).shape() == nn::Shape{1, 8, 8, cfg.model.encoder_width});
  const auto again = enc(random_tensor({17, 32, 32, 3}, 2));
  CHECK(std::equal(out.data().begin(), out.data().end(), again.data().begin()));
  CHECK_THROWS_WITH_AS(enc(random_tensor({4, 32, 32, 3}, 2)), doctest::Contains("1 + 4n"), nn::NumericsError);
  CHECK_THROWS_AS(enc(random_tensor({5, 30, 32, 3}, 2)), nn::NumericsError);
}

TEST_CASE("decoder shapes, range and gradient") {
  auto cfg = micro_config();
  nn::ParameterStore store;
  std::mt19937_64 rng(1);
  Decoder dec(store, cfg.model, rng);
  const std::size_t c = cfg.model.coeff_dim();
  const auto init = random_tensor({2, 8, 8, c}, 4, -3, 3);
  Tensor tokens = Tensor::variable(init.shape(), {init.data().begin(), init.data().end()});
  Tensor out = dec(tokens);
  CHECK(out.shape() == nn::Shape{5, 32, 32, 3});
  for (double v : out.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  nn::backward(nn::sum(out));
  double g = 0.0;
  for (double v : tokens.grad()) g += std::abs(v);
  CHECK(g > 0.0);
  // Extreme inputs stay in range.
  Tensor big = random_tensor({1, 8, 8, c}, 5, -1e3, 1e3);
  Tensor big_out = dec(big);
  for (double v : big_out.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(dec(random_tensor({1, 8, 8, c + 1}, 5)), nn::NumericsError);
}

TEST_CASE("reconstruction loss") {
  const auto a = random_tensor({2, 4, 4, 3}, 1);
  CHECK(reconstruction_loss(a, a).item() == 0.0);
  const auto zeros = Tensor::constant({2, 4, 4, 3}, std::vector<double>(96, 0.0));
  const auto ones = Tensor::constant({2, 4, 4, 3}, std::vector<double>(96, 1.0));
  CHECK(reconstruction_loss(zeros, ones).item() == 1.0);
  const auto b = random_tensor({2, 4, 4, 3}, 2);
  double expect = 0.0;
  for (std::size_t i = 0; i < 96; ++i) expect += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]) / 96.0;
  CHECK(reconstruction_loss(a, b).item() == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("total loss") {
  auto s = [](double v) { return Tensor::scalar(v); };
  CHECK(total_loss(s(0), s(0), s(0), 0.1).item() == 0.0);
  CHECK(total_loss(s(0.5), s(0.02), s(0.1), 0.1).item() == doctest::Approx(0.53).epsilon(1e-15));

  // Gradient of the total is the sum of the part gradients.
  Tensor x = Tensor::variable({3}, {0.3, -0.2, 0.7});
  Tensor a = nn::sum(nn::square(x)), b = nn::sum(nn::exp(x)), c = nn::sum(nn::scale(x, 3.0));
  nn::backward(total_loss(a, b, c, 0.1));
  for (std::size_t i = 0; i < 3; ++i) {
    const double xi = x.data()[i];
    CHECK(x.grad()[i] == doctest::Approx(2 * xi + std::exp(xi) + 0.3).epsilon(1e-14));
  }
}

TEST_CASE("forward at init") {
  const auto cfg = micro_config();
  GvtModel model(cfg);
  const auto clips = micro_clips(cfg, 1);
  const auto r = model.forward(clips[0]);
  CHECK(r.recon.shape() == nn::Shape{cfg.model.frames(), 32, 32, 3});
  for (const Tensor* t : {&r.l_recon, &r.l_gsp, &r.l_commit, &r.total}) {
    CHECK(std::isfinite(t->item()));
    CHECK(t->item() >= 0.0);
  }
  CHECK(r.tokens == token_count(cfg.model.gaussians, cfg.model.time_steps, r.static_count));
  CHECK(r.codes.size() == r.tokens);
  CHECK(r.stored_coeff.shape() == nn::Shape{r.tokens, cfg.model.coeff_dim()});

  // Static rows are identical across time.
  const std::size_t k_dim = cfg.model.gaussians;
  const auto mu = r.gaussians.mu.data();
  for (std::size_t k = 0; k < k_dim; ++k) {
    if (r.mask.hard[k]) continue;
    for (std::size_t t = 1; t < cfg.model.time_steps; ++t) {
      CHECK(mu[2 * (t * k_dim + k)] == mu[2 * k]);
      CHECK(mu[2 * (t * k_dim + k) + 1] == mu[2 * k + 1]);
    }
  }
  CHECK_THROWS_AS(model.forward(VideoClip(3, 32, 32)), nn::NumericsError);
}

TEST_CASE("all-dynamic mask keeps every token") {
  auto cfg = micro_config();
  cfg.train.force_all_dynamic = true;
  GvtModel model(cfg);
  const auto r = model.forward(micro_clips(cfg, 1)[0]);
  CHECK(r.static_count == 0);
  CHECK(r.tokens == cfg.model.gaussians * cfg.model.time_steps);
  CHECK(r.l_gsp.item() == doctest::Approx(gsp_loss_value(1.0, {cfg.train.lambda1, cfg.train.lambda2, cfg.train.tau})));
}

TEST_CASE("training is deterministic") {
  const auto cfg = micro_config();
  const auto clips = micro_clips(cfg, 2);
  auto run = [&] {
    GvtModel model(cfg);
    std::ostringstream os;
    train(model, clips, 10, &os);
    return os.str();
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(a.rfind(kMetricsSchema, 0) == 0);
  std::size_t lines = 0;
  for (char ch : a) lines += ch == '\n';
  CHECK(lines == 12);
}

TEST_CASE("train step metrics") {
  const auto cfg = micro_config();
  const auto clips = micro_clips(cfg, 2);
  GvtModel model(cfg);
  const auto hist = train(model, clips, 3);
  REQUIRE(hist.size() == 3);
  for (const auto& m : hist) {
    CHECK(m.tokens == token_count(cfg.model.gaussians, cfg.model.time_steps, m.static_count));
    CHECK(std::isfinite(m.l_recon));
    CHECK(m.l_recon >= 0.0);
    CHECK(m.l_gsp >= 0.0);
    CHECK(m.l_commit >= 0.0);
    CHECK(m.mean_mask >= 0.0);
    CHECK(m.mean_mask <= 1.0);
  }
  CHECK(hist[2].step == 2);
}

TEST_CASE("training reduces the loss") {
  auto cfg = micro_config();
  cfg.train.lr = 3e-3;
  const auto clips = micro_clips(cfg, 1);
  GvtModel model(cfg);
  const auto hist = train(model, clips, 40);
  CHECK(hist.back().l_recon < hist.front().l_recon);
}

TEST_CASE("checkpoint round trip") {
  const auto cfg = micro_config();
  const auto clips = micro_clips(cfg, 1);
  GvtModel model(cfg);
  train(model, clips, 2);
  const auto path = (std::filesystem::temp_directory_path() / "gvt_test_ckpt.bin").string();
  save_checkpoint(path, model);
  auto loaded = load_checkpoint(path);
  CHECK(format_config(loaded->config()) == format_config(model.config()));
  CHECK(codebook_hash(loaded->codebook()) == codebook_hash(model.codebook()));
  const auto a = model.forward(clips[0]), b = loaded->forward(clips[0]);
  CHECK(a.total.item() == b.total.item());
  CHECK(a.codes == b.codes);
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("evaluate matches forward") {
  const auto cfg = micro_config();
  const auto clips = micro_clips(cfg, 2);
  GvtModel model(cfg);
  const auto e = evaluate(model, clips);
  double l = 0.0;
  for (const auto& c : clips) l += model.forward(c).l_recon.item() / 2.0;
  CHECK(e.l_recon == doctest::Approx(l).epsilon(1e-12));
}
