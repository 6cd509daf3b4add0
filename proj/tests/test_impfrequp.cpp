#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "hfur/codec_sim.hpp"
#include "hfur/impfrequp.hpp"
#include "hfur/net.hpp"
#include "testutil.hpp"

using namespace hfur;

namespace {

ImpFreqUpParams make_params(std::int64_t c, std::int64_t factor, std::int64_t n1, std::int64_t n2,
                            std::uint64_t seed) {
  hfur::detail::InitRng rng(seed);
  return hfur::detail::impfrequp_init(c, factor, n1, n2, QamPlacement::kAfterIdct, rng);
}

PriorPair flat_priors(int qp) {
  return {make_quant_prior(qp, ChannelKind::kLuma), make_quant_prior(qp, ChannelKind::kChroma)};
}

}  // namespace

TEST(TfBlock, ZeroOutputProjectionsGiveIdentity) {
  hfur::detail::InitRng ir(3);
  TfBlockParams p = hfur::detail::tfblock_init(8, ir);  // wo and mlp_w2 zero at init
  std::mt19937_64 rng(4);
  Tensor x = gradcheck::random_tensor({1, 8, 4, 4}, rng, false);
  Tensor y = tfblock_forward(x, p);
  EXPECT_EQ(y.data(), x.data());
}

TEST(TfBlock, ShapePreserved) {
  hfur::detail::InitRng ir(5);
  TfBlockParams p = hfur::detail::tfblock_init(6, ir);
  std::mt19937_64 rng(6);
  Tensor x = gradcheck::random_tensor({2, 6, 4, 6}, rng, false);
  EXPECT_EQ(tfblock_forward(x, p).shape(), x.shape());
}

TEST(TfBlock, GradientThroughTwoStackedBlocks) {
  hfur::detail::InitRng ir(7);
  TfBlockParams p1 = hfur::detail::tfblock_init(4, ir);
  TfBlockParams p2 = hfur::detail::tfblock_init(4, ir);
  std::vector<Tensor> params;
  testutil::collect(p1, params);
  testutil::collect(p2, params);
  std::mt19937_64 rng(8);
  testutil::randomize(params, rng);

  std::vector<Tensor> inputs = params;
  inputs.push_back(gradcheck::random_tensor({1, 4, 4, 4}, rng, true));
  auto fn = [&](const std::vector<Tensor>& in) {
    return tfblock_forward(tfblock_forward(in.back(), p1), p2);
  };
  EXPECT_LT(gradcheck::max_rel_error(fn, inputs, rng), 1e-4);
}

TEST(EstimateDelta, BoundedBelowHalf) {
  std::mt19937_64 rng(9);
  Tensor x = gradcheck::random_tensor({1, 4, 8, 8}, rng, false, -1.0, 1.0);
  Tensor w = gradcheck::random_tensor({1, 4, 3, 3}, rng, false, -0.3, 0.3);
  Tensor b = gradcheck::random_tensor({1}, rng, false);
  Tensor d = estimate_delta(x, w, b);
  ASSERT_EQ(d.shape(), (Shape{1, 64, 1, 1}));
  for (double v : d.data()) EXPECT_LT(std::abs(v), 0.5);

  // tanh saturates to exactly 1.0 in doubles for huge pre-activations; even
  // then the estimate never escapes the closed interval.
  Tensor xe = gradcheck::random_tensor({1, 4, 8, 8}, rng, false, -20.0, 20.0);
  Tensor we = gradcheck::random_tensor({1, 4, 3, 3}, rng, false, -5.0, 5.0);
  Tensor de = estimate_delta(xe, we, b);
  for (double v : de.data()) EXPECT_LE(std::abs(v), 0.5);
}

TEST(EstimateDelta, ZeroWeightsGiveZero) {
  Tensor x = Tensor::full({1, 4, 8, 8}, 3.0);
  Tensor d = estimate_delta(x, Tensor::zeros({1, 4, 3, 3}), Tensor::zeros({1}));
  for (double v : d.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(EstimateDelta, UnitPreActivation) {
  // Zero weights with bias 1 make every pre-activation exactly 1.
  Tensor x = Tensor::full({1, 4, 8, 8}, 0.7);
  Tensor d = estimate_delta(x, Tensor::zeros({1, 4, 3, 3}), Tensor::full({1}, 1.0));
  for (double v : d.data()) EXPECT_NEAR(v, 0.5 * std::tanh(1.0), 1e-12);
  EXPECT_NEAR(d.data()[0], 0.380797, 1e-6);
}

TEST(EstimateDelta, RejectsUnalignedDims) {
  Tensor x = Tensor::zeros({1, 4, 12, 8});
  EXPECT_THROW(estimate_delta(x, Tensor::zeros({1, 4, 3, 3}), Tensor::zeros({1})), ShapeError);
}

TEST(QamIrm, ZeroDeltaZeroShiftGivesZero) {
  for (std::int64_t factor : {1, 2}) {
    const std::int64_t alen = factor == 1 ? 64 : 256;
    LearnableAffine affine{Tensor::full({alen}, 1.0), Tensor::zeros({alen})};
    Tensor irm = make_irm_weight(make_fractional_idct(8, factor));
    Tensor delta = Tensor::zeros({1, 64, 2, 2});
    Tensor y = qam_irm_apply(delta, make_quant_prior(37, ChannelKind::kLuma), affine, irm, factor);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.0);
  }
}

// End-to-end pixel-loss oracle: feed the simulator's own delta through the
// x1 QAM/IRM chain with the quantization step absorbed into alpha; the result
// must equal the simulator's pre-clamp pixel loss.
TEST(QamIrm, ReconstructsSimulatorPixelLoss) {
  auto frames = synth_clip(SynthKind::kNoiseTexture, 1, 32, 32, 21);
  const int qp = 37;
  auto pr = flat_priors(qp);
  DegradedClip clip = degrade(frames, qp, pr.luma, pr.chroma);

  const BlockArray& delta = clip.delta[0][0];
  Tensor d = Tensor::zeros({1, 64, delta.bh, delta.bw});
  for (std::int64_t by = 0; by < delta.bh; ++by)
    for (std::int64_t bx = 0; bx < delta.bw; ++bx)
      for (int k = 0; k < 64; ++k)
        d.data()[(k * delta.bh + by) * delta.bw + bx] = delta.at(by, bx)[static_cast<std::size_t>(k)];

  // Flat table entry is 16; the effective step is qp_step/255, so alpha
  // absorbs step/16 together with the 8-bit amplitude scale.
  const double alpha = qp_step(qp) / 16.0 / 255.0;
  LearnableAffine affine{Tensor::full({64}, alpha), Tensor::zeros({64})};
  Tensor irm = make_irm_weight(make_fractional_idct(8, 1));
  Tensor y = qam_irm_apply(d, pr.luma, affine, irm, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 32, 32}));

  const Plane& src = clip.source[0].planes[0];
  const Plane& pre = clip.degraded_preclamp[0].planes[0];
  double worst = 0.0;
  for (std::int64_t r = 0; r < 32; ++r)
    for (std::int64_t c = 0; c < 32; ++c)
      worst = std::max(worst, std::abs(y.data()[r * 32 + c] - (src.at(r, c) - pre.at(r, c))));
  EXPECT_LT(worst, 1e-10);
}

TEST(QamIrm, PureDcTimesFlatTable) {
  const double dval = 0.31;
  Tensor delta = Tensor::zeros({1, 64, 1, 1});
  delta.data()[0] = dval;  // channel (0,0)
  LearnableAffine affine{Tensor::full({256}, 1.0), Tensor::zeros({256})};
  Tensor irm = make_irm_weight(make_fractional_idct(8, 2));
  Tensor y = qam_irm_apply(delta, flat_priors(37).luma, affine, irm, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 16, 16}));
  for (double v : y.data()) EXPECT_NEAR(v, 2.0 * dval, 1e-12);  // d * 16 * (1/8)
}

TEST(QamIrm, LinearInDeltaWithZeroShift) {
  std::mt19937_64 rng(33);
  Tensor d = gradcheck::random_tensor({1, 64, 2, 2}, rng, false, -0.5, 0.5);
  Tensor d3 = mul_scalar(d, 3.0);
  LearnableAffine affine{gradcheck::random_tensor({64}, rng, false, 0.5, 1.5), Tensor::zeros({64})};
  Tensor irm = make_irm_weight(make_fractional_idct(8, 1));
  auto pr = flat_priors(27);
  Tensor y1 = qam_irm_apply(d, pr.luma, affine, irm, 1);
  Tensor y3 = qam_irm_apply(d3, pr.luma, affine, irm, 1);
  for (std::size_t i = 0; i < y1.data().size(); ++i)
    EXPECT_NEAR(y3.data()[i], 3.0 * y1.data()[i], 1e-12);
}

TEST(QamIrm, PlacementsAgreeOnFlatTableOnly) {
  std::mt19937_64 rng(35);
  Tensor d = gradcheck::random_tensor({1, 64, 2, 2}, rng, false, -0.5, 0.5);
  LearnableAffine affine{Tensor::full({256}, 1.0), Tensor::zeros({256})};
  Tensor irm = make_irm_weight(make_fractional_idct(8, 2));

  auto pr = flat_priors(37);
  Tensor after = qam_irm_apply(d, pr.luma, affine, irm, 2, QamPlacement::kAfterIdct);
  Tensor before = qam_irm_apply(d, pr.luma, affine, irm, 2, QamPlacement::kBeforeIdct);
  for (std::size_t i = 0; i < after.data().size(); ++i)
    EXPECT_NEAR(after.data()[i], before.data()[i], 1e-12);

  // A non-flat table does not commute with the transform.
  auto dir = std::filesystem::temp_directory_path() / "hfur_qam_placement";
  std::filesystem::create_directories(dir);
  std::array<double, 64> t;
  for (int i = 0; i < 64; ++i) t[static_cast<std::size_t>(i)] = 8.0 + i;
  save_quant_table((dir / "t.txt").string(), t);
  QuantizationPrior ramp = make_quant_prior(37, ChannelKind::kLuma, (dir / "t.txt").string());
  Tensor a2 = qam_irm_apply(d, ramp, affine, irm, 2, QamPlacement::kAfterIdct);
  Tensor b2 = qam_irm_apply(d, ramp, affine, irm, 2, QamPlacement::kBeforeIdct);
  double diff = 0.0;
  for (std::size_t i = 0; i < a2.data().size(); ++i)
    diff = std::max(diff, std::abs(a2.data()[i] - b2.data()[i]));
  EXPECT_GT(diff, 1e-6);
  std::filesystem::remove_all(dir);
}

TEST(QamIrm, FactorAffineMismatchRejected) {
  LearnableAffine affine{Tensor::full({64}, 1.0), Tensor::zeros({64})};
  Tensor irm = make_irm_weight(make_fractional_idct(8, 2));
  Tensor delta = Tensor::zeros({1, 64, 1, 1});
  EXPECT_THROW(qam_irm_apply(delta, flat_priors(27).luma, affine, irm, 2), ConfigError);
}

TEST(ImpFreqUp, OutputShapes) {
  auto pr = flat_priors(37);
  std::mt19937_64 rng(41);
  for (std::int64_t factor : {1, 2}) {
    ImpFreqUpParams p = make_params(8, factor, 1, 1, 50 + static_cast<std::uint64_t>(factor));
    Tensor x = gradcheck::random_tensor({2, 8, 8, 16}, rng, false);
    Tensor y = impfrequp_forward(x, p, pr);
    EXPECT_EQ(y.shape(), (Shape{2, 8, factor * 8, factor * 16}));
  }
}

TEST(ImpFreqUp, ZeroParamsGiveZeroOutput) {
  auto pr = flat_priors(37);
  ImpFreqUpParams p = make_params(8, 2, 1, 1, 60);
  std::vector<Tensor> params;
  testutil::collect(p, params);
  testutil::zero_all(params);
  std::mt19937_64 rng(61);
  Tensor x = gradcheck::random_tensor({1, 8, 8, 8}, rng, false);
  Tensor y = impfrequp_forward(x, p, pr);
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(ImpFreqUp, IrmWeightNeverTracked) {
  auto pr = flat_priors(37);
  ImpFreqUpParams p = make_params(8, 2, 1, 1, 70);
  std::vector<Tensor> params;
  testutil::collect(p, params);
  std::mt19937_64 rng(71);
  testutil::randomize(params, rng);
  for (auto& t : params) t.set_requires_grad(true);
  const std::vector<double> irm_before = p.irm_weight.data();

  Tensor x = gradcheck::random_tensor({1, 8, 8, 8}, rng, true);
  Tensor y = impfrequp_forward(x, p, pr);
  backward(sum(mul(y, y)));
  EXPECT_FALSE(p.irm_weight.has_grad());
  EXPECT_EQ(p.irm_weight.data(), irm_before);
}

TEST(ImpFreqUp, FullModuleGradient) {
  auto pr = flat_priors(37);
  for (std::int64_t factor : {1, 2}) {
    ImpFreqUpParams p = make_params(8, factor, 1, 1, 80 + static_cast<std::uint64_t>(factor));
    std::vector<Tensor> params;
    testutil::collect(p, params);
    std::mt19937_64 rng(81);
    testutil::randomize(params, rng);

    std::vector<Tensor> inputs = params;
    inputs.push_back(gradcheck::random_tensor({1, 8, 8, 8}, rng, true));
    auto fn = [&](const std::vector<Tensor>& in) { return impfrequp_forward(in.back(), p, pr); };
    EXPECT_LT(gradcheck::max_rel_error(fn, inputs, rng), 1e-4) << "factor " << factor;
  }
}

TEST(ImpFreqUp, FactorOneIdentityConfiguration) {
  auto pr = flat_priors(37);
  ImpFreqUpParams p = make_params(8, 1, 1, 1, 90);
  std::vector<Tensor> params;
  testutil::collect(p, params);
  testutil::zero_all(params);
  // Identity pixel path: center tap of the 3x3 kernel, per channel.
  for (std::int64_t c = 0; c < 8; ++c) p.pixel_w.data()[((c * 8 + c) * 3 + 1) * 3 + 1] = 1.0;
  // Gammas back to 1 after the blanket zero; blocks stay identity because
  // their output projections are zero.
  for (auto* blocks : {&p.tf_pre, &p.tf_pixel}) {
    for (auto& blk : *blocks) {
      for (auto& v : blk.n1_gamma.data()) v = 1.0;
      for (auto& v : blk.n2_gamma.data()) v = 1.0;
    }
  }
  std::mt19937_64 rng(91);
  Tensor x = gradcheck::random_tensor({1, 8, 8, 8}, rng, false);
  Tensor y = impfrequp_forward(x, p, pr);
  EXPECT_EQ(y.data(), x.data());
}
