#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "certattack/errors.hpp"
#include "certattack/noise.hpp"
#include "certattack/oracle.hpp"
#include "oracles.hpp"

using namespace certattack;

namespace {

std::shared_ptr<SyntheticModel> halfspace(Vec w, double b) {
  return std::make_shared<SyntheticModel>(Halfspace{std::move(w), b}, 2);
}

// Four-class linear model: logits = I x.
std::shared_ptr<SyntheticModel> identity_mlp(std::size_t classes) {
  TinyMlp m;
  DenseLayer layer{Matrix(classes, classes), Vec(classes, 0.0)};
  for (std::size_t i = 0; i < classes; ++i) layer.weight(i, i) = 1.0;
  m.layers.push_back(layer);
  return std::make_shared<SyntheticModel>(m, classes);
}

}  // namespace

TEST(Oracle, HalfspaceSignRule) {
  const auto m = halfspace({1.0, 0.0}, 0.0);
  EXPECT_EQ(m->label(Vec{0.3, 0.9}), 1);
  EXPECT_EQ(m->label(Vec{-0.3, 0.9}), 0);
  EXPECT_EQ(m->label(Vec{0.0, 0.9}), 0);
  EXPECT_EQ(m->logits(Vec{0.3, 0.9}), (Vec{0.0, 0.3}));
  EXPECT_DOUBLE_EQ(m->signed_distance(Vec{0.3, 0.9}), 0.3);
}

TEST(Oracle, PolytopeInsideIsClassZero) {
  Polytope p;
  p.faces = {{{1.0, 0.0}, -0.7}, {{-1.0, 0.0}, 0.3}};  // 0.3 <= x0 <= 0.7
  const SyntheticModel m(p, 2);
  EXPECT_EQ(m.label(Vec{0.5, 0.5}), 0);
  EXPECT_EQ(m.label(Vec{0.8, 0.5}), 1);
  EXPECT_EQ(m.label(Vec{0.2, 0.5}), 1);
  EXPECT_NEAR(m.logits(Vec{0.5, 0.5})[1], -0.2, 1e-15);
}

TEST(Oracle, TinyMlpHandForwardPass) {
  TinyMlp net;
  net.activation = Activation::Relu;
  DenseLayer l1{Matrix(2, 2), Vec{0.0, -0.5}};
  l1.weight(0, 0) = 1.0;
  l1.weight(0, 1) = 0.0;
  l1.weight(1, 0) = 0.0;
  l1.weight(1, 1) = 1.0;
  DenseLayer l2{Matrix(2, 2), Vec{0.1, 0.0}};
  l2.weight(0, 0) = 1.0;
  l2.weight(1, 1) = 2.0;
  net.layers = {l1, l2};
  const SyntheticModel m(net, 2);
  // hidden = relu(x0, x1 - 0.5) = (0.3, 0.4); logits = (0.3 + 0.1, 0.8)
  const Vec x{0.3, 0.9};
  const Vec z = m.logits(x);
  EXPECT_NEAR(z[0], 0.4, 1e-15);
  EXPECT_NEAR(z[1], 0.8, 1e-15);
  EXPECT_EQ(m.label(x), 1);
  // hidden = (0.3, 0) -> logits (0.4, 0)
  EXPECT_EQ(m.label(Vec{0.3, 0.2}), 0);
}

TEST(Oracle, ModelFileRoundTrip) {
  const std::string text =
      "# two layers\n"
      "mlp 3 2 tanh\n"
      "2\n"
      "2  1 0  0 1  0.1 -0.1\n"
      "3  1 2  3 4  5 6  0 0 1\n";
  const SyntheticModel m = parse_model(text);
  EXPECT_EQ(m.num_classes(), 3);
  EXPECT_EQ(m.dim(), 2u);
  const SyntheticModel again = parse_model(format_model(m));
  for (double a = 0.0; a <= 1.0; a += 0.1)
    for (double b = 0.0; b <= 1.0; b += 0.1) EXPECT_EQ(m.logits(Vec{a, b}), again.logits(Vec{a, b}));

  const auto h = random_halfspace(5, 3);
  EXPECT_EQ(parse_model(format_model(h)).logits(Vec(5, 0.4)), h.logits(Vec(5, 0.4)));
  const auto p = random_polytope(5, 4, 3);
  EXPECT_EQ(parse_model(format_model(p)).logits(Vec(5, 0.4)), p.logits(Vec(5, 0.4)));
}

TEST(Oracle, MalformedModelFilesRejected) {
  EXPECT_THROW(parse_model(""), FormatError);
  EXPECT_THROW(parse_model("halfspace 2 2\n1 0\n"), FormatError);
  EXPECT_THROW(parse_model("halfspace 2 2\n1 0 0 7\n"), FormatError);
  EXPECT_THROW(parse_model("sphere 2 2\n1 0 0\n"), FormatError);
  EXPECT_THROW(parse_model("halfspace 2 2\n1 x 0\n"), FormatError);
  EXPECT_THROW(parse_model("mlp 3 2 sigmoid\n1\n3 1 1 1 1 1 1 0 0 0\n"), FormatError);
  EXPECT_THROW(read_model_file("/nonexistent/model.txt"), FormatError);
}

TEST(Oracle, RandomModelsSplitTheBox) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto h = random_halfspace(16, seed);
    const auto& hs = std::get<Halfspace>(h.kind());
    EXPECT_NEAR(norm2(hs.w), 1.0, 1e-12);
    const auto p = random_polytope(16, 6, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int ones_h = 0, ones_p = 0;
    for (int i = 0; i < 2000; ++i) {
      Vec x(16);
      for (auto& v : x) v = u(rng);
      ones_h += h.label(x);
      ones_p += p.label(x);
    }
    EXPECT_GT(ones_h, 0);
    EXPECT_LT(ones_h, 2000);
    EXPECT_GT(ones_p, 0);
    EXPECT_LT(ones_p, 2000);
  }
}

TEST(Oracle, CountsEveryClassifyCall) {
  Oracle o(halfspace({1.0, 0.0}, -0.5));
  o.classify(Vec{0.1, 0.2});
  o.classify(Vec{0.9, 0.2});
  EXPECT_EQ(o.query_count(), 2u);
  Matrix xs(7, 2, 0.5);
  EXPECT_EQ(o.classify_batch(xs, 3).size(), 7u);
  EXPECT_EQ(o.query_count(), 9u);
}

TEST(Oracle, OutOfBoxInputIsDomainError) {
  Oracle o(halfspace({1.0, 0.0}, -0.5));
  EXPECT_THROW(o.classify(Vec{1.2, 0.2}), DomainError);
  EXPECT_THROW(o.classify(Vec{0.2, std::nan("")}), DomainError);
  EXPECT_THROW(o.classify(Vec{0.2}), ShapeError);
}

TEST(Oracle, BoxClipAndDiameter) {
  const InputBox box{-1.0, 2.0};
  Vec x{-3.0, 0.5, 9.0};
  box.clip(x);
  EXPECT_EQ(x, (Vec{-1.0, 0.5, 2.0}));
  EXPECT_TRUE(box.contains(x));
  EXPECT_DOUBLE_EQ(box.diameter(4), 6.0);
}

TEST(RandPre, ZeroSigmaIsTransparent) {
  const auto inner = halfspace({1.0, -1.0}, 0.0);
  const RandPreModel wrapped(inner, 0.0, 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec x{u(rng), u(rng)};
    EXPECT_EQ(wrapped.label(x), inner->label(x));
  }
}

TEST(RandPre, FlipsNearTheBoundary) {
  const auto inner = halfspace({1.0, 0.0}, -0.5);
  const RandPreModel wrapped(inner, 0.02, 5);
  const Vec x{0.51, 0.5};  // distance 0.01
  int flips = 0;
  for (int i = 0; i < 1000; ++i) flips += wrapped.label(x) != 1;
  // P(flip) = Phi(-0.5) = 0.3085
  EXPECT_NEAR(flips / 1000.0, 0.3085, 5 * std::sqrt(0.3085 * 0.6915 / 1000));
}

TEST(RandPre, NoiseVariancesAdd) {
  const auto inner = halfspace({1.0, 0.0}, -0.5);
  const RandPreModel wrapped(inner, 0.02, 9);
  NoiseSpec attack;
  attack.a = 0.1;
  attack.dim = 2;
  const Matrix eps = sample(attack, 4, 50000);
  const Vec mean{0.5, 0.5};
  double ss = 0.0;
  for (std::size_t i = 0; i < eps.rows(); ++i) {
    const Vec delivered = wrapped.perturb(add(mean, eps.row_vec(i)));
    ss += std::pow(delivered[0] - mean[0], 2);
  }
  EXPECT_NEAR(ss / eps.rows(), 0.01 + 0.0004, 0.0104 * 0.03);
}

TEST(RandPre, BatchWidthDoesNotChangeLabels) {
  const auto inner = halfspace({1.0, 0.0}, -0.5);
  Matrix xs;
  for (int i = 0; i < 200; ++i) xs.append_row(Vec{0.5 + 0.0001 * i, 0.5});
  const RandPreModel a(inner, 0.05, 11), b(inner, 0.05, 11);
  EXPECT_EQ(a.label_batch(xs, 1), b.label_batch(xs, 4));
}

TEST(RandPost, ZeroSigmaIsTransparent) {
  const auto inner = identity_mlp(4);
  const RandPostModel wrapped(inner, 0.0, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec x{u(rng), u(rng), u(rng), u(rng)};
    EXPECT_EQ(wrapped.label(x), inner->label(x));
  }
}

TEST(RandPost, LargeSigmaApproachesUniform) {
  const RandPostModel wrapped(identity_mlp(4), 1000.0, 2);
  std::map<int, int> hist;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++hist[wrapped.label(Vec{0.9, 0.1, 0.2, 0.3})];
  double chi2 = 0.0;
  for (int c = 0; c < 4; ++c) chi2 += std::pow(hist[c] - n / 4.0, 2) / (n / 4.0);
  EXPECT_LT(chi2, 16.27);  // chi-square(3) at 0.001
}

TEST(RandPost, FlipRateMatchesGaussianDifference) {
  // Logit gap 1 between the two classes; flips when eta_0 - eta_1 > 1.
  const RandPostModel wrapped(halfspace({1.0, 0.0}, 0.0), 0.2, 8);
  const int n = 400000;
  int flips = 0;
  for (int i = 0; i < n; ++i) flips += wrapped.label(Vec{1.0, 0.0}) != 1;
  const double expected = 2.034760087224794698e-4;  // Phi(-1 / (0.2 sqrt 2)), mpmath
  EXPECT_NEAR(static_cast<double>(flips) / n, expected, 5 * std::sqrt(expected / n));
}

TEST(RandPost, NeedsLogits) {
  EXPECT_THROW(RandPostModel(std::make_shared<ConstantModel>(2, 2, 0), 0.2, 1), CapabilityError);
}

TEST(Blacklight, EmptyStoreNeverDetects) {
  BlacklightDetector d;
  EXPECT_FALSE(d.check(Vec(128, 0.5)).detected);
  EXPECT_EQ(d.detections(), 0u);
}

TEST(Blacklight, RepeatedQueryDetectedWithFullOverlap) {
  BlacklightDetector d;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(128);
  for (auto& v : x) v = u(rng);
  d.check(x);
  const auto r = d.check(x);
  EXPECT_TRUE(r.detected);
  EXPECT_EQ(r.matched, d.fingerprints(x).size());
  EXPECT_GE(r.matched, 25u);
  EXPECT_EQ(d.detections(), 1u);
  EXPECT_EQ(d.queries_seen(), 2u);
}

TEST(Blacklight, IndependentNoisyQueriesDoNotOverlap) {
  DetectorParams params;
  params.quant_step = 0.05;
  const BlacklightDetector probe(params);
  NoiseSpec spec;
  spec.a = 0.25;
  spec.dim = 128;
  const Matrix noise = sample(spec, 12, 2000);
  std::size_t worst = 0;
  for (std::size_t i = 0; i + 1 < noise.rows(); i += 2) {
    BlacklightDetector d(params);
    d.check(add(Vec(128, 0.5), noise.row_vec(i)));
    worst = std::max(worst, d.peek(add(Vec(128, 0.5), noise.row_vec(i + 1))).matched);
  }
  EXPECT_EQ(worst, 0u);
}

TEST(Blacklight, MatchCountMonotoneInStoreAndOrderFree) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec> queries(6, Vec(64));
  for (auto& q : queries)
    for (auto& v : q) v = u(rng);
  const Vec target = queries[2];

  BlacklightDetector forward, backward;
  std::size_t previous = 0;
  for (const auto& q : queries) {
    forward.check(q);
    const auto m = forward.peek(target).matched;
    EXPECT_GE(m, previous);
    previous = m;
  }
  for (auto it = queries.rbegin(); it != queries.rend(); ++it) backward.check(*it);
  EXPECT_EQ(forward.peek(target).matched, backward.peek(target).matched);
  EXPECT_EQ(forward.store_size(), backward.store_size());
}

TEST(Blacklight, OracleFeedsAttachedDetector) {
  Oracle o(halfspace({1.0, 0.0}, -0.5));
  auto d = std::make_shared<BlacklightDetector>(DetectorParams{1, 0.05, 1});
  o.attach_detector(d);
  o.classify(Vec{0.3, 0.3});
  o.classify(Vec{0.3, 0.3});
  EXPECT_EQ(d->queries_seen(), 2u);
  EXPECT_EQ(d->detections(), 1u);
}

TEST(Blacklight, DeterministicProbeStreamDetectedOnSecondQuery) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(128);
  for (auto& v : x) v = u(rng);
  const Matrix stream = deterministic_probe_stream(x, 10, 1.0 / 255.0, InputBox{});
  BlacklightDetector d;
  EXPECT_FALSE(d.check(stream.row(0)).detected);
  EXPECT_TRUE(d.check(stream.row(1)).detected);
}
