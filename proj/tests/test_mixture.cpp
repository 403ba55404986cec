#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mdnomad/mixture.hpp"
#include "support/finite_diff.hpp"

using namespace mdnomad;

namespace {

MixtureParams two_bumps() { return MixtureParams({0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}); }

MixtureParams random_mixture(Rng& rng, int m) {
  std::vector<double> raw(3 * m);
  for (int i = 0; i < m; ++i) {
    raw[i] = uniform(rng, -3, 3);
    raw[m + i] = uniform(rng, -10, 10);
    // softplus^-1 of a scale drawn log-uniformly in [1e-3, 5]
    const double s = std::exp(uniform(rng, std::log(1e-3), std::log(5.0)));
    raw[2 * m + i] = std::log(std::expm1(std::max(s - kScaleFloor, 1e-12)));
  }
  return mixture_from_raw(raw);
}

// Composite Simpson on [a, b] with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(MixtureFromRaw, SingleComponent) {
  const auto p = mixture_from_raw(std::vector<double>{0, 0, 0});
  EXPECT_EQ(p.weights()[0], 1.0);
  EXPECT_EQ(p.means()[0], 0.0);
  EXPECT_NEAR(p.scales()[0], std::log(2.0) + 1e-4, 1e-15);
}

TEST(MixtureFromRaw, EqualLogits) {
  const auto p = mixture_from_raw(std::vector<double>{0, 0, 3, -4, 1, 2});
  EXPECT_DOUBLE_EQ(p.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(p.weights()[1], 0.5);
  EXPECT_EQ(p.means()[0], 3.0);
  EXPECT_EQ(p.means()[1], -4.0);
}

TEST(MixtureFromRaw, ScaleFloorEngages) {
  const auto p = mixture_from_raw(std::vector<double>{0, 0, -40});
  EXPECT_NEAR(p.scales()[0], 1e-4, 1e-12);
  EXPECT_GE(p.scales()[0], kScaleFloor);
}

TEST(MixtureFromRaw, Errors) {
  EXPECT_THROW(mixture_from_raw(std::vector<double>{0, 0}), ShapeError);
  EXPECT_THROW(mixture_from_raw(std::vector<double>{0, NAN, 0}), InvalidOutputError);
  EXPECT_THROW(mixture_from_raw(std::vector<double>{0, 0, INFINITY}), InvalidOutputError);
}

TEST(MixtureFromRaw, ValidForLargeRaw) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 1 + trial % 20;
    std::vector<double> raw(3 * m);
    for (auto& v : raw) v = uniform(rng, -1e3, 1e3);
    MixtureParams p;
    ASSERT_NO_THROW(p = mixture_from_raw(raw));
    double s = 0;
    for (double w : p.weights()) s += w;
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (double sc : p.scales()) EXPECT_GE(sc, kScaleFloor);
  }
}

TEST(MixtureParams, RejectsInvalid) {
  EXPECT_THROW(MixtureParams({0.5, 0.4}, {0, 0}, {1, 1}), InvalidOutputError);
  EXPECT_THROW(MixtureParams({1.0}, {0}, {1e-6}), InvalidOutputError);
  EXPECT_THROW(MixtureParams({1.0}, {0, 1}, {1}), ShapeError);
}

TEST(MixturePdf, StandardNormalMode) {
  const MixtureParams p({1.0}, {0.0}, {1.0});
  EXPECT_NEAR(mixture_pdf(p, 0.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(std::exp(mixture_log_pdf(p, 0.0)), 0.3989422804014327, 1e-15);
}

TEST(MixturePdf, Symmetric) {
  const auto p = two_bumps();
  for (double y : {0.1, 0.7, 2.5, 6.0}) EXPECT_DOUBLE_EQ(mixture_pdf(p, y), mixture_pdf(p, -y));
}

TEST(MixturePdf, LogPdfMatchesFarInTail) {
  const MixtureParams p({0.3, 0.7}, {0.0, 1.0}, {0.1, 0.2});
  const double y = 40.0;
  // pdf underflows; log-pdf must still be finite and equal the dominant term.
  const double dominant = std::log(0.7) + normal_log_pdf(y, 1.0, 0.2);
  EXPECT_NEAR(mixture_log_pdf(p, y), dominant, 1e-9);
}

TEST(MixturePdf, NormalisationProperty) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_mixture(rng, 1 + trial % 20);
    // Piecewise Simpson between window edges, each piece resolving the
    // narrowest component whose +-30 sigma window covers it.
    std::vector<double> edges;
    for (std::size_t i = 0; i < p.size(); ++i) {
      edges.push_back(p.means()[i] - 30 * p.scales()[i]);
      edges.push_back(p.means()[i] + 30 * p.scales()[i]);
    }
    std::sort(edges.begin(), edges.end());
    double total = 0;
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      const double a = edges[e], b = edges[e + 1];
      if (b <= a) continue;
      double step = b - a;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p.means()[i] - 30 * p.scales()[i] < b && p.means()[i] + 30 * p.scales()[i] > a)
          step = std::min(step, p.scales()[i] / 20.0);
      const int n = 2 * std::max(1, static_cast<int>(std::ceil((b - a) / step / 2.0)));
      total += simpson([&](double y) { return mixture_pdf(p, y); }, a, b, n);
    }
    EXPECT_NEAR(total, 1.0, 1e-6) << "trial " << trial;
  }
}

TEST(NllLoss, GaussianAtMean) {
  Matrix raw(3, 1);
  // scale pre-activation chosen so softplus(pre) + 1e-4 = 1
  raw << 0.0, 2.5, std::log(std::expm1(1.0 - kScaleFloor));
  const std::vector<double> t{2.5};
  const auto r = nll_loss(raw, t);
  EXPECT_NEAR(r.loss, 0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(r.loss, 0.918939, 1e-6);
}

TEST(NllLoss, DuplicateDoubles) {
  Matrix raw(6, 1);
  raw << 0.2, -0.1, 1.0, -1.0, 0.3, 0.5;
  Matrix raw2(6, 2);
  raw2 << raw, raw;
  const double one = nll_loss(raw, std::vector<double>{0.4}).loss;
  const double two = nll_loss(raw2, std::vector<double>{0.4, 0.4}).loss;
  EXPECT_DOUBLE_EQ(two, 2 * one);
  EXPECT_DOUBLE_EQ(nll_loss(raw2, std::vector<double>{0.4, 0.4}, LossReduction::kMean).loss, one);
}

TEST(NllLoss, MatchesLogPdf) {
  Rng rng(8);
  Matrix raw(9, 4);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = uniform(rng, -2, 2);
  const std::vector<double> t{0.3, -1.0, 2.0, 0.0};
  double expect = 0;
  for (int b = 0; b < 4; ++b) expect -= mixture_log_pdf(mixture_from_raw(Vector(raw.col(b))), t[b]);
  EXPECT_NEAR(nll_loss(raw, t).loss, expect, 1e-12);
}

TEST(NllLoss, EmptyBatch) {
  Matrix raw(3, 0);
  EXPECT_THROW(nll_loss(raw, std::vector<double>{}), UsageError);
}

TEST(NllLoss, GradientFiniteDifference) {
  Rng rng(13);
  const int m = 3, batch = 5;
  Matrix raw(3 * m, batch);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = uniform(rng, -1.5, 1.5);
  std::vector<double> t(batch);
  for (auto& v : t) v = uniform(rng, -2, 2);
  for (auto red : {LossReduction::kSum, LossReduction::kMean}) {
    const auto r = nll_loss(raw, t, red);
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      const double fd = testing_support::central_difference(
          [&](double v) {
            Matrix q = raw;
            q.data()[i] = v;
            return nll_loss(q, t, red).loss;
          },
          raw.data()[i]);
      EXPECT_LT(testing_support::relative_error(r.gradient.data()[i], fd), 1e-5) << "entry " << i;
    }
  }
}

TEST(MixtureMoments, Examples) {
  const auto p = two_bumps();
  EXPECT_EQ(mixture_mean(p), 0.0);
  EXPECT_DOUBLE_EQ(mixture_variance(p), 2.0);
  const MixtureParams one({1.0}, {3.0}, {0.7});
  EXPECT_DOUBLE_EQ(mixture_variance(one), 0.49);
}

TEST(MixtureMoments, AgreeWithMonteCarlo) {
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_mixture(rng, 2 + trial);
    const int n = 100000;
    double s = 0, s2 = 0;
    Rng draw(1000 + trial);
    StandardNormal normal;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = mixture_sample(p, draw, normal);
      s += xs[i];
    }
    const double mean = s / n;
    for (double x : xs) s2 += (x - mean) * (x - mean);
    const double var = s2 / (n - 1);
    double m4 = 0;
    for (double x : xs) m4 += std::pow(x - mean, 4);
    m4 /= n;
    const double se_mean = std::sqrt(mixture_variance(p) / n);
    const double se_var = std::sqrt((m4 - var * var) / n);
    EXPECT_LT(std::abs(mean - mixture_mean(p)), 4 * se_mean);
    EXPECT_LT(std::abs(var - mixture_variance(p)), 4 * se_var);
  }
}

TEST(MixtureCdf, Monotone) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_mixture(rng, 1 + trial);
    double prev = 0;
    for (double y = -45; y <= 45; y += 0.01) {
      const double c = mixture_cdf(p, y);
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(MixtureCdf, NormalCdfAccuracy) {
  // Reference values of Phi from high-precision tables.
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-16);
  EXPECT_NEAR(normal_cdf(1.0), 0.841344746068542948585232545632, 1e-15);
  EXPECT_NEAR(normal_cdf(-3.0), 0.00134989803163009452665181476759, 1e-17);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
}

TEST(MixtureQuantile, Median) {
  const MixtureParams p({1.0}, {0.0}, {1.0});
  EXPECT_NEAR(mixture_quantile(p, 0.5), 0.0, 1e-10);
}

TEST(MixtureQuantile, StandardNormal975) {
  const MixtureParams p({1.0}, {0.0}, {1.0});
  // 1.959963984540054: normal quantile via an independent erf-inverse evaluation.
  EXPECT_NEAR(mixture_quantile(p, 0.975), 1.959963984540054, 1e-8);
  EXPECT_NEAR(mixture_quantile(p, 0.975), 1.959964, 5e-7);
}

TEST(MixtureQuantile, InverseIdentity) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_mixture(rng, 1 + trial % 7);
    for (int k = 1; k <= 99; ++k) {
      const double v = k / 100.0;
      EXPECT_NEAR(mixture_cdf(p, mixture_quantile(p, v)), v, 1e-8);
    }
  }
}

TEST(MixtureQuantile, WellSeparatedModes) {
  const MixtureParams p({0.5, 0.5}, {-50.0, 50.0}, {0.01, 0.01});
  for (double v : {0.1, 0.4999, 0.5001, 0.9}) EXPECT_NEAR(mixture_cdf(p, mixture_quantile(p, v)), v, 1e-8);
}

TEST(MixtureQuantile, BatchMatchesSingle) {
  Rng rng(4);
  const auto p = random_mixture(rng, 6);
  std::vector<double> levels;
  for (int k = 1; k < 200; ++k) levels.push_back(k / 200.0);
  const auto q = mixture_quantiles(p, levels);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double single = mixture_quantile(p, levels[k]);
    EXPECT_NEAR(q[k], single, 1e-9 * (1 + std::abs(single)));
  }
}

TEST(MixtureQuantile, OutOfRange) {
  const MixtureParams p({1.0}, {0.0}, {1.0});
  EXPECT_THROW(mixture_quantile(p, 0.0), UsageError);
  EXPECT_THROW(mixture_quantile(p, 1.0), UsageError);
  EXPECT_THROW(mixture_quantile(p, -0.3), UsageError);
  const std::vector<double> bad{0.6, 0.4};
  EXPECT_THROW(mixture_quantiles(p, bad), UsageError);
}

TEST(MixtureSample, DegenerateWeights) {
  const MixtureParams p({1.0, 0.0}, {0.0, 1000.0}, {1.0, 1.0});
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(std::abs(mixture_sample(p, rng)), 10.0);
}

TEST(MixtureSample, CltBound) {
  const MixtureParams p({1.0}, {2.0}, {0.5});
  Rng rng(2);
  StandardNormal normal;
  const int n = 100000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += mixture_sample(p, rng, normal);
  EXPECT_LT(std::abs(s / n - 2.0), 3 * 0.5 / std::sqrt(n));
}

TEST(MixtureSample, ThreeComponentMean) {
  const MixtureParams p({0.2, 0.5, 0.3}, {-3.0, 0.5, 4.0}, {0.5, 1.0, 2.0});
  Rng rng(3);
  StandardNormal normal;
  const int n = 100000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += mixture_sample(p, rng, normal);
  EXPECT_LT(std::abs(s / n - mixture_mean(p)), 4 * std::sqrt(mixture_variance(p) / n));
}
