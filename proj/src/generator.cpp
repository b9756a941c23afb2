#include "bregman_ot/bench/generator.hpp"

#include <random>

namespace bregman_ot::bench {

namespace {

Vector positive_uniform(std::mt19937_64& rng, Index size) {
  // open interval (0, 1): the lower bound excludes an exact zero draw
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  Vector out(size);
  for (Index i = 0; i < size; ++i) out[i] = unif(rng);
  return out;
}

}  // namespace

OtInstance<double> generate(const GenConfig& cfg) {
  if (cfg.m < 1 || cfg.n < 1) throw std::invalid_argument("generate: m, n must be >= 1");

  std::mt19937_64 rng(cfg.seed);

  // draw order is fixed: a, b, mixture weights, support points p then q
  Vector a = positive_uniform(rng, cfg.m);
  a /= a.sum();
  Vector b = positive_uniform(rng, cfg.n);
  b /= b.sum();

  Vector weights = positive_uniform(rng, cfg.num_components);
  weights /= weights.sum();
  Vector cumulative(cfg.num_components);
  double acc = 0;
  for (int c = 0; c < cfg.num_components; ++c) {
    acc += weights[c];
    cumulative[c] = acc;
  }

  std::uniform_real_distribution<double> pick(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.variance));
  auto draw_coordinate = [&]() {
    const double r = pick(rng);
    int c = 0;
    while (c + 1 < cfg.num_components && r > cumulative[c]) ++c;
    return cfg.means[c] + gauss(rng);
  };
  auto draw_points = [&](Index count) {
    Matrix pts(count, cfg.support_dim);
    for (Index i = 0; i < count; ++i)
      for (int d = 0; d < cfg.support_dim; ++d) pts(i, d) = draw_coordinate();
    return pts;
  };

  const Matrix p = draw_points(cfg.m);
  const Matrix q = draw_points(cfg.n);

  Matrix cost(cfg.m, cfg.n);
  for (Index i = 0; i < cfg.m; ++i)
    for (Index j = 0; j < cfg.n; ++j) cost(i, j) = (p.row(i) - q.row(j)).squaredNorm();
  cost /= cost.maxCoeff();

  OtInstance<double> inst{std::move(cost), std::move(a), std::move(b)};
  inst.validate();
  return inst;
}

}  // namespace bregman_ot::bench
