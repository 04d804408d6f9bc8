// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/rng.hpp"

using namespace xmodal;
using namespace xmodal::losses;

namespace {

constexpr double kE = std::numbers::e;

TensorD vec(std::vector<double> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  return TensorD(Shape{n}, std::move(v));
}

TensorD rows(const std::vector<std::vector<double>>& r) {
  std::vector<double> flat;
  for (const auto& row : r) flat.insert(flat.end(), row.begin(), row.end());
  return TensorD(Shape{static_cast<std::int64_t>(r.size()), static_cast<std::int64_t>(r[0].size())}, flat);
}

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& r : out)
    for (auto& v : r) v = rng.normal();
  return out;
}

std::vector<std::string> ids_of(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

double contrastive_value(const std::vector<std::vector<double>>& zm, const std::vector<std::vector<double>>& za,
                         const PairBatch& batch) {
  TapeD tape;
  return contrastive_loss(tape, rows(zm), rows(za), batch).item();
}

}  // namespace

TEST_CASE("pair distance closed forms") {
  TapeD tape;
  const auto z = vec({0.5, -1.0, 2.0, 0.25});
  CHECK(pair_distance(tape, z, z).item() == doctest::Approx(kE).epsilon(1e-12));
  CHECK(pair_distance(tape, z, vec({-0.5, 1.0, -2.0, -0.25})).item() == doctest::Approx(1.0 / kE).epsilon(1e-12));
  CHECK(pair_distance(tape, vec({1, 0, 0}), vec({0, 3, 0})).item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(pair_distance(tape, vec({0, 0, 0}), vec({1, 0, 0})), DegenerateInputError);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double s = std::exp(rng.uniform(-3, 3));
    std::vector<double> as(a);
    for (auto& v : as) v *= s;
    const double d = pair_distance(tape, vec(a), vec(b)).item();
    CHECK(d == doctest::Approx(std::exp(oracle::cosine(a, b))).epsilon(1e-12));
    CHECK(std::abs(pair_distance(tape, vec(as), vec(b)).item() - d) <= 1e-6);
  }
}

TEST_CASE("contrastive loss closed forms") {
  const std::vector<double> u{1.0, 2.0, -0.5}, neg_u{-1.0, -2.0, 0.5};
  SUBCASE("k = 0 is exactly zero") {
    Rng rng(1);
    const auto zm = random_rows(4, 3, rng), za = random_rows(4, 3, rng);
    const auto batch = build_pair_batch(ids_of(4), std::vector<std::int32_t>{0, 0, 0, 0}, 5,
                                        NegativeMode::different_class);
    CHECK(batch.k == 0);
    CHECK(contrastive_value(zm, za, batch) == 0.0);
  }
  SUBCASE("equal distances give ln(k + 1)") {
    const std::vector<std::vector<double>> same(4, u);
    const auto batch = build_pair_batch(ids_of(4), std::vector<std::int32_t>{0, 1, 2, 3}, 3,
                                        NegativeMode::different_class);
    CHECK(contrastive_value(same, same, batch) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("positive at e and two negatives at 1/e") {
    // Row 0 is the anchor; rows 1 and 2 carry attribute -u.
    const std::vector<std::vector<double>> zm{u, u, u}, za{u, neg_u, neg_u};
    PairBatch batch;
    batch.sample_ids = ids_of(3);
    batch.k = 2;
    batch.negatives = {{1, 2}, {0, 2}, {0, 1}};
    const double expect = oracle::contrastive(zm, za, batch.negatives);
    CHECK(contrastive_value(zm, za, batch) == doctest::Approx(expect).epsilon(1e-12));
    // The anchor's own term is ln(1 + 2 e^-2) = 0.239545 to six places.
    PairBatch single;
    single.sample_ids = ids_of(3);
    single.k = 2;
    single.negatives = {{1, 2}, {0, 2}, {0, 1}};
    TapeD tape;
    const auto own = contrastive_loss(tape, rows({u, u, u}), rows({u, neg_u, neg_u}), single);
    CHECK(oracle::contrastive({u}, {u, neg_u, neg_u}, {{1, 2}}) == doctest::Approx(std::log1p(2.0 * std::exp(-2.0))).epsilon(1e-12));
    CHECK(std::abs(oracle::contrastive({u}, {u, neg_u, neg_u}, {{1, 2}}) - 0.239545) < 5e-7);
    CHECK(std::isfinite(own.item()));
  }
}

TEST_CASE("contrastive loss agrees with the scalar oracle and its gradient") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto zm = random_rows(n, 8, rng), za = random_rows(n, 8, rng);
    const auto batch = build_pair_batch(ids_of(n), std::vector<std::int32_t>(n, 0), 1 + static_cast<std::int64_t>(rng.below(n - 1)),
                                        NegativeMode::different_sample, &rng);
    CHECK(contrastive_value(zm, za, batch) == doctest::Approx(oracle::contrastive(zm, za, batch.negatives)).epsilon(1e-12));

    TapeD tape;
    auto tm = rows(zm), ta = rows(za);
    tm.set_requires_grad();
    ta.set_requires_grad();
    tape.backward(contrastive_loss(tape, tm, ta, batch));
    for (int probe = 0; probe < 10; ++probe) {
      const bool video = probe % 2 == 0;
      const std::size_t r = rng.below(n), c = rng.below(8);
      const auto f = [&](const std::vector<double>& x) {
        auto m = zm, a = za;
        (video ? m : a)[r][c] = x[0];
        return oracle::contrastive(m, a, batch.negatives);
      };
      const double numeric = oracle::central_difference(f, {(video ? zm : za)[r][c]}, 0);
      const double analytic = (video ? tm : ta).grad()[r * 8 + c];
      CHECK(oracle::relative_error(analytic, numeric) < 1e-4);
    }
  }
}

TEST_CASE("raising the positive cosine lowers the loss") {
  Rng rng(5);
  const auto zm = random_rows(4, 6, rng);
  const auto za = random_rows(4, 6, rng);
  PairBatch batch;
  batch.sample_ids = ids_of(4);
  batch.k = 2;
  // No anchor uses attribute row 0 as a negative, so only anchor 0's positive moves.
  batch.negatives = {{1, 2}, {2, 3}, {1, 3}, {1, 2}};
  double previous = std::numeric_limits<double>::infinity();
  // Blend attribute row 0 toward video row 0; the anchor's negatives stay put.
  for (int step = 0; step <= 10; ++step) {
    const double t = step / 10.0;
    auto blended = za;
    for (std::size_t c = 0; c < 6; ++c) blended[0][c] = (1 - t) * za[0][c] + t * zm[0][c];
    TapeD tape;
    const double value = contrastive_loss(tape, rows(zm), rows(blended), batch).item();
    CHECK(value == doctest::Approx(oracle::contrastive(zm, blended, batch.negatives)).epsilon(1e-12));
    CHECK(value < previous);
    previous = value;
  }
}

TEST_CASE("pair batches") {
  const auto ids = ids_of(6);
  const std::vector<std::int32_t> cls{0, 0, 1, 1, 2, 2};
  const auto dc = build_pair_batch(ids, cls, 8, NegativeMode::different_class);
  CHECK(dc.k == 4);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(dc.negatives[i].size() == 4);
    for (auto j : dc.negatives[i]) CHECK(cls[static_cast<std::size_t>(j)] != cls[i]);
  }
  const auto ds = build_pair_batch(ids, cls, 8, NegativeMode::different_sample);
  CHECK(ds.k == 5);
  Rng rng(2);
  const auto sampled = build_pair_batch(ids, cls, 2, NegativeMode::different_sample, &rng);
  CHECK(sampled.k == 2);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::set<std::int64_t> s(sampled.negatives[i].begin(), sampled.negatives[i].end());
    CHECK(s.size() == 2);
    CHECK_FALSE(s.count(static_cast<std::int64_t>(i)));
  }
  PairBatch bad = ds;
  bad.negatives[0][0] = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = ds;
  bad.negatives[1].pop_back();
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = ds;
  bad.negatives[2][0] = 17;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK(parse_negative_mode("different_sample") == NegativeMode::different_sample);
  CHECK(to_string(NegativeMode::different_class) == "different_class");
  CHECK_THROWS_AS(parse_negative_mode("nearest"), ConfigError);
}

TEST_CASE("cross entropy closed forms") {
  TapeD tape;
  const std::vector<std::int32_t> zero{0}, one{1};
  CHECK(losses::cross_entropy(tape, TensorD(Shape{1, 3}, std::vector<double>{0.7, 0.2, 0.1}), zero).item() ==
        doctest::Approx(-std::log(0.7)).epsilon(1e-12));
  CHECK(losses::cross_entropy(tape, TensorD(Shape{1, 5}, 0.2), zero).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(losses::cross_entropy(tape, TensorD(Shape{1, 2}, std::vector<double>{0.0, 1.0}), one).item() == 0.0);
  // Floor at 1e-12.
  CHECK(losses::cross_entropy(tape, TensorD(Shape{1, 2}, std::vector<double>{0.0, 1.0}), zero).item() ==
        doctest::Approx(-std::log(1e-12)));
  const std::vector<std::int32_t> bad{3}, negative{-1};
  CHECK_THROWS_AS(losses::cross_entropy(tape, TensorD(Shape{1, 3}, 1.0 / 3), bad), ContractError);
  CHECK_THROWS_AS(losses::cross_entropy(tape, TensorD(Shape{1, 3}, 1.0 / 3), negative), ContractError);
}

TEST_CASE("total loss") {
  TapeD tape;
  const auto s = [](double v) { return TensorD::scalar(v); };
  CHECK(total_loss(tape, s(1), s(2), s(4), {0.25}).item() == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(total_loss(tape, s(0.3), s(0.9), s(5), {0.0}).item() == 0.3 + 0.9);
  CHECK(total_loss(tape, s(0.3), s(0.9), s(5), {1.0}).item() == 5.0);
  CHECK_THROWS_AS(total_loss(tape, s(1), s(1), s(1), {1.5}), ConfigError);
  CHECK_THROWS_AS(total_loss(tape, s(1), s(1), s(1), {-0.1}), ConfigError);
  CHECK_THROWS_AS(total_loss(tape, s(std::nan("")), s(1), s(1), {0.5}), NumericError);
  CHECK_THROWS_AS(LossWeights{2.0}.validate(), ConfigError);

  // With alpha = 0 the contrastive term receives no gradient.
  auto lc = s(2.0);
  lc.set_requires_grad();
  auto lt = s(1.0);
  lt.set_requires_grad();
  tape.backward(total_loss(tape, lt, s(1.0), lc, {0.0}));
  CHECK(lt.grad()[0] == 1.0);
  CHECK((!lc.has_grad() || lc.grad()[0] == 0.0));
}
