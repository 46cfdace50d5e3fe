#include "doctest.h"

#include <cmath>

#include "din/fl_core.hpp"

using namespace din;
using namespace din::fl;

namespace {

PrivateDataset make_dataset(Rng& rng, std::size_t n, std::size_t dim, ModelKind kind) {
  PrivateDataset data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(dim);
    for (auto& x : row) x = rng.uniform_double(-2.0, 2.0);
    double raw = 0.3 * (dim ? row[0] : 0.0) + 0.1;
    data.rows.push_back(row);
    data.labels.push_back(kind == ModelKind::logistic_regression ? (raw > 0 ? 1.0 : 0.0)
                                                                 : raw);
  }
  return data;
}

ModelParams make_model(Rng& rng, std::size_t dim, ModelKind kind) {
  ModelParams m;
  m.kind = kind;
  m.weights.resize(dim + 1);
  for (auto& w : m.weights) w = rng.uniform_double(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("one gradient step on a bias-only linear model, by hand") {
  // mse loss, one sample y=2, prediction 0: d(err^2)/dw = 2*err = -4,
  // so a 0.1 step lands at 0.4
  ModelParams m;
  m.kind = ModelKind::linear_regression;
  m.weights = {0.0};
  PrivateDataset data;
  data.rows = {{}};
  data.labels = {2.0};
  ModelParams out = local_train(m, data, 1, 0.1);
  CHECK(out.weights[0] == doctest::Approx(0.4).epsilon(1e-15));

  // two epochs: w1 = 0.4, err = -1.6, w2 = 0.4 + 0.1*3.2 = 0.72
  out = local_train(m, data, 2, 0.1);
  CHECK(out.weights[0] == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(0x9add);
  for (ModelKind kind : {ModelKind::linear_regression, ModelKind::logistic_regression}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t dim = 1 + rng.uniform_u64(5);
      auto data = make_dataset(rng, 8 + rng.uniform_u64(16), dim, kind);
      auto model = make_model(rng, dim, kind);
      auto grad = loss_gradient(model, data);
      const double eps = 1e-6;
      for (std::size_t j = 0; j < model.weights.size(); ++j) {
        ModelParams hi = model, lo = model;
        hi.weights[j] += eps;
        lo.weights[j] -= eps;
        double fd = (loss(hi, data) - loss(lo, data)) / (2 * eps);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("training rejects shape mismatches and empty data") {
  ModelParams m = {ModelKind::linear_regression, {0.0, 0.0}};
  PrivateDataset empty;
  CHECK_THROWS_AS(local_train(m, empty, 1, 0.1), Error);
  PrivateDataset wrong;
  wrong.rows = {{1.0, 2.0}};
  wrong.labels = {1.0};
  CHECK_THROWS_AS(local_train(m, wrong, 1, 0.1), Error);
}

TEST_CASE("accuracy and mse on hand-checked inputs") {
  ModelParams logit = {ModelKind::logistic_regression, {1.0, 0.0}};
  std::vector<std::vector<double>> rows = {{2.0}, {-2.0}, {0.5}};
  std::vector<double> labels = {1.0, 0.0, 0.0};
  // raw scores 2, -2, 0.5 -> classes 1, 0, 1 -> two of three right
  CHECK(accuracy(logit, rows, labels) == doctest::Approx(2.0 / 3.0));

  ModelParams lin = {ModelKind::linear_regression, {1.0, 1.0}};
  // predictions 3, -1; targets 2, 0 -> errors 1, -1 -> mse 1
  std::vector<std::vector<double>> lr = {{2.0}, {-2.0}};
  std::vector<double> ll = {2.0, 0.0};
  CHECK(mean_squared_error(lin, lr, ll) == doctest::Approx(1.0));
}

TEST_CASE("fedavg is the weighted mean") {
  std::vector<std::vector<double>> updates = {{1.0, 0.0}, {3.0, 2.0}};
  CHECK(fedavg(updates, {1.0, 1.0}) == std::vector<double>{2.0, 1.0});
  CHECK(fedavg(updates, {3.0, 1.0}) == std::vector<double>{1.5, 0.5});
  CHECK_THROWS_AS(fedavg({}, {}), Error);
  CHECK_THROWS_AS(fedavg(updates, {1.0}), Error);
  CHECK_THROWS_AS(fedavg(updates, {0.0, 0.0}), Error);
  CHECK_THROWS_AS(fedavg(updates, {-1.0, 2.0}), Error);
  std::vector<std::vector<double>> ragged = {{1.0, 0.0}, {3.0}};
  CHECK_THROWS_AS(fedavg(ragged, {1.0, 1.0}), Error);
}

TEST_CASE("master aggregation equals flat averaging on grid values") {
  FixedPointCodec codec;
  Rng rng(0xa66);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 3 + rng.uniform_u64(28);
    std::size_t dim = 1 + rng.uniform_u64(8);
    std::vector<std::vector<double>> updates;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> u(dim);
      for (auto& x : u) x = codec.decode(codec.encode(rng.uniform_double(-64.0, 64.0)));
      updates.push_back(u);
    }
    // split into contiguous chunks of varying size
    std::vector<WeightSum> parts;
    std::size_t at = 0;
    while (at < n) {
      std::size_t len = std::min<std::size_t>(1 + rng.uniform_u64(5), n - at);
      WeightSum part;
      part.sum.assign(dim, 0.0);
      part.count = static_cast<std::uint32_t>(len);
      for (std::size_t i = at; i < at + len; ++i)
        for (std::size_t d = 0; d < dim; ++d) part.sum[d] += updates[i][d];
      parts.push_back(std::move(part));
      at += len;
    }
    std::vector<double> flat = fedavg(updates, std::vector<double>(n, 1.0));
    std::vector<double> master = master_aggregate(parts);
    REQUIRE(master.size() == dim);
    for (std::size_t d = 0; d < dim; ++d) CHECK(master[d] == flat[d]);
  }
  CHECK_THROWS_AS(master_aggregate({}), Error);
}

TEST_CASE("model serialization is canonical on the codec grid") {
  FixedPointCodec codec;
  ModelParams m = {ModelKind::logistic_regression, {0.25, -1.5, 3.0}};
  auto bytes = m.serialize(codec);
  ModelParams back = ModelParams::deserialize(bytes, codec);
  CHECK(back.kind == m.kind);
  CHECK(back.weights == m.weights);
  // same quantized weights serialize to the same bytes
  ModelParams close = m;
  close.weights[0] += 1e-9;
  CHECK(close.serialize(codec) == bytes);

  auto bad = bytes;
  bad[0] ^= 0xff;
  CHECK_THROWS_AS(ModelParams::deserialize(bad, codec), Error);
}

TEST_CASE("control datasets round-trip with a stable digest") {
  ControlDataset c;
  c.rows = {{1.0, -0.5}, {0.0, 2.25}};
  c.labels = {1.0, 0.0};
  auto bytes = c.serialize();
  ControlDataset back = ControlDataset::deserialize(bytes);
  CHECK(back.rows == c.rows);
  CHECK(back.labels == c.labels);
  CHECK(back.digest() == c.digest());
}

TEST_CASE("verify_global_mean accepts truth and flags drift") {
  FixedPointCodec codec;
  WeightSum a{{2.0, 4.0}, 2};
  WeightSum b{{1.0, -1.0}, 1};
  std::vector<double> truth = master_aggregate({a, b});
  CHECK(verify_global_mean({a, b}, truth, codec));
  std::vector<double> off = truth;
  off[1] += 2.0 / codec.scale;
  CHECK_FALSE(verify_global_mean({a, b}, off, codec));
  CHECK_FALSE(verify_global_mean({a, b}, {truth[0]}, codec));
}

TEST_CASE("population generation is deterministic and per-participant stable") {
  PopulationSpec spec;
  spec.participants = 6;
  spec.samples_per_participant = 10;
  spec.feature_dim = 3;
  spec.label_noise = 0.1;
  spec.control_samples = 20;

  Rng rng(2718);
  Population a = generate_population(spec, rng);
  Population b = generate_population(spec, rng);
  REQUIRE(a.participants.size() == 6);
  CHECK(a.control.size() == 20);
  CHECK(a.truth.weights.size() == 4);
  CHECK(a.participants[3].rows == b.participants[3].rows);
  CHECK(a.control.rows == b.control.rows);

  // adding participants must not disturb the data of existing ones
  PopulationSpec wider = spec;
  wider.participants = 9;
  Population c = generate_population(wider, rng);
  for (std::size_t p = 0; p < 6; ++p) {
    CHECK(c.participants[p].rows == a.participants[p].rows);
    CHECK(c.participants[p].labels == a.participants[p].labels);
  }
}

TEST_CASE("logistic populations carry binary labels") {
  PopulationSpec spec;
  spec.participants = 3;
  spec.samples_per_participant = 30;
  spec.feature_dim = 4;
  spec.control_samples = 30;
  spec.kind = ModelKind::logistic_regression;
  Population pop = generate_population(spec, Rng(99));
  bool saw_one = false, saw_zero = false;
  for (const auto& part : pop.participants)
    for (double y : part.labels) {
      CHECK((y == 0.0 || y == 1.0));
      (y > 0.5 ? saw_one : saw_zero) = true;
    }
  CHECK(saw_one);
  CHECK(saw_zero);
}

TEST_CASE("pooling keeps every sample in participant order") {
  PopulationSpec spec;
  spec.participants = 4;
  spec.samples_per_participant = 5;
  spec.feature_dim = 2;
  spec.control_samples = 5;
  Population pop = generate_population(spec, Rng(1));
  PrivateDataset pooled = pool_datasets(pop.participants);
  CHECK(pooled.size() == 20);
  CHECK(pooled.rows[0] == pop.participants[0].rows[0]);
  CHECK(pooled.rows[5] == pop.participants[1].rows[0]);
  CHECK(pooled.labels[19] == pop.participants[3].labels[4]);
}

TEST_CASE("aggregate blobs round-trip through the wide codec") {
  FixedPointCodec codec;
  AggregateBlob blob;
  blob.round = 3;
  blob.part.count = 7;
  blob.part.sum = {100.25, -350.5, 0.0};
  auto bytes = blob.serialize(codec);
  AggregateBlob back = AggregateBlob::deserialize(bytes, codec);
  CHECK(back.round == 3);
  CHECK(back.part.count == 7);
  CHECK(back.part.sum == blob.part.sum);
}
