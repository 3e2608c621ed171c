#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "sketchlang/codebook.hpp"
#include "sketchlang/util.hpp"

using namespace sketchlang;

namespace {

// Independent oracle: exact optimal 1-D k-means SSE by dynamic programming
// over sorted values (clusters of an optimal solution are contiguous).
double dp_kmeans_sse(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end());
  int n = (int)v.size();
  std::vector<double> pre(n + 1, 0), pre2(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    pre[i + 1] = pre[i] + v[i];
    pre2[i + 1] = pre2[i] + v[i] * v[i];
  }
  auto cost = [&](int i, int j) {  // SSE of v[i..j] inclusive
    double s = pre[j + 1] - pre[i];
    double s2 = pre2[j + 1] - pre2[i];
    int m = j - i + 1;
    return s2 - s * s / m;
  };
  const double inf = 1e300;
  std::vector<double> prev(n, 0), cur(n, 0);
  for (int j = 0; j < n; ++j) prev[j] = cost(0, j);
  for (int m = 2; m <= k; ++m) {
    for (int j = 0; j < n; ++j) {
      double best = m > j ? 0.0 : inf;  // more clusters than points: SSE 0
      for (int i = m - 1; i <= j; ++i) {
        best = std::min(best, prev[i - 1] + cost(i, j));
      }
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[n - 1];
}

std::vector<double> cluster_mixture(int n, int clusters, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    int c = (int)uniform_index(rng, clusters);
    double center = -1.0 + 2.0 * (c + 0.5) / clusters;
    out.push_back(center + 0.01 * normal(rng));
  }
  return out;
}

}  // namespace

TEST_CASE("two-cluster toy problem hits the known optimum") {
  // {0,0,0,1,1,10}: best 2-split is {0,0,0,1,1} | {10}
  std::vector<double> v{0, 0, 0, 1, 1, 10};
  KMeansOptions opts;
  opts.k = 2;
  opts.seed = 7;
  Codebook cb = fit_codebook(ParamType::Location, v, opts);
  REQUIRE(cb.k() == 2);
  CHECK(cb.centers[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(cb.centers[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(cb.sse(v) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(dp_kmeans_sse(v, 2) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("encode picks the nearest center, midpoint ties go low") {
  Codebook cb;
  cb.centers = {0.0, 1.0, 4.0};
  CHECK(cb.encode(-5) == 0);
  CHECK(cb.encode(0.49) == 0);
  CHECK(cb.encode(0.5) == 0);  // exact midpoint -> lower bin
  CHECK(cb.encode(0.51) == 1);
  CHECK(cb.encode(2.5) == 1);
  CHECK(cb.encode(2.51) == 2);
  CHECK(cb.encode(100) == 2);
  CHECK(cb.decode(1) == 1.0);
  CHECK_THROWS(cb.decode(3));
}

TEST_CASE("fewer distinct values than k dedupes") {
  std::vector<double> v{5, 5, 5, 7, 7, 5};
  KMeansOptions opts;
  opts.k = 8;
  Codebook cb = fit_codebook(ParamType::Radius, v, opts);
  REQUIRE(cb.k() == 2);
  CHECK(cb.centers[0] == 5.0);
  CHECK(cb.centers[1] == 7.0);
  CHECK(cb.sse(v) == 0.0);
}

TEST_CASE("empty value pool degenerates to a single zero center") {
  Codebook cb = fit_codebook(ParamType::Radius, {}, {});
  REQUIRE(cb.k() == 1);
  CHECK(cb.centers[0] == 0.0);
}

TEST_CASE("fit matches the DP optimum on separated mixtures") {
  std::vector<double> v = cluster_mixture(400, 8, 11);
  for (int k : {2, 4, 8}) {
    KMeansOptions opts;
    opts.k = k;
    opts.seed = 3;
    Codebook cb = fit_codebook(ParamType::Location, v, opts);
    double got = cb.sse(v);
    double want = dp_kmeans_sse(v, k);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("sse is non-increasing in k") {
  std::vector<double> v = cluster_mixture(600, 16, 5);
  double prev = 1e300;
  for (int k : {2, 4, 8, 16, 32, 64}) {
    KMeansOptions opts;
    opts.k = k;
    opts.seed = 1;
    double sse = fit_codebook(ParamType::Location, v, opts).sse(v);
    CHECK(sse <= prev + 1e-12);
    prev = sse;
  }
}

TEST_CASE("fitting is deterministic in the seed") {
  std::vector<double> v = cluster_mixture(300, 5, 2);
  KMeansOptions opts;
  opts.k = 6;
  opts.seed = 42;
  Codebook a = fit_codebook(ParamType::Range, v, opts);
  Codebook b = fit_codebook(ParamType::Range, v, opts);
  CHECK(a.centers == b.centers);
}

TEST_CASE("centers come out sorted and distinct") {
  std::vector<double> v = cluster_mixture(500, 3, 9);
  KMeansOptions opts;
  opts.k = 12;
  opts.seed = 0;
  Codebook cb = fit_codebook(ParamType::Location, v, opts);
  for (int i = 1; i < cb.k(); ++i) {
    CHECK(cb.centers[i - 1] < cb.centers[i]);
  }
}

TEST_CASE("corpus-level codebooks pool the right values") {
  std::vector<Sketch> corpus{fixtures::rectangle(), fixtures::slot()};
  CHECK(collect_values(corpus, ParamType::Location).size() ==
        2 * (corpus[0].primitives.size() + corpus[1].primitives.size()));
  // only the slot has round primitives: two arcs
  CHECK(collect_values(corpus, ParamType::Radius).size() == 2);
  CHECK(collect_values(corpus, ParamType::Rotation).size() == 2);
  // ranges: 4 rectangle lines + 2 slot lines + 2 slot arcs, two values each
  CHECK(collect_values(corpus, ParamType::Range).size() == 16);

  KMeansOptions opts;
  opts.k = 16;
  CodebookSet set = fit_codebooks(corpus, opts);
  CHECK(set.of(ParamType::Rotation).centers == std::vector<double>{-1.0, 1.0});
  CHECK(set.corpus_digest == corpus_digest(corpus));
  CHECK(set.digest() != 0);

  Sketch q = quantize_sketch(corpus[0], set);
  for (size_t i = 0; i < q.primitives.size(); ++i) {
    CHECK(q.primitives[i].kind == corpus[0].primitives[i].kind);
  }
}

TEST_CASE("rotation flags survive quantization exactly") {
  std::vector<Sketch> corpus{fixtures::slot()};
  KMeansOptions opts;
  opts.k = 8;
  CodebookSet set = fit_codebooks(corpus, opts);
  Sketch q = quantize_sketch(corpus[0], set);
  CHECK(winding(q.primitives[2]) == -1.0);
  CHECK(winding(q.primitives[3]) == -1.0);
}
