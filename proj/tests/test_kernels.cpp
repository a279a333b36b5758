#include <doctest.h>

#include <cmath>
#include <random>

#include "filterlens/kernels/kernels.hpp"
#include "oracles.hpp"

using namespace filterlens;
using filterlens::testing::random_floats;

namespace {

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("active kernel table is one of the known variants") {
  const auto& k = kernels::active();
  CHECK((k.name == "scalar" || k.name == "avx2"));
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const auto& ref = kernels::scalar_table();
  std::mt19937_64 rng(11);

  for (std::size_t n_rows : {0u, 1u, 2u, 3u, 7u, 64u, 1001u}) {
    CAPTURE(n_rows);
    const auto rows = random_floats(rng, n_rows * 9, -3.0f, 3.0f);

    // Max is exact: no rounding involved.
    CHECK(simd->max_abs(rows.data(), rows.size()) == ref.max_abs(rows.data(), rows.size()));
    std::vector<float> ra(n_rows), rb(n_rows);
    ref.row_max_abs(rows.data(), n_rows, ra.data());
    simd->row_max_abs(rows.data(), n_rows, rb.data());
    CHECK(ra == rb);

    std::array<double, 9> sa{}, sb{};
    ref.column_sums(rows.data(), n_rows, sa.data());
    simd->column_sums(rows.data(), n_rows, sb.data());
    for (std::size_t j = 0; j < 9; ++j) CHECK(rel_diff(sa[j], sb[j]) < 1e-12);

    std::array<double, 9> mean{};
    for (std::size_t j = 0; j < 9; ++j) mean[j] = 0.1 * static_cast<double>(j) - 0.4;
    std::array<double, 81> ca{}, cb{};
    ref.centered_scatter(rows.data(), n_rows, mean.data(), ca.data());
    simd->centered_scatter(rows.data(), n_rows, mean.data(), cb.data());
    for (std::size_t j = 0; j < 81; ++j) CHECK(rel_diff(ca[j], cb[j]) < 1e-12);

    std::array<double, 81> basis{};
    std::normal_distribution<double> g;
    for (auto& b : basis) b = g(rng);
    std::vector<double> pa(n_rows * 9), pb(n_rows * 9);
    ref.project(rows.data(), n_rows, mean.data(), basis.data(), pa.data());
    simd->project(rows.data(), n_rows, mean.data(), basis.data(), pb.data());
    for (std::size_t j = 0; j < pa.size(); ++j) CHECK(rel_diff(pa[j], pb[j]) < 1e-12);
  }

  for (std::size_t n : {0u, 1u, 5u, 8u, 9u, 36u, 4607u}) {
    CAPTURE(n);
    const auto a = random_floats(rng, n);
    const auto b = random_floats(rng, n);
    CHECK(rel_diff(ref.dot(a.data(), b.data(), n), simd->dot(a.data(), b.data(), n)) < 1e-12);
    CHECK(simd->max_abs(a.data(), n) == ref.max_abs(a.data(), n));
  }
}

TEST_CASE("max_abs handles negative extremes and signed zero") {
  const std::vector<float> v{-0.0f, 0.5f, -7.25f, 3.0f, 0.0f, -1.0f, 2.0f, 6.0f, -7.0f, 1.0f};
  CHECK(kernels::scalar_table().max_abs(v.data(), v.size()) == 7.25f);
  if (const auto* simd = kernels::avx2_table()) {
    CHECK(simd->max_abs(v.data(), v.size()) == 7.25f);
  }
}
