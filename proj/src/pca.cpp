#include "filterlens/pca.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "filterlens/error.hpp"
#include "filterlens/kernels/kernels.hpp"
#include "filterlens/parallel.hpp"
#include "filterlens/sym_eigen.hpp"

namespace filterlens {
namespace {

constexpr std::size_t K = kFilterSize;

// Fixed block size keeps the reduction order, and therefore the result,
// independent of the worker count.
constexpr std::size_t kBlockRows = std::size_t{1} << 15;

struct Block {
  const FilterMatrix* fm;
  std::size_t first_row;
  std::size_t n_rows;
};

std::vector<Block> make_blocks(std::span<const FilterMatrix> populations) {
  std::vector<Block> blocks;
  for (const auto& fm : populations) {
    for (std::size_t r = 0; r < fm.rows(); r += kBlockRows) {
      blocks.push_back({&fm, r, std::min(kBlockRows, fm.rows() - r)});
    }
  }
  return blocks;
}

const float* block_data(const Block& b) { return b.fm->data().data() + b.first_row * K; }

std::array<double, 9> column_means(const std::vector<Block>& blocks, std::size_t n) {
  const auto& k = kernels::active();
  std::vector<std::array<double, 9>> partial(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    partial[i].fill(0.0);
    k.column_sums(block_data(blocks[i]), blocks[i].n_rows, partial[i].data());
  });
  std::array<double, 9> mean{};
  for (const auto& p : partial) {
    for (std::size_t j = 0; j < K; ++j) mean[j] += p[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  return mean;
}

std::array<double, 81> scatter_matrix(const std::vector<Block>& blocks,
                                      const std::array<double, 9>& mean) {
  const auto& k = kernels::active();
  std::vector<std::array<double, 81>> partial(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    partial[i].fill(0.0);
    k.centered_scatter(block_data(blocks[i]), blocks[i].n_rows, mean.data(),
                       partial[i].data());
  });
  std::array<double, 81> scatter{};
  for (const auto& p : partial) {
    for (std::size_t j = 0; j < 81; ++j) scatter[j] += p[j];
  }
  // Symmetrize against accumulation-order residue.
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = a + 1; b < K; ++b) {
      const double s = 0.5 * (scatter[a * K + b] + scatter[b * K + a]);
      scatter[a * K + b] = scatter[b * K + a] = s;
    }
  }
  return scatter;
}

// Largest-magnitude entry positive; the earliest index wins ties.
void fix_sign(std::span<double, 9> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < K; ++j) {
    if (std::fabs(v[j]) > std::fabs(v[best])) best = j;
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

PcaModel fit_blocks(const std::vector<Block>& blocks, std::size_t n) {
  if (n < 2) {
    throw SampleCountError("PCA needs at least 2 filters, got " + std::to_string(n));
  }
  PcaModel model;
  model.sample_count = n;
  model.mean = column_means(blocks, n);
  const auto eig = sym_eigen9(scatter_matrix(blocks, model.mean));

  model.components = eig.vectors;
  std::array<double, 9> variance{};
  double total = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double sigma_sq = std::max(eig.values[i], 0.0);
    model.singular_values[i] = std::sqrt(sigma_sq);
    variance[i] = sigma_sq / static_cast<double>(n - 1);
    total += variance[i];
    fix_sign(std::span<double, 9>(model.components.data() + i * K, K));
  }
  if (total > 0.0) {
    for (std::size_t i = 0; i < K; ++i) model.explained_variance_ratio[i] = variance[i] / total;
  } else {
    model.degenerate = true;
  }
  return model;
}

void hash_bytes(std::uint64_t& h, const void* p, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
}

template <std::size_t N>
std::array<double, N> json_array(const nlohmann::json& j, const char* key) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    throw FormatError(std::string("basis JSON: \"") + key + "\" must have " +
                      std::to_string(N) + " entries");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = arr[i].get<double>();
  return out;
}

}  // namespace

std::string PcaModel::basis_id() const {
  std::uint64_t h = 14695981039346656037ull;
  hash_bytes(h, mean.data(), sizeof(mean));
  hash_bytes(h, components.data(), sizeof(components));
  const std::uint64_t n = sample_count;
  hash_bytes(h, &n, sizeof(n));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PcaModel fit_pca(const FilterMatrix& fm) {
  const FilterMatrix* one = &fm;
  return fit_blocks(make_blocks(std::span<const FilterMatrix>(one, 1)), fm.rows());
}

PcaModel fit_shared_basis(std::span<const FilterMatrix> populations) {
  std::size_t n = 0;
  for (const auto& p : populations) n += p.rows();
  return fit_blocks(make_blocks(populations), n);
}

CoefficientMatrix project(const PcaModel& model, const FilterMatrix& fm) {
  const auto& k = kernels::active();
  CoefficientMatrix out;
  out.basis_ref = model.basis_id();
  out.coeffs.resize(fm.rows() * K);
  const std::size_t n_blocks = (fm.rows() + kBlockRows - 1) / kBlockRows;
  parallel_for(n_blocks, [&](std::size_t b) {
    const std::size_t first = b * kBlockRows;
    const std::size_t rows = std::min(kBlockRows, fm.rows() - first);
    k.project(fm.data().data() + first * K, rows, model.mean.data(),
              model.components.data(), out.coeffs.data() + first * K);
  });
  return out;
}

FilterMatrix reconstruct(const PcaModel& model, const CoefficientMatrix& cm) {
  if (cm.basis_ref != model.basis_id()) {
    throw BasisMismatchError("coefficients were projected onto basis " + cm.basis_ref +
                             ", not " + model.basis_id());
  }
  if (cm.coeffs.size() % K != 0) throw ShapeError("coefficient matrix must have 9 columns");
  std::vector<float> out(cm.coeffs.size());
  for (std::size_t r = 0; r < cm.rows(); ++r) {
    const auto c = cm.row(r);
    for (std::size_t j = 0; j < K; ++j) {
      double acc = model.mean[j];
      for (std::size_t i = 0; i < K; ++i) acc += c[i] * model.components[i * K + j];
      out[r * K + j] = static_cast<float>(acc);
    }
  }
  return FilterMatrix(std::move(out));
}

std::string pca_to_json(const PcaModel& model) {
  nlohmann::json j;
  j["mean"] = model.mean;
  j["components"] = model.components;
  j["singular_values"] = model.singular_values;
  j["explained_variance_ratio"] = model.explained_variance_ratio;
  j["sample_count"] = model.sample_count;
  j["degenerate"] = model.degenerate;
  return j.dump(2) + "\n";
}

PcaModel pca_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PcaModel model;
    model.mean = json_array<9>(j, "mean");
    model.components = json_array<81>(j, "components");
    model.singular_values = json_array<9>(j, "singular_values");
    model.explained_variance_ratio = json_array<9>(j, "explained_variance_ratio");
    model.sample_count = j.at("sample_count").get<std::size_t>();
    model.degenerate = j.value("degenerate", false);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("basis JSON: ") + e.what());
  }
}

void save_pca_model(const PcaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << pca_to_json(model);
}

PcaModel load_pca_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return pca_from_json(ss.str());
}

}  // namespace filterlens
