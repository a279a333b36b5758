// Acceptance suite: one PASS/FAIL line per exit criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "filterlens/error.hpp"
#include "filterlens/metrics.hpp"
#include "filterlens/pca.hpp"
#include "filterlens/report.hpp"
#include "filterlens/shift.hpp"
#include "oracles.hpp"

using namespace filterlens;
using namespace filterlens::testing;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- criteria -------------------------------------------------------------

Check pca_oracle_equivalence() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> rows(2, 500);
  double worst_ratio = 0.0, worst_roundtrip = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto fm = random_filters(rng, rows(rng));
    const auto model = fit_pca(fm);
    const auto oracle = covariance_ratio_oracle(fm);
    for (std::size_t i = 0; i < 9; ++i) {
      worst_ratio = std::max(worst_ratio, std::abs(model.explained_variance_ratio[i] - oracle[i]));
    }
    const auto back = reconstruct(model, project(model, fm));
    for (std::size_t i = 0; i < fm.data().size(); ++i) {
      worst_roundtrip = std::max(worst_roundtrip,
                                 static_cast<double>(std::abs(back.data()[i] - fm.data()[i])));
    }
  }
  const double elapsed = seconds_since(t0);
  c.require(worst_ratio <= 1e-8, "ratio error " + fmt(worst_ratio) + " > 1e-8");
  c.require(worst_roundtrip <= 1e-6, "round-trip error " + fmt(worst_roundtrip) + " > 1e-6");
  c.require(elapsed < 10.0, "runtime " + fmt(elapsed) + " s >= 10 s");
  if (c.ok) {
    c.detail = "max ratio err " + fmt(worst_ratio) + ", max round-trip err " +
               fmt(worst_roundtrip) + ", " + fmt(elapsed) + " s";
  }
  return c;
}

Check entropy_endpoints() {
  Check c;
  std::vector<float> one(2 * 9, 0.0f);
  one[0] = 1.0f;
  one[9] = -1.0f;
  const double h0 = variance_entropy(FilterMatrix(one)).value;

  std::vector<float> iso;
  for (std::size_t i = 0; i < 9; ++i) {
    for (float s : {1.0f, -1.0f}) {
      std::array<float, 9> row{};
      row[i] = s;
      iso.insert(iso.end(), row.begin(), row.end());
    }
  }
  const double hmax = variance_entropy(FilterMatrix(iso)).value;
  c.require(h0 == 0.0, "one-direction entropy " + fmt(h0) + " != 0");
  c.require(std::abs(hmax - 0.9542) <= 1e-3, "isotropic entropy " + fmt(hmax));
  if (c.ok) c.detail = "H=" + fmt(h0) + " and H=" + fmt(hmax);
  return c;
}

Check orthogonality_endpoints() {
  Check c;
  // Orthonormal banks: c_out = 4 disjoint unit vectors of length 18.
  std::vector<float> ortho(4 * 18, 0.0f);
  for (std::size_t o = 0; o < 4; ++o) ortho[o * 18 + 3 * o] = 1.0f;
  const auto v1 = orthogonality(make_layer("o", 4, 2, ortho));

  std::mt19937_64 rng(1002);
  auto bank = random_floats(rng, 27);
  std::vector<float> dup = bank;
  dup.insert(dup.end(), bank.begin(), bank.end());
  const auto v0 = orthogonality(make_layer("d", 2, 3, dup));

  c.require(v1 && *v1 == 1.0, "orthonormal banks gave " + (v1 ? fmt(*v1) : "missing"));
  c.require(v0 && *v0 == 0.0, "duplicated banks gave " + (v0 ? fmt(*v0) : "missing"));

  std::uniform_int_distribution<std::size_t> c_out(2, 32), c_in(1, 16);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto layer = random_layer(rng, "r", c_out(rng), c_in(rng));
    const auto v = orthogonality(layer);
    if (!v) {
      c.require(false, "random layer reported no orthogonality");
      break;
    }
    worst = std::max(worst, std::abs(*v - pairwise_cosine_orthogonality(layer)));
  }
  c.require(worst <= 1e-8, "oracle disagreement " + fmt(worst));
  if (c.ok) c.detail = "exact endpoints, max oracle err " + fmt(worst);
  return c;
}

Check sparsity_oracle() {
  Check c;
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<std::size_t> c_out(1, 24), c_in(1, 12);
  std::uniform_real_distribution<float> scale(0.001f, 1000.0f);
  std::size_t sparse_seen = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto layer = random_layer(rng, "s", c_out(rng), c_in(rng));
    for (std::size_t r = 0; r < layer.filter_count(); ++r) {
      const auto pick = rng() % 4;
      const float s = pick == 0 ? 0.005f : (pick == 1 ? 0.02f : 1.0f);
      for (std::size_t j = 0; j < 9; ++j) layer.weights[r * 9 + j] *= s;
    }
    const auto oracle = literal_sparse_rows(layer.weights);
    const auto fm = flatten_layer(layer);
    const auto mask = sparse_mask(fm);
    c.require(mask.mask == oracle, "mask differs from literal oracle in layer " + std::to_string(trial));
    const double expected =
        static_cast<double>(std::count(oracle.begin(), oracle.end(), true)) / oracle.size();
    c.require(sparsity_ratio(fm) == expected, "ratio differs in layer " + std::to_string(trial));
    sparse_seen += mask.sparse_count();

    if (trial < 10) {
      const float k = scale(rng);
      auto scaled = layer;
      for (auto& w : scaled.weights) w *= k;
      c.require(sparse_mask(flatten_layer(scaled)).mask == mask.mask,
                "scaling by " + fmt(k) + " changed the mask");
    }
  }
  c.require(sparse_seen > 0, "no sparse filters generated");
  if (c.ok) c.detail = "100 layers, " + std::to_string(sparse_seen) + " sparse filters, 10 scalings";
  return c;
}

Check kl_properties() {
  Check c;
  // Oracle first: direct summation of the two-bin case.
  const double oracle = symmetric_kl_oracle({0.5, 0.5}, {0.25, 0.75});
  c.require(std::abs(oracle - 0.2747) <= 1e-3, "oracle two-bin value " + fmt(oracle));

  HistogramSet p, q;
  for (std::size_t a = 0; a < 9; ++a) {
    p.axes[a].edges = q.axes[a].edges = {0.0, 0.5, 1.0};
    p.axes[a].probabilities = q.axes[a].probabilities = {0.5, 0.5};
  }
  q.axes[0].probabilities = {0.25, 0.75};
  const std::array<double, 9> w{1, 0, 0, 0, 0, 0, 0, 0, 0};
  const double two_bin = symmetric_kl(p, q, w).kl;
  c.require(std::abs(two_bin - 0.2747) <= 1e-3, "two-bin value " + fmt(two_bin));
  c.require(std::abs(two_bin - oracle) <= 1e-15, "implementation differs from oracle");

  std::mt19937_64 rng(1004);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    CoefficientMatrix a, b;
    a.basis_ref = b.basis_ref = "x";
    a.coeffs.resize(9 * (10 + rng() % 200));
    b.coeffs.resize(9 * (10 + rng() % 200));
    const double shift = u(rng);
    for (auto& x : a.coeffs) x = g(rng);
    for (auto& x : b.coeffs) x = g(rng) + shift;
    const auto [ha, hb] = build_histograms(a, b, 2 + rng() % 100);
    std::array<double, 9> weights;
    for (auto& x : weights) x = u(rng);
    const auto ab = symmetric_kl(ha, hb, weights);
    const auto ba = symmetric_kl(hb, ha, weights);
    c.require(ab.kl == ba.kl && ab.per_axis == ba.per_axis, "asymmetric result");
    c.require(ab.kl >= 0.0, "negative divergence");
    c.require(symmetric_kl(ha, ha, weights).kl == 0.0, "non-zero self divergence");
    const auto [hs, hs2] = build_histograms(a, a, 50);
    c.require(symmetric_kl(hs, hs2, weights).kl == 0.0, "identical populations not zero");
  }
  if (c.ok) c.detail = "two-bin " + fmt(two_bin) + " (oracle " + fmt(oracle) + "), 100 random pairs";
  return c;
}

std::vector<ModelRecord> axis_population(std::mt19937_64& rng, const std::string& prefix,
                                         std::size_t axis) {
  std::vector<ConvLayerRecord> layers;
  for (int l = 0; l < 10; ++l) layers.push_back(axis_layer(rng, "conv" + std::to_string(l), axis, 8, 4));
  return {make_model(prefix, std::move(layers))};
}

Check pipeline_shift_detection() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1005);
  const auto a = axis_population(rng, "A", 0);
  const auto b = axis_population(rng, "B", 1);
  const auto ab = shift_pipeline(a, b, {});
  const auto aa = shift_pipeline(a, a, {});
  double min_ab = 1e300, max_aa = 0.0;
  for (const auto& r : ab.reports) {
    c.require(r.flags.empty(), r.group + " empty in A vs B");
    min_ab = std::min(min_ab, r.kl);
  }
  for (const auto& r : aa.reports) {
    c.require(r.flags.empty(), r.group + " empty in A vs A");
    max_aa = std::max(max_aa, r.kl);
  }
  const double elapsed = seconds_since(t0);
  c.require(ab.reports.size() == 11, "expected FIRST_LAYER + 10 deciles");
  c.require(min_ab > 1.0, "A vs B minimum kl " + fmt(min_ab));
  c.require(max_aa == 0.0, "A vs A maximum kl " + fmt(max_aa));
  c.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
  if (c.ok) {
    c.detail = "min A/B kl " + fmt(min_ab) + ", max A/A kl " + fmt(max_aa) + ", " +
               fmt(elapsed) + " s";
  }
  return c;
}

Check depth_grouping() {
  Check c;
  std::vector<DepthAssignment> got;
  for (std::size_t k = 0; k < 11; ++k) got.push_back(assign_depth(k, 11));
  const std::size_t expected[] = {0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (std::size_t k = 0; k < 11; ++k) {
    c.require(got[k].decile == expected[k], "rank " + std::to_string(k) + " in decile " +
                                                std::to_string(got[k].decile));
  }

  // Through the CLI command, with and without the flag.
  std::mt19937_64 rng(1006);
  std::vector<ConvLayerRecord> layers;
  for (int l = 0; l < 11; ++l) layers.push_back(axis_layer(rng, "conv" + std::to_string(l), 0, 3, 2));
  const auto dir = scratch_dir("acceptance_depth");
  write_container(make_model("deep", layers), dir / "deep.nfw");

  auto run = [&](bool exclude, const std::string& out) {
    AnalysisConfig cfg;
    cfg.inputs_p = cfg.inputs_q = {(dir / "deep.nfw").string()};
    cfg.out_dir = dir / out;
    cfg.exclude_first_from_deciles = exclude;
    std::ostringstream log;
    if (cmd_shift(cfg, log) != kExitOk) throw Error("cmd_shift failed: " + log.str());
    return shift_reports_from_json(slurp(dir / out / "shift.json"));
  };
  const auto with = run(false, "with");
  const auto without = run(true, "without");
  const std::vector<ModelRecord> models{make_model("deep", layers)};
  const auto g_with = depth_groups(models, false);
  const auto g_without = depth_groups(models, true);

  c.require(with.size() == 11 && with[0].group == "FIRST_LAYER" && with[0].flags.empty(),
            "missing FIRST_LAYER report");
  c.require(with[1].group == "DECILE_0" && with[1].n_p == 12 && without[1].n_p == 6,
            "decile 0 filter counts " + std::to_string(with[1].n_p) + " -> " +
                std::to_string(without[1].n_p));
  for (std::size_t g = 2; g < with.size(); ++g) {
    c.require(with[g].n_p == without[g].n_p, with[g].group + " changed");
  }
  c.require(g_with[1].members.size() == 2 && g_without[1].members.size() == 1 &&
                g_without[1].members[0].layer_name == "conv1",
            "decile 0 membership");
  if (c.ok) c.detail = "deciles 0,0,1..9; exclude flag removes conv0 (6 filters) from DECILE_0";
  return c;
}

Check determinism() {
  Check c;
  std::mt19937_64 rng(1007);
  const auto dir = scratch_dir("acceptance_determinism");
  std::filesystem::create_directories(dir / "p");
  std::filesystem::create_directories(dir / "q");
  for (int m = 0; m < 3; ++m) {
    std::vector<ConvLayerRecord> lp, lq;
    for (int l = 0; l < 6; ++l) {
      lp.push_back(random_layer(rng, "c" + std::to_string(l), 16, 8));
      lq.push_back(axis_layer(rng, "c" + std::to_string(l), l % 9, 16, 8, 0.3f));
    }
    write_container(make_model("p" + std::to_string(m), lp), dir / "p" / ("p" + std::to_string(m) + ".nfw"));
    write_container(make_model("q" + std::to_string(m), lq), dir / "q" / ("q" + std::to_string(m) + ".nfw"));
  }
  auto run = [&](const std::string& out) {
    AnalysisConfig cfg;
    cfg.inputs_p = {(dir / "p" / "*.nfw").string()};
    cfg.inputs_q = {(dir / "q" / "*.nfw").string()};
    cfg.out_dir = dir / out;
    std::ostringstream log;
    const int rm = cmd_metrics(cfg, log);
    const int rs = cmd_shift(cfg, log);
    if (rm != kExitOk || rs != kExitOk) throw Error("command failed: " + log.str());
  };
  run("run1");
  run("run2");
  for (const char* f : {"metrics.csv", "shift.json", "basis.json"}) {
    const auto a = slurp(dir / "run1" / f);
    c.require(!a.empty() && a == slurp(dir / "run2" / f), std::string(f) + " differs between runs");
  }
  if (c.ok) c.detail = "metrics.csv, shift.json, basis.json byte-identical";
  return c;
}

// Optional: needs the published filter collection exported to NFW under
// $FILTERLENS_REFERENCE_DATA/{normal,robust}/*.nfw with dataset tags
// cifar10, cifar100 and imagenet1k.
std::optional<Check> reference_dataset() {
  const char* root = std::getenv("FILTERLENS_REFERENCE_DATA");
  if (root == nullptr) return std::nullopt;
  Check c;
  const std::filesystem::path base(root);
  std::ostringstream log;
  const std::vector<std::string> normal_glob{(base / "normal" / "*.nfw").string()};
  const std::vector<std::string> robust_glob{(base / "robust" / "*.nfw").string()};
  const auto normal = load_models(expand_globs(normal_glob), log).models;
  const auto robust = load_models(expand_globs(robust_glob), log).models;
  if (normal.empty() || robust.empty()) {
    c.require(false, "no containers under " + base.string());
    return c;
  }
  std::vector<FilterMatrix> filters;
  for (const auto& m : normal) {
    for (const auto& layer : select_3x3_layers(m)) {
      const auto fm = flatten_layer(layer);
      const auto mask = sparse_mask(fm);
      if (mask.sparse_count() == fm.rows()) continue;
      filters.push_back(normalize_filters(drop_sparse(fm, mask)));
    }
  }
  const double first = fit_shared_basis(filters).explained_variance_ratio[0];
  c.require(std::abs(first - 0.67) <= 0.03, "first-component ratio " + fmt(first));

  ShiftOptions opt;
  opt.grouping = Grouping::kByDataset;
  const auto result = shift_pipeline(robust, normal, opt);
  auto kl_of = [&](const std::string& tag) {
    for (const auto& r : result.reports) {
      if (r.group == tag && r.flags.empty()) return r.kl;
    }
    throw Error("dataset " + tag + " missing");
  };
  const double c10 = kl_of("cifar10"), c100 = kl_of("cifar100"), imnet = kl_of("imagenet1k");
  c.require(c10 > c100 && c100 > imnet,
            "ordering " + fmt(c10) + ", " + fmt(c100) + ", " + fmt(imnet));
  if (c.ok) c.detail = "ratio " + fmt(first) + "; kl " + fmt(c10) + " > " + fmt(c100) + " > " + fmt(imnet);
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Check()> run;
  };
  const Criterion criteria[] = {
      {"PCA oracle equivalence", pca_oracle_equivalence},
      {"Entropy endpoints", entropy_endpoints},
      {"Orthogonality endpoints and oracle", orthogonality_endpoints},
      {"Sparsity oracle and scale invariance", sparsity_oracle},
      {"KL properties", kl_properties},
      {"Pipeline shift detection", pipeline_shift_detection},
      {"Depth grouping", depth_grouping},
      {"Determinism", determinism},
  };
  int failures = 0;
  for (const auto& criterion : criteria) {
    Check result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", result.ok ? "PASS" : "FAIL", criterion.name,
                result.detail.c_str());
    failures += result.ok ? 0 : 1;
  }
  try {
    if (const auto ref = reference_dataset()) {
      std::printf("[%s] Reference dataset (optional): %s\n", ref->ok ? "PASS" : "FAIL",
                  ref->detail.c_str());
      failures += ref->ok ? 0 : 1;
    } else {
      std::printf("[SKIP] Reference dataset (optional): FILTERLENS_REFERENCE_DATA not set\n");
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] Reference dataset (optional): exception: %s\n", e.what());
    ++failures;
  }
  std::printf("%d criterion failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
