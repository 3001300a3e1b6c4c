// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "popsyn/baseline.hpp"
#include "popsyn/cgan.hpp"
#include "popsyn/cli.hpp"
#include "popsyn/cvae.hpp"
#include "popsyn/distribution.hpp"
#include "popsyn/error.hpp"
#include "popsyn/losses.hpp"
#include "popsyn/metrics.hpp"
#include "popsyn/model_io.hpp"
#include "popsyn/split.hpp"
#include "popsyn/synthetic.hpp"
#include "../tests/support.hpp"

using namespace popsyn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- shared benchmark runs --------------------------------------------------

constexpr std::size_t kBenchmarkRecords = 6893;
constexpr std::size_t kSamplesPerRow = 10;

struct Benchmark {
  Schema schema = Schema::housing(SchemaVariant::extended);
  std::vector<AgentRecord> records, train, test;
  // First cross-validation fold of the training pool, as the protocol uses it.
  std::vector<AgentRecord> fold_train, fold_validation;
};

Benchmark make_benchmark(std::uint64_t seed) {
  Benchmark b;
  SeededRng rng(seed);
  b.records = generate_synthetic_dataset(b.schema, kBenchmarkRecords, rng);
  const auto split = make_split(b.records, choose_application_selector(b.records, b.schema), rng);
  b.train = select_records(b.records, split.train_ids);
  b.test = select_records(b.records, split.test_ids);
  b.fold_train = select_records(b.records, split.folds[0].train);
  b.fold_validation = select_records(b.records, split.folds[0].validation);
  return b;
}

struct SeedRun {
  Benchmark bench;
  std::vector<AgentRecord> cvae_samples, cgan_samples;
  TrainTrace cvae_trace, cgan_trace;
  bool cvae_failed = false, cgan_failed = false;
  std::string failure;
};

SeedRun run_seed(std::uint64_t seed) {
  SeedRun run;
  run.bench = make_benchmark(seed);
  const auto& b = run.bench;
  // Defaults are the best reported configurations: the CVAE runs up to 500
  // epochs and keeps its best validation checkpoint, the CGAN runs 51.
  CvaeTrainConfig cvae;
  cvae.seed = seed;
  CganTrainConfig cgan;
  cgan.seed = seed;
  try {
    auto r = train_cvae(b.fold_train, b.schema, cvae, b.fold_validation);
    SeededRng rng = SeededRng(seed).fork(71);
    run.cvae_samples = sample_cvae(r.model, b.test, kSamplesPerRow, rng);
    run.cvae_trace = std::move(r.trace);
  } catch (const TrainingError& e) {
    run.cvae_failed = true;
    run.failure += std::string("cvae: ") + e.what() + "; ";
  }
  try {
    auto r = train_cgan(b.fold_train, b.schema, cgan, b.fold_validation);
    SeededRng rng = SeededRng(seed).fork(72);
    run.cgan_samples = sample_cgan(r.model, b.test, kSamplesPerRow, rng);
    run.cgan_trace = std::move(r.trace);
  } catch (const TrainingError& e) {
    run.cgan_failed = true;
    run.failure += std::string("cgan: ") + e.what() + "; ";
  }
  return run;
}

std::map<std::uint64_t, SeedRun> g_runs;

// Trains every requested seed once; seeds run in parallel when cores allow.
const SeedRun& seed_run(std::uint64_t seed, const std::vector<std::uint64_t>& batch = {}) {
  if (!g_runs.count(seed)) {
    std::vector<std::uint64_t> todo;
    for (auto s : batch.empty() ? std::vector<std::uint64_t>{seed} : batch)
      if (!g_runs.count(s)) todo.push_back(s);
    std::vector<SeedRun> results(todo.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(todo.size()); ++i) results[i] = run_seed(todo[i]);
    for (std::size_t i = 0; i < todo.size(); ++i) g_runs[todo[i]] = std::move(results[i]);
  }
  return g_runs.at(seed);
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

// ---- criteria -------------------------------------------------------------

Outcome criterion1() {
  using V = std::vector<double>;
  const double ln2 = std::log(2.0);
  struct Check {
    const char* name;
    double got, want, tol;
  };
  const Check checks[] = {
      {"cross_entropy", cross_entropy(V{1, 0}, V{0.5, 0.5}), 2 * ln2, 1e-9},
      {"kl(0,1)", kl_divergence(V{0, 0, 0}, V{1, 1, 1}), 0.0, 1e-12},
      {"kl(1,1)", kl_divergence(V{1}, V{1}), 0.5, 1e-9},
      {"discriminator_loss", discriminator_loss(V{0.5, 0.5}, V{0.5, 0.5}), 2 * ln2, 1e-9},
      {"generator_loss", generator_loss(V{0.5, 0.5}), -ln2, 1e-9},
  };
  Outcome o{true, ""};
  for (const auto& c : checks) {
    const double err = std::abs(c.got - c.want);
    if (!(err <= c.tol)) {
      o.pass = false;
      o.detail += std::string(c.name) + " off by " + std::to_string(err) + "; ";
    }
  }
  if (o.pass) o.detail = "5 closed-form loss values within tolerance";
  return o;
}

Outcome criterion2() {
  double worst = 0.0;
  bool untouched = true;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto r = testing::gradient_check(seed);
    worst = std::max({worst, r.cvae, r.discriminator, r.generator});
    untouched = untouched && r.discriminator_untouched_by_generator;
  }
  return {worst <= 1e-4 && untouched,
          "100 seeds, worst relative error " + std::to_string(worst) + " (limit 1e-4)" +
              (untouched ? "" : "; generator step modified discriminator gradients")};
}

// Written out directly: RMSE over the N_c cells divided by the mean cell value 1/N_c.
double brute_srmse(const std::vector<double>& est, const std::vector<double>& truth) {
  long double sq = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const long double d = static_cast<long double>(est[i]) - truth[i];
    sq += d * d;
  }
  const long double n = static_cast<long double>(est.size());
  const long double rmse = std::sqrt(sq / n);
  return static_cast<double>(rmse / (1.0L / n));
}

Outcome criterion3() {
  SeededRng rng(2718);
  double worst = 0.0;
  bool zero_ok = true;
  for (int pair = 0; pair < 1000; ++pair) {
    std::vector<std::size_t> radices;
    std::size_t cells = 1;
    const std::size_t dims = 1 + rng.below(3);
    for (std::size_t d = 0; d < dims; ++d) {
      std::size_t r = 2 + rng.below(4);
      while (cells * r > 24) --r;
      if (r < 2) break;
      radices.push_back(r);
      cells *= r;
    }
    std::vector<std::size_t> features(radices.size());
    for (std::size_t i = 0; i < features.size(); ++i) features[i] = i;
    auto random_probs = [&] {
      std::vector<double> w(cells);
      double s = 0;
      for (auto& v : w) s += (v = rng.below(4) == 0 ? 0.0 : rng.uniform());
      if (s == 0) w[0] = s = 1;
      for (auto& v : w) v /= s;
      return w;
    };
    const auto a = random_probs(), b = random_probs();
    const DistributionTable ta(features, radices, a), tb(features, radices, b);
    worst = std::max(worst, std::abs(srmse(ta, tb) - brute_srmse(a, b)));
    zero_ok = zero_ok && srmse(ta, ta) == 0.0;
  }
  return {worst <= 1e-12 && zero_ok,
          "1000 random table pairs, worst deviation " + std::to_string(worst) + (zero_ok ? "" : "; identical tables not 0")};
}

Outcome criterion4() {
  const auto b = make_benchmark(1);
  const auto table = fit_empirical(b.train, b.schema);
  // Every training row is used as a conditional the same number of times,
  // enough for at least 100,000 samples.
  SeededRng rng(404);
  const std::size_t per_row = (100000 + b.train.size() - 1) / b.train.size();
  const auto samples = sample_baseline(table, b.train, per_row, rng);
  const double s = pooled_marginal_srmse(samples, b.train, b.schema);
  const double zero = zero_sample_pct(samples, b.train, b.schema);
  return {s < 0.05 && zero == 0.0, std::to_string(samples.size()) + " samples, pooled marginal SRMSE " + fixed(s) + " (< 0.05), zero-sample pct " + fixed(zero, 2)};
}

// Draws every output feature independently, from `marginals` or uniformly.
std::vector<AgentRecord> independent_sampler(const Benchmark& b, const std::vector<double>* marginals,
                                             SeededRng& rng) {
  std::vector<AgentRecord> out;
  for (const auto& c : b.test) {
    for (std::size_t k = 0; k < kSamplesPerRow; ++k) {
      AgentRecord r = c;
      std::size_t offset = 0;
      for (std::size_t f = 0; f < b.schema.output_count(); ++f) {
        const std::size_t n = b.schema.feature(f).categories();
        if (marginals) {
          r.values[f] = static_cast<CategoryIndex>(
              rng.categorical(std::span<const double>(marginals->data() + offset, n)));
        } else {
          r.values[f] = static_cast<CategoryIndex>(rng.below(n));
        }
        offset += n;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

Outcome criterion5() {
  const auto& run = seed_run(1, kSeeds);
  if (run.cvae_failed) return {false, run.failure};
  const auto& b = run.bench;
  SeededRng rng(505);
  const auto uniform = independent_sampler(b, nullptr, rng);
  const auto marg = pooled_marginals(b.fold_train, b.schema);
  const auto independent = independent_sampler(b, &marg, rng);
  const double cvae_m = pooled_marginal_srmse(run.cvae_samples, b.test, b.schema);
  const double unif_m = pooled_marginal_srmse(uniform, b.test, b.schema);
  auto biv = [&](const std::vector<AgentRecord>& s) {
    return srmse(build_table(s, b.schema, kBivariate), build_table(b.test, b.schema, kBivariate));
  };
  const double cvae_b = biv(run.cvae_samples), ind_b = biv(independent);
  const bool a = std::isfinite(cvae_m);
  const bool half = cvae_m < 0.5 * unif_m;
  const bool beats = cvae_b < ind_b;
  return {a && half && beats, "marginal " + fixed(cvae_m) + " vs uniform " + fixed(unif_m) + " (need < 50%); " +
                                  "age x nationality " + fixed(cvae_b) + " vs independence " + fixed(ind_b)};
}

Outcome criterion6() {
  const auto& run = seed_run(1, kSeeds);
  if (run.cgan_failed) return {false, run.failure};
  const auto& t = run.cgan_trace;
  bool finite = true;
  for (std::size_t i = 0; i < t.batch_loss.size(); ++i) {
    finite = finite && std::isfinite(t.batch_loss[i]) && std::isfinite(t.generator_loss[i]);
  }
  // Batch means over the final epoch.
  const std::size_t per_epoch = (run.bench.fold_train.size() + CganTrainConfig{}.batch_size - 1) / CganTrainConfig{}.batch_size;
  const std::size_t n = t.d_real_mean.size(), w = std::min(per_epoch, n);
  double dr = 0, df = 0;
  for (std::size_t i = n - w; i < n; ++i) {
    dr += t.d_real_mean[i] / w;
    df += t.d_fake_mean[i] / w;
  }
  const auto distinct = distinct_output_tuples(run.cgan_samples, run.bench.schema);
  const bool ok = finite && dr > 0.2 && dr < 0.8 && df > 0.2 && df < 0.8 && distinct > 10;
  return {ok, std::string(finite ? "no NaN" : "non-finite loss") + ", final-epoch D(real) " + fixed(dr, 3) +
                  ", D(fake) " + fixed(df, 3) + ", " + std::to_string(distinct) + " distinct output tuples"};
}

Outcome criterion7() {
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = seed_run(seed, kSeeds);
    if (run.cvae_failed || run.cgan_failed) {
      detail += "seed " + std::to_string(seed) + " failed (" + run.failure + ") ";
      continue;
    }
    const double cv = pooled_marginal_srmse(run.cvae_samples, run.bench.test, run.bench.schema);
    const double cg = pooled_marginal_srmse(run.cgan_samples, run.bench.test, run.bench.schema);
    wins += cv <= cg;
    detail += "seed " + std::to_string(seed) + " " + fixed(cv, 3) + (cv <= cg ? "<=" : ">") + fixed(cg, 3) + "; ";
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds CVAE <= CGAN (" + detail + ")"};
}

Outcome criterion8() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "popsyn_acceptance_protocol";
  fs::remove_all(root);
  fs::create_directories(root);
  // Full data and both variants; epochs and CGAN width reduced so that two
  // complete protocol runs fit in a few minutes.
  write_text_file((root / "protocol.json").string(), R"({
  "seed": 8,
  "records": 6893,
  "variants": ["original", "extended"],
  "samples_per_row": 10,
  "cvae": {"epochs": 10},
  "cgan": {"epochs": 2, "hidden_units": 256}
})");
  std::ostringstream sink;
  const std::vector<std::string> a{"protocol", "--config", (root / "protocol.json").string(), "--out", (root / "a").string()};
  const std::vector<std::string> b{"protocol", "--config", (root / "protocol.json").string(), "--out", (root / "b").string()};
  if (run_cli(a, sink, sink) != 0 || run_cli(b, sink, sink) != 0) return {false, "protocol run failed: " + sink.str()};
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "timings.json") continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    const auto other = root / "b" / rel;
    if (!fs::exists(other) || read_text_file(entry.path().string()) != read_text_file(other.string())) {
      return {false, rel.string() + " differs between runs"};
    }
    ++compared;
  }
  return {compared >= 10, std::to_string(compared) + " report files byte-identical across two runs"};
}

Outcome criterion9() {
  const auto& run = seed_run(1, kSeeds);
  if (run.cvae_failed || run.cgan_failed) return {false, run.failure};
  const double cv = zero_sample_pct(run.cvae_samples, run.bench.fold_train, run.bench.schema);
  const double cg = zero_sample_pct(run.cgan_samples, run.bench.fold_train, run.bench.schema);
  return {cv > 0 && cg > 0, "zero-sample pct CVAE " + fixed(cv, 2) + ", CGAN " + fixed(cg, 2)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
