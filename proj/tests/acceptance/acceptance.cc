// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcner/cli.h"
#include "gcner/fusion.h"
#include "gcner/gcn.h"
#include "gcner/metrics.h"
#include "oracles.h"
#include "synthetic.h"

namespace gcner {
namespace {

namespace fs = std::filesystem;
using testing::gaussian_matrix;
using testing::uniform_int;

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr int kGradInstances = 20;
constexpr double kOracleAbsTol = 1e-9;
constexpr int kOracleGraphs = 200;
constexpr double kPathTol = 1e-12;
constexpr int kMetricCases = 200;
constexpr double kOverfitAccuracy = 0.99;
constexpr int kOverfitMaxEpochs = 200;
constexpr double kOverfitSeconds = 60.0;
constexpr int kAblationSeeds = 5;
constexpr double kAblationSlack = 0.01;  // F1 points, percent scale

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NormAdj adj_of(int n, std::vector<std::pair<int, int>> edges) {
  return normalize_adjacency(SentenceGraph{n, std::move(edges)});
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// 1. Analytic vs central-difference gradients.
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  double worst_gcn = 0.0, worst_joint = 0.0;

  for (int done = 0; done < kGradInstances;) {
    const int n = uniform_int(gen, 1, 6);
    const int c = uniform_int(gen, 1, 8), h = uniform_int(gen, 1, 8), f = uniform_int(gen, 2, 8);
    const Eigen::MatrixXd x = gaussian_matrix(n, c, gen);
    const NormAdj adj = adj_of(n, testing::random_edges(n, gen, 0.5));
    GcnParams p{gaussian_matrix(c, h, gen, 0.7), gaussian_matrix(h, f, gen, 0.7)};
    if ((adj.multiply(x) * p.w0).cwiseAbs().minCoeff() < 1e-3) continue;  // ReLU kink
    std::vector<int> gold;
    std::vector<std::uint8_t> mask(n, 1);
    for (int i = 0; i < n; ++i) gold.push_back(uniform_int(gen, 0, f - 1));
    const DropoutState d = DropoutState::train(0.3, static_cast<std::uint64_t>(done));
    const GcnGradients g = gcn_backward(x, adj, p, gold, mask, d);
    const auto loss = [&] { return gcn_backward(x, adj, p, gold, mask, d).loss; };
    worst_gcn = std::max(worst_gcn, testing::max_relative_error(
                                        g.w0, testing::numeric_gradient(&p.w0, loss)));
    worst_gcn = std::max(worst_gcn, testing::max_relative_error(
                                        g.w1, testing::numeric_gradient(&p.w1, loss)));
    ++done;
  }

  for (int done = 0; done < kGradInstances;) {
    const int c = uniform_int(gen, 1, 8), h = uniform_int(gen, 1, 8), f = uniform_int(gen, 1, 8);
    const int dim = uniform_int(gen, 1, 8), t = uniform_int(gen, 2, 8);
    std::vector<JointExample> batch(2);
    for (JointExample& ex : batch) {
      const int n = uniform_int(gen, 1, 3);
      for (int w = 0; w < n; ++w) {
        ex.mask.bits.push_back(1);
        if (uniform_int(gen, 0, 2) == 0) ex.mask.bits.push_back(0);
        ex.gold.push_back(uniform_int(gen, 0, t - 1));
      }
      ex.x = gaussian_matrix(n, c, gen);
      ex.adj = normalize_adjacency(build_graph(testing::random_tree(n, gen), n));
      ex.ctx = gaussian_matrix(ex.mask.subword_count(), dim, gen);
    }
    JointParams p;
    p.gcn = GcnParams{gaussian_matrix(c, h, gen, 0.7), gaussian_matrix(h, f, gen, 0.7)};
    p.global_dim = f;
    p.ctx_dim = dim;
    p.w_out = gaussian_matrix(f + dim, t, gen, 0.7);
    p.b = gaussian_matrix(1, t, gen, 0.5);
    bool kink = false;
    for (const JointExample& ex : batch) {
      kink |= (ex.adj.multiply(ex.x) * p.gcn->w0).cwiseAbs().minCoeff() < 1e-3;
    }
    if (kink) continue;
    const std::vector<const JointExample*> ptrs = {&batch[0], &batch[1]};
    const JointDropout d{DropoutState::train(0.3, 100u + done),
                         DropoutState::train(0.4, 200u + done)};
    const JointGradients g = joint_backward(p, ptrs, d);
    const auto loss = [&] { return joint_backward(p, ptrs, d).loss; };
    for (auto [analytic, param] :
         {std::pair{&g.w_out, &p.w_out}, std::pair{&g.b, &p.b},
          std::pair{&g.gcn->w0, &p.gcn->w0}, std::pair{&g.gcn->w1, &p.gcn->w1}}) {
      worst_joint = std::max(worst_joint, testing::max_relative_error(
                                              *analytic, testing::numeric_gradient(param, loss)));
    }
    ++done;
  }

  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max rel err gcn %.2e joint %.2e (< %.0e), %.2fs (< %.0fs)",
                worst_gcn, worst_joint, kGradRelTol, secs, kGradSeconds);
  return {worst_gcn < kGradRelTol && worst_joint < kGradRelTol && secs < kGradSeconds, buf};
}

// 2. Sparse forward vs dense brute force.
Outcome dense_oracle() {
  std::mt19937_64 gen(7);
  double worst = 0.0;
  for (int trial = 0; trial < kOracleGraphs; ++trial) {
    const int n = uniform_int(gen, 1, 10);
    const int c = uniform_int(gen, 1, 8), h = uniform_int(gen, 1, 8);
    const int f = trial % 4 == 0 ? 0 : uniform_int(gen, 1, 8);
    const auto edges = testing::random_edges(n, gen);
    const GcnParams p{gaussian_matrix(c, h, gen), gaussian_matrix(h, f, gen)};
    const Eigen::MatrixXd x = gaussian_matrix(n, c, gen);
    const testing::Dense hidden = testing::dense_gcn_hidden(
        testing::dense_normalized_adjacency(n, edges), testing::to_nested(x),
        testing::to_nested(p.w0), testing::to_nested(p.w1));
    const NormAdj adj = adj_of(n, edges);
    worst = std::max(worst, testing::max_abs_diff(hidden, gcn_hidden(x, adj, p, DropoutState::eval())));
    worst = std::max(worst, testing::max_abs_diff(testing::dense_softmax_rows(hidden),
                                                  gcn_forward_full(x, adj, p, DropoutState::eval())));
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d graphs, max abs diff %.2e (< %.0e)", kOracleGraphs, worst,
                kOracleAbsTol);
  return {worst < kOracleAbsTol, buf};
}

// 3. Normalized adjacency.
Outcome normalization() {
  std::mt19937_64 gen(11);
  bool symmetric = true;
  for (int trial = 0; trial < kOracleGraphs; ++trial) {
    const int n = uniform_int(gen, 1, 12);
    const Eigen::MatrixXd d = adj_of(n, testing::random_edges(n, gen)).to_dense();
    symmetric &= (d - d.transpose()).cwiseAbs().maxCoeff() == 0.0;
  }
  const Eigen::MatrixXd two = adj_of(2, {{0, 1}}).to_dense();
  const bool halves = (two.array() == 0.5).all();
  // Path 0-1-2: degrees with self loops 2, 3, 2.
  const Eigen::MatrixXd path = adj_of(3, {{0, 1}, {1, 2}}).to_dense();
  Eigen::Matrix3d expected;
  const double e = 1.0 / std::sqrt(6.0);
  expected << 0.5, e, 0.0, e, 1.0 / 3.0, e, 0.0, e, 0.5;
  const double path_err = (path - expected).cwiseAbs().maxCoeff();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "exact symmetry %s, 2-node all 0.5 %s, path err %.1e (< %.0e)",
                symmetric ? "yes" : "no", halves ? "yes" : "no", path_err, kPathTol);
  return {symmetric && halves && path_err < kPathTol, buf};
}

// 4. Relaxed metric vs all-pairs oracle.
Outcome relaxed_metric() {
  std::mt19937_64 gen(13);
  int disagreements = 0, dominance_failures = 0;
  for (int trial = 0; trial < kMetricCases; ++trial) {
    const auto [gold, pred] = testing::random_span_case(gen);
    const EvalReport relaxed = relaxed_prf(gold, pred);
    const EvalReport strict = strict_prf(gold, pred);
    const auto oracle = testing::relaxed_counts_oracle(gold, pred);
    bool same = true;
    for (EntityType t : kEntityTypes) {
      const TypeCounts &a = relaxed.counts.at(t), &b = oracle.at(t);
      same &= a.tp_pred == b.tp_pred && a.tp_gold == b.tp_gold && a.n_pred == b.n_pred &&
              a.n_gold == b.n_gold;
    }
    const Prf o = testing::oracle_prf(oracle);
    same &= o.p == relaxed.overall.p && o.r == relaxed.overall.r && o.f1 == relaxed.overall.f1;
    disagreements += same ? 0 : 1;
    if (relaxed.overall.p < strict.overall.p || relaxed.overall.r < strict.overall.r ||
        relaxed.overall.f1 < strict.overall.f1) {
      ++dominance_failures;
    }
  }
  const EvalReport example =
      relaxed_prf({{{3, 4, EntityType::kLoc}}}, {{{4, 4, EntityType::kLoc}}});
  const bool example_ok =
      example.overall.p == 100.0 && example.overall.r == 100.0 && example.overall.f1 == 100.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d cases, oracle disagreements %d, relaxed<strict %d, (3,4)/(4,4) LOC %.2f/%.2f/%.2f",
                kMetricCases, disagreements, dominance_failures, example.overall.p,
                example.overall.r, example.overall.f1);
  return {disagreements == 0 && dominance_failures == 0 && example_ok, buf};
}

// 5. Joint model memorizes the bundled fixture.
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ref = nlohmann::json::parse(testing::read_file(GCNER_REFERENCE_FILE));
  const auto& tuned = ref["fixture_tuning"]["joint_overfit"];
  const testing::Fixture f = testing::load_fixture();
  const TagSet tags = TagSet::conll2003();
  const JointDataset data = make_joint_dataset(f.corpus, &f.wv, &f.ctx, tags, Mode::kJoint);
  TrainConfig cfg;
  cfg.optimizer = *parse_optimizer(tuned["optimizer"].get<std::string>());
  cfg.learning_rate = tuned["learning_rate"].get<double>();
  cfg.epochs = tuned["epochs"].get<int>();
  cfg.batch_size = tuned["batch_size"].get<int>();
  cfg.dropout = tuned["dropout"].get<double>();
  cfg.seed = tuned["seed"].get<std::uint64_t>();
  GcnConfig gcfg;
  gcfg.dropout_rate = tuned["gcn_dropout"].get<double>();
  const JointTrainResult r = train_joint(data, gcfg, cfg, tags.size());
  const double acc = token_accuracy(r.params, data);
  const double f1 = evaluate(r.params, data, tags).relaxed.overall.f1;
  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d sentences, %d epochs: accuracy %.4f (>= %.2f), F1 %.2f, %.1fs (< %.0fs)",
                static_cast<int>(data.examples.size()), cfg.epochs, acc, kOverfitAccuracy, f1, secs,
                kOverfitSeconds);
  return {cfg.epochs <= kOverfitMaxEpochs && acc >= kOverfitAccuracy && f1 == 100.0 &&
              secs < kOverfitSeconds,
          buf};
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"gcner"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

// 6. Identical config + seed give identical bytes, through the CLI.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() /
                        ("gcner_acceptance_" + std::to_string(std::random_device{}()));
  const std::string d = testing::kDataDir;
  const std::vector<std::string> inputs = {
      "--train", d + "/fixture.conll",      "--train-deps", d + "/fixture.conllu",
      "--train-ctxe", d + "/fixture.ctxe",  "--test", d + "/fixture.conll",
      "--test-deps", d + "/fixture.conllu", "--test-ctxe", d + "/fixture.ctxe",
      "--glove", d + "/fixture.glove",      "--seed", "5"};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), inputs.begin(), inputs.end());
    return head;
  };
  const std::vector<std::string> artifacts = {
      "joint/model.fuse",      "joint/report.json",     "gcn/model.gcnp",
      "gcn/report.json",       "eval/eval_report.json", "eval/eval_strict.json",
      "eval/eval_report.txt",  "pred/predictions.conll", "ablate/report.json",
      "ablate/ablation.txt"};
  // Two passes with identical arguments, including the output directory.
  std::vector<std::string> first;
  int codes = 0, mismatches = 0;
  for (int pass = 0; pass < 2; ++pass) {
    codes |= cli(with({"train", "--out", (root / "joint").string(), "--epochs", "5",
                       "--optimizer", "adam", "--lr", "0.003"}));
    codes |= cli(with({"train", "--out", (root / "gcn").string(), "--mode", "gcn",
                       "--gcn-epochs", "20"}));
    codes |= cli(with({"eval", "--model", (root / "joint" / "model.fuse").string(), "--out",
                       (root / "eval").string()}));
    codes |= cli(with({"predict", "--model", (root / "gcn" / "model.gcnp").string(), "--out",
                       (root / "pred").string()}));
    codes |= cli(with({"ablate", "--out", (root / "ablate").string(), "--epochs", "2",
                       "--gcn-hidden", "16", "--gcn-out", "16"}));
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      const fs::path f = root / artifacts[i];
      const std::string bytes = fs::exists(f) ? testing::read_file(f.string()) : "";
      if (pass == 0) {
        first.push_back(bytes);
        fs::remove(f);
      } else if (bytes.empty() || bytes != first[i]) {
        ++mismatches;
      }
    }
  }
  fs::remove_all(root);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu artifacts from 5 commands, %d differ, exit codes %s",
                artifacts.size(), mismatches, codes == 0 ? "all 0" : "nonzero");
  return {codes == 0 && mismatches == 0, buf};
}

// 7. Joint >= best single-source model on the engineered corpus.
Outcome ablation_ordering() {
  std::ostringstream detail;
  bool pass = true;
  for (int s = 0; s < kAblationSeeds; ++s) {
    const auto [train, test] = testing::make_ablation_corpus(100 + s);
    GcnConfig g;
    g.hidden_dim = 16;
    g.out_dim = 16;
    g.dropout_rate = 0.1;
    TrainConfig c;
    c.optimizer = Optimizer::kAdam;
    c.learning_rate = 0.01;
    c.batch_size = 8;
    c.dropout = 0.1;
    c.epochs = 30;
    c.seed = static_cast<std::uint64_t>(s);
    const auto rows = ablation_run({&train.corpus, &train.wv, &train.ctx},
                                   {&test.corpus, &test.wv, &test.ctx}, g, c,
                                   TagSet::conll2003());
    const double global = rows[0].eval.relaxed.overall.f1;
    const double ctx = rows[1].eval.relaxed.overall.f1;
    const double joint = rows[2].eval.relaxed.overall.f1;
    pass &= joint >= std::max(global, ctx) - kAblationSlack;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%.1f/%.1f/%.1f", s ? " " : "", global, ctx, joint);
    detail << buf;
  }
  return {pass, "seed F1 global/contextual/joint: " + detail.str()};
}

// 8. Published targets are stored, and the per-type table renders from them.
Outcome published_targets() {
  std::ifstream probe(GCNER_REFERENCE_FILE);
  if (!probe) return {false, "reference manifest missing"};
  const auto ref = nlohmann::json::parse(testing::read_file(GCNER_REFERENCE_FILE));
  const auto& pub = ref["published"];
  const auto& ablation = pub["ablation_f1"];
  const bool ablation_ok = ablation[ablation_label(Mode::kGlobalOnly)] == 88.63 &&
                           ablation[ablation_label(Mode::kContextualOnly)] == 93.28 &&
                           ablation[ablation_label(Mode::kJoint)] == 93.82;
  EvalReport table;
  for (EntityType t : kEntityTypes) {
    const auto& row = pub["per_type"][std::string(to_string(t))];
    table.per_type[t] = {row["p"].get<double>(), row["r"].get<double>(), row["f1"].get<double>()};
  }
  auto or_nan = [](const nlohmann::json& v) { return v.is_null() ? NAN : v.get<double>(); };
  table.overall = {or_nan(pub["overall"]["p"]), or_nan(pub["overall"]["r"]),
                   or_nan(pub["overall"]["f1"])};
  const std::string expected =
      "Entity type   Precision     Recall   F1-score\n"
      "---------------------------------------------\n"
      "LOC               94.15      93.53      93.83\n"
      "MISC              81.33      81.89      81.62\n"
      "ORG               88.97      92.29      90.60\n"
      "PER               96.67      97.09      96.88\n"
      "---------------------------------------------\n"
      "Overall               -          -      93.82\n";
  const bool table_ok = format_report(table) == expected;
  return {ablation_ok && table_ok,
          std::string("targets stored (not reproduced without the licensed corpus); ablation ") +
              (ablation_ok ? "ok" : "MISMATCH") + ", per-type table " +
              (table_ok ? "verbatim" : "MISMATCH")};
}

}  // namespace
}  // namespace gcner

int main() {
  using gcner::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gcner::gradients},
      {"sparse/dense oracle equivalence", gcner::dense_oracle},
      {"adjacency normalization", gcner::normalization},
      {"relaxed-F1 oracle", gcner::relaxed_metric},
      {"overfit sanity", gcner::overfit},
      {"determinism", gcner::determinism},
      {"ablation ordering", gcner::ablation_ordering},
      {"published targets", gcner::published_targets},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
