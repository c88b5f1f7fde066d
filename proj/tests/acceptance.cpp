// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Criteria 1-4 and 8 rerun the matching unit test
// cases; 5-7 train end to end.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "frnet/eval.hpp"
#include "frnet/manifest.hpp"
#include "frnet/phantom.hpp"
#include "frnet/random.hpp"
#include "frnet/trainer.hpp"

using namespace frnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

doctest::TestRunStats g_last_run{};

struct RunStatsListener : doctest::IReporter {
  explicit RunStatsListener(const doctest::ContextOptions&) {}
  void report_query(const doctest::QueryData&) override {}
  void test_run_start() override {}
  void test_run_end(const doctest::TestRunStats& stats) override { g_last_run = stats; }
  void test_case_start(const doctest::TestCaseData&) override {}
  void test_case_reenter(const doctest::TestCaseData&) override {}
  void test_case_end(const doctest::CurrentTestCaseStats&) override {}
  void test_case_exception(const doctest::TestCaseException&) override {}
  void subcase_start(const doctest::SubcaseSignature&) override {}
  void subcase_end() override {}
  void log_assert(const doctest::AssertData&) override {}
  void log_message(const doctest::MessageData&) override {}
  void test_case_skipped(const doctest::TestCaseData&) override {}
};

REGISTER_LISTENER("run_stats", 1, RunStatsListener);

int g_failed_criteria = 0;

void verdict(int criterion, bool pass, const std::string& detail) {
  if (!pass) ++g_failed_criteria;
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

void note(const std::string& text) {
  std::printf("  %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

struct SuiteRun {
  bool ok;
  unsigned cases;
  double seconds;
};

// Runs the named unit test cases (doctest name filters, no commas inside a
// pattern) and requires every pattern to have matched.
SuiteRun run_cases(const std::vector<std::string>& patterns) {
  std::string filter;
  for (const auto& p : patterns) filter += (filter.empty() ? "" : ",") + p;
  doctest::Context ctx;
  ctx.setOption("test-case", filter.c_str());
  ctx.setOption("minimal", true);
  ctx.setOption("no-version", true);
  g_last_run = {};
  const auto start = Clock::now();
  const int rc = ctx.run();
  const double secs = seconds_since(start);
  const bool all_matched = g_last_run.numTestCasesPassingFilters == patterns.size();
  return {rc == 0 && g_last_run.numTestCasesFailed == 0 && all_matched, g_last_run.numTestCasesPassingFilters, secs};
}

void unit_criterion(int criterion, const std::string& what, const std::vector<std::string>& patterns,
                    double time_limit = 0.0) {
  const SuiteRun r = run_cases(patterns);
  bool pass = r.ok;
  std::string detail = what + ": " + std::to_string(r.cases) + "/" + std::to_string(patterns.size()) +
                       " test cases passed in " + fmt("%.1f s", r.seconds);
  if (time_limit > 0.0) {
    pass = pass && r.seconds < time_limit;
    detail += fmt(" (limit %.0f s)", time_limit);
  }
  verdict(criterion, pass, detail);
}

TrainConfig study_config(LossKind loss, std::size_t epochs, std::uint64_t seed) {
  TrainConfig c;
  c.arch.arch = ArchKind::frnet;
  c.arch.levels = 2;
  c.arch.base_channels = 8;
  c.loss.kind = loss;
  c.epochs = epochs;
  c.seeds = {mix_seed(seed, 1), mix_seed(seed, 2), mix_seed(seed, 3)};
  return c;
}

struct StudyArm {
  EvalReport report;
  TrainHistory history;
  double train_seconds = 0.0;
};

struct Study {
  DatasetManifest manifest;
  StudyArm boundary;
  StudyArm ce;
};

StudyArm run_arm(const DatasetManifest& manifest, LossKind loss, std::size_t epochs, std::uint64_t seed,
                 const fs::path& out) {
  StudyArm arm;
  TrainHooks hooks;
  hooks.checkpoint_dir = out;
  const auto start = Clock::now();
  TrainResult trained = train(study_config(loss, epochs, seed), manifest, hooks);
  arm.train_seconds = seconds_since(start);
  arm.history = std::move(trained.history);
  arm.report = evaluate(trained.model, manifest, kSplitTest);
  std::ofstream(out / "history.jsonl") << arm.history.to_jsonl(false);
  std::ofstream(out / "report.json") << arm.report.to_json();
  return arm;
}

Study run_study(const fs::path& dir, std::size_t epochs, std::uint64_t seed) {
  fs::remove_all(dir);
  Study s;
  DatasetManifest generated = generate_dataset(parse_groups("4"), 40, 32, mix_seed(seed, 10), dir / "data");
  make_split(generated, 0.2, mix_seed(seed, 11));
  save_manifest(generated, dir / "data" / "manifest.json");
  s.manifest = load_manifest(dir / "data" / "manifest.json");
  s.boundary = run_arm(s.manifest, LossKind::boundary, epochs, seed, dir / "boundary");
  s.ce = run_arm(s.manifest, LossKind::ce, epochs, seed, dir / "ce");
  return s;
}

const Summary* group_summary(const EvalReport& r, const std::string& group) {
  for (const auto& g : r.groups) {
    if (g.group == group) return &g;
  }
  return nullptr;
}

void print_table(const Study& s) {
  const auto& groups = s.boundary.report.groups;
  std::string header = "  | method   |", rule = "  |----------|";
  for (const auto& g : groups) {
    char cell[64];
    std::snprintf(cell, sizeof cell, " %-15s |", g.group.c_str());
    header += cell;
    rule += "-----------------|";
  }
  header += " overall         |";
  rule += "-----------------|";
  std::printf("%s\n%s\n", header.c_str(), rule.c_str());
  for (const auto* arm : {&s.boundary, &s.ce}) {
    std::string row = arm == &s.boundary ? "  | boundary |" : "  | ce       |";
    for (const auto& g : groups) {
      const Summary* m = group_summary(arm->report, g.group);
      char cell[64];
      std::snprintf(cell, sizeof cell, " %.4f+/-%.4f |", m ? m->mean : 0.0, m ? m->stddev : 0.0);
      row += cell;
    }
    char cell[64];
    std::snprintf(cell, sizeof cell, " %.4f+/-%.4f |", arm->report.overall.mean, arm->report.overall.stddev);
    std::printf("%s%s\n", row.c_str(), cell);
  }
  std::fflush(stdout);
}

void criterion_overfit(const fs::path& dir, std::uint64_t seed) {
  fs::remove_all(dir);
  const Phantom ph = generate_phantom(sample_phantom_params(phantom_family("thin-rim"), 32, mix_seed(seed, 20)));
  const std::vector<Sample> one{{ph.volume, ph.mask, "thin-rim"}};
  TrainConfig c = study_config(LossKind::boundary, 200, seed);
  const auto start = Clock::now();
  const TrainResult r = train(c, one);
  const double secs = seconds_since(start);
  std::ofstream(fs::path(dir.string() + "_history.jsonl")) << r.history.to_jsonl(false);

  std::size_t reached = 0;
  double best = 0.0;
  for (const auto& e : r.history.epochs) {
    // One sample per epoch, so epoch e ends after step e + 1.
    if (reached == 0 && e.dice >= 0.99) reached = e.epoch + 1;
    best = std::max(best, e.dice);
  }
  const double final_dice = r.history.epochs.back().dice;
  const bool pass = reached > 0 && reached <= 200 && secs < 600.0;
  verdict(5, pass,
          "overfit one 32^3 phantom: training Dice >= 0.99 " +
              (reached ? "first at step " + std::to_string(reached) : std::string("never reached")) +
              fmt(", best %.4f", best) + fmt(", final (step 200) %.4f", final_dice) + fmt(", %.0f s (limit 600 s)", secs));
}

// Moving-average (window 20) training-loss readings over one run.
void report_smoothed_loss(const TrainHistory& h) {
  const std::size_t w = 20;
  if (h.steps.size() < 2 * w) return;
  std::vector<double> avg;
  double acc = 0.0;
  for (std::size_t i = 0; i < h.steps.size(); ++i) {
    acc += h.steps[i].loss;
    if (i >= w) acc -= h.steps[i - w].loss;
    if (i + 1 >= w) avg.push_back(acc / static_cast<double>(w));
  }
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < avg.size(); ++i) worst_rise = std::max(worst_rise, avg[i] / avg[i - 1] - 1.0);
  const bool net = avg.back() <= 0.9 * avg.front();
  note(std::string("smoothed loss (window 20): ") + (net ? "PASS" : "FAIL") + fmt(" net decrease %.4f", avg.front()) +
       fmt(" -> %.4f", avg.back()) + ";" + (worst_rise <= 0.1 ? " PASS" : " FAIL") +
       fmt(" step-to-step rise <= 10%% (largest rise %.1f%%)", 100.0 * worst_rise));
}

void report_cross_validation(const Study& s, const fs::path& dir, std::uint64_t seed) {
  DatasetManifest thin = s.manifest;
  thin.entries.clear();
  for (const auto& e : s.manifest.entries) {
    if (e.group == "thin-rim" && e.split == kSplitTrain) thin.entries.push_back(e);
  }
  std::vector<TrainConfig> candidates{study_config(LossKind::ce, 3, seed), study_config(LossKind::boundary, 3, seed)};
  const auto start = Clock::now();
  const auto cv = cross_validate(candidates, thin, 2, mix_seed(seed, 30));
  std::size_t argmax = 0;
  for (std::size_t c = 1; c < cv.candidates.size(); ++c) {
    if (cv.candidates[c].mean_dice > cv.candidates[argmax].mean_dice) argmax = c;
  }
  const bool ok = cv.candidates.size() == 2 && cv.selected_candidate == argmax;
  fs::create_directories(dir);
  save_checkpoint(cv.selected_model, dir / "model.json");
  note(std::string("2-fold cross-validation {ce, boundary} on thin-rim training entries: ") + (ok ? "PASS" : "FAIL") +
       fmt(" ce %.4f", cv.candidates[0].mean_dice) + fmt(", boundary %.4f", cv.candidates[1].mean_dice) +
       ", selected " + (cv.selected_candidate == 0 ? "ce" : "boundary") + fmt(" (%.0f s)", seconds_since(start)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frnet acceptance run"};
  std::string work = (fs::temp_directory_path() / "frnet_acceptance").string();
  std::size_t epochs = 15;
  std::uint64_t seed = 2024;
  bool skip_training = false;
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_option("--study-epochs", epochs, "Epochs per phantom-study model")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_flag("--skip-training", skip_training, "Only run criteria 1-4 and 8");
  CLI11_PARSE(app, argc, argv);
  const fs::path root(work);
  fs::create_directories(root);

  unit_criterion(1, "finite-difference gradient suite",
                 {"conv3d gradients match finite differences", "conv_transpose3d gradients match finite differences",
                  "elementwise and channel op gradients match finite differences",
                  "loss gradients match finite differences", "loss gradients through softmax match finite differences",
                  "gradients through the full networks match finite differences"},
                 120.0);
  unit_criterion(2, "loss reduction identities", {"reduction identities hold to 1e-12"});
  unit_criterion(3, "artifact simulator properties",
                 {"zero sigma is the identity on nonnegative volumes", "motion corruption is phase-only and preserves energy",
                  "round trip and Parseval on even*", "every sample of a k-space line shares one phase factor",
                  "severity increases with sigma"});
  unit_criterion(4, "structural assertions",
                 {"FRnet has one body conv per encoder level*", "parameter counts follow the closed form*"});

  if (!skip_training) {
    criterion_overfit(root / "overfit", seed);

    const Study first = run_study(root / "study_a", epochs, seed);
    print_table(first);
    const double overall = first.boundary.report.overall.mean;
    bool directional = true;
    std::string compare;
    for (const char* g : {"thin-rim", "low-contrast"}) {
      const Summary* b = group_summary(first.boundary.report, g);
      const Summary* c = group_summary(first.ce.report, g);
      if (!b || !c) {
        directional = false;
        compare += std::string(", ") + g + " missing";
        continue;
      }
      directional = directional && b->mean >= c->mean;
      compare += std::string(", ") + g + fmt(" boundary %.4f", b->mean) + fmt(" vs ce %.4f", c->mean);
    }
    const bool complete = first.boundary.report.complete && first.ce.report.complete;
    verdict(6, complete && overall >= 0.95 && first.boundary.train_seconds <= 1800.0 && directional,
            "phantom study: boundary mean test Dice " + fmt("%.4f", overall) + " (>= 0.95)" +
                fmt(", trained in %.0f s (limit 1800 s)", first.boundary.train_seconds) + compare);
    report_smoothed_loss(first.boundary.history);
    report_cross_validation(first, root / "cv", seed);

    const Study second = run_study(root / "study_b", epochs, seed);
    const bool same_boundary = first.boundary.report.to_json() == second.boundary.report.to_json();
    const bool same_ce = first.ce.report.to_json() == second.ce.report.to_json();
    verdict(7, same_boundary && same_ce,
            std::string("rerun with identical seeds: boundary report ") + (same_boundary ? "identical" : "differs") +
                ", ce report " + (same_ce ? "identical" : "differs"));
  }

  unit_criterion(8, "brute-force oracles",
                 {"conv3d matches direct summation", "dice on hand-enumerable cubes",
                  "density map matches direct Gaussian summation"});

  std::printf("%d criteria failed\n", g_failed_criteria);
  return g_failed_criteria == 0 ? 0 : 1;
}
