#include <ensemblex/commands.hpp>
#include <ensemblex/io.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ensemblex;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("ensemblex_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    auto p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  std::string read(const fs::path& p) { return io::read_text(p); }

  ErrorKind load_error(const fs::path& manifest) {
    try {
      io::load_scores(manifest);
    } catch (const Error& e) {
      return e.kind();
    }
    ADD_FAILURE() << "load_scores did not throw";
    return ErrorKind::InvalidInput;
  }

  /// Synthetic validation/test directories from a generator spec JSON.
  fs::path synth(const std::string& spec_json, std::uint64_t seed) {
    auto spec = write("gen.json", spec_json);
    cmd::cmd_synth({spec, dir_ / "data", seed});
    return dir_ / "data";
  }

  fs::path dir_;
};

const char* kManifestOneLearner = R"({
  "format_version": "1", "n_classes": 2, "labels_path": "labels.csv",
  "learners": [{"name": "a", "scores_path": "a.csv", "scale": "raw_scores"}]
})";

const char* kGenSpec = R"({
  "format_version": "1", "n_units": 600, "n_test_units": 900, "n_classes": 4,
  "learners": [
    {"kind": "bayes_oracle", "name": "bayes"},
    {"kind": "noisy", "noise_sd": 1.5, "name": "noisy"},
    {"kind": "weak", "signal_shrink": 0.8, "name": "weak"},
    {"kind": "over_confident", "temperature": 0.1, "noise_sd": 1.0, "name": "sharp"}
  ]
})";

}  // namespace

using Io = TempDir;
using Commands = TempDir;

TEST_F(Io, LoadsSingleLearnerCsv) {
  write("a.csv", "0.5,-1\n2,3.25\n");
  write("labels.csv", "0\n1\n");
  auto data = io::load_scores(write("m.json", kManifestOneLearner));
  EXPECT_EQ(data.scores.n_units(), 2u);
  EXPECT_EQ(data.scores.n_learners(), 1u);
  EXPECT_EQ(data.scores.at(1, 0, 1), 3.25);
  EXPECT_EQ(data.names, std::vector<std::string>{"a"});
  ASSERT_TRUE(data.labels.has_value());
  EXPECT_EQ((*data.labels)[1], 1u);
}

TEST_F(Io, ProbabilityFilesBecomeLogScores) {
  write("p.csv", "0.7,0.3\n0.2,0.8\n");
  auto m = write("m.json", R"({"format_version": "1", "n_classes": 2,
    "learners": [{"name": "p", "scores_path": "p.csv", "scale": "probabilities"}]})");
  auto data = io::load_scores(m);
  EXPECT_NEAR(data.scores.at(0, 0, 0), std::log(0.7), 1e-15);
  EXPECT_NEAR(data.scores.at(0, 0, 1), std::log(0.3), 1e-15);
  auto p = softmax_unit(data.scores.row(0, 0));
  EXPECT_NEAR(p[0], 0.7, 1e-9);
  EXPECT_NEAR(p[1], 0.3, 1e-9);
  EXPECT_FALSE(data.labels.has_value());
}

TEST_F(Io, NamedLoadErrors) {
  auto m = write("m.json", kManifestOneLearner);
  write("labels.csv", "0\n1\n");
  EXPECT_EQ(load_error(m), ErrorKind::MissingFile);

  write("a.csv", "0.5,-1\n2\n");
  EXPECT_EQ(load_error(m), ErrorKind::RaggedRows);

  write("a.csv", "0.5,-1,3\n2,1,0\n");
  EXPECT_EQ(load_error(m), ErrorKind::ClassMismatch);

  write("a.csv", "0.5,nan\n2,1\n");
  EXPECT_EQ(load_error(m), ErrorKind::NonFinite);

  write("a.csv", "0.5,inf\n2,1\n");
  EXPECT_EQ(load_error(m), ErrorKind::NonFinite);

  write("a.csv", "0.5,abc\n2,1\n");
  EXPECT_EQ(load_error(m), ErrorKind::ParseError);

  write("p.csv", "0.6,0.3\n");
  auto pm = write("pm.json", R"({"format_version": "1", "n_classes": 2,
    "learners": [{"name": "p", "scores_path": "p.csv", "scale": "probabilities"}]})");
  EXPECT_EQ(load_error(pm), ErrorKind::Normalization);

  auto vm = write("vm.json", R"({"format_version": "2", "n_classes": 2, "learners": []})");
  EXPECT_EQ(load_error(vm), ErrorKind::UnknownVersion);
  auto nv = write("nv.json", R"({"n_classes": 2, "learners": []})");
  EXPECT_EQ(load_error(nv), ErrorKind::UnknownVersion);
}

TEST_F(Io, LearnersMustShareUnitCount) {
  write("a.csv", "0,1\n1,0\n");
  write("b.csv", "0,1\n");
  auto m = write("m.json", R"({"format_version": "1", "n_classes": 2, "learners": [
    {"name": "a", "scores_path": "a.csv"}, {"name": "b", "scores_path": "b.csv"}]})");
  EXPECT_EQ(load_error(m), ErrorKind::DimensionMismatch);
}

TEST_F(Io, CsvRoundTripIsExact) {
  std::mt19937_64 rng(1);
  auto s = oracle::random_scores(30, 3, 4, 7.0, rng);
  auto y = oracle::random_labels(30, 4, rng);
  io::write_scores(dir_ / "out", s, {"x", "y", "z"}, &y);
  auto data = io::load_scores(dir_ / "out" / "manifest.json");
  EXPECT_EQ(data.scores, s);
  EXPECT_EQ(*data.labels, y);
}

TEST_F(Io, ModelRoundTripReproducesPredictionsBitwise) {
  std::mt19937_64 rng(2);
  auto [s, y] = oracle::informative_instance(200, 3, 4, rng);
  std::vector<FittedEnsemble> models{sl_fit(SlObjective(s, y)), fit_boc(s, y, CombineScale::BeforeSoftmax),
                                     fit_discrete_sl(s, y, Loss::Error), fit_average(3, 4, CombineScale::AfterSoftmax),
                                     fit_majority_vote(3, 4), sl_fit(SlObjective(s, y, Constraint::l1(2.0)))};
  for (const auto& m : models) {
    io::ModelFile mf{m, {"a", "b", "c"}};
    io::save_model(dir_ / "model.json", mf);
    auto back = io::load_model(dir_ / "model.json");
    EXPECT_EQ(back.model, m);
    EXPECT_EQ(back.learner_names, mf.learner_names);
    EXPECT_EQ(predict_proba(back.model, s), predict_proba(m, s));
    EXPECT_EQ(io::dump_model(back), io::dump_model(mf));
  }
}

TEST_F(Io, RejectsUnknownModelVersion) {
  auto p = write("model.json", R"({"format_version": "0", "method": "average", "scale": "after-softmax"})");
  try {
    io::load_model(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownVersion);
  }
}

TEST_F(Io, LearnerNameMismatchIsAnError) {
  io::ModelFile mf{fit_average(2, 2, CombineScale::AfterSoftmax), {"a", "b"}};
  try {
    io::check_learner_names(mf, {"b", "a"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NameMismatch);
  }
}

TEST_F(Commands, FitSuperLearnerWritesSimplexWeights) {
  auto data = synth(kGenSpec, 4);
  cmd::FitOptions opts{data / "validation" / "manifest.json", dir_ / "sl.json", {}};
  cmd::cmd_fit(opts);
  auto mf = io::load_model(dir_ / "sl.json");
  ASSERT_TRUE(mf.model.weights.has_value());
  double sum = 0.0;
  for (double w : mf.model.weights->weights()) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(mf.learner_names, (std::vector<std::string>{"bayes", "noisy", "weak", "sharp"}));
}

TEST_F(Commands, FitDiscreteSlSetsSelectedLearner) {
  auto data = synth(kGenSpec, 4);
  cmd::FitOptions opts{data / "validation" / "manifest.json", dir_ / "dsl.json", {}};
  opts.flags.method = "discrete-sl";
  opts.flags.loss = "nll";
  cmd::cmd_fit(opts);
  auto mf = io::load_model(dir_ / "dsl.json");
  ASSERT_TRUE(mf.model.selected_learner.has_value());
  EXPECT_EQ(*mf.model.selected_learner, 0u);
}

TEST_F(Commands, RefitIsByteIdentical) {
  auto data = synth(kGenSpec, 4);
  cmd::FitOptions opts{data / "validation" / "manifest.json", dir_ / "a.json", {}};
  opts.flags.folds = 3;
  opts.flags.seed = 11;
  cmd::cmd_fit(opts);
  opts.out = dir_ / "b.json";
  cmd::cmd_fit(opts);
  EXPECT_EQ(read(dir_ / "a.json"), read(dir_ / "b.json"));
}

TEST_F(Commands, SynthIsByteIdenticalForASeed) {
  auto spec = write("gen.json", kGenSpec);
  cmd::cmd_synth({spec, dir_ / "one", 5});
  cmd::cmd_synth({spec, dir_ / "two", 5});
  for (const char* f : {"validation/manifest.json", "validation/noisy.csv", "test/labels.csv", "test/bayes_scores.csv"}) {
    EXPECT_EQ(read(dir_ / "one" / f), read(dir_ / "two" / f)) << f;
  }
}

TEST_F(Commands, PredictThenEvaluateMatchesCompare) {
  auto data = synth(kGenSpec, 6);
  cmd::CompareOptions copts{data / "validation" / "manifest.json", data / "test" / "manifest.json",
                            dir_ / "compare.json", {}};
  auto table = cmd::cmd_compare(copts);

  cmd::FitOptions fopts{copts.manifest, dir_ / "model.json", {}};
  cmd::cmd_fit(fopts);
  cmd::cmd_predict({dir_ / "model.json", copts.test_manifest, dir_ / "probs.csv"});
  auto from_preds = cmd::cmd_evaluate({copts.test_manifest, std::nullopt, dir_ / "probs.csv", dir_ / "r1.json"});
  auto from_model = cmd::cmd_evaluate({copts.test_manifest, dir_ / "model.json", std::nullopt, dir_ / "r2.json"});
  const auto& cell = table.row("superlearner").report;
  EXPECT_NEAR(from_preds.accuracy, cell.accuracy, 1e-12);
  EXPECT_NEAR(*from_preds.mean_cross_entropy, *cell.mean_cross_entropy, 1e-12);
  EXPECT_EQ(from_model.accuracy, cell.accuracy);
  EXPECT_EQ(*from_model.mean_cross_entropy, *cell.mean_cross_entropy);

  auto doc = io::parse_json(read(dir_ / "compare.json"), "compare");
  EXPECT_EQ(doc["format_version"], "1");
  EXPECT_EQ(doc["methods"].size(), 9u);
}

TEST_F(Commands, CompareOnOneLearnerManifest) {
  auto data = synth(R"({"format_version": "1", "n_units": 300, "n_test_units": 400, "n_classes": 3,
    "learners": [{"kind": "noisy", "noise_sd": 1.0, "name": "only"}]})", 2);
  auto table = cmd::cmd_compare({data / "validation" / "manifest.json", data / "test" / "manifest.json",
                                 dir_ / "c.json", {}});
  for (const auto& r : table.rows) EXPECT_EQ(r.report.accuracy, table.rows[0].report.accuracy) << r.key;
}

TEST_F(Commands, ManifestPermutationPermutesWeights) {
  auto data = synth(kGenSpec, 8);
  auto val = data / "validation";
  auto doc = io::parse_json(read(val / "manifest.json"), "manifest");
  auto learners = doc["learners"];
  doc["learners"] = nlohmann::json::array({learners[2], learners[0], learners[3], learners[1]});
  io::write_atomic(val / "permuted.json", doc.dump(2));

  cmd::FitOptions a{val / "manifest.json", dir_ / "a.json", {}};
  cmd::FitOptions b{val / "permuted.json", dir_ / "b.json", {}};
  auto ma = cmd::cmd_fit(a), mb = cmd::cmd_fit(b);
  const std::vector<std::size_t> order{2, 0, 3, 1};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(mb.model.weights->weights()[j], ma.model.weights->weights()[order[j]], 1e-6);
  }
  EXPECT_NEAR(ma.model.fit_info.loss_trace.back(), mb.model.fit_info.loss_trace.back(), 1e-12);

  // Applying a model to a reordered manifest is refused.
  try {
    cmd::cmd_predict({dir_ / "a.json", val / "permuted.json", dir_ / "p.csv"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NameMismatch);
  }
}

TEST_F(Commands, FlagValidation) {
  auto data = synth(kGenSpec, 9);
  cmd::FitOptions opts{data / "validation" / "manifest.json", dir_ / "m.json", {}};
  opts.flags.scale = "logit";  // four classes
  EXPECT_THROW(cmd::cmd_fit(opts), Error);
  opts.flags.scale = "after-softmax";
  EXPECT_THROW(cmd::cmd_fit(opts), Error);
  opts.flags.scale.reset();
  opts.flags.method = "nonsense";
  EXPECT_THROW(cmd::cmd_fit(opts), Error);
  opts.flags.method = "boc";
  opts.flags.scale = "before-softmax";
  EXPECT_NO_THROW(cmd::cmd_fit(opts));
  EXPECT_EQ(io::load_model(dir_ / "m.json").model.combine_scale, CombineScale::BeforeSoftmax);
}

TEST_F(Commands, L1ConstraintRespectsBound) {
  auto data = synth(kGenSpec, 10);
  cmd::FitOptions opts{data / "validation" / "manifest.json", dir_ / "m.json", {}};
  opts.flags.constraint = "l1";
  opts.flags.l1_bound = 2.0;
  auto mf = cmd::cmd_fit(opts);
  double l1 = 0.0;
  for (double w : mf.model.weights->weights()) l1 += std::abs(w);
  EXPECT_LE(l1, 2.0 + 1e-9);
  EXPECT_EQ(io::load_model(dir_ / "m.json").model.weights->constraint(), Constraint::l1(2.0));
}

TEST_F(Commands, WeakContaminatedLibrary) {
  auto data = synth(R"({"format_version": "1", "n_units": 3000, "n_test_units": 5000, "n_classes": 10,
    "separation": 0.7, "weak_noise_sd": 3.0,
    "learners": [{"kind": "noisy", "noise_sd": 1.0}, {"kind": "noisy", "noise_sd": 1.0},
                 {"kind": "noisy", "noise_sd": 1.0}, {"kind": "noisy", "noise_sd": 1.0},
                 {"kind": "weak", "signal_shrink": 0.9}, {"kind": "weak", "signal_shrink": 0.9},
                 {"kind": "weak", "signal_shrink": 0.9}, {"kind": "weak", "signal_shrink": 0.9},
                 {"kind": "weak", "signal_shrink": 0.9}]})", 12);
  auto table = cmd::cmd_compare({data / "validation" / "manifest.json", data / "test" / "manifest.json",
                                 dir_ / "c.json", {}});
  const double sl = table.row("superlearner").report.accuracy;
  EXPECT_GE(sl, table.row("avg-before-softmax").report.accuracy);
  EXPECT_GE(sl, table.row("avg-after-softmax").report.accuracy);
}
