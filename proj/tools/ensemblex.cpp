// ensemblex: fit, apply, and compare ensembles over base-learner score files.

#include <ensemblex/commands.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

void add_fit_flags(CLI::App* app, ensemblex::cmd::FitFlags& f, bool with_method) {
  if (with_method) {
    app->add_option("--method", f.method, "Ensemble rule")
        ->check(CLI::IsMember({"superlearner", "discrete-sl", "boc", "average", "majority-vote"}));
    app->add_option("--loss", f.loss, "Discrete Super Learner loss")->check(CLI::IsMember({"nll", "error"}));
  }
  app->add_option("--scale", f.scale, "Combination scale")
      ->check(CLI::IsMember({"before-softmax", "after-softmax", "logit"}));
  app->add_option("--constraint", f.constraint, "Super Learner weight constraint")
      ->check(CLI::IsMember({"simplex", "l1"}));
  app->add_option("--l1-bound", f.l1_bound, "L1 radius for --constraint l1")->check(CLI::PositiveNumber);
  app->add_option("--folds", f.folds, "Number of folds the held-out scores are grouped into (1 = single split)");
  app->add_option("--seed", f.seed, "Seed for fold assignment");
  app->add_option("--max-iters", f.max_iters, "Solver iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--tol", f.rel_tol, "Solver relative-decrease tolerance")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  namespace cmd = ensemblex::cmd;
  CLI::App app{"Ensemble combination over base-learner score tensors"};
  app.require_subcommand(1);

  cmd::FitOptions fit;
  auto* fit_app = app.add_subcommand("fit", "Fit an ensemble rule on held-out scores");
  fit_app->add_option("--manifest", fit.manifest, "Manifest of held-out scores with labels")->required();
  fit_app->add_option("--out", fit.out, "Model file to write")->required();
  add_fit_flags(fit_app, fit.flags, true);

  cmd::PredictOptions predict;
  auto* predict_app = app.add_subcommand("predict", "Write per-unit class probabilities");
  predict_app->add_option("--model", predict.model, "Model file")->required();
  predict_app->add_option("--manifest", predict.manifest, "Manifest of scores to combine")->required();
  predict_app->add_option("--out", predict.out, "Probability CSV to write")->required();

  cmd::EvaluateOptions evaluate;
  auto* eval_app = app.add_subcommand("evaluate", "Score a model or a prediction file against labels");
  eval_app->add_option("--manifest", evaluate.manifest, "Manifest with labels")->required();
  auto* model_opt = eval_app->add_option("--model", evaluate.model, "Model file");
  auto* pred_opt = eval_app->add_option("--predictions", evaluate.predictions, "Probability CSV from predict");
  model_opt->excludes(pred_opt);
  eval_app->add_option("--out", evaluate.out, "Report JSON to write")->required();

  cmd::CompareOptions compare;
  auto* compare_app = app.add_subcommand("compare", "Fit every ensemble rule and evaluate on a test set");
  compare_app->add_option("--manifest", compare.manifest, "Held-out scores with labels")->required();
  compare_app->add_option("--test-manifest", compare.test_manifest, "Test scores with labels")->required();
  compare_app->add_option("--out", compare.out, "Comparison JSON to write")->required();
  add_fit_flags(compare_app, compare.flags, false);

  cmd::SynthOptions synth;
  std::uint64_t synth_seed = 0;
  auto* synth_app = app.add_subcommand("synth", "Generate synthetic score files");
  synth_app->add_option("--spec", synth.spec, "Generator spec JSON")->required();
  synth_app->add_option("--out", synth.out, "Output directory")->required();
  auto* seed_opt = synth_app->add_option("--seed", synth_seed, "Override the spec's seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_app->parsed()) {
      auto mf = cmd::cmd_fit(fit);
      std::cout << "wrote " << fit.out.string() << " (" << ensemblex::io::method_name(mf.model.method) << ")\n";
    } else if (predict_app->parsed()) {
      auto probs = cmd::cmd_predict(predict);
      std::cout << "wrote " << probs.n_units() << " rows to " << predict.out.string() << "\n";
    } else if (eval_app->parsed()) {
      auto r = cmd::cmd_evaluate(evaluate);
      std::cout << "accuracy " << r.accuracy;
      if (r.mean_cross_entropy) std::cout << "  cross-entropy " << *r.mean_cross_entropy;
      std::cout << "\n";
    } else if (compare_app->parsed()) {
      cmd::cmd_compare(compare, &std::cout);
    } else if (synth_app->parsed()) {
      if (*seed_opt) synth.seed = synth_seed;
      cmd::cmd_synth(synth);
      std::cout << "wrote " << synth.out.string() << "\n";
    }
  } catch (const ensemblex::Error& e) {
    nlohmann::json err = {{"error", ensemblex::error_kind_name(e.kind())}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
