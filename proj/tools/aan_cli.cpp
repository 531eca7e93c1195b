// aan: command-line front end for the AAN de-identification pipeline.
//
//   aan gen-data --out-dir run
//   aan train --out-dir run --lambda 8
//   aan evaluate --out-dir run
//   aan anonymize --method aan2 --model run/model.aan --pool run/data/train.csv \
//       --in run/data/test.csv --out test_aan2.csv

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "aan/errors.hpp"
#include "aan/pipeline.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

aan::RunConfig resolve(const Globals& g, std::optional<double> lambda = {}) {
  aan::RunConfig c = g.config.empty() ? aan::RunConfig::defaults() : aan::load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  if (lambda) c.train.lambda = *lambda;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoencoder-adversarial speaker de-identification of x-vectors"};
  app.set_version_flag("--version", std::string(AAN_VERSION));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config, "JSON run config (or a manifest written by a previous run)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "top-level seed; overrides the config");
  app.add_option("--out-dir", g.out_dir, "output directory; overrides the config");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and its splits");

  std::optional<double> lambda;
  auto* tr = app.add_subcommand("train", "train the AAN on the generated corpus");
  tr->add_option("--lambda", lambda, "adversarial weight; overrides the config")
      ->check(CLI::NonNegativeNumber);

  aan::AnonymizeArgs an_args;
  std::string method_name = "identity", in_path, out_path, model_path, pool_path;
  auto* an = app.add_subcommand("anonymize", "anonymize an embedding CSV");
  an->add_option("--method", method_name, "identity | baseline | aan1 | aan2")
      ->check(CLI::IsMember({"identity", "baseline", "aan1", "aan2"}));
  an->add_option("--in", in_path, "input corpus CSV")->required()->check(CLI::ExistingFile);
  an->add_option("--out", out_path, "output corpus CSV")->required();
  an->add_option("--model", model_path, "AAN checkpoint (aan1, aan2)");
  an->add_option("--pool", pool_path, "pseudo-speaker pool corpus CSV (baseline, aan2)");

  auto* ev = app.add_subcommand("evaluate", "ASV condition matrix and probe attacks");
  ev->add_option("--lambda", lambda, "recorded in the manifest only")->check(CLI::NonNegativeNumber);

  std::vector<double> lambdas;
  auto* sw = app.add_subcommand("sweep-lambda", "train and evaluate once per lambda");
  sw->add_option("--lambdas", lambdas, "lambda values, e.g. 0,1,8; overrides the config")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);

  std::uint64_t gc_seed = 0;
  double gc_threshold = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of a tiny AAN");
  gc->add_option("--threshold", gc_threshold, "exit 1 if the max relative error reaches this");

  std::string rows_path, probes_path;
  auto* rp = app.add_subcommand("report", "print report CSVs as tables");
  rp->add_option("--rows", rows_path, "report_rows.csv")->required()->check(CLI::ExistingFile);
  rp->add_option("--probes", probes_path, "report_probes.csv")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return aan::cmd_gen_data(resolve(g));
    if (*tr) return aan::cmd_train(resolve(g, lambda));
    if (*an) {
      an_args.method = aan::parse_method_kind(method_name);
      an_args.input = in_path;
      an_args.output = out_path;
      an_args.model = model_path;
      an_args.pool = pool_path;
      return aan::cmd_anonymize(resolve(g), an_args);
    }
    if (*ev) return aan::cmd_evaluate(resolve(g, lambda));
    if (*sw) {
      aan::RunConfig c = resolve(g);
      if (!lambdas.empty()) c.sweep_lambdas = lambdas;
      return aan::cmd_sweep_lambda(c);
    }
    if (*gc) {
      if (g.seed) gc_seed = *g.seed;
      return aan::cmd_gradcheck(gc_seed, gc_threshold);
    }
    if (*rp) return aan::cmd_report(rows_path, probes_path);
  } catch (const aan::Error& e) {
    std::cerr << "aan: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aan: unexpected error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
