// Command-line front end: train, predict, eval, explain, and bench
// workflows over CSV datasets and JSON model files.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "small/small.hpp"

namespace {

struct CommonOpts {
  std::string data_path;
  std::string label_col = "last";
  std::string model_path;
  std::string out_path;
  std::uint64_t seed = 0;
};

std::vector<double> parse_grid_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("--grid", "empty value list");
  return out;
}

// --grid "alpha=0.1,0.01;beta=0.001;l1=0.1,0.01"
void apply_grid_spec(const std::string& spec, small::BenchConfig& bc) {
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--grid", "expected name=v1,v2,... in '" + part + "'");
    const std::string name = part.substr(0, eq);
    const std::vector<double> values = parse_grid_values(part.substr(eq + 1));
    if (name == "alpha") bc.alphas = values;
    else if (name == "beta") bc.betas = values;
    else if (name == "l1") bc.l1_grid = values;
    else throw CLI::ValidationError("--grid", "unknown grid name '" + name + "'");
  }
}

void check_feature_names(const small::TrainedModel& model, const small::Dataset& d) {
  if (model.feature_names == d.feature_names) return;
  std::ostringstream msg;
  msg << "feature names do not match the model;";
  for (std::size_t i = 0; i < std::max(model.feature_names.size(), d.feature_names.size()); ++i) {
    const std::string want = i < model.feature_names.size() ? model.feature_names[i] : "<none>";
    const std::string got = i < d.feature_names.size() ? d.feature_names[i] : "<none>";
    if (want != got) msg << " column " << i + 1 << ": model '" << want << "' vs data '" << got << "';";
  }
  throw std::runtime_error(msg.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

int cmd_train(const CommonOpts& common, const small::SolverConfig& cfg, const std::string& mode,
              const std::string& trace_path) {
  small::SolverConfig solver = cfg;
  solver.mode = small::gradient_mode_from_string(mode);
  if (solver.trace_every == 0) solver.trace_every = std::max(1, solver.iters / 20);

  const auto t0 = std::chrono::steady_clock::now();
  small::Dataset raw = small::load_csv(common.data_path, common.label_col);
  small::Standardizer st = small::fit_standardizer(raw);
  small::TrainResult res = small::train(small::apply_standardizer(st, raw), solver, &st);
  const auto t1 = std::chrono::steady_clock::now();

  small::save_model(res.model, common.model_path);
  const std::string trace_file = trace_path.empty() ? common.model_path + ".trace.tsv" : trace_path;
  write_text_file(trace_file, small::trace_to_tsv(res.trace));

  const double acc = small::accuracy(res.model, raw);
  const small::SparsityReport rep = small::sparsity_report(res.model);
  std::cout << "train accuracy: " << acc << "\n";
  std::cout << "sparsity: per-prototype [";
  for (std::size_t j = 0; j < rep.row_support.size(); ++j)
    std::cout << (j ? " " : "") << rep.row_support[j];
  std::cout << "], total " << rep.total_with_multiplicity << ", distinct " << rep.distinct << "\n";
  std::cout << "model: " << common.model_path << "\n";
  std::cout << "trace: " << trace_file << "\n";
  for (const auto& w : res.trace.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "wall time: "
            << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0
            << " s\n";
  return 0;
}

int cmd_predict(const CommonOpts& common, bool eval_mode, const std::string& surface_path,
                int surface_grid) {
  small::TrainedModel model = small::load_model(common.model_path);
  small::Dataset d = small::load_csv(common.data_path, common.label_col);
  check_feature_names(model, d);

  if (!surface_path.empty()) {
    if (model.input_dim() != 2)
      throw std::runtime_error("decision-surface export needs a 2-feature model");
    std::ostringstream out;
    out.precision(10);
    out << "x\ty\tscore\n";
    const double x_lo = d.features.col(0).minCoeff(), x_hi = d.features.col(0).maxCoeff();
    const double y_lo = d.features.col(1).minCoeff(), y_hi = d.features.col(1).maxCoeff();
    for (int r = 0; r < surface_grid; ++r) {
      for (int c = 0; c < surface_grid; ++c) {
        small::Vector x(2);
        x[0] = x_lo + (x_hi - x_lo) * c / (surface_grid - 1);
        x[1] = y_lo + (y_hi - y_lo) * r / (surface_grid - 1);
        out << x[0] << '\t' << x[1] << '\t' << small::decision_values(model, x).max_score << '\n';
      }
    }
    write_text_file(surface_path, out.str());
    std::cout << "surface: " << surface_path << "\n";
  }

  if (eval_mode) {
    const double acc = small::accuracy(model, d);
    std::cout << "examples: " << d.row_count() << "\n";
    std::cout << "accuracy: " << acc << "\n";
    return 0;
  }

  std::ostringstream out;
  out.precision(10);
  out << "prediction\tscore\tprototype\n";
  for (int i = 0; i < d.row_count(); ++i) {
    const small::DecisionValues dv = small::decision_values(model, d.features.row(i).transpose());
    out << (dv.max_score > 0.0 ? 1 : -1) << '\t' << dv.max_score << '\t' << dv.winner + 1 << '\n';
  }
  if (common.out_path.empty()) std::cout << out.str();
  else { write_text_file(common.out_path, out.str()); std::cout << "predictions: " << common.out_path << "\n"; }
  return 0;
}

int cmd_explain(const CommonOpts& common, int top) {
  small::TrainedModel model = small::load_model(common.model_path);
  const small::RuleReport rep = small::extract_rules(model, top);
  std::cout << small::rule_report_text(rep);
  return 0;
}

std::string format_row(const small::EvalRow& row, bool table) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  if (table) {
    out << std::left << std::setw(24) << row.dataset << std::setw(10) << row.method
        << std::setw(9) << row.mean_accuracy << std::setw(9) << row.std_accuracy << std::setw(10)
        << row.features << std::setw(10) << row.normalized;
  } else {
    out << row.dataset << '\t' << row.method << '\t' << row.mean_accuracy << '\t'
        << row.std_accuracy << '\t' << row.features << '\t' << row.normalized;
  }
  return out.str();
}

int cmd_bench(const CommonOpts& common, small::BenchConfig bc, const std::string& grid_spec,
              const std::string& mode, const std::string& format) {
  bc.solver.mode = small::gradient_mode_from_string(mode);
  bc.seed = common.seed;
  if (!grid_spec.empty()) apply_grid_spec(grid_spec, bc);

  small::Dataset raw = small::load_csv(common.data_path, common.label_col);
  const std::vector<small::EvalRow> rows = small::run_bench(raw, bc);

  const bool table = format == "table";
  std::ostringstream out;
  if (table) {
    std::ostringstream head;
    head << std::left << std::setw(24) << "dataset" << std::setw(10) << "method" << std::setw(9)
         << "acc" << std::setw(9) << "std" << std::setw(10) << "features" << std::setw(10)
         << "norm";
    out << head.str() << '\n';
  } else {
    out << "dataset\tmethod\tacc\tstd\tfeatures\tnorm\n";
  }
  for (const auto& row : rows) out << format_row(row, table) << '\n';
  if (common.out_path.empty()) std::cout << out.str();
  else { write_text_file(common.out_path, out.str()); std::cout << "report: " << common.out_path << "\n"; }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse multiprototype linear models: train, predict, explain, benchmark"};
  app.require_subcommand(1);

  CommonOpts common;
  small::SolverConfig solver;
  std::string mode = "consistent";
  std::string format = "table";
  std::string grid_spec;
  std::string trace_path;
  std::string surface_path;
  int surface_grid = 50;
  int top = -1;
  small::BenchConfig bench;

  auto add_data_opts = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--data", common.data_path, "CSV file with a header row");
    if (required) opt->required();
    cmd->add_option("--label-col", common.label_col, "label column name, or 'last'");
  };
  auto add_solver_opts = [&](CLI::App* cmd) {
    cmd->add_option("--k", solver.k, "non-zeros allowed per prototype");
    cmd->add_option("--p", solver.p, "number of prototypes");
    cmd->add_option("--lambda", solver.lambda, "ridge weight");
    cmd->add_option("--alpha", solver.alpha, "mask step size");
    cmd->add_option("--beta", solver.beta, "dual step size");
    cmd->add_option("--iters", solver.iters, "solver iterations");
    cmd->add_option("--tol", solver.tol, "projection tolerance");
    cmd->add_option("--seed", common.seed, "random seed");
    cmd->add_flag("--refit", solver.refit, "refit prototypes on the rounded support");
    cmd->add_option("--gradient-mode", mode)->check(CLI::IsMember({"consistent", "paper"}));
  };

  CLI::App* train = app.add_subcommand("train", "fit a model and save it");
  add_data_opts(train, true);
  add_solver_opts(train);
  train->add_option("--model", common.model_path, "output model file")->required();
  train->add_option("--out", trace_path, "trace TSV path (default: <model>.trace.tsv)");
  train->add_option("--trace-every", solver.trace_every, "trace cadence in iterations");

  CLI::App* predict = app.add_subcommand("predict", "score a dataset with a saved model");
  add_data_opts(predict, true);
  predict->add_option("--model", common.model_path)->required();
  predict->add_option("--out", common.out_path, "write predictions here instead of stdout");
  predict->add_option("--surface", surface_path, "also write an (x, y, score) grid (2-D models)");
  predict->add_option("--surface-grid", surface_grid, "surface grid resolution")->check(CLI::Range(2, 4096));

  CLI::App* eval = app.add_subcommand("eval", "report accuracy of a saved model on a dataset");
  add_data_opts(eval, true);
  eval->add_option("--model", common.model_path)->required();

  CLI::App* explain = app.add_subcommand("explain", "print the rules a model encodes");
  explain->add_option("--model", common.model_path)->required();
  explain->add_option("--top", top, "max features listed per prototype");

  CLI::App* bench_cmd = app.add_subcommand("bench", "compare against sparse linear baselines");
  add_data_opts(bench_cmd, true);
  add_solver_opts(bench_cmd);
  bench_cmd->add_option("--splits", bench.splits, "number of train/test splits");
  bench_cmd->add_option("--ratio", bench.ratio, "train fraction per split");
  bench_cmd->add_option("--folds", bench.folds, "CV folds for the grid search");
  bench_cmd->add_option("--grid", grid_spec, "e.g. \"alpha=0.1,0.01;beta=0.001;l1=0.1,0.01\"");
  bench_cmd->add_option("--budget", bench.retrain_budget, "baseline retrain budget (0 = n/2)");
  bench_cmd->add_option("--format", format)->check(CLI::IsMember({"table", "rows"}));
  bench_cmd->add_option("--out", common.out_path, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    solver.seed = common.seed;
    if (train->parsed()) return cmd_train(common, solver, mode, trace_path);
    if (predict->parsed()) return cmd_predict(common, false, surface_path, surface_grid);
    if (eval->parsed()) return cmd_predict(common, true, surface_path, surface_grid);
    if (explain->parsed()) return cmd_explain(common, top);
    if (bench_cmd->parsed()) {
      bench.solver = solver;
      bench.solver.refit = solver.refit;
      return cmd_bench(common, bench, grid_spec, mode, format);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
