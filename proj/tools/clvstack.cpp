// clvstack command-line front end.
//
// Exit codes: 0 success, 1 internal failure, 2 usage or input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clvstack/clvstack.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;

std::ifstream open_input(const std::string& path) {
  if (!fs::is_regular_file(path)) throw clvstack::InputError("cannot open input file '" + path + "'");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw clvstack::InputError("cannot open input file '" + path + "'");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw clvstack::InputError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

clvstack::CleanResult load_and_clean(const std::string& path, clvstack::ParseResult* parsed_out = nullptr) {
  auto in = open_input(path);
  auto parsed = clvstack::parse_transactions(in);
  auto cleaned = clvstack::clean(parsed);
  if (parsed_out) *parsed_out = std::move(parsed);
  return cleaned;
}

clvstack::DesignMatrix load_features(const std::string& path) {
  auto in = open_input(path);
  return clvstack::to_matrix(clvstack::read_features_csv(in));
}

clvstack::SavedModel load_model_file(const std::string& path) {
  auto in = open_input(path);
  return clvstack::load_model(in);
}

std::optional<clvstack::Timestamp> parse_cutoff(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto t = clvstack::parse_timestamp(text);
  if (!t) throw clvstack::InputError("cannot parse --cutoff '" + text + "'");
  return t;
}

// --- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string out_dir = ".";
};

int run_ingest(const IngestArgs& a) {
  clvstack::ParseResult parsed;
  auto cleaned = load_and_clean(a.input, &parsed);
  const fs::path dir(a.out_dir);
  auto out = open_output(dir / "cleaned.csv");
  clvstack::write_cleaned_csv(out, cleaned.transactions);

  json report = cleaned.report;
  json errors = json::array();
  for (const auto& e : parsed.errors) errors.push_back({{"row", e.row}, {"reason", e.reason}});
  report["parse_errors"] = std::move(errors);
  write_json(dir / "clean_report.json", report);
  std::cout << "retained " << cleaned.report.retained << " of " << cleaned.report.input_rows() << " rows\n";
  return 0;
}

// --- featurize ------------------------------------------------------------

struct FeaturizeArgs {
  std::string input;
  std::string output = "features.csv";
  std::string cutoff;
  std::int64_t horizon = 90;
  std::int64_t recent = 90;
};

int run_featurize(const FeaturizeArgs& a) {
  auto cleaned = load_and_clean(a.input);
  const auto ledger = clvstack::build_ledger(cleaned.transactions);
  clvstack::require(!ledger.empty(), "no valid transactions in '" + a.input + "'");
  clvstack::WindowSpec spec{parse_cutoff(a.cutoff).value_or(clvstack::default_cutoff(ledger, a.horizon)), a.horizon,
                            a.recent};
  auto rows = clvstack::featurize(clvstack::split_windows(ledger, spec), spec);
  clvstack::require(!rows.empty(), "observation window before cutoff " + spec.cutoff.to_string() + " is empty");
  std::sort(rows.begin(), rows.end(), [](auto& x, auto& y) { return x.customer_id < y.customer_id; });
  auto out = open_output(a.output);
  clvstack::write_features_csv(out, rows);
  std::cout << "wrote " << rows.size() << " customers (cutoff " << spec.cutoff.to_string() << ") to " << a.output
            << "\n";
  return 0;
}

// --- clv ------------------------------------------------------------------

struct ClvArgs {
  std::string input;
  std::optional<double> margin;
  std::optional<double> total_sales;
  std::optional<std::size_t> orders, customers, repeat_customers;
};

int run_clv(const ClvArgs& a) {
  clvstack::require(a.margin.has_value(), "--margin is required");
  clvstack::ClvInputs inputs;
  if (!a.input.empty()) {
    auto cleaned = load_and_clean(a.input);
    inputs = clvstack::clv_inputs_from_ledger(clvstack::build_ledger(cleaned.transactions), *a.margin);
  } else {
    clvstack::require(a.total_sales && a.orders && a.customers && a.repeat_customers,
                      "give an input CSV or all of --total-sales --orders --customers --repeat-customers");
    inputs = {*a.total_sales, *a.orders, *a.customers, *a.repeat_customers, *a.margin};
  }
  json out = clvstack::compute_clv(inputs);
  std::cout << out.dump(2) << '\n';
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::string features;
  std::string config;
  std::string output = "model.json";
  std::string log = "training_log.json";
};

int run_train(const TrainArgs& a, std::optional<std::uint64_t> seed_flag, std::size_t threads) {
  const auto data = load_features(a.features);
  json config;
  {
    auto in = open_input(a.config);
    try {
      in >> config;
    } catch (const json::parse_error& e) {
      throw clvstack::InputError(std::string("config is not valid JSON: ") + e.what());
    }
  }

  clvstack::SavedModel model;
  std::uint64_t seed = 42;
  try {
    const auto type = config.value("type", std::string{});
    if (type == "stack") {
      auto params = config.get<clvstack::StackParams>();
      if (seed_flag) params.global_seed = *seed_flag;
      seed = params.global_seed;
      model = {"stack", data.feature_names,
               clvstack::fit_stack(data.x, data.target, params, data.feature_names, threads)};
    } else {
      const json& spec_json = config.contains("learner") ? config.at("learner") : config;
      auto spec = spec_json.get<clvstack::LearnerSpec>();
      seed = seed_flag.value_or(config.value("seed", std::uint64_t{42}));
      const auto learner_seed = clvstack::learner_seed(seed, spec.name, clvstack::kFullRefit);
      model = clvstack::saved_model_from_base(spec.name, data.feature_names,
                                              spec.fit(data.x, data.target, learner_seed, threads));
    }
  } catch (const json::exception& e) {
    throw clvstack::InputError(std::string("invalid training config: ") + e.what());
  }

  {
    auto out = open_output(a.output);
    clvstack::save_model(out, model);
  }
  const auto fitted = model.predict_all(data.x);
  json log{{"model", model.name},
           {"kind", model.kind()},
           {"seed", seed},
           {"rows", data.rows()},
           {"feature_names", data.feature_names},
           {"training_rmse", clvstack::rmse(fitted, data.target)},
           {"training_mae", clvstack::mae(fitted, data.target)}};
  write_json(a.log, log);
  std::cout << "trained " << model.kind() << " '" << model.name << "' on " << data.rows() << " rows -> " << a.output
            << "\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string features;
  std::vector<std::string> models;
  std::string output = "eval.json";
};

int run_evaluate(const EvaluateArgs& a) {
  const auto data = load_features(a.features);
  json results = json::array();
  std::ostringstream table;
  table << "method,rmse,mae\n";
  for (const auto& path : a.models) {
    const auto model = load_model_file(path);
    const auto report = clvstack::evaluate(model.predict_all(data.x), data.target);
    json entry = report;
    entry["model"] = model.name;
    entry["kind"] = model.kind();
    entry["path"] = path;
    results.push_back(std::move(entry));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", report.rmse, report.mae);
    table << clvstack::csv::quote(model.name) << ',' << buf << '\n';
  }
  write_json(a.output, results.size() == 1 ? results.front() : json{{"results", results}});
  std::cout << table.str();
  return 0;
}

// --- importance -----------------------------------------------------------

struct ImportanceArgs {
  std::string model;
  std::string learner;
  std::string format = "csv";
  std::string output;
  std::string rank_by;
};

int run_importance(const ImportanceArgs& a) {
  const auto saved = load_model_file(a.model);
  std::optional<clvstack::ImportanceReport> report;
  auto from_fitted = [&](const auto& fitted) {
    using M = std::decay_t<decltype(fitted)>;
    if constexpr (std::is_same_v<M, clvstack::ForestModel> || std::is_same_v<M, clvstack::BoostModel>)
      report = clvstack::compute_importance(fitted, saved.feature_names);
  };
  if (const auto* stack = std::get_if<clvstack::StackModel>(&saved.model)) {
    clvstack::require(!a.learner.empty(), "stack model: choose a base learner with --learner");
    for (std::size_t s = 0; s < stack->base_models.size(); ++s)
      if (stack->params.base_specs[s].name == a.learner) std::visit(from_fitted, stack->base_models[s].fitted);
  } else {
    std::visit(from_fitted, saved.model);
  }
  clvstack::require(report.has_value(), "importance is defined for forest and boosted tree models only");

  std::ostringstream text;
  if (a.format == "json") {
    text << json(*report).dump(2) << '\n';
  } else {
    clvstack::require(a.format == "csv", "--format must be csv or json");
    clvstack::write_importance_csv(text, *report);
  }
  if (a.output.empty())
    std::cout << text.str();
  else
    open_output(a.output) << text.str();
  if (!a.rank_by.empty()) {
    std::cerr << "ranked by " << a.rank_by << ":";
    for (const auto& f : clvstack::rank_features(*report, clvstack::parse_importance_type(a.rank_by)))
      std::cerr << ' ' << f;
    std::cerr << '\n';
  }
  return 0;
}

// --- experiment -----------------------------------------------------------

struct ExperimentArgs {
  std::string input;
  std::string out_dir = "experiment";
  std::string cutoff;
};

int run_experiment_cmd(const ExperimentArgs& a, std::uint64_t seed, std::size_t threads) {
  clvstack::ParseResult parsed;
  {
    auto in = open_input(a.input);
    parsed = clvstack::parse_transactions(in);
  }
  clvstack::ExperimentConfig config;
  config.seed = seed;
  config.threads = threads;
  config.cutoff = parse_cutoff(a.cutoff);
  const auto result = clvstack::run_experiment(parsed, config);

  const fs::path dir(a.out_dir);
  {
    auto out = open_output(dir / "table5.csv");
    clvstack::write_table5_csv(out, result);
  }
  for (const auto& [name, report] : result.importance) {
    auto out = open_output(dir / ("importance_" + name + ".csv"));
    clvstack::write_importance_csv(out, report);
  }
  for (const auto& [name, model] : result.models) {
    std::string file = name;
    for (auto& c : file)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    auto out = open_output(dir / "models" / (file + ".json"));
    clvstack::save_model(out, model);
  }
  write_json(dir / "metadata.json", clvstack::experiment_metadata(result, config));

  clvstack::write_table5_csv(std::cout, result);
  bool all_ok = true;
  for (const auto& r : result.rows) all_ok = all_ok && r.status == "OK";
  return all_ok ? 0 : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clvstack: customer lifetime value toolkit with stacked regression"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  app.add_option("--seed", seed, "Global random seed (default 42)");
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse and clean a retail transaction CSV");
  c_ingest->add_option("input", ingest.input, "Raw transactions CSV")->required();
  c_ingest->add_option("-o,--out", ingest.out_dir, "Output directory");

  FeaturizeArgs featurize;
  auto* c_feat = app.add_subcommand("featurize", "Build the per-customer feature table");
  c_feat->add_option("input", featurize.input, "Cleaned (or raw) transactions CSV")->required();
  c_feat->add_option("-o,--out", featurize.output, "Output features CSV");
  c_feat->add_option("--cutoff", featurize.cutoff, "End of the observation window (default: last day - horizon + 1)");
  c_feat->add_option("--horizon", featurize.horizon, "Target window length in days")->check(CLI::PositiveNumber);
  c_feat->add_option("--recent", featurize.recent, "Recent window for freq_3m in days")->check(CLI::PositiveNumber);

  ClvArgs clv;
  auto* c_clv = app.add_subcommand("clv", "Aggregate historical CLV");
  c_clv->add_option("input", clv.input, "Transactions CSV (optional when counts are given)");
  c_clv->add_option("--margin", clv.margin, "Profit margin as a fraction")->required();
  c_clv->add_option("--total-sales", clv.total_sales);
  c_clv->add_option("--orders", clv.orders);
  c_clv->add_option("--customers", clv.customers);
  c_clv->add_option("--repeat-customers", clv.repeat_customers);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a learner or a stack from a JSON config");
  c_train->add_option("features", train.features, "Features CSV")->required();
  c_train->add_option("config", train.config, "Learner or stack config JSON")->required();
  c_train->add_option("-o,--out", train.output, "Model JSON output");
  c_train->add_option("--log", train.log, "Training log JSON output");

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score models on a feature table (RMSE, MAE)");
  c_eval->add_option("features", evaluate.features, "Features CSV")->required();
  c_eval->add_option("models", evaluate.models, "One or more model JSON files")->required();
  c_eval->add_option("-o,--out", evaluate.output, "Evaluation JSON output");

  ImportanceArgs importance;
  auto* c_imp = app.add_subcommand("importance", "Split-based feature importance of a tree model");
  c_imp->add_option("model", importance.model, "Model JSON")->required();
  c_imp->add_option("--learner", importance.learner, "Base learner name inside a stack model");
  c_imp->add_option("--format", importance.format, "csv or json");
  c_imp->add_option("-o,--out", importance.output, "Output file (default stdout)");
  c_imp->add_option("--rank-by", importance.rank_by, "Also print a ranking: weight|gain|cover|total_gain|total_cover");

  ExperimentArgs experiment;
  auto* c_exp = app.add_subcommand("experiment", "Run the full comparison on a raw retail CSV");
  c_exp->add_option("input", experiment.input, "Raw transactions CSV")->required();
  c_exp->add_option("-o,--out", experiment.out_dir, "Output directory");
  c_exp->add_option("--cutoff", experiment.cutoff, "Override the default cutoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_feat->parsed()) return run_featurize(featurize);
    if (c_clv->parsed()) return run_clv(clv);
    if (c_train->parsed()) return run_train(train, seed, threads);
    if (c_eval->parsed()) return run_evaluate(evaluate);
    if (c_imp->parsed()) return run_importance(importance);
    if (c_exp->parsed()) return run_experiment_cmd(experiment, seed.value_or(42), threads);
  } catch (const clvstack::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
