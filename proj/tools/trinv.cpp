#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "trinv/config.hpp"
#include "trinv/evaluation.hpp"
#include "trinv/gateway.hpp"
#include "trinv/mimic.hpp"
#include "trinv/prompts.hpp"
#include "trinv/tables.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

std::string backend_id(const trinv::Config& cfg, const std::string& path) {
  const auto& model = cfg.endpoints.at("model");
  if (!model.model_id.empty()) return model.model_id;
  return std::filesystem::path(path).stem().string();
}

int cmd_eval_run(const std::string& config_path, const std::string& method,
                 const std::string& dataset_path, std::uint64_t seed, const std::string& out_dir,
                 bool cot, bool no_latency, std::optional<double> threshold, std::size_t cap,
                 std::optional<int> workers) {
  auto cfg = trinv::load_config(config_path);
  if (!method.empty()) {
    const auto m = trinv::method_from_string(method);
    if (m != cfg.method.method) cfg.method.threshold.reset();
    cfg.method.method = m;
  }
  if (cot) cfg.method.cot_variant = true;
  if (threshold) trinv::apply_threshold(cfg.method, *threshold);

  const auto dataset = trinv::load_dataset(dataset_path, cap);
  const auto backends = trinv::make_backends(cfg);
  const auto prompts = trinv::load_prompts(cfg);

  trinv::RunOptions ro;
  ro.backend_id = backend_id(cfg, config_path);
  ro.workers = workers.value_or(cfg.workers);
  ro.record_latency = !no_latency;
  std::string label(trinv::to_string(cfg.method.method));
  if (cfg.method.cot_variant) label += "+CoT";
  const std::string stem = dataset.name + "_" + label + "_" + ro.backend_id + "_seed" +
                           std::to_string(seed);
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  ro.decision_log = out / (stem + ".decisions.jsonl");

  const auto run = trinv::run_experiment(cfg.method, dataset, backends, seed, ro, prompts);
  const auto& r = run.result;
  std::ofstream f(out / (stem + ".json"));
  f << trinv::result_to_json(r).dump(2) << '\n';
  if (!f) throw trinv::Error(trinv::ErrorKind::Io, "cannot write result");

  std::cout << label << " on " << r.dataset << " (" << r.backend << ", seed " << r.seed
            << "): scored " << r.scored << ", failures " << r.failures;
  if (r.calibrated_threshold) {
    std::cout << (r.method == trinv::Method::TraceInversion ? ", SE cutoff " : ", p* ")
              << *r.calibrated_threshold;
  }
  std::cout << "\n  A-Acc " << (r.a_acc ? trinv::format_number(*r.a_acc) : "NA") << "  R-Acc "
            << (r.r_acc ? trinv::format_number(*r.r_acc) : "all-abstain") << "  status "
            << trinv::to_string(r.status) << '\n';
  return r.status == trinv::RunStatus::Ok ? 0 : 2;
}

int cmd_eval_aggregate(const std::string& in, const std::string& format, const std::string& out,
                       bool averaged) {
  const auto results = trinv::load_results(in);
  const auto fmt = trinv::table_format_from_string(format);
  if (!out.empty()) {
    for (const auto& p : trinv::emit_tables(results, out, fmt)) std::cout << p.string() << '\n';
    return 0;
  }
  const auto grouping = averaged ? trinv::Grouping::AcrossBackends : trinv::Grouping::PerBackend;
  const auto t = trinv::aggregate(results, trinv::Metric::AbstainAccuracy, grouping);
  std::cout << (fmt == trinv::TableFormat::Csv ? trinv::table_to_csv(t) : trinv::table_to_text(t));
  return 0;
}

int cmd_eval_gap(const std::string& in, const std::string& format) {
  const auto results = trinv::load_results(in);
  if (results.empty()) throw trinv::Error(trinv::ErrorKind::EmptyTable, "no results in " + in);
  const auto rows = trinv::gap_table(results);
  std::cout << (format == "csv" ? trinv::gap_to_csv(rows) : trinv::gap_to_text(rows));
  return 0;
}

int cmd_serve(const std::string& config_path, std::optional<std::string> host,
              std::optional<int> port, int threads) {
  const auto cfg = trinv::load_config(config_path);
  auto gw = trinv::Gateway::from_config(cfg);
  gw->set_decision_sink([](const nlohmann::json& entry) { std::clog << entry.dump() << '\n'; });
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto h = host.value_or(cfg.host);
  const int bound = gw->start(h, port.value_or(cfg.port), threads);
  std::cerr << "listening on " << h << ":" << bound << '\n';
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  gw->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abstention decisions and evaluation for LLM question answering"};
  app.require_subcommand(1);

  auto* eval = app.add_subcommand("eval", "Run and summarise experiments");
  eval->require_subcommand(1);

  std::string config_path, method, dataset_path, out_dir = "runs";
  std::uint64_t seed = 0;
  bool cot = false, no_latency = false;
  std::optional<double> threshold;
  std::size_t cap = trinv::kMaxDatasetSize;
  std::optional<int> workers;
  auto* run = eval->add_subcommand("run", "Evaluate one method on one dataset");
  run->add_option("--backend,--config", config_path, "Config document with the endpoints")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--method", method, "TraceInversion, Probs, AskCali, Reflect, Cooperate or Compete");
  run->add_option("--dataset", dataset_path, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run seed")->default_val(0);
  run->add_option("--out", out_dir, "Output directory")->default_val("runs");
  run->add_flag("--cot", cot, "Append the step-by-step instruction to baseline prompts");
  run->add_flag("--no-latency", no_latency, "Record zero latency for byte-identical logs");
  run->add_option("--threshold", threshold, "Fixed p* (skips calibration)");
  run->add_option("--cap", cap, "Maximum samples after subsampling");
  run->add_option("--workers", workers, "Concurrent samples");

  std::string in, format = "text", tables_out;
  bool averaged = false;
  auto* agg = eval->add_subcommand("aggregate", "Build result tables");
  agg->add_option("--in", in, "Run result file or directory")->required();
  agg->add_option("--format", format, "csv, text or both")->default_val("text");
  agg->add_option("--out", tables_out, "Write every table into this directory");
  agg->add_flag("--average-backends", averaged, "Average rows across backends");

  std::string gap_in, gap_format = "text";
  auto* gap = eval->add_subcommand("gap", "Answerable/unanswerable gap per domain");
  gap->add_option("--in", gap_in, "Run result file or directory")->required();
  gap->add_option("--format", gap_format, "csv or text")->default_val("text");

  std::string serve_config;
  std::optional<std::string> host;
  std::optional<int> port;
  int threads = 16;
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  serve->add_option("--config", serve_config, "Config document")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--threads", threads, "HTTP worker threads")->default_val(16);

  std::string mimic_out = "data/mimic";
  trinv::MimicOptions mopts;
  std::string mimic_datasets;
  auto* mimic = app.add_subcommand("mimic", "Generate a synthetic dataset with replayable fixtures");
  mimic->add_option("--out", mimic_out, "Output directory")->default_val("data/mimic");
  mimic->add_option("--per-dataset", mopts.per_dataset, "Samples per dataset");
  mimic->add_option("--datasets", mimic_datasets, "Comma-separated dataset tags");
  mimic->add_option("--generator-seed", mopts.generator_seed, "Seed of the synthetic data");
  mimic->add_flag("--cot", mopts.cot_variants, "Also run the CoT baseline variants");

  std::string conv_in, conv_format, conv_name, conv_out;
  auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
  dataset->require_subcommand(1);
  auto* convert = dataset->add_subcommand("convert", "Convert a benchmark export to JSONL");
  convert->add_option("--input", conv_in, "Source file")->required()->check(CLI::ExistingFile);
  convert->add_option("--format", conv_format, "mmlu-csv or mc-jsonl")->required();
  convert->add_option("--name", conv_name, "Dataset tag, e.g. MMLU")->required();
  convert->add_option("--out", conv_out, "Output JSONL")->required();

  auto* prompts = app.add_subcommand("prompts", "Print the default prompt catalog as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_eval_run(config_path, method, dataset_path, seed, out_dir, cot, no_latency,
                          threshold, cap, workers);
    }
    if (*agg) return cmd_eval_aggregate(in, format, tables_out, averaged);
    if (*gap) return cmd_eval_gap(gap_in, gap_format);
    if (*serve) return cmd_serve(serve_config, host, port, threads);
    if (*prompts) {
      std::cout << trinv::PromptCatalog::defaults().to_json() << '\n';
      return 0;
    }
    if (*mimic) {
      if (!mimic_datasets.empty()) {
        mopts.datasets.clear();
        std::stringstream ss(mimic_datasets);
        for (std::string tok; std::getline(ss, tok, ',');) mopts.datasets.push_back(trinv::trim(tok));
      }
      const auto bundle = trinv::generate_mimic(mopts);
      trinv::write_mimic(bundle, mimic_out);
      std::cout << "wrote " << bundle.datasets.size() << " datasets, "
                << bundle.fixtures.size() << " fixtures, " << bundle.results.size()
                << " runs to " << mimic_out << '\n';
      return 0;
    }
    if (*convert) {
      const auto ds = trinv::convert_dataset(conv_in, trinv::source_format_from_string(conv_format),
                                             conv_name);
      trinv::write_dataset(ds, conv_out);
      std::cout << "wrote " << ds.samples.size() << " samples to " << conv_out << '\n';
      return 0;
    }
  } catch (const trinv::Error& e) {
    std::cerr << "error (" << trinv::to_string(e.kind()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
