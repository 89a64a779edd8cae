#include "p3s/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "p3s/checkpoint.hpp"
#include "p3s/error.hpp"
#include "p3s/interactions.hpp"
#include "p3s/metrics.hpp"
#include "p3s/pipeline.hpp"
#include "p3s/trainer.hpp"

namespace p3s::cli {

namespace fs = std::filesystem;

namespace {

enum class Verbosity { kQuiet, kInfo, kDebug };

// P3S_LOG=quiet|info|debug
Verbosity verbosity_from_env() {
  const char* v = std::getenv("P3S_LOG");
  if (v == nullptr) return Verbosity::kInfo;
  const std::string s(v);
  if (s == "quiet") return Verbosity::kQuiet;
  if (s == "debug") return Verbosity::kDebug;
  return Verbosity::kInfo;
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), level_(verbosity_from_env()) {}

  void info(const std::string& msg) const {
    if (level_ != Verbosity::kQuiet) err_ << "[info] " << msg << '\n';
  }
  void warn(const std::string& msg) const { err_ << "[warn] " << msg << '\n'; }
  bool debug() const { return level_ == Verbosity::kDebug; }
  std::ostream& stream() const { return err_; }

 private:
  std::ostream& err_;
  Verbosity level_;
};

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

Method method_or_throw(const std::string& name) {
  auto m = parse_method(name);
  if (!m) {
    throw Error(ErrorCode::kConfig, fmt::format("unknown method '{}'", name));
  }
  return *m;
}

std::optional<std::size_t> samples_option(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1) {
    throw Error(ErrorCode::kConfig,
                fmt::format("samples per epoch must be 'auto' or >= 1, got '{}'",
                            text));
  }
  return value;
}

GridSpec read_grid(const fs::path& path) {
  GridSpec grid;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    grid.k_values = j.at("k").get<std::vector<std::size_t>>();
    grid.eta_values = j.at("eta").get<std::vector<double>>();
    grid.lambda_values = j.at("lambda").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat,
                fmt::format("{}: bad grid file: {}", path.string(), e.what()));
  }
  return grid;
}

fs::path events_path(const fs::path& in) {
  return fs::is_directory(in) ? in / kEventsFile : in;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

struct IngestArgs {
  std::string events;
  std::string recsys_clicks;
  std::string recsys_buys;
  std::size_t min_purchases = 8;
  std::size_t min_clicks = 40;
  std::string out;
};

void run_ingest(const IngestArgs& a, const Logger& log) {
  const bool native = !a.events.empty();
  const bool recsys = !a.recsys_clicks.empty() || !a.recsys_buys.empty();
  if (native == recsys || (recsys && (a.recsys_clicks.empty() || a.recsys_buys.empty()))) {
    throw Error(ErrorCode::kConfig,
                "give either --events or both --recsys-clicks and --recsys-buys");
  }
  std::vector<RawEvent> raw;
  if (native) {
    raw = read_event_file(a.events);
  } else {
    std::istringstream clicks(read_file(a.recsys_clicks));
    std::istringstream buys(read_file(a.recsys_buys));
    raw = read_recsys2015(clicks, buys);
  }
  const InteractionLog closed = enforce_click_closure(build_log(raw));
  const InteractionLog kept = filter_users(closed, a.min_purchases, a.min_clicks);
  fs::create_directories(a.out);
  std::ostringstream out;
  write_events(out, kept);
  atomic_write(fs::path(a.out) / kEventsFile, out.str());
  log.info(fmt::format("ingest: {} raw events -> {} users, {} items, {} purchases, "
                       "{} clicks",
                       raw.size(), kept.num_users(), kept.num_items(),
                       kept.count(EventKind::kPurchase),
                       kept.count(EventKind::kClick)));
}

struct SplitArgs {
  std::string in;
  double fraction = 0.5;
  std::string out;
};

void run_split(const SplitArgs& a, const Logger& log) {
  const auto raw = read_event_file(events_path(a.in));
  const InteractionLog full = enforce_click_closure(build_log(raw));
  SplitConfig cfg;
  cfg.purchase_fraction = a.fraction;
  const SplitResult split = chronological_split(full, cfg);
  save_dataset(a.out, split.dataset.train(), split.test_log);
  log.info(fmt::format("split: {} users, {} train events, {} test purchases, {} "
                       "clicks after cutoff discarded",
                       split.dataset.num_users(),
                       split.dataset.train().events().size(),
                       split.test_log.events().size(), split.discarded_clicks));
}

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
};

void run_synth(const SynthArgs& a, const Logger& log) {
  const SynthResult synth = generate_synthetic(a.cfg);
  std::ostringstream out;
  write_events(out, synth.log);
  atomic_write(a.out, out.str());
  log.info(fmt::format("synth: wrote {} events to {}", synth.log.events().size(),
                       a.out));
}

struct TrainArgs {
  std::string data;
  std::string method = "p3s2";
  HyperParams hyper;
  std::string samples = "auto";
  bool full_batch = false;
  std::size_t threads = 1;
  std::size_t eval_every = 0;
  std::string out;
  bool eta_given = false;
  bool lambda_given = false;
  bool k_given = false;
};

void run_train(TrainArgs a, const Logger& log) {
  a.hyper.method = method_or_throw(a.method);
  if (a.hyper.method == Method::kWmf && a.eta_given) {
    log.warn("--eta is ignored for wmf (trained by alternating least squares)");
  }
  if (a.hyper.method == Method::kMostPop && (a.eta_given || a.lambda_given || a.k_given)) {
    log.warn("--k, --eta and --lambda are ignored for mostpop");
  }
  TrainConfig config;
  config.hyper = a.hyper;
  config.samples_per_epoch = samples_option(a.samples);
  config.mode = a.full_batch ? SamplingMode::kFullBatch : SamplingMode::kStochastic;
  config.threads = a.threads;
  config.eval_every = a.eval_every;
  if (config.eval_every > 0 || log.debug()) {
    config.progress = &log.stream();
    if (config.eval_every == 0) config.eval_every = 1;
  }
  const Dataset dataset = load_dataset(a.data);
  const ModelParams params = train(dataset, config);
  save_checkpoint(params, a.out);
  log.info(fmt::format("train: {} model ({} users, {} items, K={}) saved to {}",
                       to_string(a.hyper.method), params.num_users(),
                       params.num_items(), params.k(), a.out));
}

struct EvaluateArgs {
  std::string data;
  std::string model;
  std::size_t cutoff = kDefaultCutoff;
  std::string report;
  bool per_user = false;
};

void run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Dataset dataset = load_dataset(a.data);
  const ModelParams params = load_checkpoint(a.model);
  const EvalReport report = evaluate(dataset, params, a.cutoff);
  atomic_write(a.report, dump(to_json(report, a.per_user, &dataset.train().users())));
  print_table(out, report, fs::path(a.model).stem().string());
}

struct GridArgs {
  std::string data;
  std::string method;
  std::string grid;
  std::size_t seeds = 5;
  std::string report;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t cutoff = kDefaultCutoff;
  std::string samples = "auto";
  double wmf_alpha = 40.0;
};

void run_grid(const GridArgs& a, std::ostream& out, const Logger& log) {
  const Method method = method_or_throw(a.method);
  GridSpec grid = a.grid.empty() ? default_grid() : read_grid(a.grid);
  grid.n_seeds = a.seeds;
  TrainConfig base;
  base.hyper.epochs = a.epochs;
  base.hyper.seed = a.seed;
  base.hyper.wmf_alpha = a.wmf_alpha;
  base.samples_per_epoch = samples_option(a.samples);
  const Dataset dataset = load_dataset(a.data);
  log.info(fmt::format("grid-search: {} cells x {} seeds for {}",
                       grid.k_values.size() * grid.eta_values.size() *
                           grid.lambda_values.size(),
                       grid.n_seeds, to_string(method)));
  const GridResult result =
      grid_search(dataset, dataset, grid, method, base, a.cutoff, a.jobs);
  std::ostringstream tsv;
  write_grid_tsv(tsv, result, a.cutoff);
  atomic_write(a.report, tsv.str());
  out << fmt::format("best: K={} eta={} lambda={}\n", result.best.k,
                     result.best.eta, result.best.lambda);
}

struct ReportArgs {
  std::string in;
  std::string label;
};

void run_report(const ReportArgs& a, std::ostream& out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(a.in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, fmt::format("{}: {}", a.in, e.what()));
  }
  const EvalReport report = report_from_json(j);
  print_table(out, report,
              a.label.empty() ? fs::path(a.in).stem().string() : a.label);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pairwise ranking over purchase and click logs"};
  app.name("p3s");
  app.require_subcommand(1);
  const Logger log(err);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "Deduplicate a raw event log, add missing clicks, filter users");
  ingest_cmd->add_option("--events", ingest.events,
                         "Event TSV: user, item, timestamp_ms, click|purchase");
  ingest_cmd->add_option("--recsys-clicks", ingest.recsys_clicks,
                         "RecSys 2015 clicks file (session becomes the user)");
  ingest_cmd->add_option("--recsys-buys", ingest.recsys_buys,
                         "RecSys 2015 buys file");
  ingest_cmd->add_option("--min-purchases", ingest.min_purchases,
                         "Drop users with fewer distinct purchases")
      ->capture_default_str();
  ingest_cmd->add_option("--min-clicks", ingest.min_clicks,
                         "Drop users with fewer distinct clicks")
      ->capture_default_str();
  ingest_cmd->add_option("--out", ingest.out, "Output directory (events.tsv)")
      ->required();

  SplitArgs split;
  auto* split_cmd = app.add_subcommand(
      "split", "Chronological per-user train/test split of purchases");
  split_cmd->add_option("--in", split.in, "Event TSV or directory holding events.tsv")
      ->required();
  split_cmd->add_option("--fraction", split.fraction,
                        "Share of each user's purchases used for training")
      ->capture_default_str();
  split_cmd->add_option("--out", split.out, "Output dataset directory")->required();

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a log from a planted factor model");
  synth_cmd->add_option("--users", synth.cfg.n, "Number of users")->capture_default_str();
  synth_cmd->add_option("--items", synth.cfg.m, "Number of items")->capture_default_str();
  synth_cmd->add_option("--k", synth.cfg.true_k, "Planted dimensionality")
      ->capture_default_str();
  synth_cmd->add_option("--clicks", synth.cfg.clicks_per_user, "Clicks per user")
      ->capture_default_str();
  synth_cmd->add_option("--buys", synth.cfg.purchases_per_user, "Purchases per user")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.cfg.noise, "Selection temperature")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output event TSV")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and save a checkpoint");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--method", tr.method, "mostpop|wmf|bpr|p3s1|p3s2|p3s3")
      ->capture_default_str();
  auto* k_opt = train_cmd->add_option("--k", tr.hyper.k, "Latent dimensionality")
                    ->capture_default_str();
  auto* eta_opt = train_cmd->add_option("--eta", tr.hyper.eta, "Learning rate")
                      ->capture_default_str();
  auto* lambda_opt =
      train_cmd->add_option("--lambda", tr.hyper.lambda, "Regularization strength")
          ->capture_default_str();
  train_cmd->add_option("--epochs", tr.hyper.epochs, "Training epochs")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.hyper.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--wmf-alpha", tr.hyper.wmf_alpha,
                        "WMF confidence weight: c = 1 + alpha * r")
      ->capture_default_str();
  train_cmd->add_option("--samples-per-epoch", tr.samples,
                        "Pairs per epoch, or 'auto' (all pairs, at most 1e6)")
      ->capture_default_str();
  train_cmd->add_flag("--full-batch", tr.full_batch,
                      "Exact gradient of the full objective each epoch");
  train_cmd->add_option("--threads", tr.threads,
                        "Concurrent samplers (>1 is not reproducible)")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.eval_every,
                        "Progress line every N epochs (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Model checkpoint path")->required();

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Rank candidates and score a model");
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--model", ev.model, "Model checkpoint")->required();
  eval_cmd->add_option("--cutoff", ev.cutoff, "K for Prec@K and Recall@K")
      ->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "Output JSON report")->required();
  eval_cmd->add_flag("--per-user", ev.per_user, "Include per-user metrics");

  GridArgs gr;
  auto* grid_cmd = app.add_subcommand(
      "grid-search", "Grid search over K, eta, lambda; select by mean AUC");
  grid_cmd->add_option("--data", gr.data, "Dataset directory")->required();
  grid_cmd->add_option("--method", gr.method, "Method to tune")->required();
  grid_cmd->add_option("--grid", gr.grid,
                       "JSON {\"k\":[..],\"eta\":[..],\"lambda\":[..]}; default "
                       "K=10..200 step 10, eta and lambda in {0.01,0.05,0.1}");
  grid_cmd->add_option("--seeds", gr.seeds, "Runs per cell")->capture_default_str();
  grid_cmd->add_option("--report", gr.report, "Output TSV")->required();
  grid_cmd->add_option("--epochs", gr.epochs, "Training epochs")->capture_default_str();
  grid_cmd->add_option("--seed", gr.seed, "First seed")->capture_default_str();
  grid_cmd->add_option("--jobs", gr.jobs, "Parallel grid cells")->capture_default_str();
  grid_cmd->add_option("--cutoff", gr.cutoff, "K for Prec@K and Recall@K")
      ->capture_default_str();
  grid_cmd->add_option("--samples-per-epoch", gr.samples, "Pairs per epoch or 'auto'")
      ->capture_default_str();
  grid_cmd->add_option("--wmf-alpha", gr.wmf_alpha, "WMF confidence weight")
      ->capture_default_str();

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Print a JSON report as a table");
  report_cmd->add_option("--in", rep.in, "JSON report from evaluate")->required();
  report_cmd->add_option("--label", rep.label, "Column label (default: file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      return app.exit(e, out, err);
    }
    err << "error[usage]: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*ingest_cmd) {
      run_ingest(ingest, log);
    } else if (*split_cmd) {
      run_split(split, log);
    } else if (*synth_cmd) {
      run_synth(synth, log);
    } else if (*train_cmd) {
      tr.k_given = k_opt->count() > 0;
      tr.eta_given = eta_opt->count() > 0;
      tr.lambda_given = lambda_opt->count() > 0;
      run_train(tr, log);
    } else if (*eval_cmd) {
      run_evaluate(ev, out);
    } else if (*grid_cmd) {
      run_grid(gr, out, log);
    } else if (*report_cmd) {
      run_report(rep, out);
    }
  } catch (const Error& e) {
    err << "error[" << category_name(e.code()) << "]: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace p3s::cli
