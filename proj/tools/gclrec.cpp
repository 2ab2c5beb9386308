// Command-line front end: prepare, train, eval, bench, sweep, synth.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gclrec/bench.hpp"
#include "gclrec/config.hpp"
#include "gclrec/errors.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/manifest.hpp"
#include "gclrec/synthetic.hpp"
#include "gclrec/train.hpp"

namespace fs = std::filesystem;
using namespace gclrec;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 1;
  bool deterministic = false;
};

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  return out;
}

RunManifest manifest_for(const std::string& command, const fs::path& data_dir,
                         const InteractionDataset& dataset) {
  RunManifest m;
  m.command = command;
  m.data_dir = data_dir;
  m.num_users = dataset.num_users();
  m.num_items = dataset.num_items();
  m.num_interactions =
      dataset.train().size() + dataset.validation().size() + dataset.test().size();
  m.data_hash = fingerprint_splits(data_dir);
  return m;
}

// Config file plus --set overrides, with the global seed applied last.
ParsedConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides,
                            const Globals& globals) {
  ParsedConfig parsed = path.empty() ? ParsedConfig{} : load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    set_config_value(parsed.config, key, kv.substr(eq + 1));
    parsed.given_keys.insert(key);
  }
  if (globals.seed_given) {
    parsed.config.seed = globals.seed;
    parsed.given_keys.insert("seed");
  }
  for (const auto& w : validate_config(parsed.config, parsed.given_keys)) warn(w);
  return parsed;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string input;
  std::string out;
  std::string delimiter;
};

int cmd_prepare(const PrepareArgs& args, const Globals& globals) {
  Delimiter delim;
  if (args.delimiter == "tab" || args.delimiter == "\\t") {
    delim = '\t';
  } else if (args.delimiter.size() == 1) {
    delim = args.delimiter[0];
  } else if (!args.delimiter.empty() && args.delimiter != "whitespace") {
    throw ConfigError("delimiter must be one character, 'tab' or 'whitespace'");
  }
  if (!fs::exists(args.input)) throw DataError("input not found: " + args.input);
  const RawInteractions raw = load_interactions(args.input, delim);
  const InteractionDataset dataset = split_dataset(raw, SplitRatio{}, globals.seed);
  write_splits(args.out, dataset, raw);

  RunManifest m = manifest_for("prepare", args.out, dataset);
  m.seed = globals.seed;
  m.config_echo = "input = " + args.input + "\n";
  for (const char* name : {"train.tsv", "valid.tsv", "test.tsv", "idmap.tsv"}) {
    m.outputs[name] = (fs::path(args.out) / name).string();
  }
  write_manifest(args.out, m);

  const std::size_t feedback = raw.pairs.size();
  std::cout << "users\t" << raw.num_users() << "\n"
            << "items\t" << raw.num_items() << "\n"
            << "feedback\t" << feedback << "\n";
  std::cout.precision(4);
  std::cout << "density\t" << std::fixed
            << 100.0 * static_cast<double>(feedback) /
                   (static_cast<double>(raw.num_users()) * static_cast<double>(raw.num_items()))
            << "%\n";
  std::cout.unsetf(std::ios::fixed);
  std::cout << "train/valid/test\t" << dataset.train().size() << '/'
            << dataset.validation().size() << '/' << dataset.test().size() << "\n";
  if (raw.duplicates_dropped > 0) {
    std::cout << "duplicates dropped\t" << raw.duplicates_dropped << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  bool export_embeddings = false;
};

void write_trace_header(std::ostream& out, const std::string& hash) {
  out << manifest_comment(hash)
      << "epoch,rec_loss,cl_loss,reg_loss,total_loss,val_recall,val_ndcg,uniformity,batch_ms,"
         "epoch_seconds\n";
}

void write_trace_row(std::ostream& out, const EpochRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(10);
    if (v) s << *v;
    return s.str();
  };
  out << r.epoch << ',' << r.rec_loss << ',' << r.cl_loss << ',' << r.reg_loss << ','
      << r.total_loss << ',' << opt(r.val_recall) << ',' << opt(r.val_ndcg) << ','
      << opt(r.uniformity) << ',' << r.batch_ms << ',' << r.epoch_seconds << '\n';
  out.flush();
}

int cmd_train(const TrainArgs& args, const Globals& globals) {
  const ParsedConfig parsed = resolve_config(args.config, args.overrides, globals);
  const TrainConfig& config = parsed.config;
  const LoadedSplits splits = read_splits(args.data);

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("train", args.data, splits.dataset);
  m.seed = config.seed;
  m.config_echo = config_echo(config);
  m.outputs["trace"] = (out_dir / "trace.csv").string();
  m.outputs["uniformity"] = (out_dir / "uniformity.csv").string();
  m.outputs["checkpoint"] = (out_dir / "embeddings.bin").string();
  m.outputs["parameters"] = (out_dir / "parameters.bin").string();
  m.outputs["config"] = (out_dir / "config.txt").string();
  if (args.export_embeddings) m.outputs["embeddings_text"] = (out_dir / "embeddings.tsv").string();
  const std::string hash = write_manifest(out_dir, m);

  auto trace = open_output(out_dir / "trace.csv");
  auto unif = open_output(out_dir / "uniformity.csv");
  write_trace_header(trace, hash);
  unif << manifest_comment(hash) << "epoch,value\n";

  const TrainResult result = train(config, splits.dataset, [&](const EpochRecord& r) {
    write_trace_row(trace, r);
    if (r.uniformity) unif << r.epoch << ',' << *r.uniformity << '\n';
    std::cerr << "epoch " << r.epoch << " loss " << r.total_loss;
    if (r.val_recall) std::cerr << " val_recall " << *r.val_recall;
    std::cerr << '\n';
  });

  write_embeddings_binary(out_dir / "embeddings.bin", result.embeddings);
  write_embeddings_binary(out_dir / "parameters.bin", result.parameters);
  {
    auto echo = open_output(out_dir / "config.txt");
    echo << "# manifest " << hash << '\n' << config_echo(config);
  }
  if (args.export_embeddings) {
    std::vector<std::string> names;
    for (const auto& t : splits.user_tokens) names.push_back("u:" + t);
    for (const auto& t : splits.item_tokens) names.push_back("i:" + t);
    auto text = open_output(out_dir / "embeddings.tsv");
    write_embeddings_text(text, result.embeddings, names);
  }
  std::cout << "best_epoch\t" << result.trace.best_epoch << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t k = 20;
  std::size_t min_item_interactions = 200;
  std::size_t max_users = 5000;
};

int cmd_eval(const EvalArgs& args, const Globals& globals) {
  if (args.k == 0) throw ConfigError("k: must be positive");
  const LoadedSplits splits = read_splits(args.data);
  const InteractionDataset& dataset = splits.dataset;
  const Matrix emb = read_embeddings_binary(args.checkpoint);
  if (emb.rows() != dataset.num_nodes()) {
    throw DataError("checkpoint has " + std::to_string(emb.rows()) + " rows but the id map has " +
                    std::to_string(dataset.num_users()) + " users + " +
                    std::to_string(dataset.num_items()) + " items");
  }
  const PopularityGroups groups = build_popularity_groups(dataset);
  const UniformitySample sample = sample_uniformity_nodes(
      dataset, args.min_item_interactions, args.max_users, derive_seed(globals.seed, 0x0f));
  const bool with_uniformity = !sample.user_nodes.empty() && !sample.item_nodes.empty();
  if (!with_uniformity) warn("uniformity sample is empty; uniformity not reported");
  const EvalReport report = evaluate(dataset, emb, &groups, args.k,
                                     with_uniformity ? &sample : nullptr,
                                     {1'000'000, derive_seed(globals.seed, 0x0f, 1)});

  const fs::path out_path(args.out);
  RunManifest m = manifest_for("eval", args.data, dataset);
  m.seed = globals.seed;
  m.config_echo = "checkpoint = " + args.checkpoint + "\nk = " + std::to_string(args.k) + "\n";
  m.outputs["eval"] = out_path.string();
  const fs::path manifest_dir = out_path.has_parent_path() ? out_path.parent_path() : ".";
  const std::string hash = write_manifest(manifest_dir, m);

  auto out = open_output(out_path);
  out << manifest_comment(hash) << "metric,group,value\n";
  out << "recall@" << args.k << ",all," << report.recall_at_k << '\n';
  out << "ndcg@" << args.k << ",all," << report.ndcg_at_k << '\n';
  for (std::size_t g = 0; g < kNumPopularityGroups; ++g) {
    out << "recall@" << args.k << ',' << g + 1 << ',';
    if (report.per_group_recall[g]) out << *report.per_group_recall[g];
    out << '\n';
  }
  out << "uniformity,all,";
  if (report.uniformity) out << *report.uniformity;
  out << '\n';
  out << "eval_users,all," << report.num_eval_users << '\n';

  std::cout << "recall@" << args.k << '\t' << report.recall_at_k << '\n'
            << "ndcg@" << args.k << '\t' << report.ndcg_at_k << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string methods = "lightgcn,xsimgcl,simgcl,sgl-ed";
  int layers = 2;
  std::size_t batches = 50;
  std::string out;
};

int cmd_bench(const BenchArgs& args, const Globals& globals) {
  const ParsedConfig parsed = resolve_config(args.config, args.overrides, globals);
  const LoadedSplits splits = read_splits(args.data);
  BenchOptions options;
  for (const auto& name : split_list(args.methods, ',')) options.methods.push_back(parse_method(name));
  options.layers = args.layers;
  options.batches = args.batches;

  const fs::path out_path(args.out);
  RunManifest m = manifest_for("bench", args.data, splits.dataset);
  m.seed = parsed.config.seed;
  m.config_echo = config_echo(parsed.config) + "bench_methods = " + args.methods +
                  "\nbench_layers = " + std::to_string(args.layers) +
                  "\nbench_batches = " + std::to_string(args.batches) + "\n";
  m.outputs["bench"] = out_path.string();
  const std::string hash =
      write_manifest(out_path.has_parent_path() ? out_path.parent_path() : ".", m);

  const auto rows = run_bench(parsed.config, splits.dataset, options);
  auto out = open_output(out_path);
  out << manifest_comment(hash);
  write_bench_csv(out, rows);
  write_bench_csv(std::cout, rows);
  return kOk;
}

// ---------------------------------------------------------------------------

// "lambda=0.1,0.2;epsilon=0,0.1" or "layers".
SweepGrid parse_grid(const std::string& spec) {
  SweepGrid grid;
  if (spec == "layers") {
    grid.kind = SweepGrid::Kind::kLayerPairs;
    return grid;
  }
  const auto fields = split_list(spec, ';');
  if (fields.empty()) throw ConfigError("grid: empty specification");
  for (const auto& field : fields) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("grid: expected name=v1,v2 in '" + field + "'");
    const std::string name = field.substr(0, eq);
    std::vector<double>* target = nullptr;
    if (name == "lambda") {
      target = &grid.lambdas;
    } else if (name == "epsilon") {
      target = &grid.epsilons;
    } else {
      throw ConfigError("grid: unknown axis '" + name + "'");
    }
    const auto values = split_list(field.substr(eq + 1), ',');
    if (values.empty()) throw ConfigError("grid: axis '" + name + "' has no values");
    for (const auto& v : values) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size()) throw ConfigError("grid: bad number '" + v + "' on axis " + name);
      target->push_back(x);
    }
  }
  return grid;
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string grid;
  std::string out;
  bool resume = false;
};

const char* kSweepHeader =
    "key,lambda,epsilon,anchor_layer,contrast_layer,status,best_epoch,val_recall,val_ndcg,"
    "test_recall,test_ndcg,error";

// Keys of rows already present in an earlier sweep.csv.
std::set<std::string> completed_keys(const fs::path& path) {
  std::set<std::string> keys;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("key,", 0) == 0) continue;
    const auto fields = split_list(line, ',');
    if (fields.size() >= 6 && fields[5] == "ok") keys.insert(fields[0]);
  }
  return keys;
}

int cmd_sweep(const SweepArgs& args, const Globals& globals) {
  const ParsedConfig parsed = resolve_config(args.config, args.overrides, globals);
  const SweepGrid grid = parse_grid(args.grid);
  const LoadedSplits splits = read_splits(args.data);
  const fs::path out_path(args.out);

  RunManifest m = manifest_for("sweep", args.data, splits.dataset);
  m.seed = parsed.config.seed;
  m.config_echo = config_echo(parsed.config) + "grid = " + args.grid + "\n";
  m.outputs["sweep"] = out_path.string();
  const std::string hash =
      write_manifest(out_path.has_parent_path() ? out_path.parent_path() : ".", m);

  std::set<std::string> done;
  const bool append = args.resume && fs::exists(out_path);
  if (append) done = completed_keys(out_path);
  std::ofstream out;
  if (append) {
    out.open(out_path, std::ios::app);
    out.precision(10);
  } else {
    out = open_output(out_path);
    out << manifest_comment(hash) << kSweepHeader << '\n';
  }
  if (!out) throw DataError("cannot write " + out_path.string());

  int failures = 0;
  sweep(parsed.config, splits.dataset, grid, done, [&](const SweepRow& r) {
    std::string error = r.error;
    for (char& c : error) {
      if (c == ',' || c == '\n') c = ' ';
    }
    out << r.cell.key() << ',' << r.cell.lambda << ',' << r.cell.epsilon << ','
        << r.cell.anchor_layer << ','
        << (r.cell.random_layer ? std::string("random") : std::to_string(r.cell.contrast_layer))
        << ',' << (r.ok ? "ok" : "failed") << ',' << r.best_epoch << ',' << r.val_recall << ','
        << r.val_ndcg << ',' << r.test_recall << ',' << r.test_ndcg << ',' << error << '\n';
    out.flush();
    if (!r.ok) ++failures;
    std::cerr << "cell " << r.cell.key() << (r.ok ? " done" : " failed") << '\n';
  });
  if (failures > 0) std::cerr << failures << " cell(s) failed\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t users = 943;
  std::size_t items = 1682;
  std::size_t edges = 0;
};

int cmd_synth(const SynthArgs& args, const Globals& globals) {
  RawInteractions raw;
  if (args.edges > 0) {
    raw = random_bipartite(args.users, args.items, args.edges, globals.seed);
  } else {
    SyntheticSpec spec;
    spec.num_users = args.users;
    spec.num_items = args.items;
    raw = generate_synthetic(spec, globals.seed);
  }
  auto out = open_output(args.out);
  for (const auto& p : raw.pairs) {
    out << raw.user_tokens[p.user] << '\t' << raw.item_tokens[p.item] << '\n';
  }
  std::cout << "interactions\t" << raw.pairs.size() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph contrastive-learning recommender"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--seed", globals.seed, "Random seed (overrides config seed)");
  app.add_option("--threads", globals.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", globals.deterministic,
               "Reproducible run: single-threaded, fixed reduction order");

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Split an interaction log into train/valid/test");
  p->add_option("--input", prepare.input, "Interaction file (user item [...])")->required();
  p->add_option("--out", prepare.out, "Output directory")->required();
  p->add_option("--delimiter", prepare.delimiter, "Column delimiter: one char, 'tab' or 'whitespace'");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train_args.config, "key = value config file");
  t->add_option("--set", train_args.overrides, "Config override key=value");
  t->add_option("--data", train_args.data, "Directory written by prepare")->required();
  t->add_option("--out", train_args.out, "Output directory")->required();
  t->add_flag("--export-embeddings", train_args.export_embeddings,
              "Also write embeddings.tsv for plotting");

  EvalArgs eval_args;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  e->add_option("--checkpoint", eval_args.checkpoint, "embeddings.bin from train")->required();
  e->add_option("--data", eval_args.data, "Directory written by prepare")->required();
  e->add_option("--out", eval_args.out, "eval.csv path")->required();
  e->add_option("--k", eval_args.k, "Cutoff");
  e->add_option("--uniformity-min-item-interactions", eval_args.min_item_interactions);
  e->add_option("--uniformity-users", eval_args.max_users);

  BenchArgs bench_args;
  auto* b = app.add_subcommand("bench", "Time per-batch forward+backward per method");
  b->add_option("--config", bench_args.config, "key = value config file");
  b->add_option("--set", bench_args.overrides, "Config override key=value");
  b->add_option("--data", bench_args.data, "Directory written by prepare")->required();
  b->add_option("--methods", bench_args.methods, "Comma-separated methods");
  b->add_option("--layers", bench_args.layers, "Propagation layers")->check(CLI::PositiveNumber);
  b->add_option("--batches", bench_args.batches, "Timed batches per method");
  b->add_option("--out", bench_args.out, "bench.csv path")->required();

  SweepArgs sweep_args;
  auto* s = app.add_subcommand("sweep", "Train one model per grid cell");
  s->add_option("--config", sweep_args.config, "key = value config file");
  s->add_option("--set", sweep_args.overrides, "Config override key=value");
  s->add_option("--data", sweep_args.data, "Directory written by prepare")->required();
  s->add_option("--grid", sweep_args.grid, "'lambda=a,b;epsilon=c,d' or 'layers'")->required();
  s->add_option("--out", sweep_args.out, "sweep.csv path")->required();
  s->add_flag("--resume", sweep_args.resume, "Skip cells already in --out");

  SynthArgs synth_args;
  auto* y = app.add_subcommand("synth", "Write a synthetic interaction log");
  y->add_option("--out", synth_args.out, "Output file")->required();
  y->add_option("--users", synth_args.users);
  y->add_option("--items", synth_args.items);
  y->add_option("--edges", synth_args.edges, "Uniform random graph with this many edges");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  globals.seed_given = app.count("--seed") > 0;
  set_num_threads(globals.deterministic ? 1 : globals.threads);

  try {
    if (*p) return cmd_prepare(prepare, globals);
    if (*t) return cmd_train(train_args, globals);
    if (*e) return cmd_eval(eval_args, globals);
    if (*b) return cmd_bench(bench_args, globals);
    if (*s) return cmd_sweep(sweep_args, globals);
    if (*y) return cmd_synth(synth_args, globals);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kUsage;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kNumerical;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}
