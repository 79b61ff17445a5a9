// vaer: command-line front end.
//
// Exit codes: 0 ok, 1 other failure, 2 missing file or model, 3 dimension
// mismatch, 4 empty truth set, 5 port busy.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vaer/al.hpp"
#include "vaer/corpus.hpp"
#include "vaer/csv.hpp"
#include "vaer/error.hpp"
#include "vaer/ir.hpp"
#include "vaer/match.hpp"
#include "vaer/metrics.hpp"
#include "vaer/neighbors.hpp"
#include "vaer/repr.hpp"
#include "vaer/session.hpp"
#include "vaer/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vaer;

namespace {

enum Exit { kOk = 0, kFailure = 1, kNoFile = 2, kDimension = 3, kEmptyTruth = 4, kPortBusy = 5 };

class EmptyTruth : public Error {
 public:
  using Error::Error;
};

struct TableArgs {
  std::string left;
  std::string right;
  std::string id_column;
  char delimiter = ',';

  void add(CLI::App* cmd) {
    cmd->add_option("--left", left, "Left table (CSV with header)")->required();
    cmd->add_option("--right", right, "Right table; omit to deduplicate --left");
    cmd->add_option("--id-column", id_column, "Column holding record ids (default: row index)");
    cmd->add_option("--delimiter", delimiter, "Field delimiter");
  }

  std::pair<Table, Table> load() const {
    LoadOptions options;
    options.delimiter = delimiter;
    if (!id_column.empty()) options.id_column = id_column;
    Table l = load_table(left, options);
    Table r = right.empty() ? l : load_table(right, options);
    return {std::move(l), std::move(r)};
  }
};

struct IrArgs {
  std::string kind = "lsa";
  Eigen::Index dim = 300;
  std::string embeddings;
  std::string precomputed;

  void add(CLI::App* cmd) {
    cmd->add_option("--ir", kind, "Intermediate representation provider")
        ->check(CLI::IsMember({"lsa", "embed", "precomputed"}));
    cmd->add_option("--ir-dim", dim, "LSA dimension");
    cmd->add_option("--embeddings", embeddings, "word2vec text file (--ir embed)");
    cmd->add_option("--irs", precomputed, "Precomputed IR CSV (--ir precomputed)");
  }
};

std::uint64_t effective_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("VAER_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw FormatError(std::string("VAER_SEED is not an unsigned integer: ") + env);
    }
  }
  return seed;
}

std::string sidecar_path(const std::string& model) { return model + ".ir.json"; }

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

/// Builds the provider for `tables` and writes its description next to `model_out`.
std::shared_ptr<const ir::Provider> make_provider(const IrArgs& args, const Table& left, const Table& right,
                                                  std::uint64_t seed, const std::string& model_out) {
  json sidecar = {{"type", args.kind}};
  std::shared_ptr<const ir::Provider> provider;
  if (args.kind == "lsa") {
    ir::LsaOptions options;
    options.seed = seed ^ 0x15a;
    const auto corpus = ir::corpus_sentences(left, right);
    auto lsa = std::make_shared<ir::LsaModel>(ir::fit_lsa(corpus, args.dim, options));
    const std::string lsa_path = model_out + ".lsa";
    lsa->save(lsa_path);
    sidecar["path"] = absolute(lsa_path);
    provider = lsa;
  } else if (args.kind == "embed") {
    if (args.embeddings.empty()) throw FormatError("--ir embed needs --embeddings");
    provider = std::make_shared<ir::EmbeddingTable>(ir::EmbeddingTable::load_word2vec(args.embeddings));
    sidecar["path"] = absolute(args.embeddings);
  } else {
    if (args.precomputed.empty()) throw FormatError("--ir precomputed needs --irs");
    const Table* tables[] = {&left, &right};
    provider = std::make_shared<ir::PrecomputedIrs>(ir::load_precomputed_irs(args.precomputed, tables));
    sidecar["path"] = absolute(args.precomputed);
  }
  sidecar["dim"] = provider->dim();
  std::ofstream out(sidecar_path(model_out));
  if (!out) throw IoError("cannot write " + sidecar_path(model_out));
  out << sidecar.dump(2) << '\n';
  return provider;
}

json read_sidecar(const std::string& model) {
  const std::string path = sidecar_path(model);
  std::ifstream in(path);
  if (!in) throw IoError("no such file: " + path + " (IR provider description written next to the model)");
  return json::parse(in);
}

std::shared_ptr<const ir::Provider> load_provider(const json& sidecar, const Table& left, const Table& right) {
  const std::string type = sidecar.at("type").get<std::string>();
  const std::string path = sidecar.at("path").get<std::string>();
  if (type == "lsa") return std::make_shared<ir::LsaModel>(ir::LsaModel::load(path));
  if (type == "embed") return std::make_shared<ir::EmbeddingTable>(ir::EmbeddingTable::load_word2vec(path));
  if (type == "precomputed") {
    const Table* tables[] = {&left, &right};
    return std::make_shared<ir::PrecomputedIrs>(ir::load_precomputed_irs(path, tables));
  }
  throw FormatError("unknown IR provider type '" + type + "'");
}

void copy_sidecar(const std::string& from_model, const std::string& to_model) {
  std::ofstream out(sidecar_path(to_model));
  if (!out) throw IoError("cannot write " + sidecar_path(to_model));
  out << read_sidecar(from_model).dump(2) << '\n';
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw IoError(std::string("no such file: ") + path + " (" + what + ")");
}

/// Pads or truncates the tables to the model arity, warning when it changes them.
std::pair<Table, Table> fit_arity(std::pair<Table, Table> tables, std::uint64_t arity) {
  for (Table* t : {&tables.first, &tables.second}) {
    if (t->arity() != arity) {
      std::cerr << "note: aligning " << t->name() << " from " << t->arity() << " to " << arity << " attributes\n";
      *t = align_arity(*t, arity);
    }
  }
  return tables;
}

std::vector<match::PairIrs> pair_irs(const PairSet& pairs, const Table& left, const Table& right,
                                     const std::vector<repr::Matrix>& left_irs,
                                     const std::vector<repr::Matrix>& right_irs) {
  pairs.validate(left, right);
  std::vector<match::PairIrs> out;
  for (const LabeledKey& p : pairs.pairs()) {
    const auto l = static_cast<std::size_t>(left.find(p.pair.left) - left.records().data());
    const auto r = static_cast<std::size_t>(right.find(p.pair.right) - right.records().data());
    out.push_back({&left_irs[l], &right_irs[r]});
  }
  return out;
}

/// Candidate or test pairs: left_id,right_id with an optional label column.
PairSet load_unlabeled_pairs(const std::string& path) {
  require_file(path, "pairs");
  const auto rows = csv::read_file(path);
  if (rows.empty()) return {};
  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto l = column("left_id"), r = column("right_id"), y = column("label");
  if (!l || !r) throw FormatError(path + ": header needs left_id and right_id");
  std::vector<LabeledKey> pairs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) throw FormatError(path + " row " + std::to_string(i) + ": wrong field count");
    pairs.push_back({{row[*l], row[*r]}, y ? std::stoi(row[*y]) : 0});
  }
  return PairSet(std::move(pairs));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------- commands

struct TrainReprArgs {
  TableArgs tables;
  IrArgs ir;
  std::string out;
  std::string transfer;
  Eigen::Index latent = 100;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  std::uint64_t seed = 7;
};

int train_repr(const TrainReprArgs& a) {
  const std::uint64_t seed = effective_seed(a.seed);
  auto [left, right] = a.tables.load();
  if (!a.transfer.empty()) {
    require_file(a.transfer, "model to transfer");
    repr::VaeModel vae = repr::load_model(a.transfer);
    std::tie(left, right) = fit_arity({std::move(left), std::move(right)}, vae.arity);
    IrArgs ir = a.ir;
    ir.dim = vae.dims().input;
    auto provider = make_provider(ir, left, right, seed, a.out);
    if (provider->dim() != vae.dims().input) {
      throw DimensionError("transferred model expects IR dimension " + std::to_string(vae.dims().input) +
                           ", provider gives " + std::to_string(provider->dim()));
    }
    repr::save_model(vae, a.out);
    std::cout << "transferred " << a.transfer << " -> " << a.out << " (no training)\n";
    return kOk;
  }
  if (left.arity() != right.arity()) {
    const std::size_t arity = std::max(left.arity(), right.arity());
    std::tie(left, right) = fit_arity({std::move(left), std::move(right)}, arity);
  }
  auto provider = make_provider(a.ir, left, right, seed, a.out);
  std::vector<repr::Matrix> records = repr::table_irs(left, *provider);
  if (!a.tables.right.empty()) {
    auto more = repr::table_irs(right, *provider);
    records.insert(records.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  repr::VaeTrainConfig config;
  config.dims = {provider->dim(), 200, a.latent};
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  auto result = repr::train_vae(records, config, [](std::size_t epoch, double loss) {
    std::printf("epoch %3zu  loss %.6f\n", epoch, loss);
    std::fflush(stdout);
  });
  repr::save_model(result.model, a.out);
  std::printf("trained on %zu records in %.2fs -> %s\n", records.size(), seconds_since(start), a.out.c_str());
  return kOk;
}

struct MatchArgs {
  TableArgs tables;
  std::string train;
  std::string model;
  std::string out;
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double margin = 0.5;
  double holdout = 0.1;
  std::uint64_t seed = 11;
};

int cmd_match(const MatchArgs& a) {
  const std::uint64_t seed = effective_seed(a.seed);
  require_file(a.model, "representation model");
  require_file(a.train, "training pairs");
  repr::VaeModel vae = repr::load_model(a.model);
  auto [left, right] = fit_arity(a.tables.load(), vae.arity);
  auto provider = load_provider(read_sidecar(a.model), left, right);
  if (provider->dim() != vae.dims().input) {
    throw DimensionError("model expects IR dimension " + std::to_string(vae.dims().input) + ", provider gives " +
                         std::to_string(provider->dim()));
  }
  const PairSet train = load_pairs(a.train);
  const auto left_irs = repr::table_irs(left, *provider);
  const auto right_irs = repr::table_irs(right, *provider);
  const auto irs = pair_irs(train, left, right, left_irs, right_irs);
  std::vector<match::TrainingPair> pairs;
  for (std::size_t i = 0; i < irs.size(); ++i) pairs.push_back({irs[i], train.pairs()[i].label});

  match::MatcherConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.margin = a.margin;
  config.holdout_fraction = a.holdout;
  config.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  auto result = match::train_matcher(pairs, vae, config);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) std::printf("epoch %3zu  loss %.6f\n", e + 1, result.epoch_losses[e]);
  match::save_matcher(result.model, a.out);
  copy_sidecar(a.model, a.out);
  std::printf("trained on %zu pairs in %.2fs -> %s\n", pairs.size() - result.holdout_size, seconds_since(start),
              a.out.c_str());
  if (result.holdout_size > 0) {
    const metrics::ReportRow rows[] = {{"holdout", result.holdout}};
    metrics::print_report(std::cout, rows);
  }
  return kOk;
}

struct PredictArgs {
  TableArgs tables;
  std::string pairs;
  std::string matcher;
  std::string out;
  std::optional<double> threshold;
};

struct LoadedMatcher {
  match::MatcherModel model;
  Table left, right;
  std::vector<repr::Matrix> left_irs, right_irs;
};

LoadedMatcher load_matcher_for(const TableArgs& tables, const std::string& path) {
  require_file(path, "matcher model");
  LoadedMatcher m;
  m.model = match::load_matcher(path);
  std::tie(m.left, m.right) = fit_arity(tables.load(), m.model.arity);
  auto provider = load_provider(read_sidecar(path), m.left, m.right);
  if (provider->dim() != m.model.encoder.input_dim()) {
    throw DimensionError("matcher expects IR dimension " + std::to_string(m.model.encoder.input_dim()) +
                         ", provider gives " + std::to_string(provider->dim()));
  }
  m.left_irs = repr::table_irs(m.left, *provider);
  m.right_irs = repr::table_irs(m.right, *provider);
  return m;
}

int cmd_predict(const PredictArgs& a) {
  auto m = load_matcher_for(a.tables, a.matcher);
  const PairSet pairs = load_unlabeled_pairs(a.pairs);
  const auto irs = pair_irs(pairs, m.left, m.right, m.left_irs, m.right_irs);
  const auto predictions = match::predict(m.model, irs, a.threshold);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot write " + a.out);
  csv::write_row(out, {"left_id", "right_id", "probability", "label"});
  char buf[32];
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9f", predictions[i].probability);
    csv::write_row(out, {pairs.pairs()[i].pair.left, pairs.pairs()[i].pair.right, buf,
                         std::to_string(predictions[i].label)});
  }
  std::printf("%zu predictions -> %s\n", predictions.size(), a.out.c_str());
  return kOk;
}

struct EvaluateArgs {
  TableArgs tables;
  std::string test;
  std::string matcher;
  std::string report;
  std::optional<double> threshold;
};

int cmd_evaluate(const EvaluateArgs& a) {
  require_file(a.test, "test pairs");
  const PairSet truth = load_pairs(a.test);
  if (truth.empty()) throw EmptyTruth("empty truth: " + a.test + " has no labeled pairs");
  auto m = load_matcher_for(a.tables, a.matcher);
  const auto irs = pair_irs(truth, m.left, m.right, m.left_irs, m.right_irs);
  const auto predictions = match::predict(m.model, irs, a.threshold);
  std::map<PairKey, int> by_key;
  for (std::size_t i = 0; i < predictions.size(); ++i) by_key[truth.pairs()[i].pair] = predictions[i].label;
  const metrics::ReportRow rows[] = {{"test", metrics::prf1(by_key, truth)}};
  metrics::print_report(std::cout, rows);
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw IoError("cannot write " + a.report);
    metrics::write_report_csv(out, rows);
  }
  return kOk;
}

struct BlockArgs {
  TableArgs tables;
  std::string model;
  std::string out;
  std::size_t k = 10;
  std::string truth;
};

int cmd_block(const BlockArgs& a) {
  require_file(a.model, "representation model");
  repr::VaeModel vae = repr::load_model(a.model);
  auto [left, right] = fit_arity(a.tables.load(), vae.arity);
  auto provider = load_provider(read_sidecar(a.model), left, right);
  if (provider->dim() != vae.dims().input) {
    throw DimensionError("model expects IR dimension " + std::to_string(vae.dims().input) + ", provider gives " +
                         std::to_string(provider->dim()));
  }
  const auto lr = repr::represent_table(vae, repr::table_irs(left, *provider));
  const auto rr = repr::represent_table(vae, repr::table_irs(right, *provider));
  const bool same = a.tables.right.empty();
  const auto pool = neighbors::candidate_pairs(left, lr, right, rr, a.k, {}, same);
  neighbors::save_candidates(pool, a.out);
  std::printf("%zu candidate pairs -> %s\n", pool.size(), a.out.c_str());
  if (!a.truth.empty()) {
    const PairSet truth = load_unlabeled_pairs(a.truth);
    std::set<PairKey> found;
    for (const auto& c : pool) found.insert(c.key);
    std::size_t hits = 0, total = 0;
    for (const LabeledKey& p : truth.pairs()) {
      if (p.label != 1 && truth.count(1) > 0) continue;
      ++total;
      hits += found.contains(p.pair) || (same && found.contains({p.pair.right, p.pair.left}));
    }
    if (total == 0) throw EmptyTruth("empty truth: " + a.truth + " has no duplicate pairs");
    std::printf("pair completeness %.4f (%zu / %zu)\n", static_cast<double>(hits) / static_cast<double>(total), hits,
                total);
  }
  return kOk;
}

struct SynthArgs {
  std::string out_dir;
  std::string domain = "restaurants";
  bool restaurants_scale = false;
  std::size_t negatives = 200;
  std::size_t train = 200;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a) {
  const std::uint64_t seed = effective_seed(a.seed);
  synth::SynthConfig config = a.restaurants_scale ? synth::restaurants_scale(seed) : synth::SynthConfig{};
  config.seed = seed;
  config.domain = a.domain == "products" ? synth::Domain::products : synth::Domain::restaurants;
  const auto data = synth::generate(config);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  save_table(data.left, (dir / "left.csv").string());
  save_table(data.right, (dir / "right.csv").string());
  std::vector<LabeledKey> dups;
  for (const PairKey& d : data.duplicates) dups.push_back({d, 1});
  save_pairs(PairSet(dups), (dir / "duplicates.csv").string());
  const PairSet labeled = synth::labeled_pairs(data, a.negatives, seed + 1);
  const auto [train, test] = synth::split_pairs(labeled, std::min(a.train, labeled.size()), seed + 2);
  save_pairs(train, (dir / "train.csv").string());
  save_pairs(test, (dir / "test.csv").string());
  std::printf("%zu + %zu records, %zu duplicates, %zu train / %zu test pairs -> %s\n", data.left.size(),
              data.right.size(), data.duplicates.size(), train.size(), test.size(), a.out_dir.c_str());
  return kOk;
}

struct ServeArgs {
  TableArgs tables;
  std::string model;
  std::string journal;
  std::string test;
  std::string out;
  std::string host = "127.0.0.1";
  int port = 8765;
  std::size_t k = 10;
  std::size_t batch = 10;
  double margin = 0.5;
  std::uint64_t seed = 23;
};

int cmd_serve(const ServeArgs& a) {
  const std::uint64_t seed = effective_seed(a.seed);
  require_file(a.model, "representation model");
  repr::VaeModel vae = repr::load_model(a.model);
  auto [left, right] = fit_arity(a.tables.load(), vae.arity);
  auto provider = load_provider(read_sidecar(a.model), left, right);
  if (provider->dim() != vae.dims().input) {
    throw DimensionError("model expects IR dimension " + std::to_string(vae.dims().input) + ", provider gives " +
                         std::to_string(provider->dim()));
  }
  al::LearnerConfig config;
  config.bootstrap.neighbors = a.k;
  config.batch_size = a.batch;
  config.matcher.margin = a.margin;
  config.seed = seed;
  session::SessionOptions options;
  options.journal_path = a.journal.empty() ? a.out + ".journal.jsonl" : a.journal;
  if (!a.test.empty()) {
    require_file(a.test, "test pairs");
    options.test = load_pairs(a.test);
  }
  session::Session s(std::move(left), std::move(right), provider, std::move(vae), config, options);
  session::Server server(s);
  const int port = server.bind(a.host, a.port);  // fail fast before the bootstrap work
  std::printf("bootstrapping...\n");
  std::fflush(stdout);
  s.start();
  std::printf("serving on http://%s:%d/session (journal %s)\n", a.host.c_str(), port, options.journal_path.c_str());
  std::fflush(stdout);
  server.run();
  s.wait_until_settled();
  match::save_matcher(s.matcher(), a.out);
  copy_sidecar(a.model, a.out);
  std::printf("session finished; matcher -> %s\n", a.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vaer: entity resolution with variational representations"};
  app.require_subcommand(1);

  TrainReprArgs tr;
  auto* train_cmd = app.add_subcommand("train-repr", "Fit the IR provider and train the representation model");
  tr.tables.add(train_cmd);
  tr.ir.add(train_cmd);
  train_cmd->add_option("--out", tr.out, "Model file to write")->required();
  train_cmd->add_option("--transfer", tr.transfer, "Reuse this trained model instead of training");
  train_cmd->add_option("--k", tr.latent, "Latent dimension");
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  train_cmd->add_option("--batch", tr.batch, "Records per step");
  train_cmd->add_option("--seed", tr.seed, "Random seed (VAER_SEED overrides)");

  MatchArgs ma;
  auto* match_cmd = app.add_subcommand("match", "Train the matcher on labeled pairs");
  ma.tables.add(match_cmd);
  match_cmd->add_option("--train", ma.train, "Labeled pairs CSV (left_id,right_id,label)")->required();
  match_cmd->add_option("--model", ma.model, "Representation model")->required();
  match_cmd->add_option("--out", ma.out, "Matcher file to write")->required();
  match_cmd->add_option("--epochs", ma.epochs, "Training epochs");
  match_cmd->add_option("--batch", ma.batch, "Pairs per step");
  match_cmd->add_option("--margin", ma.margin, "Contrastive margin");
  match_cmd->add_option("--holdout", ma.holdout, "Fraction held out for a report");
  match_cmd->add_option("--seed", ma.seed, "Random seed (VAER_SEED overrides)");

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Score pairs with a trained matcher");
  pa.tables.add(predict_cmd);
  predict_cmd->add_option("--pairs", pa.pairs, "Pairs CSV (left_id,right_id[,...])")->required();
  predict_cmd->add_option("--matcher", pa.matcher, "Matcher model")->required();
  predict_cmd->add_option("--out", pa.out, "Predictions CSV to write")->required();
  predict_cmd->add_option("--threshold", pa.threshold, "Decision threshold (default: the model's)");

  EvaluateArgs ea;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Precision, recall and F1 on labeled pairs");
  ea.tables.add(evaluate_cmd);
  evaluate_cmd->add_option("--test", ea.test, "Labeled pairs CSV")->required();
  evaluate_cmd->add_option("--matcher", ea.matcher, "Matcher model")->required();
  evaluate_cmd->add_option("--report", ea.report, "Also write the report as CSV");
  evaluate_cmd->add_option("--threshold", ea.threshold, "Decision threshold (default: the model's)");

  BlockArgs ba;
  auto* block_cmd = app.add_subcommand("block", "Candidate pairs from LSH over the representations");
  ba.tables.add(block_cmd);
  block_cmd->add_option("--model", ba.model, "Representation model")->required();
  block_cmd->add_option("--out", ba.out, "Candidates CSV to write")->required();
  block_cmd->add_option("--k", ba.k, "Neighbours per left record");
  block_cmd->add_option("--truth", ba.truth, "Known duplicates, to report pair completeness");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted duplicates");
  synth_cmd->add_option("--out-dir", sa.out_dir, "Output directory")->required();
  synth_cmd->add_option("--domain", sa.domain, "restaurants or products")
      ->check(CLI::IsMember({"restaurants", "products"}));
  synth_cmd->add_flag("--restaurants-scale", sa.restaurants_scale, "533 / 331 records, arity 6");
  synth_cmd->add_option("--negatives", sa.negatives, "Labeled non-duplicates to sample");
  synth_cmd->add_option("--train", sa.train, "Labeled pairs in train.csv; the rest go to test.csv");
  synth_cmd->add_option("--seed", sa.seed, "Random seed (VAER_SEED overrides)");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the active-learning labeling service");
  sv.tables.add(serve_cmd);
  serve_cmd->add_option("--model", sv.model, "Representation model")->required();
  serve_cmd->add_option("--out", sv.out, "Matcher file written when the session finishes")->required();
  serve_cmd->add_option("--journal", sv.journal, "Label journal (default: <out>.journal.jsonl)");
  serve_cmd->add_option("--test", sv.test, "Labeled pairs for per-iteration metrics");
  serve_cmd->add_option("--host", sv.host, "Listen address");
  serve_cmd->add_option("--port", sv.port, "Listen port");
  serve_cmd->add_option("--k", sv.k, "Neighbours per record for the candidate pool");
  serve_cmd->add_option("--batch", sv.batch, "Pairs per labeling batch");
  serve_cmd->add_option("--margin", sv.margin, "Contrastive margin");
  serve_cmd->add_option("--seed", sv.seed, "Random seed (VAER_SEED overrides)");
  IrArgs ignored_ir;  // accepted for symmetry; serve reads the provider from the model sidecar
  serve_cmd->add_option("--ir", ignored_ir.kind, "Ignored: the model's sidecar names the provider")
      ->check(CLI::IsMember({"lsa", "embed", "precomputed"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return train_repr(tr);
    if (*match_cmd) return cmd_match(ma);
    if (*predict_cmd) return cmd_predict(pa);
    if (*evaluate_cmd) return cmd_evaluate(ea);
    if (*block_cmd) return cmd_block(ba);
    if (*synth_cmd) return cmd_synth(sa);
    if (*serve_cmd) return cmd_serve(sv);
  } catch (const EmptyTruth& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEmptyTruth;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoFile;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDimension;
  } catch (const NetworkError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPortBusy;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
