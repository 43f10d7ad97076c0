#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "t2t/checkpoint.hpp"
#include "t2t/dataset.hpp"
#include "t2t/errors.hpp"
#include "t2t/gradcheck.hpp"
#include "t2t/oracle.hpp"
#include "t2t/trainer.hpp"

namespace fs = std::filesystem;
using namespace t2t;

namespace {

enum Exit { kOk = 0, kOther = 1, kSyntax = 2, kLimit = 3, kData = 4 };

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
}

struct GenArgs {
  std::string preset = "syn-s";
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 200;
  std::uint64_t seed = 0;
  std::string out;
};

int gen_data(const GenArgs& a) {
  GenConfig config = preset_config(a.preset);
  config.seed = a.seed;
  const fs::path dir(a.out);
  fs::create_directories(dir);

  const nlohmann::ordered_json echo = {{"command", "gen-data"}, {"preset", a.preset}, {"train", a.train},
                                       {"dev", a.dev},          {"test", a.test},     {"seed", a.seed}};
  write_text(dir / "config.json", echo.dump(2) + "\n");

  DatasetSplits splits;
  try {
    splits = build_dataset(config, a.train, a.dev, a.test);
  } catch (const ExhaustionError& e) {
    std::cerr << "gen-data: " << e.what() << " (" << e.achieved() << " unique programs generated)\n";
    return kOther;
  }
  DatasetHeader header;
  header.preset = a.preset;
  header.seed = a.seed;
  header.codec = std::string(kCodecVersion);
  for (auto [name, records] : {std::pair{"train", &splits.train}, {"dev", &splits.dev}, {"test", &splits.test}}) {
    header.split = name;
    write_dataset(dir / (std::string(name) + ".tsv"), header, *records);
  }
  const std::string stats = stats_report(splits);
  write_text(dir / "stats.json", stats);
  std::cout << stats;
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string variant = "full";
  std::size_t hidden = 256;
  std::size_t batch = 100;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double lr = 0.005;
  double dropout = 0.5;
  std::string out;
};

int train_cmd(const TrainArgs& a) {
  TrainOptions options;
  options.variant = parse_variant(a.variant);
  options.hyper.hidden = a.hidden;
  options.hyper.embedding = a.hidden;
  options.hyper.batch_size = a.batch;
  options.hyper.epochs = a.epochs;
  options.hyper.seed = a.seed;
  options.hyper.lr0 = a.lr;
  options.hyper.dropout = a.dropout;
  options.hyper.validate();

  const fs::path ckpt(a.out);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  const auto& hp = options.hyper;
  const nlohmann::ordered_json echo = {
      {"command", "train"},       {"data", a.data},
      {"variant", a.variant},     {"hidden", hp.hidden},
      {"batch", hp.batch_size},   {"epochs", hp.epochs},
      {"seed", hp.seed},          {"lr0", hp.lr0},
      {"decay_factor", hp.decay_factor}, {"plateau_window", hp.plateau_window},
      {"dropout", hp.dropout},    {"grad_clip", hp.grad_clip},
      {"init_range", hp.init_range}, {"optimizer", hp.optimizer == diff::OptimizerKind::Adam ? "adam" : "sgd"},
  };
  write_text(fs::path(a.out + ".config.json"), echo.dump(2) + "\n");

  const DatasetSplits splits = read_splits(a.data);
  std::ofstream log(a.out + ".log.jsonl", std::ios::binary);
  if (!log) throw DataError("cannot open log file next to '" + a.out + "'");
  options.log = &log;
  const TrainResult result = train(splits, options);
  save_checkpoint(ckpt, *result.model, result.vocab);
  std::cout << "dev " << format_report(evaluate(*result.model, result.vocab, splits.dev));
  return kOk;
}

int eval_cmd(const std::string& ckpt_path, const std::string& data) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const DatasetFile file = read_dataset(fs::path(data));
  std::cout << format_report(evaluate(*ckpt.model, ckpt.vocab, file.records));
  return kOk;
}

int translate_cmd(bool oracle, bool literal, const std::string& ckpt_path) {
  std::optional<Checkpoint> ckpt;
  if (!oracle) ckpt = load_checkpoint(ckpt_path);
  const OracleMode mode = literal ? OracleMode::StepArgument : OracleMode::InitArgument;

  std::string line;
  while (std::getline(std::cin, line)) {
    const Tokens tokens = split_tokens(line);
    if (tokens.empty()) continue;
    const Stmt program = parse_for(tokens);
    Term result;
    if (oracle) {
      result = translate(program, mode);
    } else {
      const Prediction p = predict(*ckpt->model, ckpt->vocab, ast_to_tree(program));
      if (p.outcome == Outcome::Truncated) throw LimitExceeded(LimitExceeded::Kind::Nodes, DecodeLimits{}.max_nodes);
      if (!p.tree) throw ShapeError("decoded tree is not a binarized general tree");
      result = tree_to_lambda(*p.tree);
    }
    std::cout << join_tokens(render_lambda(result)) << '\n';
  }
  return kOk;
}

int gradcheck_cmd(std::size_t dim, std::uint64_t seed) {
  const GradcheckOptions options;
  double worst = 0.0;
  for (const auto& r : run_gradcheck_suite(dim, seed, options)) {
    std::cout << r.name << " max_rel_err=" << r.max_relative_error << " entries=" << r.entries << '\n';
    worst = std::max(worst, r.max_relative_error);
  }
  std::cout << "max relative error " << worst << '\n';
  return worst < options.tolerance ? kOk : kOther;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-to-tree translation of FOR programs into LAMBDA"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate train/dev/test splits");
  gen_cmd->add_option("--preset", gen.preset)->check(CLI::IsMember({"syn-s", "syn-l"}))->capture_default_str();
  gen_cmd->add_option("--train", gen.train)->capture_default_str();
  gen_cmd->add_option("--dev", gen.dev)->capture_default_str();
  gen_cmd->add_option("--test", gen.test)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train a model on a generated dataset");
  train_sub->add_option("--data", tr.data, "Directory holding train/dev/test.tsv")->required();
  train_sub->add_option("--variant", tr.variant)->check(CLI::IsMember({"full", "no-pf", "no-attn"}))->capture_default_str();
  train_sub->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  train_sub->add_option("--batch", tr.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train_sub->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_sub->add_option("--seed", tr.seed)->capture_default_str();
  train_sub->add_option("--lr", tr.lr, "Initial learning rate")->capture_default_str();
  train_sub->add_option("--dropout", tr.dropout)->check(CLI::Range(0.0, 0.99))->capture_default_str();
  train_sub->add_option("--out", tr.out, "Checkpoint path")->required();

  std::string eval_ckpt;
  std::string eval_data;
  auto* eval_sub = app.add_subcommand("eval", "Score a checkpoint on one split file");
  eval_sub->add_option("--ckpt", eval_ckpt)->required();
  eval_sub->add_option("--data", eval_data, "Split file, e.g. DIR/test.tsv")->required();

  bool use_oracle = false;
  bool appendix_literal = false;
  std::string translate_ckpt;
  auto* translate_sub = app.add_subcommand("translate", "Translate FOR programs read line by line from stdin");
  auto* oracle_flag = translate_sub->add_flag("--oracle", use_oracle, "Use the rule-based translator");
  auto* ckpt_opt = translate_sub->add_option("--ckpt", translate_ckpt, "Use a trained model");
  translate_sub->add_flag("--oracle-appendix-literal", appendix_literal,
                          "Apply loops to their step expression")
      ->needs(oracle_flag);
  oracle_flag->excludes(ckpt_opt);

  std::size_t dim = 8;
  std::uint64_t gc_seed = 0;
  auto* gc_sub = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gc_sub->add_option("--dim", dim)->check(CLI::PositiveNumber)->capture_default_str();
  gc_sub->add_option("--seed", gc_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kOther;
  }

  try {
    if (*gen_cmd) return gen_data(gen);
    if (*train_sub) return train_cmd(tr);
    if (*eval_sub) return eval_cmd(eval_ckpt, eval_data);
    if (*translate_sub) {
      if (!use_oracle && translate_ckpt.empty()) {
        std::cerr << "translate: one of --oracle or --ckpt is required\n";
        return kOther;
      }
      return translate_cmd(use_oracle, appendix_literal, translate_ckpt);
    }
    if (*gc_sub) return gradcheck_cmd(dim, gc_seed);
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSyntax;
  } catch (const LimitExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kLimit;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
