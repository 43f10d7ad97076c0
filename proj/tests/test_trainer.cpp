#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "t2t/checkpoint.hpp"
#include "t2t/errors.hpp"
#include "t2t/trainer.hpp"

using namespace t2t;

namespace {

DatasetSplits small_splits(std::size_t train, std::size_t dev, std::size_t test, std::uint64_t seed = 3) {
  GenConfig config = preset_config("syn-s");
  config.seed = seed;
  return build_dataset(config, train, dev, test);
}

TrainOptions quick_options(std::size_t epochs) {
  TrainOptions o;
  o.hyper.hidden = 8;
  o.hyper.embedding = 8;
  o.hyper.batch_size = 4;
  o.hyper.epochs = epochs;
  o.hyper.seed = 5;
  o.eval_every = 3;
  o.log_timestamps = false;
  return o;
}

std::vector<GeneralTree> gold_trees(const std::vector<DatasetRecord>& records) {
  std::vector<GeneralTree> gold;
  for (const auto& r : records) gold.push_back(ast_to_tree(r.target_ast));
  return gold;
}

}  // namespace

TEST_CASE("token accuracy") {
  CHECK(token_accuracy({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK(token_accuracy({"a", "b", "c"}, {"a", "x", "c"}) == doctest::Approx(2.0 / 3.0));
  CHECK(token_accuracy({"a"}, {"a", "b"}) == 0.5);
  CHECK(token_accuracy({"a", "b", "c"}, {"a"}) == 1.0);
  CHECK(token_accuracy({}, {}) == 1.0);
  CHECK(token_accuracy({"a"}, {}) == 0.0);
  CHECK(token_accuracy({}, {"a"}) == 0.0);
}

TEST_CASE("program accuracy") {
  const GeneralTree a{"A", {}}, b{"B", {}};
  const std::vector<GeneralTree> gold{a, b, a, b};
  std::vector<std::optional<GeneralTree>> same{a, b, a, b};
  CHECK(program_accuracy(same, gold) == 1.0);
  std::vector<std::optional<GeneralTree>> one_off{a, b, b, b};
  CHECK(program_accuracy(one_off, gold) == 0.75);
  std::vector<std::optional<GeneralTree>> truncated{a, std::nullopt, a, b};
  CHECK(program_accuracy(truncated, gold) == 0.75);
}

TEST_CASE("scoring counts truncations and failures as wrong") {
  const GeneralTree a{"A", {GeneralTree{"x", {}}}};
  const std::vector<GeneralTree> gold{a, a, a};
  const std::vector<Prediction> preds{{Outcome::Decoded, a}, {Outcome::Truncated, std::nullopt},
                                      {Outcome::Failed, std::nullopt}};
  const EvalReport r = score(preds, gold);
  CHECK(r.count == 3);
  CHECK(r.exact == 1);
  CHECK(r.truncated == 1);
  CHECK(r.errors == 1);
  CHECK(r.program_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(r.token_accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("gold against itself scores 1 on both metrics") {
  const DatasetSplits d = small_splits(50, 0, 0);
  const auto gold = gold_trees(d.train);
  std::vector<Prediction> preds;
  for (const auto& r : d.train)
    preds.push_back({Outcome::Decoded, from_lcrs(to_lcrs(deserialize_dfs(r.target_t)))});
  const EvalReport report = score(preds, gold);
  CHECK(report.program_accuracy == 1.0);
  CHECK(report.token_accuracy == 1.0);
}

TEST_CASE("an untrained model is near chance") {
  const DatasetSplits d = small_splits(100, 0, 0);
  const VocabPair vocab = build_vocab(d.train);
  ModelConfig config{16, vocab.source.size(), vocab.target.size(),
                     static_cast<std::size_t>(vocab.target.eos()), Variant::Full};
  Model m(config);
  m.init_uniform(0.1, 0);
  const EvalReport r = evaluate(m, vocab, d.train, {.max_nodes = 300, .max_depth = 80});
  CHECK(r.program_accuracy <= 0.01);
  CHECK(r.token_accuracy >= 0.0);
  CHECK(r.token_accuracy <= 1.0);
}

TEST_CASE("training loss on a fixed batch decreases over the first steps") {
  const DatasetSplits d = small_splits(10, 0, 0);
  TrainOptions o = quick_options(10);
  o.hyper.batch_size = 10;
  o.hyper.dropout = 0.0;
  o.hyper.hidden = o.hyper.embedding = 16;
  const TrainResult r = train(d, o);
  REQUIRE(r.state.history.size() == 10);
  for (std::size_t i = 1; i < 10; ++i) CHECK(r.state.history[i].train_loss < r.state.history[i - 1].train_loss);
}

TEST_CASE("training is reproducible from the seed") {
  const DatasetSplits d = small_splits(12, 4, 4);
  std::ostringstream log_a, log_b;
  TrainOptions o = quick_options(3);
  o.log = &log_a;
  const TrainResult a = train(d, o);
  o.log = &log_b;
  const TrainResult b = train(d, o);
  CHECK(log_a.str() == log_b.str());
  CHECK_FALSE(log_a.str().empty());
  for (std::size_t i = 0; i < a.model->params().size(); ++i)
    CHECK(a.model->params()[i].value == b.model->params()[i].value);

  o.hyper.seed = 6;
  std::ostringstream log_c;
  o.log = &log_c;
  train(d, o);
  CHECK(log_a.str() != log_c.str());
}

TEST_CASE("training log records") {
  const DatasetSplits d = small_splits(12, 4, 4);
  TrainOptions o = quick_options(2);
  const TrainResult r = train(d, o);
  // 3 mini-batches per epoch; dev loss every 3 and at the end.
  REQUIRE(r.state.history.size() == 6);
  CHECK(r.state.minibatch == 6);
  CHECK(r.state.history[2].dev_loss.has_value());
  CHECK_FALSE(r.state.history[3].dev_loss.has_value());
  CHECK(r.state.history[5].dev_loss.has_value());
  CHECK(r.state.best_dev_loss <= *r.state.history[2].dev_loss);

  const std::string line = format_log_record(r.state.history[0], false);
  CHECK(line.find("\"minibatch\":1") != std::string::npos);
  CHECK(line.find("\"dev_loss\":null") != std::string::npos);
  CHECK(line.find("timestamp") == std::string::npos);
  CHECK(format_log_record(r.state.history[0], true).find("\"timestamp\":") != std::string::npos);
}

TEST_CASE("best-dev parameters are kept") {
  const DatasetSplits d = small_splits(12, 4, 4);
  const TrainResult r = train(d, quick_options(4));
  CHECK(mean_loss(*r.model, r.vocab, d.dev) == doctest::Approx(r.state.best_dev_loss).epsilon(1e-12));
}

TEST_CASE("early stop through the epoch callback") {
  const DatasetSplits d = small_splits(8, 0, 0);
  TrainOptions o = quick_options(50);
  std::size_t calls = 0;
  o.on_epoch = [&](const TrainState& s, const Model&) {
    ++calls;
    return s.epoch < 2;
  };
  const TrainResult r = train(d, o);
  CHECK(calls == 2);
  CHECK(r.state.epoch == 2);
}

TEST_CASE("vocabulary mismatches between splits are data errors") {
  DatasetSplits d = small_splits(5, 1, 0);
  d.dev[0] = make_record(parse_for(split_tokens("q = 7")));
  CHECK_THROWS_AS(train(d, quick_options(1)), DataError);
  d.train.clear();
  CHECK_THROWS_AS(train(d, quick_options(1)), DataError);
}

TEST_CASE("checkpoint round-trip preserves the evaluation") {
  namespace fs = std::filesystem;
  const DatasetSplits d = small_splits(12, 4, 4);
  for (Variant v : {Variant::Full, Variant::NoParentFeed, Variant::NoAttention}) {
    TrainOptions o = quick_options(2);
    o.variant = v;
    const TrainResult r = train(d, o);
    const fs::path path = fs::temp_directory_path() / ("t2t_ckpt_" + std::string(variant_name(v)) + ".bin");
    save_checkpoint(path, *r.model, r.vocab);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.model->config().variant == v);
    CHECK(loaded.vocab.target == r.vocab.target);
    for (std::size_t i = 0; i < r.model->params().size(); ++i)
      CHECK(loaded.model->params()[i].value == r.model->params()[i].value);
    const DecodeLimits limits{.max_nodes = 200, .max_depth = 80};
    CHECK(evaluate(*loaded.model, loaded.vocab, d.test, limits) == evaluate(*r.model, r.vocab, d.test, limits));
    fs::remove(path);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  namespace fs = std::filesystem;
  const DatasetSplits d = small_splits(6, 0, 0);
  const TrainResult r = train(d, quick_options(1));
  const fs::path path = fs::temp_directory_path() / "t2t_ckpt_corrupt.bin";
  save_checkpoint(path, *r.model, r.vocab);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  };
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string copy = bytes;
    copy.replace(copy.find(from), from.size(), to);
    return copy;
  };

  write(replace("\"format_version\":1", "\"format_version\":9"));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write(replace("\"variant\":\"full\"", "\"variant\":\"no-pf\""));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write(replace("\"d\":8", "\"d\":9"));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write(replace("\"source_vocab_hash\":", "\"source_vocab_hash\":1"));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  write("hello\n");
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}
