#include "t2t/dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "t2t/errors.hpp"
#include "t2t/treecodec.hpp"

namespace t2t {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

DatasetRecord parse_record(const std::string& line, std::size_t line_no) {
  auto fail = [line_no](const std::string& what) {
    return DataError("line " + std::to_string(line_no) + ": " + what);
  };
  const auto fields = split_fields(line);
  if (fields.size() != 4) throw fail("expected 4 tab-separated fields, found " + std::to_string(fields.size()));

  DatasetRecord r;
  r.source_p = split_tokens(fields[0]);
  r.source_t = split_tokens(fields[1]);
  r.target_p = split_tokens(fields[2]);
  r.target_t = split_tokens(fields[3]);
  try {
    r.source_ast = parse_for(r.source_p);
    r.target_ast = tree_to_lambda(deserialize_dfs(r.target_t));
  } catch (const Error& e) {
    throw fail(e.what());
  }
  if (render_for(r.source_ast) != r.source_p) throw fail("source_p is not in canonical form");
  if (serialize_dfs(ast_to_tree(r.source_ast)) != r.source_t) throw fail("source_t does not match source_p");
  if (render_lambda(r.target_ast) != r.target_p) throw fail("target_p does not match target_t");
  return r;
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetHeader& header, const std::vector<DatasetRecord>& records) {
  const nlohmann::json h = {
      {"format_version", header.format_version},
      {"preset", header.preset},
      {"seed", header.seed},
      {"split", header.split},
      {"count", records.size()},
      {"codec", header.codec},
  };
  out << h.dump() << '\n';
  for (const auto& r : records) {
    out << join_tokens(r.source_p) << '\t' << join_tokens(r.source_t) << '\t' << join_tokens(r.target_p) << '\t'
        << join_tokens(r.target_t) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                   const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_dataset(out, header, records);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

DatasetFile read_dataset(std::istream& in) {
  DatasetFile file;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file");
  try {
    const auto h = nlohmann::json::parse(line);
    file.header.format_version = h.at("format_version").get<int>();
    file.header.preset = h.at("preset").get<std::string>();
    file.header.seed = h.at("seed").get<std::uint64_t>();
    file.header.split = h.at("split").get<std::string>();
    file.header.count = h.at("count").get<std::size_t>();
    file.header.codec = h.at("codec").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("line 1: bad header: ") + e.what());
  }
  if (file.header.format_version != kDatasetVersion)
    throw DataError("unsupported dataset version " + std::to_string(file.header.format_version));
  if (file.header.codec != kCodecVersion)
    throw DataError("dataset was written with codec '" + file.header.codec + "', expected '" +
                    std::string(kCodecVersion) + "'");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw DataError("line " + std::to_string(line_no) + ": empty record");
    file.records.push_back(parse_record(line, line_no));
  }
  if (file.records.size() != file.header.count)
    throw DataError("header declares " + std::to_string(file.header.count) + " records, found " +
                    std::to_string(file.records.size()));
  return file;
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return read_dataset(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
  DatasetSplits splits;
  splits.train = read_dataset(dir / "train.tsv").records;
  splits.dev = read_dataset(dir / "dev.tsv").records;
  splits.test = read_dataset(dir / "test.tsv").records;
  return splits;
}

namespace {

nlohmann::json stats_json(const DatasetStats& s) {
  auto col = [](const LengthStats& l) { return nlohmann::json{{"min", l.min}, {"mean", l.mean}, {"max", l.max}}; };
  return {
      {"count", s.count},
      {"source_p", col(s.source_p)},
      {"target_p", col(s.target_p)},
      {"source_t", col(s.source_t)},
      {"target_t", col(s.target_t)},
  };
}

}  // namespace

std::string stats_report(const DatasetSplits& splits) {
  std::vector<const DatasetRecord*> all;
  for (const auto* part : {&splits.train, &splits.dev, &splits.test})
    for (const auto& r : *part) all.push_back(&r);
  const nlohmann::json report = {
      {"train", stats_json(compute_stats(splits.train))},
      {"dev", stats_json(compute_stats(splits.dev))},
      {"test", stats_json(compute_stats(splits.test))},
      {"all", stats_json(compute_stats(all))},
  };
  return report.dump(2) + "\n";
}

}  // namespace t2t
