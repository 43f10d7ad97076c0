#pragma once

// On-disk dataset split: one JSON header line, then one tab-separated record
// per line (source_p, source_t, target_p, target_t, tokens space-joined).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "t2t/generator.hpp"

namespace t2t {

inline constexpr int kDatasetVersion = 1;

struct DatasetHeader {
  int format_version = kDatasetVersion;
  std::string preset;
  std::uint64_t seed = 0;
  std::string split;
  std::size_t count = 0;
  std::string codec;
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

void write_dataset(std::ostream& out, const DatasetHeader& header, const std::vector<DatasetRecord>& records);
void write_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                   const std::vector<DatasetRecord>& records);

// Every record is re-parsed and its four fields checked against each other;
// any inconsistency, a count mismatch, or a foreign codec version throws
// DataError naming the line.
DatasetFile read_dataset(std::istream& in);
DatasetFile read_dataset(const std::filesystem::path& path);

// train.tsv, dev.tsv, test.tsv under `dir`.
DatasetSplits read_splits(const std::filesystem::path& dir);

// Min/mean/max lengths of each split and of the union, as JSON text.
std::string stats_report(const DatasetSplits& splits);

}  // namespace t2t
