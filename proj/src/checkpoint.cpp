#include "t2t/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <string>

#include "t2t/errors.hpp"

namespace t2t {

namespace {

constexpr std::string_view kMagic = "T2TCKPT";

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointError("truncated checkpoint payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const VocabPair& vocab) {
  const ModelConfig& config = model.config();
  if (vocab.source.size() != config.source_vocab || vocab.target.size() != config.target_vocab)
    throw CheckpointError("vocabulary sizes do not match the model");

  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"d", config.hidden},
      {"V_s", config.source_vocab},
      {"V_t", config.target_vocab},
      {"variant", variant_name(config.variant)},
      {"source_vocab", vocab.source.tokens()},
      {"target_vocab", vocab.target.tokens()},
      {"source_vocab_hash", vocab.source.hash()},
      {"target_vocab_hash", vocab.target.hash()},
      {"tensors", model.params().size()},
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out << kMagic << '\n' << header.dump() << '\n';
  for (const auto& p : model.params()) {
    put_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u64(out, p.value.shape().size());
    for (auto dim : p.value.shape()) put_u64(out, dim);
    for (double v : p.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError("not a checkpoint file");
  if (!std::getline(in, line)) throw CheckpointError("missing checkpoint header");

  nlohmann::json header;
  Checkpoint ckpt;
  ModelConfig config;
  try {
    header = nlohmann::json::parse(line);
    if (header.at("format_version").get<int>() != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + header.at("format_version").dump());
    ckpt.vocab.source = Vocabulary(header.at("source_vocab").get<std::vector<Token>>());
    ckpt.vocab.target = Vocabulary(header.at("target_vocab").get<std::vector<Token>>());
    config.hidden = header.at("d").get<std::size_t>();
    config.source_vocab = header.at("V_s").get<std::size_t>();
    config.target_vocab = header.at("V_t").get<std::size_t>();
    config.variant = parse_variant(header.at("variant").get<std::string>());
    if (ckpt.vocab.source.hash() != header.at("source_vocab_hash").get<std::uint64_t>() ||
        ckpt.vocab.target.hash() != header.at("target_vocab_hash").get<std::uint64_t>())
      throw CheckpointError("vocabulary hash mismatch");
    if (ckpt.vocab.source.size() != config.source_vocab || ckpt.vocab.target.size() != config.target_vocab)
      throw CheckpointError("vocabulary sizes disagree with V_s/V_t");
    if (!ckpt.vocab.target.has_eos()) throw CheckpointError("target vocabulary lacks <EOS>");
    config.eos = static_cast<std::size_t>(ckpt.vocab.target.eos());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }

  ckpt.model = std::make_unique<Model>(config);
  auto& params = ckpt.model->params();
  if (header.at("tensors").get<std::size_t>() != params.size())
    throw CheckpointError("tensor count does not match the recorded variant");
  for (auto& p : params) {
    const auto name_length = get_u64(in);
    if (name_length > 256) throw CheckpointError("corrupt tensor name");
    std::string name(name_length, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_length)))
      throw CheckpointError("truncated checkpoint payload");
    if (name != p.name) throw CheckpointError("expected tensor '" + p.name + "', found '" + name + "'");
    const auto rank = get_u64(in);
    if (rank != p.value.shape().size()) throw CheckpointError("rank mismatch for tensor '" + name + "'");
    for (auto dim : p.value.shape())
      if (get_u64(in) != dim) throw CheckpointError("shape mismatch for tensor '" + name + "'");
    for (double& v : p.value.data()) v = std::bit_cast<double>(get_u64(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after the last tensor");
  return ckpt;
}

}  // namespace t2t
