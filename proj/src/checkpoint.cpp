#include "invparse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace invparse {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'P', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

nlohmann::json config_json(const ModelConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"inventory_variant", std::string(to_string(c.inventory_variant))},
          {"layers", c.layers},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"max_source_len", c.max_source_len},
          {"max_target_len", c.max_target_len},
          {"max_index", c.max_index},
          {"dropout", c.dropout},
          {"tag_components", c.tag_components},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.inventory_variant = parse_variant(j.at("inventory_variant").get<std::string>());
  c.layers = j.at("layers");
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.ffn_dim = j.at("ffn_dim");
  c.max_source_len = j.at("max_source_len");
  c.max_target_len = j.at("max_target_len");
  c.max_index = j.at("max_index");
  c.dropout = j.at("dropout");
  c.tag_components = j.at("tag_components");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "invparse-checkpoint";
  header["version"] = 1;
  header["config"] = config_json(model.config);
  header["vocabulary"] = model.vocabulary.tokens();
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : model.params.tensors()) {
    header["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m->size()) * sizeof(double);
  }
  header["training_log"] = nlohmann::json::array();
  for (const auto& r : model.training_log) {
    header["training_log"].push_back({{"epoch", r.epoch}, {"split", r.split}, {"loss", r.loss}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, m] : model.params.tensors()) {
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorKind::Io, "'" + path.string() + "' is not an invparse checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(ErrorKind::Io, "truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "bad checkpoint header: " + std::string(e.what()));
  }
  TrainedModel model;
  model.config = config_from_json(header.at("config"));
  model.vocabulary = Vocabulary::from_tokens(header.at("vocabulary").get<std::vector<std::string>>(),
                                             model.config.max_index);
  Rng unused(0);
  auto shape = model.config.shape();
  model.params = nn::init_transformer<double>(shape, model.vocabulary.size(), unused);
  auto tensors = model.params.tensors();
  const auto& table = header.at("tensors");
  if (table.size() != tensors.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = table[i];
    auto& m = *tensors[i].second;
    if (entry.at("name") != tensors[i].first || entry.at("rows") != m.rows() || entry.at("cols") != m.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor '" + entry.at("name").get<std::string>() +
                                                "' does not match the configured architecture");
    }
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw Error(ErrorKind::Io, "truncated checkpoint payload");
  }
  for (const auto& r : header.at("training_log")) {
    model.training_log.push_back({r.at("epoch"), r.at("split"), r.at("loss")});
  }
  return model;
}

std::string training_log_jsonl(const TrainedModel& model) {
  std::string out;
  for (const auto& r : model.training_log) {
    out += nlohmann::json{{"epoch", r.epoch}, {"split", r.split}, {"loss", r.loss}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace invparse
