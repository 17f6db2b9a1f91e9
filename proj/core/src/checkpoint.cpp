#include "xlprime/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "xlprime/error.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"

namespace xlp {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'X', 'L', 'P', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

template <typename Container>
void put_values(std::string& out, const Container& values) {
  using T = typename Container::value_type;
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (auto v : values) put_le(out, std::bit_cast<Bits>(v));
}

json config_to_json(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers},   {"d_model", c.d_model},       {"n_heads", c.n_heads},
              {"ff_multiplier", c.ff_multiplier}, {"seq_len", c.seq_len}, {"vocab_size", c.vocab_size},
              {"dropout", c.dropout},     {"init_std", c.init_std},     {"seed", c.seed},
              {"tie_embeddings", c.tie_embeddings}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.ff_multiplier = j.at("ff_multiplier").get<std::size_t>();
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.init_std = j.at("init_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tie_embeddings = j.at("tie_embeddings").get<bool>();
  return c;
}

json adam_to_json(const AdamConfig& a, std::uint64_t step) {
  return json{{"learning_rate", a.learning_rate}, {"beta1", a.beta1},
              {"beta2", a.beta2},                 {"epsilon", a.epsilon},
              {"weight_decay", a.weight_decay},   {"grad_clip", a.grad_clip},
              {"warmup_steps", a.warmup_steps},   {"schedule", to_string(a.schedule)},
              {"total_steps", a.total_steps},     {"min_lr_ratio", a.min_lr_ratio},
              {"step", step}};
}

AdamConfig adam_from_json(const json& j) {
  AdamConfig a;
  a.learning_rate = j.at("learning_rate").get<double>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.epsilon = j.at("epsilon").get<double>();
  a.weight_decay = j.at("weight_decay").get<double>();
  a.grad_clip = j.at("grad_clip").get<double>();
  a.warmup_steps = j.at("warmup_steps").get<std::uint64_t>();
  a.schedule = parse_lr_schedule(j.at("schedule").get<std::string>());
  a.total_steps = j.at("total_steps").get<std::uint64_t>();
  a.min_lr_ratio = j.at("min_lr_ratio").get<double>();
  return a;
}

struct RawCheckpoint {
  std::string bytes;
  json header;
  std::string header_text;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 0;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  RawCheckpoint raw;
  raw.bytes = read_file(path);
  const auto& b = raw.bytes;
  const std::string where = path.string();
  constexpr std::size_t kFixed = sizeof kMagic + 4 + 8;
  if (b.size() < kFixed + 32 || std::memcmp(b.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError(where + ": not a checkpoint file (bad magic or truncated)");
  }
  const auto body = std::string_view(b).substr(0, b.size() - 32);
  Sha256 h;
  h.update(body);
  const auto digest = h.finish();
  if (std::memcmp(digest.data(), b.data() + b.size() - 32, 32) != 0) {
    throw DataError(where + ": checksum mismatch (file truncated or corrupted)");
  }
  const auto version = get_le<std::uint32_t>(b.data() + sizeof kMagic);
  if (version != kCheckpointVersion) {
    throw DataError(where + ": unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(b.data() + sizeof kMagic + 4);
  if (kFixed + header_len > body.size()) throw DataError(where + ": header length exceeds file size");
  raw.header_text = std::string(body.substr(kFixed, header_len));
  try {
    raw.header = json::parse(raw.header_text);
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed checkpoint header: " + e.what());
  }
  raw.payload_offset = kFixed + header_len;
  raw.payload_size = body.size() - raw.payload_offset;
  return raw;
}

void check_fingerprint(const std::string& stored, const std::optional<std::string>& expected,
                       const std::filesystem::path& path) {
  if (expected && *expected != stored) {
    throw DataError(path.string() + ": tokenizer fingerprint mismatch: checkpoint was trained with " + stored +
                    " but the supplied tokenizer is " + *expected);
  }
}

// Reads one tensor's worth of stored values into `out`, converting precision.
template <typename Container>
void read_values(const char*& cursor, bool stored_double, Container& out) {
  using T = typename Container::value_type;
  for (auto& v : out) {
    if (stored_double) {
      v = static_cast<T>(std::bit_cast<double>(get_le<std::uint64_t>(cursor)));
      cursor += 8;
    } else {
      v = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(cursor)));
      cursor += 4;
    }
  }
}

template <typename T>
Parameters<T> parameters_from_header(const json& header, const std::string& where) {
  const auto config = config_from_json(header.at("model"));
  auto params = allocate_parameters<T>(config);
  const auto& table = header.at("tensors");
  if (table.size() != params.tensors.size()) throw DataError(where + ": tensor table does not match model config");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].at("name").get<std::string>() != params.tensors[i].name ||
        table[i].at("shape").get<std::vector<std::size_t>>() != params.tensors[i].shape) {
      throw DataError(where + ": tensor " + std::to_string(i) + " does not match model config");
    }
  }
  return params;
}

}  // namespace

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path) {
  const auto& params = ckpt.params;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : params.tensors) {
    tensors.push_back(json{{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.size() * sizeof(T);
  }
  const bool has_moments = !ckpt.optimizer.m.empty();
  json header{
      {"format_version", kCheckpointVersion},
      {"dtype", dtype_name<T>()},
      {"step", ckpt.step},
      {"model", config_to_json(params.config)},
      {"optimizer", adam_to_json(ckpt.optimizer.config, ckpt.optimizer.step)},
      {"optimizer_moments", has_moments},
      {"data_streams",
       {{"l1", {{"epoch", ckpt.l1_stream.epoch}, {"cursor", ckpt.l1_stream.cursor}}},
        {"l2", {{"epoch", ckpt.l2_stream.epoch}, {"cursor", ckpt.l2_stream.cursor}}}}},
      {"tokenizer_fingerprint", ckpt.tokenizer_fingerprint},
      {"tensors", std::move(tensors)},
      {"parameter_count", params.count()},
  };
  const std::string header_text = header.dump(2);

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out.reserve(out.size() + params.count() * sizeof(T) * (has_moments ? 3 : 1) + 32);
  for (const auto& t : params.tensors) put_values(out, t.values);
  if (has_moments) {
    for (const auto& m : ckpt.optimizer.m) put_values(out, m);
    for (const auto& v : ckpt.optimizer.v) put_values(out, v);
  }
  Sha256 h;
  h.update(out);
  const auto digest = h.finish();
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  write_file_atomic(path, out);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const std::optional<std::string>& expected) {
  const auto raw = read_raw(path);
  const std::string where = path.string();
  try {
    const auto& h = raw.header;
    Checkpoint<T> ckpt;
    ckpt.tokenizer_fingerprint = h.at("tokenizer_fingerprint").get<std::string>();
    check_fingerprint(ckpt.tokenizer_fingerprint, expected, path);
    ckpt.step = h.at("step").get<std::uint64_t>();
    ckpt.params = parameters_from_header<T>(h, where);
    const bool stored_double = h.at("dtype").get<std::string>() == "float64";
    const std::size_t width = stored_double ? 8 : 4;
    const bool has_moments = h.at("optimizer_moments").get<bool>();
    const std::size_t n = ckpt.params.count();
    if (raw.payload_size != n * width * (has_moments ? 3 : 1)) {
      throw DataError(where + ": payload size does not match the tensor table");
    }
    const char* cursor = raw.bytes.data() + raw.payload_offset;
    for (auto& t : ckpt.params.tensors) read_values(cursor, stored_double, t.values);
    ckpt.optimizer.config = adam_from_json(h.at("optimizer"));
    ckpt.optimizer.step = h.at("optimizer").at("step").get<std::uint64_t>();
    if (has_moments) {
      for (auto* moments : {&ckpt.optimizer.m, &ckpt.optimizer.v}) {
        for (const auto& t : ckpt.params.tensors) {
          moments->emplace_back(t.size());
          read_values(cursor, stored_double, moments->back());
        }
      }
    }
    const auto& streams = h.at("data_streams");
    ckpt.l1_stream = {streams.at("l1").at("epoch").get<std::uint64_t>(), streams.at("l1").at("cursor").get<std::uint64_t>()};
    ckpt.l2_stream = {streams.at("l2").at("epoch").get<std::uint64_t>(), streams.at("l2").at("cursor").get<std::uint64_t>()};
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(where + ": bad checkpoint header: " + e.what());
  }
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  const auto raw = read_raw(path);
  try {
    CheckpointHeader out;
    out.format_version = raw.header.at("format_version").get<std::uint32_t>();
    out.step = raw.header.at("step").get<std::uint64_t>();
    out.dtype = raw.header.at("dtype").get<std::string>();
    out.config = config_from_json(raw.header.at("model"));
    out.tokenizer_fingerprint = raw.header.at("tokenizer_fingerprint").get<std::string>();
    out.json = raw.header_text;
    return out;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

Parameters<double> load_scoring_parameters(const std::filesystem::path& path,
                                           const std::optional<std::string>& expected_fingerprint) {
  const auto raw = read_raw(path);
  const std::string where = path.string();
  try {
    check_fingerprint(raw.header.at("tokenizer_fingerprint").get<std::string>(), expected_fingerprint, path);
    auto params = parameters_from_header<double>(raw.header, where);
    const bool stored_double = raw.header.at("dtype").get<std::string>() == "float64";
    if (raw.payload_size < params.count() * (stored_double ? 8 : 4)) {
      throw DataError(where + ": payload shorter than the tensor table");
    }
    const char* cursor = raw.bytes.data() + raw.payload_offset;
    for (auto& t : params.tensors) read_values(cursor, stored_double, t.values);
    return params;
  } catch (const json::exception& e) {
    throw DataError(where + ": bad checkpoint header: " + e.what());
  }
}

template void save_checkpoint<float>(const Checkpoint<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const Checkpoint<double>&, const std::filesystem::path&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&, const std::optional<std::string>&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&, const std::optional<std::string>&);

}  // namespace xlp
