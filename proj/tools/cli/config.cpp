#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/rng.hpp"

extern char** environ;

namespace xlp::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kEnvPrefix = "XLPRIME_";

// A YAML mapping whose keys must all be consumed; leftovers are reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where() + " must be a mapping");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required key '" + name(key) + "'");
    return as<T>(key);
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(node_ && node_.IsMap() ? node_[key] : YAML::Node(), name(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    std::vector<std::string> unknown;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) unknown.push_back(name(key));
    }
    if (unknown.empty()) return;
    std::string msg = "unknown config key";
    msg += unknown.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
    throw ConfigError(msg);
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config root" : "'" + path_ + "'"; }

  template <typename T>
  T as(const std::string& key) {
    try {
      return node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + name(key) + "' has an invalid value '" + YAML::Dump(node_[key]) + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

void set_path(YAML::Node node, const std::vector<std::string>& keys, std::size_t i, const YAML::Node& value) {
  if (i + 1 == keys.size()) {
    node[keys[i]] = value;
    return;
  }
  if (!node[keys[i]] || !node[keys[i]].IsMap()) node[keys[i]] = YAML::Node(YAML::NodeType::Map);
  set_path(node[keys[i]], keys, i + 1, value);
}

void apply_environment(YAML::Node& root, const Environment& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind(kEnvPrefix, 0) != 0) continue;
    std::string rest = name.substr(kEnvPrefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(), [](unsigned char c) { return std::tolower(c); });
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto cut = rest.find("__", pos);
      keys.push_back(rest.substr(pos, cut == std::string::npos ? std::string::npos : cut - pos));
      if (cut == std::string::npos) break;
      pos = cut + 2;
    }
    if (std::any_of(keys.begin(), keys.end(), [](const std::string& k) { return k.empty(); })) {
      throw ConfigError("malformed override variable " + name);
    }
    YAML::Node parsed;
    try {
      parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
      throw ConfigError("override " + name + ": " + e.what());
    }
    if (!root || !root.IsMap()) root = YAML::Node(YAML::NodeType::Map);
    set_path(root, keys, 0, parsed);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

Response parse_response(const std::string& text) {
  if (text == "probability") return Response::probability;
  if (text == "logit") return Response::logit;
  throw ConfigError("unknown stats.response '" + text + "' (probability, logit)");
}

}  // namespace

std::uint64_t ExperimentConfig::tokenizer_seed() const { return derive_seed(seed, "tokenizer"); }
std::uint64_t ExperimentConfig::model_seed() const { return derive_seed(seed, "model"); }
std::uint64_t ExperimentConfig::data_seed() const { return derive_seed(seed, "data"); }
std::uint64_t ExperimentConfig::synthetic_seed() const { return derive_seed(seed, "synthetic"); }
std::uint64_t ExperimentConfig::stimulus_seed() const { return derive_seed(seed, "stimuli"); }

PretrainConfig ExperimentConfig::pretrain_config(std::size_t vocab_size) const {
  PretrainConfig c;
  c.model = model;
  c.model.vocab_size = vocab_size;
  c.model.seed = model_seed();
  c.adam = adam;
  c.curriculum = curriculum;
  c.checkpoints = checkpoints;
  c.dtype = dtype;
  c.data_seed = data_seed();
  return c;
}

std::vector<std::uint64_t> ExperimentConfig::sweep_steps() const {
  if (sweep_selection == SweepSelection::all) return checkpoints.steps(curriculum);
  std::set<std::uint64_t> s;
  for (auto o : checkpoints.fine_offsets) s.insert(curriculum.phase_boundary + o);
  return {s.begin(), s.end()};
}

std::string ExperimentConfig::to_json() const {
  using nlohmann::json;
  auto rel = [this](const fs::path& p) { return p.empty() ? std::string() : p.lexically_relative(base_dir).string(); };
  json j;
  j["seed"] = seed;
  j["corpus"] = {{"l1", rel(corpus_l1)}, {"l2", rel(corpus_l2)}};
  if (synthetic) {
    const auto& g = synthetic->grammar;
    j["synthetic"] = {{"documents", synthetic->documents}, {"items", synthetic->items},
                      {"verbs", g.verbs},                  {"nouns", g.nouns},
                      {"po_rate", g.po_rate},              {"persistence", g.persistence},
                      {"min_sentences", g.min_sentences},  {"max_sentences", g.max_sentences},
                      {"shared_structure", g.shared_structure}};
  }
  j["tokenizer"] = {{"vocab_size", tokenizer_vocab},
                      {"sample_chars", tokenizer_sample_chars},
                      {"proportions", {{"l1", proportions.l1}, {"l2", proportions.l2}}}};
  j["model"] = {{"n_layers", model.n_layers}, {"d_model", model.d_model},     {"n_heads", model.n_heads},
                {"ff_multiplier", model.ff_multiplier}, {"seq_len", model.seq_len}, {"dropout", model.dropout},
                {"init_std", model.init_std}, {"tie_embeddings", model.tie_embeddings}};
  j["curriculum"] = {{"total_steps", curriculum.total_steps}, {"phase_boundary", curriculum.phase_boundary},
                     {"batch_size", curriculum.batch_size},   {"phase1_mix", curriculum.phase1_mix},
                     {"phase2_mix", curriculum.phase2_mix}};
  j["optimizer"] = {{"learning_rate", adam.learning_rate}, {"beta1", adam.beta1},
                    {"beta2", adam.beta2},                 {"epsilon", adam.epsilon},
                    {"weight_decay", adam.weight_decay},   {"grad_clip", adam.grad_clip},
                    {"warmup_steps", adam.warmup_steps},   {"schedule", to_string(adam.schedule)},
                    {"min_lr_ratio", adam.min_lr_ratio}};
  j["checkpoints"] = {{"coarse_interval", checkpoints.coarse_interval},
                      {"fine_offsets", checkpoints.fine_offsets},
                      {"dtype", to_string(dtype)}};
  j["stimuli"] = rel(stimuli);
  j["joiner"] = joiner;
  j["sweep"] = {{"checkpoints", sweep_selection == SweepSelection::all ? "all" : "fine"}};
  j["stats"] = {{"correction", to_string(stats.correction)},
                {"baseline_step", stats.baseline_step},
                {"alpha", stats.alpha},
                {"response", stats.response == Response::logit ? "logit" : "probability"}};
  j["contamination"] = {{"shard", to_string(contamination.shard)},
                        {"reference_l1", rel(contamination.reference_l1)},
                        {"reference_l2", rel(contamination.reference_l2)},
                        {"order", contamination.order},
                        {"smoothing", contamination.smoothing},
                        {"threshold", contamination.threshold}};
  return j.dump(2);
}

Environment process_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(kEnvPrefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

ExperimentConfig parse_config(const std::string& yaml_text, const fs::path& base_dir, const Environment& env) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  apply_environment(root, env);

  ExperimentConfig c;
  Section top(root, "");
  c.seed = top.get<std::uint64_t>("seed", 0);
  c.base_dir = base_dir;
  c.output_dir = resolve(base_dir, top.get<std::string>("output_dir", "out"));

  auto corpus = top.child("corpus");
  c.corpus_l1 = resolve(base_dir, corpus.require<std::string>("l1"));
  c.corpus_l2 = resolve(base_dir, corpus.require<std::string>("l2"));
  corpus.finish();

  if (top.has("synthetic")) {
    auto s = top.child("synthetic");
    SyntheticSettings syn;
    syn.documents = s.get<std::size_t>("documents", syn.documents);
    syn.items = s.get<std::size_t>("items", syn.items);
    auto& g = syn.grammar;
    g.verbs = s.get<std::size_t>("verbs", g.verbs);
    g.nouns = s.get<std::size_t>("nouns", g.nouns);
    g.po_rate = s.get<double>("po_rate", g.po_rate);
    g.persistence = s.get<double>("persistence", g.persistence);
    g.min_sentences = s.get<std::size_t>("min_sentences", g.min_sentences);
    g.max_sentences = s.get<std::size_t>("max_sentences", g.max_sentences);
    g.shared_structure = s.get<bool>("shared_structure", g.shared_structure);
    s.finish();
    c.synthetic = syn;
  }

  auto tok = top.child("tokenizer");
  c.tokenizer_vocab = tok.get<std::size_t>("vocab_size", c.tokenizer_vocab);
  c.tokenizer_sample_chars = tok.get<std::size_t>("sample_chars", 0);
  auto prop = tok.child("proportions");
  c.proportions.l1 = prop.get<double>("l1", c.proportions.l1);
  c.proportions.l2 = prop.get<double>("l2", c.proportions.l2);
  prop.finish();
  tok.finish();

  auto model = top.child("model");
  auto& m = c.model;
  m.n_layers = model.get<std::size_t>("n_layers", m.n_layers);
  m.d_model = model.get<std::size_t>("d_model", m.d_model);
  m.n_heads = model.get<std::size_t>("n_heads", m.n_heads);
  m.ff_multiplier = model.get<std::size_t>("ff_multiplier", m.ff_multiplier);
  m.seq_len = model.get<std::size_t>("seq_len", m.seq_len);
  m.dropout = model.get<double>("dropout", m.dropout);
  m.init_std = model.get<double>("init_std", m.init_std);
  m.tie_embeddings = model.get<bool>("tie_embeddings", m.tie_embeddings);
  model.finish();
  m.vocab_size = c.tokenizer_vocab;
  m.seed = c.model_seed();

  auto cur = top.child("curriculum");
  auto& k = c.curriculum;
  k.total_steps = cur.require<std::uint64_t>("total_steps");
  k.phase_boundary = cur.get<std::uint64_t>("phase_boundary", k.total_steps / 2);
  k.batch_size = cur.get<std::uint32_t>("batch_size", k.batch_size);
  k.phase1_mix = cur.get<double>("phase1_mix", k.phase1_mix);
  k.phase2_mix = cur.get<double>("phase2_mix", k.phase2_mix);
  cur.finish();
  k.seq_len = static_cast<std::uint32_t>(m.seq_len);

  auto opt = top.child("optimizer");
  auto& a = c.adam;
  a.learning_rate = opt.get<double>("learning_rate", a.learning_rate);
  a.beta1 = opt.get<double>("beta1", a.beta1);
  a.beta2 = opt.get<double>("beta2", a.beta2);
  a.epsilon = opt.get<double>("epsilon", a.epsilon);
  a.weight_decay = opt.get<double>("weight_decay", a.weight_decay);
  a.grad_clip = opt.get<double>("grad_clip", a.grad_clip);
  a.warmup_steps = opt.get<std::uint64_t>("warmup_steps", a.warmup_steps);
  a.schedule = parse_lr_schedule(opt.get<std::string>("schedule", to_string(a.schedule)));
  a.min_lr_ratio = opt.get<double>("min_lr_ratio", a.min_lr_ratio);
  opt.finish();
  a.total_steps = k.total_steps;

  auto ck = top.child("checkpoints");
  c.checkpoints.coarse_interval = ck.get<std::uint64_t>("coarse_interval", 0);
  c.checkpoints.fine_offsets =
      ck.get<std::vector<std::uint64_t>>("fine_offsets", default_fine_offsets(k.total_steps));
  c.dtype = parse_dtype(ck.get<std::string>("dtype", "float32"));
  ck.finish();

  c.stimuli = resolve(base_dir, top.get<std::string>("stimuli", ""));
  c.joiner = top.get<std::string>("joiner", c.joiner);

  auto sw = top.child("sweep");
  const auto selection = sw.get<std::string>("checkpoints", "fine");
  if (selection != "fine" && selection != "all") {
    throw ConfigError("sweep.checkpoints must be 'fine' or 'all', got '" + selection + "'");
  }
  c.sweep_selection = selection == "all" ? SweepSelection::all : SweepSelection::fine;
  sw.finish();

  auto st = top.child("stats");
  c.stats.correction = parse_padjust(st.get<std::string>("correction", "holm"));
  c.stats.baseline_step = st.get<std::uint64_t>("baseline_step", k.phase_boundary);
  c.stats.alpha = st.get<double>("alpha", c.stats.alpha);
  c.stats.response = parse_response(st.get<std::string>("response", "probability"));
  st.finish();

  auto co = top.child("contamination");
  c.contamination.shard = parse_language(co.get<std::string>("shard", "L1"));
  c.contamination.reference_l1 = resolve(base_dir, co.get<std::string>("reference_l1", ""));
  c.contamination.reference_l2 = resolve(base_dir, co.get<std::string>("reference_l2", ""));
  c.contamination.order = co.get<std::size_t>("order", c.contamination.order);
  c.contamination.smoothing = co.get<double>("smoothing", c.contamination.smoothing);
  c.contamination.threshold = co.get<double>("threshold", c.contamination.threshold);
  co.finish();
  top.finish();

  // Cross-field invariants.
  m.validate();
  k.validate();
  for (auto o : c.checkpoints.fine_offsets) {
    if (o > k.total_steps - k.phase_boundary) {
      throw ConfigError("checkpoints.fine_offsets: offset " + std::to_string(o) + " exceeds total_steps - boundary = " +
                        std::to_string(k.total_steps - k.phase_boundary));
    }
  }
  const double psum = c.proportions.l1 + c.proportions.l2;
  if (c.proportions.l1 < 0 || c.proportions.l2 < 0 || std::abs(psum - 1.0) > 1e-9) {
    throw ConfigError("tokenizer.proportions must be non-negative and sum to 1");
  }
  if (!(c.stats.alpha > 0.0 && c.stats.alpha < 1.0)) throw ConfigError("stats.alpha must lie in (0, 1)");
  const auto steps = c.sweep_steps();
  if (!std::binary_search(steps.begin(), steps.end(), c.stats.baseline_step)) {
    throw ConfigError("stats.baseline_step " + std::to_string(c.stats.baseline_step) +
                      " is not among the swept checkpoint steps");
  }
  if (c.contamination.order == 0) throw ConfigError("contamination.order must be positive");
  return c;
}

ExperimentConfig load_config(const fs::path& path, const Environment& env) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  return parse_config(read_file(path), fs::absolute(path).parent_path(), env);
}

}  // namespace xlp::cli
