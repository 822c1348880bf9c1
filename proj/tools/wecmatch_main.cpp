#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wecmatch/baselines.hpp"
#include "wecmatch/cnn_train.hpp"
#include "wecmatch/corpus.hpp"
#include "wecmatch/digest.hpp"
#include "wecmatch/embeddings.hpp"
#include "wecmatch/eval.hpp"
#include "wecmatch/rng.hpp"
#include "wecmatch/wec.hpp"
#include "wecmatch/wec_train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wecmatch;

namespace {

json default_config() {
  return json{
      {"paths", {{"corpus", "corpus.jsonl"}, {"work_dir", "out"}}},
      {"split",
       {{"train_ratio", 4.0},
        {"valid_ratio", 1.0},
        {"test_ratio", 1.0},
        {"negatives_per_question", 10},
        {"candidate_negatives", 5},
        {"min_answer_len", 5},
        {"max_question_len", 50},
        {"max_answer_len", 100},
        {"min_count", 1},
        {"seed", 1}}},
      {"embeddings",
       {{"dim", 500},
        {"window", 10},
        {"negative_samples", 5},
        {"epochs", 5},
        {"initial_lr", 0.025},
        {"subsample_threshold", 1e-4},
        {"min_count", 5},
        {"seed", 1}}},
      {"wec",
       {{"margin", 0.1},
        {"learning_rate", 1e-3},
        {"batch_size", 128},
        {"max_epochs", 50},
        {"patience", 5},
        {"init_noise_sigma", 0.01},
        {"seed", 1}}},
      {"cnn",
       {{"n_f", 50},
        {"m_f", 100},
        {"kernel", 5},
        {"c1_maps", 20},
        {"c2_maps", 50},
        {"fc_units", 500},
        {"margin", 1.0},
        {"learning_rate", 1e-3},
        {"batch_size", 128},
        {"max_epochs", 50},
        {"patience", 5},
        {"seed", 1}}},
      {"finetune",
       {{"margin", 1.0},
        {"learning_rate", 1e-4},
        {"batch_size", 128},
        {"max_epochs", 20},
        {"patience", 5},
        {"seed", 1}}},
      {"baselines",
       {{"lambda", 0.2},
        {"beta", 0.8},
        {"bm25_k1", 1.2},
        {"bm25_b", 0.75},
        {"ibm1_iters", 5},
        {"cos_top_k", 100}}},
      {"eval",
       {{"scorers", json::array({"wec", "wec-cnn", "cosine", "lm", "okapi", "tm", "trlm",
                                 "tm-cos", "trlm-cos"})}}}};
}

void merge_config(json& base, const json& overrides, const std::string& prefix) {
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw std::runtime_error("unknown config key: " + path);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) throw std::runtime_error("config key names a section: " + path);
      merge_config(slot, *it, path);
    } else {
      if (it->is_object()) throw std::runtime_error("config key names a value: " + path);
      slot = *it;
    }
  }
}

void apply_override(json& cfg, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got: " + kv);
  std::string key = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);

  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  json* node = &cfg;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      throw std::runtime_error("unknown config key: " + key);
    }
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf) || (*node)[leaf].is_object()) {
    throw std::runtime_error("unknown config key: " + key);
  }
  json parsed = json::parse(value, nullptr, false);
  (*node)[leaf] = parsed.is_discarded() ? json(value) : parsed;
}

json load_config(const std::string& config_path, const std::vector<std::string>& sets) {
  json cfg = default_config();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("config file not found: " + config_path);
    json file = json::parse(in);
    merge_config(cfg, file, "");
  }
  for (const auto& kv : sets) apply_override(cfg, kv);
  if (const char* env = std::getenv("WEC_SEED")) {
    uint64_t seed = 0;
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("WEC_SEED is not a number: ") + env);
    }
    for (const char* section : {"split", "embeddings", "wec", "cnn", "finetune"}) {
      cfg[section]["seed"] = seed;
    }
  }
  return cfg;
}

std::string config_hash(const json& cfg) { return hex64(fnv1a64(cfg.dump())); }

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Layout {
  fs::path work;

  explicit Layout(const json& cfg) : work(cfg.at("paths").at("work_dir").get<std::string>()) {}

  fs::path vocab() const { return work / "vocab.txt"; }
  fs::path split(const std::string& s) const { return work / (s + ".jsonl"); }
  fs::path triples() const { return work / "triples.tsv"; }
  fs::path candidates(const std::string& s) const { return work / ("candidates_" + s + ".txt"); }
  fs::path meta() const { return work / "meta.json"; }
  fs::path embeddings() const { return work / "embeddings.txt"; }
  fs::path wec_model() const { return work / "wec_model.txt"; }
  fs::path cnn_model() const { return work / "cnn_model.txt"; }
  fs::path ft_wec() const { return work / "finetuned_wec.txt"; }
  fs::path ft_cnn() const { return work / "finetuned_cnn.txt"; }
  fs::path ibm1() const { return work / "ibm1_table.txt"; }
  fs::path cos_table() const { return work / "cosine_table.txt"; }
  fs::path report(const std::string& s, const char* ext) const {
    return work / "reports" / (s + ext);
  }
  fs::path run_log(const std::string& name) const { return work / "logs" / (name + ".json"); }
};

void require_file(const fs::path& p, const std::string& what, const std::string& hint) {
  if (!fs::exists(p)) {
    throw std::runtime_error(what + " not found: " + p.string() + " (" + hint + ")");
  }
}

json checksum_entry(const fs::path& p) { return hex64(fnv1a64_file(p.string())); }

void write_run_log(const json& cfg, const Layout& lay, const std::string& name,
                   const json& inputs, const json& extra) {
  fs::create_directories(lay.work / "logs");
  json log{{"command", name},
           {"timestamp", iso_now()},
           {"config", cfg},
           {"config_hash", config_hash(cfg)},
           {"inputs", inputs}};
  log.update(extra);
  std::ofstream out(lay.run_log(name));
  out << log.dump(2) << "\n";
}

json epoch_log_json(const std::vector<EpochLog>& log) {
  json rows = json::array();
  for (const auto& row : log) {
    rows.push_back(
        {{"epoch", row.epoch}, {"train_loss", row.train_loss}, {"valid_dcg1", row.valid_dcg1}});
  }
  return rows;
}

SplitSpec split_spec_from(const json& j) {
  SplitSpec spec;
  spec.train_ratio = j.at("train_ratio").get<double>();
  spec.valid_ratio = j.at("valid_ratio").get<double>();
  spec.test_ratio = j.at("test_ratio").get<double>();
  spec.negatives_per_question = j.at("negatives_per_question").get<int>();
  spec.min_answer_len = j.at("min_answer_len").get<int>();
  spec.max_question_len = j.at("max_question_len").get<int>();
  spec.max_answer_len = j.at("max_answer_len").get<int>();
  spec.rng_seed = j.at("seed").get<uint64_t>();
  return spec;
}

SkipGramConfig skipgram_cfg_from(const json& j) {
  SkipGramConfig cfg;
  cfg.dim = j.at("dim").get<int>();
  cfg.window = j.at("window").get<int>();
  cfg.negative_samples = j.at("negative_samples").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.initial_lr = j.at("initial_lr").get<double>();
  cfg.subsample_threshold = j.at("subsample_threshold").get<double>();
  cfg.min_count = j.at("min_count").get<int>();
  cfg.rng_seed = j.at("seed").get<uint64_t>();
  return cfg;
}

WecTrainConfig wec_cfg_from(const json& j) {
  WecTrainConfig cfg;
  cfg.margin = j.at("margin").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.patience = j.at("patience").get<int>();
  cfg.init_noise_sigma = j.at("init_noise_sigma").get<double>();
  cfg.rng_seed = j.at("seed").get<uint64_t>();
  return cfg;
}

CnnTrainConfig cnn_cfg_from(const json& j) {
  CnnTrainConfig cfg;
  cfg.margin = j.at("margin").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.patience = j.at("patience").get<int>();
  cfg.rng_seed = j.at("seed").get<uint64_t>();
  return cfg;
}

CnnArchitecture arch_from(const json& j) {
  CnnArchitecture arch;
  arch.n_f = j.at("n_f").get<int>();
  arch.m_f = j.at("m_f").get<int>();
  arch.kernel = j.at("kernel").get<int>();
  arch.c1_maps = j.at("c1_maps").get<int>();
  arch.c2_maps = j.at("c2_maps").get<int>();
  arch.fc_units = j.at("fc_units").get<int>();
  return arch;
}

// Lazily loads artifacts so each command touches only what it needs; records
// a checksum for every file it reads.
struct ModelContext {
  const json& cfg;
  Layout lay;
  json inputs = json::object();

  std::optional<Vocabulary> vocab_;
  std::optional<EmbeddingMatrix> matrix_;
  std::optional<TokenEmbedder> embedder_;
  std::optional<CollectionStats> stats_;
  std::optional<WecModel> wec_;
  std::optional<WecModel> ft_wec_;
  std::optional<CnnParams> ft_cnn_;
  std::optional<TranslationTable> ibm1_;
  std::optional<TranslationTable> cos_;

  explicit ModelContext(const json& c) : cfg(c), lay(c) {}

  void note_input(const fs::path& p) { inputs[p.string()] = checksum_entry(p); }

  const Vocabulary& vocab() {
    if (!vocab_) {
      require_file(lay.vocab(), "vocabulary", "run `prepare` first");
      vocab_ = load_vocabulary(lay.vocab().string());
      note_input(lay.vocab());
    }
    return *vocab_;
  }

  const EmbeddingMatrix& matrix() {
    if (!matrix_) {
      require_file(lay.embeddings(), "embeddings", "run `train embed` first");
      std::vector<std::string> missing;
      matrix_ = load_word2vec_text(lay.embeddings().string(), vocab(), &missing);
      note_input(lay.embeddings());
    }
    return *matrix_;
  }

  const TokenEmbedder& embedder() {
    if (!embedder_) embedder_.emplace(matrix(), vocab());
    return *embedder_;
  }

  std::string embeddings_hash() {
    matrix();
    return inputs[lay.embeddings().string()].get<std::string>();
  }

  const CollectionStats& stats() {
    if (!stats_) {
      require_file(lay.meta(), "corpus metadata", "run `prepare` first");
      std::ifstream in(lay.meta());
      json meta = json::parse(in);
      stats_ = collection_stats(vocab(), meta.at("doc_count").get<int64_t>(),
                                meta.at("avg_doc_len").get<double>());
      note_input(lay.meta());
    }
    return *stats_;
  }

  WecModel& load_wec(std::optional<WecModel>& slot, const fs::path& path,
                     const std::string& hint) {
    if (!slot) {
      require_file(path, "translation matrix model", hint);
      slot = load_wec_model(path.string());
      note_input(path);
      if (slot->embed_hash != embeddings_hash()) {
        throw std::runtime_error(path.string() +
                                 " was trained on different embeddings than " +
                                 lay.embeddings().string());
      }
    }
    return *slot;
  }

  WecModel& wec() { return load_wec(wec_, lay.wec_model(), "run `train wec` first"); }
  WecModel& ft_wec() { return load_wec(ft_wec_, lay.ft_wec(), "run `train finetune` first"); }

  const CnnParams& ft_cnn() {
    if (!ft_cnn_) {
      require_file(lay.ft_cnn(), "network model", "run `train finetune` first");
      ft_cnn_ = load_cnn_model(lay.ft_cnn().string());
      note_input(lay.ft_cnn());
    }
    return *ft_cnn_;
  }

  const TranslationTable& ibm1() {
    if (!ibm1_) {
      require_file(lay.ibm1(), "translation table", "run `train baselines` first");
      ibm1_ = load_translation_table(lay.ibm1().string(), vocab());
      note_input(lay.ibm1());
    }
    return *ibm1_;
  }

  const TranslationTable& cos_table() {
    if (!cos_) {
      require_file(lay.cos_table(), "translation table", "run `train baselines` first");
      cos_ = load_translation_table(lay.cos_table().string(), vocab());
      note_input(lay.cos_table());
    }
    return *cos_;
  }
};

const std::vector<std::string>& known_scorers() {
  static const std::vector<std::string> names = {"wec", "wec-cnn", "cosine", "lm",  "okapi",
                                                 "tm",  "trlm",    "tm-cos", "trlm-cos"};
  return names;
}

Scorer build_scorer(const std::string& name, ModelContext& ctx) {
  const json& bl = ctx.cfg.at("baselines");
  double lambda = bl.at("lambda").get<double>();
  double beta = bl.at("beta").get<double>();
  if (name == "cosine") return make_cosine_scorer(ctx.embedder());
  if (name == "wec") return make_wec_scorer(ctx.embedder(), ctx.wec().M);
  if (name == "wec-cnn") return make_cnn_scorer(ctx.embedder(), ctx.ft_wec().M, ctx.ft_cnn());
  if (name == "lm") return make_lm_scorer(ctx.stats(), lambda);
  if (name == "okapi") {
    return make_okapi_scorer(ctx.stats(), bl.at("bm25_k1").get<double>(),
                             bl.at("bm25_b").get<double>());
  }
  if (name == "tm") return make_tm_scorer(ctx.ibm1(), ctx.stats(), lambda);
  if (name == "trlm") return make_trlm_scorer(ctx.ibm1(), ctx.stats(), lambda, beta);
  if (name == "tm-cos") return make_tm_scorer(ctx.cos_table(), ctx.stats(), lambda);
  if (name == "trlm-cos") return make_trlm_scorer(ctx.cos_table(), ctx.stats(), lambda, beta);
  throw std::runtime_error("unknown scorer: " + name);
}

int cmd_prepare(const json& cfg) {
  Layout lay(cfg);
  std::string corpus_path = cfg.at("paths").at("corpus").get<std::string>();
  if (!fs::exists(corpus_path)) {
    throw std::runtime_error("corpus file not found: " + corpus_path);
  }
  fs::create_directories(lay.work);

  std::vector<Document> docs = load_corpus_jsonl(corpus_path);
  SplitSpec spec = split_spec_from(cfg.at("split"));
  Splits splits = filter_and_split(docs, spec);

  std::vector<Document> kept;
  kept.reserve(splits.train.size() + splits.valid.size() + splits.test.size());
  for (const auto* part : {&splits.train, &splits.valid, &splits.test}) {
    kept.insert(kept.end(), part->begin(), part->end());
  }
  Vocabulary vocab = build_vocabulary(kept, cfg.at("split").at("min_count").get<int>());

  int candidate_negatives = cfg.at("split").at("candidate_negatives").get<int>();
  std::vector<TrainingTriple> triples =
      generate_triples(splits.train, vocab, spec.negatives_per_question, spec.rng_seed);
  std::vector<CandidateSet> valid_sets =
      build_candidate_sets(splits.valid, vocab, candidate_negatives, spec.rng_seed);
  std::vector<CandidateSet> test_sets =
      build_candidate_sets(splits.test, vocab, candidate_negatives, spec.rng_seed);

  int64_t best_tokens = 0;
  for (const auto& d : kept) {
    best_tokens += static_cast<int64_t>(to_ids(tokenize(d.best_answer_text()), vocab).size());
  }
  double avg_doc_len =
      kept.empty() ? 0.0 : static_cast<double>(best_tokens) / static_cast<double>(kept.size());

  save_vocabulary(vocab, lay.vocab().string());
  save_corpus_jsonl(splits.train, lay.split("train").string());
  save_corpus_jsonl(splits.valid, lay.split("valid").string());
  save_corpus_jsonl(splits.test, lay.split("test").string());
  save_triples_tsv(triples, lay.triples().string());
  save_candidate_sets(valid_sets, vocab, lay.candidates("valid").string());
  save_candidate_sets(test_sets, vocab, lay.candidates("test").string());

  json meta{{"input_docs", docs.size()},
            {"kept_docs", kept.size()},
            {"train_docs", splits.train.size()},
            {"valid_docs", splits.valid.size()},
            {"test_docs", splits.test.size()},
            {"vocabulary", vocab.size()},
            {"triples", triples.size()},
            {"valid_sets", valid_sets.size()},
            {"test_sets", test_sets.size()},
            {"doc_count", kept.size()},
            {"avg_doc_len", avg_doc_len}};
  {
    std::ofstream out(lay.meta());
    out << meta.dump(2) << "\n";
  }

  std::printf("kept %zu of %zu documents: train %zu, valid %zu, test %zu\n", kept.size(),
              docs.size(), splits.train.size(), splits.valid.size(), splits.test.size());
  std::printf("vocabulary %zu words\n", vocab.size());
  std::printf("training triples %zu\n", triples.size());
  std::printf("candidate sets: valid %zu, test %zu\n", valid_sets.size(), test_sets.size());

  json outputs = json::array();
  for (const auto& p :
       {lay.vocab(), lay.split("train"), lay.split("valid"), lay.split("test"), lay.triples(),
        lay.candidates("valid"), lay.candidates("test"), lay.meta()}) {
    outputs.push_back(p.string());
  }
  write_run_log(cfg, lay, "prepare", json{{corpus_path, checksum_entry(corpus_path)}},
                json{{"outputs", outputs}, {"meta", meta}});
  return 0;
}

int cmd_train_embed(const json& cfg) {
  Layout lay(cfg);
  require_file(lay.split("train"), "training split", "run `prepare` first");
  std::vector<Document> train_docs = load_corpus_jsonl(lay.split("train").string());

  std::vector<std::vector<std::string>> sentences;
  for (const auto& d : train_docs) {
    sentences.push_back(tokenize(d.question_text));
    for (const auto& a : d.answers) sentences.push_back(tokenize(a.text));
  }

  SkipGramConfig sg = skipgram_cfg_from(cfg.at("embeddings"));
  SkipGramResult result = train_skipgram(sentences, sg);
  fs::create_directories(lay.work);
  save_word2vec_text(result.matrix, lay.embeddings().string());

  for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::printf("epoch %zu  loss %.6f\n", e, result.epoch_loss[e]);
  }
  std::printf("embeddings: %zu words, dim %d -> %s\n", result.matrix.size(), result.matrix.dim,
              lay.embeddings().string().c_str());

  write_run_log(cfg, lay, "train-embed",
                json{{lay.split("train").string(), checksum_entry(lay.split("train"))}},
                json{{"outputs", json::array({lay.embeddings().string()})},
                     {"epoch_loss", result.epoch_loss},
                     {"words", result.matrix.size()}});
  return 0;
}

struct TrainData {
  Vocabulary vocab;
  std::vector<Document> train_docs;
  std::vector<TrainingTriple> triples;
  std::vector<CandidateSet> valid_sets;
  EmbeddingMatrix matrix;
  std::vector<std::string> missing_words;
  json inputs = json::object();
};

TrainData load_train_data(const Layout& lay) {
  TrainData d;
  require_file(lay.vocab(), "vocabulary", "run `prepare` first");
  require_file(lay.split("train"), "training split", "run `prepare` first");
  require_file(lay.triples(), "training triples", "run `prepare` first");
  require_file(lay.candidates("valid"), "validation candidate sets", "run `prepare` first");
  require_file(lay.embeddings(), "embeddings", "run `train embed` first");

  d.vocab = load_vocabulary(lay.vocab().string());
  d.train_docs = load_corpus_jsonl(lay.split("train").string());
  d.triples = materialize_triples(load_triples_tsv(lay.triples().string()), d.train_docs, d.vocab);
  d.valid_sets = load_candidate_sets(lay.candidates("valid").string(), d.vocab);
  d.matrix = load_word2vec_text(lay.embeddings().string(), d.vocab, &d.missing_words);

  for (const auto& p : {lay.vocab(), lay.split("train"), lay.triples(), lay.candidates("valid"),
                        lay.embeddings()}) {
    d.inputs[p.string()] = checksum_entry(p);
  }
  return d;
}

void print_epochs(const std::vector<EpochLog>& log) {
  for (const auto& row : log) {
    if (row.valid_dcg1 >= 0.0) {
      std::printf("epoch %d  loss %.6f  valid DCG@1 %.4f\n", row.epoch, row.train_loss,
                  row.valid_dcg1);
    } else {
      std::printf("epoch %d  loss %.6f\n", row.epoch, row.train_loss);
    }
  }
}

int cmd_train_wec(const json& cfg) {
  Layout lay(cfg);
  TrainData d = load_train_data(lay);
  TokenEmbedder embedder(d.matrix, d.vocab);

  WecTrainConfig wcfg = wec_cfg_from(cfg.at("wec"));
  WecTrainResult r = train_wec(d.triples, embedder, d.valid_sets, wcfg);

  WecModel model;
  model.M = r.M;
  model.margin = wcfg.margin;
  model.embed_hash = d.inputs[lay.embeddings().string()].get<std::string>();
  save_wec_model(model, lay.wec_model().string());

  print_epochs(r.log);
  std::printf("best epoch %d  valid DCG@1 %.4f  skipped triples %zu\n", r.best_epoch,
              r.best_valid_dcg1, r.skipped_triples);
  std::printf("wrote %s\n", lay.wec_model().string().c_str());

  write_run_log(cfg, lay, "train-wec", d.inputs,
                json{{"outputs", json::array({lay.wec_model().string()})},
                     {"epochs", epoch_log_json(r.log)},
                     {"best_epoch", r.best_epoch},
                     {"best_valid_dcg1", r.best_valid_dcg1},
                     {"skipped_triples", r.skipped_triples},
                     {"missing_embedding_words", d.missing_words.size()}});
  return 0;
}

int cmd_train_cnn(const json& cfg) {
  Layout lay(cfg);
  require_file(lay.wec_model(), "translation matrix model", "run `train wec` first");
  TrainData d = load_train_data(lay);
  TokenEmbedder embedder(d.matrix, d.vocab);

  WecModel wec = load_wec_model(lay.wec_model().string());
  d.inputs[lay.wec_model().string()] = checksum_entry(lay.wec_model());
  if (wec.embed_hash != d.inputs[lay.embeddings().string()].get<std::string>()) {
    throw std::runtime_error(lay.wec_model().string() +
                             " was trained on different embeddings than " +
                             lay.embeddings().string());
  }

  CnnArchitecture arch = arch_from(cfg.at("cnn"));
  CnnTrainConfig ccfg = cnn_cfg_from(cfg.at("cnn"));
  CnnTrainResult r = train_cnn_stage(d.triples, embedder, wec.M, d.valid_sets, arch, ccfg);
  save_cnn_model(r.params, lay.cnn_model().string());

  print_epochs(r.log);
  std::printf("best epoch %d  valid DCG@1 %.4f  skipped triples %zu\n", r.best_epoch,
              r.best_valid_dcg1, r.skipped_triples);
  std::printf("wrote %s\n", lay.cnn_model().string().c_str());

  write_run_log(cfg, lay, "train-cnn", d.inputs,
                json{{"outputs", json::array({lay.cnn_model().string()})},
                     {"epochs", epoch_log_json(r.log)},
                     {"best_epoch", r.best_epoch},
                     {"best_valid_dcg1", r.best_valid_dcg1},
                     {"skipped_triples", r.skipped_triples}});
  return 0;
}

int cmd_train_finetune(const json& cfg) {
  Layout lay(cfg);
  require_file(lay.wec_model(), "translation matrix model", "run `train wec` first");
  require_file(lay.cnn_model(), "network model", "run `train cnn` first");
  TrainData d = load_train_data(lay);
  TokenEmbedder embedder(d.matrix, d.vocab);

  WecModel wec = load_wec_model(lay.wec_model().string());
  CnnParams params = load_cnn_model(lay.cnn_model().string());
  d.inputs[lay.wec_model().string()] = checksum_entry(lay.wec_model());
  d.inputs[lay.cnn_model().string()] = checksum_entry(lay.cnn_model());
  if (wec.embed_hash != d.inputs[lay.embeddings().string()].get<std::string>()) {
    throw std::runtime_error(lay.wec_model().string() +
                             " was trained on different embeddings than " +
                             lay.embeddings().string());
  }

  CnnTrainConfig fcfg = cnn_cfg_from(cfg.at("finetune"));
  FineTuneResult r = fine_tune(d.triples, embedder, wec.M, params, d.valid_sets, fcfg);

  WecModel tuned;
  tuned.M = r.M;
  tuned.margin = wec.margin;
  tuned.embed_hash = wec.embed_hash;
  save_wec_model(tuned, lay.ft_wec().string());
  save_cnn_model(r.params, lay.ft_cnn().string());

  print_epochs(r.log);
  std::printf("best epoch %d  valid DCG@1 %.4f  skipped triples %zu\n", r.best_epoch,
              r.best_valid_dcg1, r.skipped_triples);
  std::printf("wrote %s and %s\n", lay.ft_wec().string().c_str(),
              lay.ft_cnn().string().c_str());

  write_run_log(cfg, lay, "train-finetune", d.inputs,
                json{{"outputs", json::array({lay.ft_wec().string(), lay.ft_cnn().string()})},
                     {"epochs", epoch_log_json(r.log)},
                     {"best_epoch", r.best_epoch},
                     {"best_valid_dcg1", r.best_valid_dcg1},
                     {"skipped_triples", r.skipped_triples}});
  return 0;
}

int cmd_train_baselines(const json& cfg) {
  Layout lay(cfg);
  require_file(lay.vocab(), "vocabulary", "run `prepare` first");
  require_file(lay.split("train"), "training split", "run `prepare` first");
  require_file(lay.embeddings(), "embeddings", "run `train embed` first");

  Vocabulary vocab = load_vocabulary(lay.vocab().string());
  std::vector<Document> train_docs = load_corpus_jsonl(lay.split("train").string());

  std::vector<AlignedPair> pairs;
  for (const auto& d : train_docs) {
    AlignedPair p;
    p.source = to_ids(tokenize(d.best_answer_text()), vocab);
    p.target = to_ids(tokenize(d.question_text), vocab);
    if (p.source.empty() || p.target.empty()) continue;
    pairs.push_back(std::move(p));
  }

  const json& bl = cfg.at("baselines");
  Ibm1Result ibm = train_ibm1(pairs, bl.at("ibm1_iters").get<int>());
  save_translation_table(ibm.table, vocab, lay.ibm1().string());

  std::vector<std::string> missing;
  EmbeddingMatrix matrix = load_word2vec_text(lay.embeddings().string(), vocab, &missing);
  TranslationTable cos = cosine_table(matrix, vocab, bl.at("cos_top_k").get<int>());
  save_translation_table(cos, vocab, lay.cos_table().string());

  for (size_t i = 0; i < ibm.log_likelihood.size(); ++i) {
    std::printf("em iteration %zu  log-likelihood %.6f\n", i, ibm.log_likelihood[i]);
  }
  std::printf("wrote %s and %s\n", lay.ibm1().string().c_str(),
              lay.cos_table().string().c_str());

  json inputs;
  for (const auto& p : {lay.vocab(), lay.split("train"), lay.embeddings()}) {
    inputs[p.string()] = checksum_entry(p);
  }
  write_run_log(cfg, lay, "train-baselines", inputs,
                json{{"outputs", json::array({lay.ibm1().string(), lay.cos_table().string()})},
                     {"ibm1_pairs", pairs.size()},
                     {"ibm1_log_likelihood", ibm.log_likelihood}});
  return 0;
}

int cmd_train(const json& cfg, const std::string& stage) {
  if (stage == "embed") return cmd_train_embed(cfg);
  if (stage == "wec") return cmd_train_wec(cfg);
  if (stage == "cnn") return cmd_train_cnn(cfg);
  if (stage == "finetune") return cmd_train_finetune(cfg);
  if (stage == "baselines") return cmd_train_baselines(cfg);
  throw std::runtime_error("unknown training stage: " + stage +
                           " (expected embed, wec, cnn, finetune, or baselines)");
}

int cmd_eval(const json& cfg, std::vector<std::string> scorers, int threads) {
  Layout lay(cfg);
  ModelContext ctx(cfg);
  if (scorers.empty()) {
    scorers = cfg.at("eval").at("scorers").get<std::vector<std::string>>();
  }

  require_file(lay.candidates("test"), "test candidate sets", "run `prepare` first");
  std::vector<CandidateSet> test_sets =
      load_candidate_sets(lay.candidates("test").string(), ctx.vocab());
  ctx.note_input(lay.candidates("test"));

  fs::create_directories(lay.work / "reports");
  std::string hash = config_hash(cfg);

  struct Row {
    std::string name;
    double dcg1, dcg6;
    int64_t n;
  };
  std::vector<Row> table;
  std::vector<std::pair<std::string, std::string>> failures;
  json results = json::object();

  for (const auto& name : scorers) {
    try {
      Scorer scorer = build_scorer(name, ctx);
      EvalReport report = evaluate(scorer, test_sets, threads);
      save_eval_report(report, name, hash, lay.report(name, ".json").string());
      save_per_question_csv(report, lay.report(name, ".csv").string());
      table.push_back({name, report.dcg1, report.dcg6, report.n_questions});
      results[name] = {{"dcg1", report.dcg1}, {"dcg6", report.dcg6}};
    } catch (const std::exception& e) {
      failures.emplace_back(name, e.what());
      results[name] = {{"error", e.what()}};
    }
  }

  std::printf("%-10s %8s %8s %10s\n", "approach", "DCG@1", "DCG@6", "questions");
  for (const auto& row : table) {
    std::printf("%-10s %8.4f %8.4f %10lld\n", row.name.c_str(), row.dcg1, row.dcg6,
                static_cast<long long>(row.n));
  }
  for (const auto& [name, what] : failures) {
    std::fprintf(stderr, "scorer %s failed: %s\n", name.c_str(), what.c_str());
  }

  write_run_log(cfg, lay, "eval", ctx.inputs,
                json{{"scorers", scorers}, {"results", results}, {"threads", threads}});
  return failures.empty() ? 0 : 1;
}

std::vector<std::string> read_words(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("text file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return tokenize(buf.str());
}

int cmd_explain(const json& cfg, const std::string& word, const std::vector<std::string>& pair,
                const std::string& scorer, int k) {
  ModelContext ctx(cfg);

  if (!pair.empty()) {
    std::vector<std::string> q_words = read_words(pair[0]);
    std::vector<std::string> a_words = read_words(pair[1]);
    RenderedBreakdown breakdown =
        explain_links(q_words, a_words, ctx.matrix(), ctx.wec().M);
    for (const auto& link : breakdown.links) {
      std::printf("%-20s -> %-20s %9.6f\n", link.answer_word.c_str(),
                  link.question_word.c_str(), link.score);
    }
    std::printf("sentence score %9.6f\n", breakdown.sentence_score);
    return 0;
  }

  if (word.empty()) throw std::runtime_error("explain needs --word or --pair");

  std::vector<WordScore> rows;
  if (scorer == "wec") {
    rows = explain_translations_wec(word, ctx.matrix(), ctx.wec().M, k);
  } else if (scorer == "cos") {
    rows = explain_translations_cosine(word, ctx.matrix(), k);
  } else if (scorer == "tm") {
    rows = explain_translations_table(word, ctx.ibm1(), ctx.vocab(), k);
  } else if (scorer == "tm-cos") {
    rows = explain_translations_table(word, ctx.cos_table(), ctx.vocab(), k);
  } else {
    throw std::runtime_error("unknown explain scorer: " + scorer +
                             " (expected wec, cos, tm, or tm-cos)");
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    std::printf("%2zu  %-20s %9.6f\n", i + 1, rows[i].word.c_str(), rows[i].score);
  }
  return 0;
}

int cmd_score(const json& cfg, const std::string& scorer_name, const std::string& question,
              const std::string& answer) {
  ModelContext ctx(cfg);
  Scorer scorer = build_scorer(scorer_name, ctx);
  TokenSeq q = to_ids(tokenize(question), ctx.vocab());
  TokenSeq a = to_ids(tokenize(answer), ctx.vocab());
  double score = scorer(q, a);
  bool embedding_based =
      scorer_name == "wec" || scorer_name == "wec-cnn" || scorer_name == "cosine";
  if (embedding_based && score == kUnscorable) {
    throw std::runtime_error("pair is unscorable: one side has no embeddable words");
  }
  std::printf("%.9g\n", score);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Answer-ranking pipeline: corpus preparation, embedding and ranker training, "
               "evaluation, and model inspection"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", sets, "override a config value, e.g. --set wec.max_epochs=10")
        ->take_all();
  };

  CLI::App* prepare = app.add_subcommand("prepare", "filter, split, and index the corpus");
  add_common(prepare);

  CLI::App* train = app.add_subcommand("train", "run one training stage");
  std::string stage;
  train->add_option("stage", stage, "embed | wec | cnn | finetune | baselines")->required();
  add_common(train);

  CLI::App* eval_cmd = app.add_subcommand("eval", "rank the test candidate sets");
  std::vector<std::string> scorers;
  int threads = 1;
  eval_cmd->add_option("--scorer", scorers, "scorers to evaluate (default: config list)");
  eval_cmd->add_option("--threads", threads, "worker threads for scoring");
  add_common(eval_cmd);

  CLI::App* explain = app.add_subcommand("explain", "inspect a model's word translations");
  std::string word;
  std::vector<std::string> pair;
  std::string explain_scorer = "wec";
  int k = 5;
  explain->add_option("--word", word, "question word to look up");
  explain->add_option("--pair", pair, "question and answer text files")->expected(2);
  explain->add_option("--scorer", explain_scorer, "wec | cos | tm | tm-cos");
  explain->add_option("--k", k, "rows to print");
  add_common(explain);

  CLI::App* score = app.add_subcommand("score", "score one question/answer pair");
  std::string score_scorer = "wec";
  std::string question, answer;
  score->add_option("--scorer", score_scorer, "scorer to use");
  score->add_option("--question", question, "question text")->required();
  score->add_option("--answer", answer, "answer text")->required();
  add_common(score);

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = load_config(config_path, sets);
    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg, stage);
    if (eval_cmd->parsed()) return cmd_eval(cfg, scorers, threads);
    if (explain->parsed()) return cmd_explain(cfg, word, pair, explain_scorer, k);
    if (score->parsed()) return cmd_score(cfg, score_scorer, question, answer);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
