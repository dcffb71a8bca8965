#pragma once

// Stage runners and the `triplex` command line. Every stage reads its inputs
// from the work directory and writes its outputs there, so any stage can be
// re-run on its own.
//
// Work directory layout:
//   documents.jsonl, split.json                 ingest
//   triples.jsonl                               triples
//   repr_<mode>.jsonl                           repr
//   emb/<provider>_<mode>_{cluster,class}.emb   embed
//   sweep_<p>_<m>.csv, clusters_<p>_<m>.json    cluster
//   propagated_<p>_<m>.jsonl                    propagate
//   trials_*, head_*, train_*, class_dataset_*  train
//   eval_<p>_<m>.json                           evaluate
//   clustering_table.*, classification_table.*,
//   cluster_composition.csv, manifest.json      report
//   stages/<stage>.json                         every stage

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "triplex/classify.hpp"
#include "triplex/config.hpp"
#include "triplex/conllu.hpp"
#include "triplex/corpus.hpp"
#include "triplex/digest.hpp"
#include "triplex/embed.hpp"
#include "triplex/error.hpp"
#include "triplex/propagate.hpp"
#include "triplex/remote_provider.hpp"
#include "triplex/report.hpp"
#include "triplex/repr.hpp"
#include "triplex/sweep.hpp"
#include "triplex/triples.hpp"

#ifndef TRIPLEX_VERSION
#define TRIPLEX_VERSION "0.1.0"
#endif

namespace triplex::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// ---- file helpers ------------------------------------------------------------

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

inline std::vector<json> read_jsonl(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), n, p.string());
    }
  }
  return out;
}

template <class Range>
void write_jsonl(const fs::path& p, const Range& items) {
  std::string text;
  for (const auto& j : items) text += json(j).dump() + "\n";
  write_text_file(p, text);
}

// NaN is stored as null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::string provider_slug(std::string_view provider) {
  std::string s(provider);
  for (char& c : s)
    if (c == ':' || c == '/' || c == '\\' || c == ' ') c = '-';
  return s;
}

// ---- work directory ------------------------------------------------------------

class Workdir {
 public:
  explicit Workdir(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const noexcept { return root_; }
  fs::path path(const std::string& rel) const { return root_ / rel; }

  // Path of a stage input; DataError naming it when it is missing.
  fs::path need(const std::string& rel, std::string_view producer) const {
    fs::path p = root_ / rel;
    if (!fs::exists(p))
      throw DataError("missing stage input " + p.string() + " (produced by `triplex " + std::string(producer) + "`)");
    return p;
  }

  void ensure() const {
    fs::create_directories(root_ / "emb");
    fs::create_directories(root_ / "stages");
  }

  static std::string emb(std::string_view provider, ReprMode m, std::string_view part) {
    return "emb/" + provider_slug(provider) + "_" + std::string(mode_name(m)) + "_" + std::string(part) + ".emb";
  }
  static std::string tagged(std::string_view prefix, std::string_view provider, ReprMode m, std::string_view ext) {
    return std::string(prefix) + "_" + provider_slug(provider) + "_" + std::string(mode_name(m)) + std::string(ext);
  }

 private:
  fs::path root_;
};

// Per-stage record: output digests plus anything else the stage wants kept.
class StageRecord {
 public:
  StageRecord(const Workdir& wd, std::string name, const Settings& s)
      : wd_(wd), name_(std::move(name)), record_time_(s.record_time) {
    j_["stage"] = name_;
    j_["seed"] = s.seed;
    if (record_time_) j_["started_at"] = now();
  }

  json& data() { return j_; }
  void output(const std::string& rel) { j_["outputs"][rel] = sha256_file(wd_.path(rel)); }
  void input(const std::string& key, const fs::path& p) {
    j_["inputs"][key] = {{"path", p.generic_string()}, {"sha256", sha256_file(p)}};
  }

  void finish() {
    if (record_time_) j_["finished_at"] = now();
    write_json(wd_.path("stages/" + name_ + ".json"), j_);
  }

  static std::string now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

 private:
  const Workdir& wd_;
  std::string name_;
  bool record_time_;
  json j_ = json::object();
};

struct Context {
  Settings settings;
  Workdir wd;
  std::ostream& log;
};

// ---- shared loaders -------------------------------------------------------------

inline std::map<std::string, Document> load_documents(const Workdir& wd) {
  std::map<std::string, Document> out;
  for (const auto& j : read_jsonl(wd.need("documents.jsonl", "ingest"))) {
    Document d = document_from_json(j);
    out.emplace(d.id, std::move(d));
  }
  return out;
}

struct SplitIds {
  std::vector<std::string> cluster, cls;
};

inline SplitIds load_split(const Workdir& wd) {
  const json j = read_json(wd.need("split.json", "ingest"));
  return {j.at("cluster_ids").get<std::vector<std::string>>(), j.at("class_ids").get<std::vector<std::string>>()};
}

inline std::vector<std::string> labels_for(const std::map<std::string, Document>& docs,
                                           const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = docs.find(id);
    if (it == docs.end()) throw DataError("document " + id + " missing from documents.jsonl");
    out.push_back(it->second.primary_label);
  }
  return out;
}

inline EmbeddingMatrix load_embedding(const Workdir& wd, const std::string& provider, ReprMode m,
                                      std::string_view part) {
  return load_matrix(wd.need(Workdir::emb(provider, m, part), "embed"));
}

inline std::unique_ptr<EmbeddingProvider> make_provider(const Settings& s, const std::string& name) {
  if (name == "hash") return std::make_unique<HashProvider>(s.dim, s.seed);
  if (name.rfind("remote:", 0) == 0) {
    RemoteOptions o;
    o.batch_size = s.batch_size;
    return std::make_unique<RemoteProvider>(s.embed_url, name.substr(7), o);
  }
  throw ConfigError("unknown provider '" + name + "'");
}

// ---- stages ---------------------------------------------------------------------

inline void stage_ingest(Context& c) {
  const auto& s = c.settings;
  if (s.input.empty()) throw ConfigError("ingest needs --input <corpus.jsonl>");
  StageRecord rec(c.wd, "ingest", s);
  const CorpusLoad load = load_corpus(s.input.string());
  for (const auto& d : load.diagnostics) c.log << "[ingest] " << d << "\n";
  const CorpusSplit split = split_corpus(load.documents, {s.seed, s.n_cluster, s.n_class});

  write_jsonl(c.wd.path("documents.jsonl"), [&] {
    std::vector<json> v;
    for (const auto& d : load.documents) v.push_back(to_json(d));
    return v;
  }());
  write_json(c.wd.path("split.json"), split_manifest(split, s.seed));
  rec.input("corpus", s.input);
  rec.data()["documents"] = load.documents.size();
  rec.data()["skipped"] = load.skipped;
  rec.data()["diagnostics"] = load.diagnostics;
  rec.output("documents.jsonl");
  rec.output("split.json");
  rec.finish();
  c.log << "[ingest] " << load.documents.size() << " documents (" << load.skipped << " skipped); split "
        << split.cluster_set.size() << " + " << split.class_set.size() << "\n";
}

inline void stage_triples(Context& c) {
  const auto& s = c.settings;
  if (s.conllu.empty()) throw ConfigError("triples needs --conllu <file or directory>");
  if (!fs::exists(s.conllu)) throw IoError("CoNLL-U input not found: " + s.conllu.string());
  StageRecord rec(c.wd, "triples", s);
  const auto docs = load_documents(c.wd);
  const auto sentences = load_conllu(s.conllu);
  ExtractOptions opts;
  opts.preset = DeprelPreset::by_name(s.preset);
  opts.relation = s.relation == "lemma" ? RelationForm::Lemma : RelationForm::Surface;
  std::vector<json> rows;
  std::set<std::string> unknown;
  for (auto& t : extract_corpus_triples(sentences, opts)) {
    if (!docs.count(t.doc_id)) {
      unknown.insert(t.doc_id);
      continue;
    }
    rows.push_back(to_json(t));
  }
  if (!unknown.empty())
    c.log << "[triples] ignored triples of " << unknown.size() << " parsed document(s) not in the corpus\n";
  write_jsonl(c.wd.path("triples.jsonl"), rows);
  if (fs::is_regular_file(s.conllu)) rec.input("conllu", s.conllu);
  rec.data()["sentences"] = sentences.size();
  rec.data()["triples"] = rows.size();
  rec.output("triples.jsonl");
  rec.finish();
  c.log << "[triples] " << rows.size() << " triples from " << sentences.size() << " sentences\n";
}

inline void stage_repr(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "repr", s);
  const auto docs = load_documents(c.wd);
  const auto split = load_split(c.wd);
  std::map<std::string, std::vector<Triple>> by_doc;
  for (const auto& j : read_jsonl(c.wd.need("triples.jsonl", "triples"))) {
    Triple t = triple_from_json(j);
    by_doc[t.doc_id].push_back(std::move(t));
  }
  std::vector<std::string> ids = split.cluster;
  ids.insert(ids.end(), split.cls.begin(), split.cls.end());
  for (ReprMode m : s.modes) {
    std::vector<json> rows;
    for (const auto& id : ids) {
      const auto it = docs.find(id);
      if (it == docs.end()) throw DataError("split names unknown document " + id);
      const auto t = by_doc.find(id);
      rows.push_back(to_json(
          build_representation(it->second, t == by_doc.end() ? std::vector<Triple>{} : t->second, m, s.include_graph)));
    }
    const std::string rel = "repr_" + std::string(mode_name(m)) + ".jsonl";
    write_jsonl(c.wd.path(rel), rows);
    rec.output(rel);
  }
  rec.finish();
  c.log << "[repr] " << s.modes.size() << " mode(s), " << ids.size() << " documents each\n";
}

inline void stage_embed(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "embed", s);
  const auto split = load_split(c.wd);
  for (const auto& pname : s.providers) {
    auto provider = make_provider(s, pname);
    rec.data()["providers"][pname] = {{"dim", provider->dim()}};
    for (ReprMode m : s.modes) {
      std::map<std::string, ReprDoc> reprs;
      for (const auto& j : read_jsonl(c.wd.need("repr_" + std::string(mode_name(m)) + ".jsonl", "repr"))) {
        ReprDoc r = repr_from_json(j);
        reprs.emplace(r.doc_id, std::move(r));
      }
      for (const auto& [part, ids] : {std::pair{"cluster", &split.cluster}, std::pair{"class", &split.cls}}) {
        std::vector<ReprDoc> batch;
        for (const auto& id : *ids) {
          const auto it = reprs.find(id);
          if (it == reprs.end()) throw DataError("no representation for document " + id);
          batch.push_back(it->second);
        }
        EmbeddingMatrix em = embed_corpus(batch, *provider);
        const std::string rel = Workdir::emb(pname, m, part);
        save_matrix(em, c.wd.path(rel));
        rec.output(rel);
      }
      c.log << "[embed] " << pname << "/" << mode_name(m) << ": " << split.cluster.size() << " + "
            << split.cls.size() << " vectors, dim " << provider->dim() << "\n";
    }
  }
  rec.finish();
}

inline json sweep_best_json(const SweepOutcome& o) {
  const auto& b = o.best();
  return {{"param", b.param},          {"seed", b.seed},
          {"ari", b.ari},              {"nmi", b.nmi},
          {"silhouette", b.silhouette}, {"noise_fraction", b.noise_fraction},
          {"score", b.score},          {"n_clusters", b.n_clusters},
          {"labels", o.best_labels}};
}

inline void stage_cluster(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "cluster", s);
  const auto docs = load_documents(c.wd);
  SweepOptions opts;
  opts.threads = s.threads;
  opts.kmeans.n_init = s.restarts;
  opts.gmm.n_init = s.restarts;
  for (const auto& pname : s.providers)
    for (ReprMode m : s.modes) {
      const EmbeddingMatrix x = load_embedding(c.wd, pname, m, "cluster");
      const auto truth = labels_for(docs, x.doc_ids);
      const PairwiseDistances dist(x.vectors);
      const std::vector<std::pair<Algorithm, SweepOutcome>> outcomes = {
          {Algorithm::KMeans, partition_sweep(x.vectors, truth, Algorithm::KMeans, s.k_min, s.k_max, s.seed, opts, &dist)},
          {Algorithm::Gmm, partition_sweep(x.vectors, truth, Algorithm::Gmm, s.k_min, s.k_max, s.seed, opts, &dist)},
          {Algorithm::Hdbscan, density_sweep(x.vectors, truth, s.sizes, opts, &dist)}};

      std::ostringstream csv;
      bool header = true;
      json out = {{"provider", pname}, {"mode", std::string(mode_name(m))}, {"doc_ids", x.doc_ids}};
      Algorithm selected = Algorithm::KMeans;
      double selected_ari = -std::numeric_limits<double>::infinity();
      for (const auto& [algo, o] : outcomes) {
        write_sweep_csv(csv, o.table, header);
        header = false;
        out["algorithms"][std::string(algorithm_name(algo))] = sweep_best_json(o);
        if (o.best().ari > selected_ari) selected = algo, selected_ari = o.best().ari;
        c.log << "[cluster] " << pname << "/" << mode_name(m) << " " << algorithm_name(algo) << ": best param "
              << o.best().param << ", ARI " << round_half_even(o.best().ari, 4) << ", NMI "
              << round_half_even(o.best().nmi, 4) << "\n";
      }
      out["selected"] = std::string(algorithm_name(selected));
      const std::string csv_rel = Workdir::tagged("sweep", pname, m, ".csv");
      const std::string json_rel = Workdir::tagged("clusters", pname, m, ".json");
      write_text_file(c.wd.path(csv_rel), csv.str());
      write_json(c.wd.path(json_rel), out);
      rec.output(csv_rel);
      rec.output(json_rel);
    }
  rec.finish();
}

struct ClusterFile {
  std::vector<std::string> doc_ids;
  std::string selected;
  json algorithms;

  std::vector<int> labels(const std::string& algo) const {
    return algorithms.at(algo).at("labels").get<std::vector<int>>();
  }
};

inline ClusterFile load_clusters(const Workdir& wd, const std::string& provider, ReprMode m) {
  const json j = read_json(wd.need(Workdir::tagged("clusters", provider, m, ".json"), "cluster"));
  return {j.at("doc_ids").get<std::vector<std::string>>(), j.at("selected").get<std::string>(), j.at("algorithms")};
}

inline void stage_propagate(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "propagate", s);
  PropagateOptions opts;
  opts.threads = s.threads;
  for (const auto& pname : s.providers)
    for (ReprMode m : s.modes) {
      const ClusterFile cf = load_clusters(c.wd, pname, m);
      const EmbeddingMatrix src = load_embedding(c.wd, pname, m, "cluster");
      const EmbeddingMatrix dst = load_embedding(c.wd, pname, m, "class");
      if (cf.doc_ids != src.doc_ids)
        throw DataError("cluster labels and embeddings disagree on documents for " + pname + "/" +
                        std::string(mode_name(m)) + "; re-run `triplex cluster`");
      const auto labels = cf.labels(cf.selected);
      const auto map = propagate_labels(src, labels, dst, opts);
      const std::string rel = Workdir::tagged("propagated", pname, m, ".jsonl");
      std::vector<json> rows;
      for (const auto& a : map.assignments) rows.push_back(to_json(a));
      write_jsonl(c.wd.path(rel), rows);
      rec.output(rel);
      c.log << "[propagate] " << pname << "/" << mode_name(m) << ": " << rows.size() << " documents via "
            << cf.selected << "\n";
    }
  rec.finish();
}

inline std::map<std::string, int> load_propagated(const fs::path& p) {
  std::map<std::string, int> out;
  for (const auto& j : read_jsonl(p)) out[j.at("doc_id").get<std::string>()] = j.at("cluster").get<int>();
  return out;
}

struct LabelSpace {
  std::vector<std::string> classes;  // sorted
  std::vector<int> y;
};

inline LabelSpace encode_classes(const std::vector<std::string>& labels) {
  LabelSpace ls;
  ls.classes = labels;
  std::sort(ls.classes.begin(), ls.classes.end());
  ls.classes.erase(std::unique(ls.classes.begin(), ls.classes.end()), ls.classes.end());
  for (const auto& l : labels)
    ls.y.push_back(static_cast<int>(std::lower_bound(ls.classes.begin(), ls.classes.end(), l) - ls.classes.begin()));
  return ls;
}

inline void stage_train(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "train", s);
  const auto docs = load_documents(c.wd);
  SearchOptions opts;
  opts.threads = s.threads;
  for (const auto& pname : s.providers) {
    for (ReprMode m : s.modes) {
      const EmbeddingMatrix x = load_embedding(c.wd, pname, m, "class");
      const LabelSpace ls = encode_classes(labels_for(docs, x.doc_ids));
      const SearchResult sr = random_search(x.vectors, ls.y, ls.classes.size(), s.trials, s.seed, opts);

      std::vector<json> trials;
      for (std::size_t t = 0; t < sr.trials.size(); ++t) trials.push_back(to_json(sr.trials[t], t));
      std::vector<std::string> train_ids, val_ids;
      for (auto i : sr.split.train) train_ids.push_back(x.doc_ids[i]);
      for (auto i : sr.split.val) val_ids.push_back(x.doc_ids[i]);

      const std::string trials_rel = Workdir::tagged("trials", pname, m, ".jsonl");
      const std::string head_rel = Workdir::tagged("head", pname, m, ".json");
      const std::string train_rel = Workdir::tagged("train", pname, m, ".json");
      write_jsonl(c.wd.path(trials_rel), trials);
      write_json(c.wd.path(head_rel), head_to_json(sr.best_head, ls.classes));
      write_json(c.wd.path(train_rel), {{"provider", pname},
                                        {"mode", std::string(mode_name(m))},
                                        {"classes", ls.classes},
                                        {"train_ids", train_ids},
                                        {"val_ids", val_ids},
                                        {"best_trial", sr.best_index},
                                        {"best", to_json(sr.best(), sr.best_index)}});
      rec.output(trials_rel);
      rec.output(head_rel);
      rec.output(train_rel);
      c.log << "[train] " << pname << "/" << mode_name(m) << ": best trial " << sr.best_index << " (lr "
            << sr.best().config.learning_rate << ", batch " << sr.best().config.batch_size << ", epochs "
            << sr.best().config.epochs << "), val macro-F1 " << round_half_even(sr.best().val_macro_f1, 3) << "\n";
    }

    // Classification documents with their propagated cluster ids as
    // auxiliary columns; not a model input.
    const EmbeddingMatrix x = load_embedding(c.wd, pname, s.modes.front(), "class");
    std::map<std::string, std::map<std::string, int>> prop;
    for (ReprMode m : s.modes) {
      const fs::path p = c.wd.path(Workdir::tagged("propagated", pname, m, ".jsonl"));
      if (fs::exists(p)) prop[std::string(mode_name(m))] = load_propagated(p);
    }
    std::vector<json> rows;
    for (const auto& id : x.doc_ids) {
      json row = {{"doc_id", id}, {"label", docs.at(id).primary_label}, {"clusters", json::object()}};
      for (const auto& [mode, assign] : prop)
        if (auto it = assign.find(id); it != assign.end()) row["clusters"][mode] = it->second;
      rows.push_back(std::move(row));
    }
    const std::string rel = "class_dataset_" + provider_slug(pname) + ".jsonl";
    write_jsonl(c.wd.path(rel), rows);
    rec.output(rel);
  }
  rec.finish();
}

inline json metrics_json(const MetricReport& r) {
  json j = json::object();
  const auto vals = r.values();
  const auto& cols = MetricReport::columns();
  for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = number_or_null(vals[i]);
  return j;
}

inline MetricReport metrics_from_json(const json& j) {
  MetricReport r;
  r.accuracy = number_from(j.at("acc"));
  r.f1_macro = number_from(j.at("f1_m"));
  r.f1_weighted = number_from(j.at("f1_w"));
  r.precision_macro = number_from(j.at("p_m"));
  r.precision_weighted = number_from(j.at("p_w"));
  r.recall_macro = number_from(j.at("r_m"));
  r.recall_weighted = number_from(j.at("r_w"));
  r.kappa = number_from(j.at("kappa"));
  r.mcc = number_from(j.at("mcc"));
  r.top3_accuracy = number_from(j.at("top3_acc"));
  r.roc_auc_macro = number_from(j.at("roc"));
  return r;
}

inline void stage_evaluate(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "evaluate", s);
  const auto docs = load_documents(c.wd);
  for (const auto& pname : s.providers)
    for (ReprMode m : s.modes) {
      const fs::path head_path = c.wd.need(Workdir::tagged("head", pname, m, ".json"), "train");
      const json train = read_json(c.wd.need(Workdir::tagged("train", pname, m, ".json"), "train"));
      const LinearHead head = head_from_json(read_json(head_path));
      const auto classes = train.at("classes").get<std::vector<std::string>>();
      const EmbeddingMatrix x = load_embedding(c.wd, pname, m, "class");
      const auto val_ids = train.at("val_ids").get<std::vector<std::string>>();
      const EmbeddingMatrix xv = select_documents(x, val_ids);
      std::vector<int> truth;
      for (const auto& l : labels_for(docs, val_ids)) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), l);
        if (it == classes.end() || *it != l) throw DataError("validation label " + l + " unknown to the head");
        truth.push_back(static_cast<int>(it - classes.begin()));
      }
      const Matrix scores = predict_scores(head, xv.vectors);
      const MetricReport report = classification_report(truth, predict_labels(scores), scores);

      json out = {{"provider", pname},
                  {"mode", std::string(mode_name(m))},
                  {"n_val", val_ids.size()},
                  {"metrics", metrics_json(report)},
                  {"zero_division_classes", report.zero_division_classes},
                  {"propagated", json::object()}};
      // Agreement of propagated cluster ids with the true labels over the
      // whole classification set, per clustering representation.
      const auto all_labels = labels_for(docs, x.doc_ids);
      for (ReprMode cm : s.modes) {
        const fs::path p = c.wd.path(Workdir::tagged("propagated", pname, cm, ".jsonl"));
        if (!fs::exists(p)) continue;
        const auto assign = load_propagated(p);
        std::vector<int> pred;
        for (const auto& id : x.doc_ids) {
          const auto it = assign.find(id);
          if (it == assign.end()) throw DataError(p.string() + " lacks document " + id);
          pred.push_back(it->second);
        }
        out["propagated"][std::string(mode_name(cm))] = {{"ari", ari(all_labels, pred)}, {"nmi", nmi(all_labels, pred)}};
      }
      const std::string rel = Workdir::tagged("eval", pname, m, ".json");
      write_json(c.wd.path(rel), out);
      rec.output(rel);
      c.log << "[evaluate] " << pname << "/" << mode_name(m) << ": acc " << round_half_even(report.accuracy, 3)
            << ", f1_m " << round_half_even(report.f1_macro, 3) << "\n";
    }
  rec.finish();
}

inline const json& conventions() {
  static const json j = {
      {"distance", "euclidean on l2-normalized rows"},
      {"nmi_normalization", "arithmetic mean of entropies"},
      {"auc", "one-vs-rest, midrank ties, macro over classes present in truth"},
      {"macro_average", "classes present in truth or prediction"},
      {"gmm_covariance", "diagonal, reg 1e-6"},
      {"hdbscan_noise", "noise is one pseudo-cluster for ARI/NMI/silhouette; all-noise scores 0"},
      {"propagation", "1-nearest neighbour by cosine, ties to lower source index"},
      {"classifier", "softmax head on frozen embeddings, AdamW, early stopping on validation loss"},
      {"rounding", "half-even; 4 places clustering, 3 places classification"}};
  return j;
}

inline void stage_report(Context& c) {
  const auto& s = c.settings;
  StageRecord rec(c.wd, "report", s);
  const auto docs = load_documents(c.wd);
  std::vector<ClusteringOutcome> clustering;
  std::vector<ClassificationOutcome> classification;
  std::ostringstream composition;
  bool header = true;
  json providers = json::object();

  for (const auto& pname : s.providers) {
    for (ReprMode m : s.modes) {
      const ClusterFile cf = load_clusters(c.wd, pname, m);
      for (Algorithm a : {Algorithm::KMeans, Algorithm::Gmm, Algorithm::Hdbscan}) {
        const std::string name(algorithm_name(a));
        if (!cf.algorithms.contains(name)) continue;
        const json& b = cf.algorithms.at(name);
        clustering.push_back({m, pname, a, b.at("n_clusters").get<std::size_t>(), b.at("ari").get<double>(),
                              b.at("nmi").get<double>(), b.at("silhouette").get<double>()});
      }
      const auto truth = labels_for(docs, cf.doc_ids);
      const auto labels = cf.labels(cf.selected);
      write_composition_csv(composition, pname, m, parse_algorithm(cf.selected),
                            cluster_composition(std::span<const int>(labels), truth), header);
      header = false;
    }
    for (ReprMode km : s.modes) {
      const json ev = read_json(c.wd.need(Workdir::tagged("eval", pname, km, ".json"), "evaluate"));
      const MetricReport r = metrics_from_json(ev.at("metrics"));
      for (ReprMode cm : s.modes) {
        c.wd.need(Workdir::tagged("propagated", pname, cm, ".jsonl"), "propagate");
        classification.push_back({cm, km, pname, r});
      }
    }
    const auto emb = load_embedding(c.wd, pname, s.modes.front(), "cluster");
    providers[pname] = {{"dim", emb.dim()}};
  }

  write_table_files(c.wd.root(), "clustering_table", clustering_table(clustering));
  write_table_files(c.wd.root(), "classification_table", classification_table(classification));
  write_text_file(c.wd.path("cluster_composition.csv"), composition.str());

  json manifest = {{"software", {{"name", "triplex"}, {"version", TRIPLEX_VERSION}}},
                   {"seeds",
                    {{"global", s.seed},
                     {"split", s.seed},
                     {"hash_provider", s.seed},
                     {"sweep_base", s.seed},
                     {"search", s.seed}}},
                   {"config", settings_snapshot(s)},
                   {"providers", providers},
                   {"conventions", conventions()},
                   {"stages", json::object()},
                   {"outputs", json::object()}};
  for (const char* stage : {"ingest", "triples", "repr", "embed", "cluster", "propagate", "train", "evaluate"}) {
    const fs::path p = c.wd.path(std::string("stages/") + stage + ".json");
    if (!fs::exists(p)) continue;
    json st = read_json(p);
    if (st.contains("inputs")) manifest["inputs"][stage] = st["inputs"];
    manifest["stages"][stage] = std::move(st);
  }
  for (const char* rel : {"clustering_table.csv", "clustering_table.md", "classification_table.csv",
                          "classification_table.md", "cluster_composition.csv"}) {
    manifest["outputs"][rel] = sha256_file(c.wd.path(rel));
    rec.output(rel);
  }
  if (s.record_time) manifest["generated_at"] = StageRecord::now();
  write_json(c.wd.path("manifest.json"), manifest);
  rec.finish();
  c.log << "[report] wrote tables and manifest to " << c.wd.root().string() << "\n";
}

using StageFn = void (*)(Context&);

inline const std::vector<std::pair<std::string, StageFn>>& stages() {
  static const std::vector<std::pair<std::string, StageFn>> list = {
      {"ingest", stage_ingest},       {"triples", stage_triples}, {"repr", stage_repr},
      {"embed", stage_embed},         {"cluster", stage_cluster}, {"propagate", stage_propagate},
      {"train", stage_train},         {"evaluate", stage_evaluate}, {"report", stage_report}};
  return list;
}

// ---- command line -----------------------------------------------------------------

struct FlagSpec {
  const char* name;
  const char* help;
  bool is_flag = false;
};

inline const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs = {
      {"seed", "global seed (default 42)"},
      {"threads", "worker threads, 0 = all cores (default 0)"},
      {"workdir", "work directory for all stage files (default triplex-run)"},
      {"input", "corpus JSONL with id, abstract, categories"},
      {"conllu", "CoNLL-U file or directory of *.conllu parses"},
      {"mode", "representation modes: all or a list of abstract,triples,abstract_triples,hybrid"},
      {"provider", "embedding providers: hash and/or remote:<model>, comma-separated (default hash)"},
      {"dim", "hash provider dimension (default 384)"},
      {"embed-url", "embedding service endpoint (default http://localhost:8000; env TRIPLEX_EMBED_URL)"},
      {"batch-size", "texts per embedding request (default 64)"},
      {"preset", "dependency label preset: spacy or ud (default spacy)"},
      {"relation", "relation text: surface or lemma (default surface)"},
      {"include-graph", "append the serialized graph segment to hybrid texts", true},
      {"k-min", "smallest k for kmeans/gmm (default 3)"},
      {"k-max", "largest k for kmeans/gmm (default 12)"},
      {"sizes", "hdbscan min_cluster_size grid (default 5,10,15,25,50,100)"},
      {"restarts", "kmeans/gmm restarts per fit (default 10)"},
      {"n-cluster", "clustering subset size (default 5000)"},
      {"n-class", "classification subset size (default 10000)"},
      {"trials", "random-search trials (default 20)"},
      {"record-time", "record wall-clock timestamps in stage records and the manifest", true}};
  return specs;
}

// Resolves settings: defaults < config file < TRIPLEX_EMBED_URL < flags.
inline Settings resolve_settings(const std::string& config_path, const std::map<std::string, std::string>& flags,
                                 const char* env_url) {
  Settings s;
  if (!config_path.empty()) load_config_file(s, config_path);
  if (env_url && *env_url) s.embed_url = env_url;
  for (const auto& [k, v] : flags) apply_setting(s, k, v);
  check_settings(s);
  return s;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"triplex: triple-augmented document clustering and classification pipeline", "triplex"};
  app.set_version_flag("--version", TRIPLEX_VERSION);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file mirroring these flags")->group("Options");
  std::map<std::string, std::string> values;
  std::map<std::string, bool> toggles;
  std::vector<std::pair<const FlagSpec*, CLI::Option*>> opts;
  for (const auto& f : flag_specs()) {
    CLI::Option* o = f.is_flag ? app.add_flag(std::string("--") + f.name, toggles[f.name], f.help)
                               : app.add_option(std::string("--") + f.name, values[f.name], f.help);
    opts.emplace_back(&f, o->group("Options"));
  }

  std::string chosen;
  for (const auto& [name, fn] : stages())
    app.add_subcommand(name, "run the " + name + " stage")->callback([&chosen, n = name] { chosen = n; });
  app.add_subcommand("pipeline", "run every stage in order")->callback([&chosen] { chosen = "pipeline"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    std::map<std::string, std::string> given;
    for (const auto& [spec, opt] : opts) {
      if (opt->count() == 0) continue;
      given[spec->name] = spec->is_flag ? "true" : values[spec->name];
    }
    Context ctx{resolve_settings(config_path, given, std::getenv(kEmbedUrlEnv)), Workdir(""), err};
    ctx.wd = Workdir(ctx.settings.workdir);
    ctx.wd.ensure();
    for (const auto& [name, fn] : stages())
      if (chosen == "pipeline" || chosen == name) fn(ctx);
    return kOk;
  } catch (const ConfigError& e) {
    err << "triplex: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "triplex: data error: " << e.what() << "\n";
    return kData;
  } catch (const ProviderError& e) {
    err << "triplex: embedding provider error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "triplex: internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace triplex::cli
