#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfrefine/embedding.hpp"
#include "lfrefine/eval.hpp"
#include "lfrefine/io.hpp"
#include "lfrefine/labelmodel.hpp"
#include "lfrefine/parallel.hpp"
#include "lfrefine/refine.hpp"
#include "lfrefine/similarity.hpp"
#include "lfrefine/synth.hpp"
#include "lfrefine/version.hpp"

namespace lfrefine::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw RuntimeError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

// One machine-parsable line: lfrefine: status=... key=value ... message="..."
std::string record(const std::string& status, const std::string& kind, const std::string& message,
                   std::optional<int> exit_code = std::nullopt) {
  std::string line = "lfrefine: status=" + status;
  if (exit_code) line += " exit=" + std::to_string(*exit_code);
  line += " kind=" + kind + " message=\"" + escape(message) + "\"";
  return line;
}

// Global flags shared by every subcommand.
struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "lfrefine-out";
  std::string format = "json";
  bool quiet = false;
  std::size_t threads = 0;
};

// Per-run state: where outputs go and what the manifest records.
class Run {
 public:
  Run(std::string command, const Globals& globals, std::ostream& out, std::ostream& err, bool color)
      : command_(std::move(command)), globals_(globals), out_(out), err_(err), color_(color) {}

  const Globals& globals() const { return globals_; }
  fs::path out_dir() const { return globals_.out_dir; }

  // Reads an input file and records its content hash.
  std::string input(const std::string& role, const fs::path& path) {
    std::string content = io::read_file(path);
    inputs_[role] = {{"file", path.filename().string()}, {"sha256", sha256_hex(content)}};
    return content;
  }

  void param(const std::string& key, json value) { params_[key] = std::move(value); }

  // Writes an artifact under --out-dir. Measurement artifacts (wall-clock
  // timings) are listed without a hash since they differ run to run.
  void emit(const std::string& name, const std::string& content, bool deterministic = true) {
    io::write_file(out_dir() / name, content);
    outputs_[name] = deterministic ? json(sha256_hex(content)) : json(nullptr);
    if (!globals_.quiet) out_ << "wrote " << (out_dir() / name).string() << "\n";
  }

  void say(const std::string& line) {
    if (globals_.quiet) return;
    if (color_) {
      out_ << "\x1b[1m" << line << "\x1b[0m\n";
    } else {
      out_ << line << "\n";
    }
  }

  void warn(const std::string& kind, const std::string& message) {
    warnings_.push_back(message);
    if (!globals_.quiet) err_ << record("warning", kind, message) << "\n";
  }

  void write_manifest() {
    json outputs = json::array();
    for (const auto& [name, hash] : outputs_) outputs.push_back({{"file", name}, {"sha256", hash}});
    json inputs = json::array();
    for (const auto& [role, entry] : inputs_) {
      json item = entry;
      item["role"] = role;
      inputs.push_back(std::move(item));
    }
    json manifest = {{"tool", "lfrefine"},
                     {"version", kVersion},
                     {"command", command_},
                     {"parameters", params_},
                     {"inputs", std::move(inputs)},
                     {"outputs", std::move(outputs)},
                     {"warnings", warnings_}};
    const std::string text = manifest.dump(2) + "\n";
    io::write_file(out_dir() / (command_ + ".manifest.json"), text);
    if (!globals_.quiet) out_ << "wrote " << (out_dir() / (command_ + ".manifest.json")).string() << "\n";
  }

 private:
  std::string command_;
  Globals globals_;
  std::ostream& out_;
  std::ostream& err_;
  bool color_;
  std::map<std::string, json> inputs_;
  json params_ = json::object();
  std::map<std::string, json> outputs_;
  std::vector<std::string> warnings_;
};

struct BundlePaths {
  std::string votes, embeddings, gold, config;
};

void add_bundle_options(CLI::App* sub, BundlePaths& paths, bool need_embeddings, bool need_gold) {
  sub->add_option("--votes", paths.votes, "Votes CSV (header = LF names, cells in {-1,0,1})")->required();
  auto* emb = sub->add_option("--embeddings", paths.embeddings, "Embeddings JSON");
  if (need_embeddings) emb->required();
  auto* gold = sub->add_option("--gold", paths.gold, "Gold labels CSV (column y, blank = unlabeled)");
  if (need_gold) gold->required();
  sub->add_option("--config", paths.config, "Task config JSON");
}

TaskConfig load_config(Run& run, const std::string& path) {
  if (path.empty()) return TaskConfig{};
  auto cfg = io::config_from_json(run.input("config", path));
  cfg.validate();
  return cfg;
}

Bundle load_bundle(Run& run, const BundlePaths& paths) {
  const auto votes = io::votes_from_csv(run.input("votes", paths.votes));
  std::optional<GoldLabels> gold;
  if (!paths.gold.empty()) gold = io::gold_from_csv(run.input("gold", paths.gold));
  const auto cfg = load_config(run, paths.config);
  if (paths.embeddings.empty()) {
    // Placeholder embeddings keep the bundle shape for vote-only commands.
    std::vector<std::vector<double>> ones(votes.m(), std::vector<double>{1.0});
    return validate_bundle(votes, EmbeddingSet(votes.lf_names(), ones), gold, cfg);
  }
  const auto emb = io::embeddings_from_json(run.input("embeddings", paths.embeddings));
  return validate_bundle(votes, emb, gold, cfg);
}

ComponentMode component_mode_from(const std::string& name) {
  if (name == "average") return ComponentMode::average;
  if (name == "best") return ComponentMode::best;
  throw ValidationError("component mode must be average or best, got '" + name + "'");
}

std::string with_format(const std::string& stem, const std::string& format) {
  return stem + "." + (format == "md" ? std::string("md") : format);
}

void hyperparameter_warnings(Run& run, std::size_t m, std::size_t m_r, std::size_t m_e) {
  if (m > 15) return;
  if (static_cast<double>(m_r) > 0.3 * static_cast<double>(m)) {
    run.warn("hyperparameter", "m_r = " + std::to_string(m_r) + " exceeds 30% of m = " + std::to_string(m) +
                                   "; keep m_r small when there are few LFs");
  }
  const std::size_t limit = max_edges(m - m_r);
  if (static_cast<double>(m_e) > 0.25 * static_cast<double>(limit)) {
    run.warn("hyperparameter", "m_e = " + std::to_string(m_e) + " exceeds 25% of the " + std::to_string(limit) +
                                   " admissible edges; keep m_e small when there are few LFs");
  }
}

// ---- subcommands ---------------------------------------------------------

struct EmbedArgs {
  std::string lfs, provider, auth_env, pooling = "mean";
  std::size_t batch_size = 32, max_concurrent = 4;
  double timeout = 30.0;
};

void cmd_embed(Run& run, const EmbedArgs& a) {
  const auto lfs = io::prompted_lfs_from_json(run.input("lfs", a.lfs));
  auto cfg = ProviderConfig::from_spec(a.provider);
  if (!a.auth_env.empty()) cfg.auth_header_env_var = a.auth_env;
  cfg.pooling = pooling_from_string(a.pooling);
  cfg.batch_size = a.batch_size;
  cfg.max_concurrent_requests = a.max_concurrent;
  cfg.timeout_seconds = a.timeout;
  cfg.validate();
  if (cfg.kind == ProviderConfig::Kind::file) {
    run.input("provider_file", cfg.location);
    run.param("provider", "file");
  } else {
    run.param("provider", a.provider);
  }
  run.param("pooling", a.pooling);
  run.param("batch_size", a.batch_size);
  run.param("max_concurrent", a.max_concurrent);
  run.param("timeout", a.timeout);
  if (!a.auth_env.empty()) run.param("auth_env", a.auth_env);

  const auto emb = embed_prompts(lfs, cfg);
  run.emit("embeddings.json", io::embeddings_to_json(emb));
  run.say("embedded " + std::to_string(emb.m()) + " prompted LFs (dim " + std::to_string(emb.dim()) + ")");
}

struct SimilarityArgs {
  std::string embeddings, votes, gold, kind = "cosine", df_norm = "examples";
  bool compare = false;
};

void cmd_similarity(Run& run, const SimilarityArgs& a) {
  run.param("kind", a.kind);
  run.param("df_norm", a.df_norm);
  run.param("compare", a.compare);
  const DoubleFaultNorm norm = a.df_norm == "covotes" ? DoubleFaultNorm::covotes : DoubleFaultNorm::examples;

  std::optional<EmbeddingSet> emb;
  std::optional<VoteMatrix> votes;
  std::optional<GoldLabels> gold;
  if (!a.embeddings.empty()) emb = io::embeddings_from_json(run.input("embeddings", a.embeddings));
  if (!a.votes.empty()) votes = io::votes_from_csv(run.input("votes", a.votes));
  if (!a.gold.empty()) gold = io::gold_from_csv(run.input("gold", a.gold));
  if (emb && votes) validate_bundle(*votes, *emb, gold, TaskConfig{});

  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError(what);
  };
  std::optional<SimilarityMatrix> sim;
  std::vector<std::string> names;
  if (a.kind == "cosine") {
    need(emb.has_value(), "--kind cosine needs --embeddings");
    sim = cosine_matrix(*emb);
    names = emb->lf_names();
  } else if (a.kind == "agreement") {
    need(votes.has_value(), "--kind agreement needs --votes");
    sim = agreement_matrix(*votes);
    names = votes->lf_names();
  } else {
    need(votes && gold, "--kind double_fault needs --votes and --gold");
    sim = double_fault_matrix(*votes, *gold, norm);
    names = votes->lf_names();
  }
  run.emit("similarity.json", io::similarity_to_json(*sim));
  run.emit("similarity_heatmap.csv", io::similarity_to_heatmap_csv(*sim, names));

  if (a.compare) {
    need(emb && votes && gold, "--compare needs --embeddings, --votes and --gold");
    const auto cos = cosine_matrix(*emb);
    const auto df = double_fault_matrix(*votes, *gold, norm);
    const double rho = matrix_rank_correlation(cos, df);
    json doc = {{"a", "cosine"}, {"b", "double_fault"}, {"spearman", rho}};
    run.emit("rank_correlation.json", doc.dump(2) + "\n");
    run.emit("double_fault_heatmap.csv", io::similarity_to_heatmap_csv(df, names));
    run.say("Spearman(cosine, double fault) = " + io::format_double(rho));
  }
  run.say(a.kind + " similarity over " + std::to_string(sim->m()) + " LFs");
}

struct RefineArgs {
  std::string similarity, embeddings, votes, source = "cosine";
  std::optional<std::size_t> m_r, m_e;
  std::optional<double> removal_rate, edge_rate;
};

void cmd_refine(Run& run, const RefineArgs& a) {
  std::optional<SimilarityMatrix> sim;
  if (!a.similarity.empty()) {
    sim = io::similarity_from_json(run.input("similarity", a.similarity));
  } else if (a.source == "cosine") {
    if (a.embeddings.empty()) throw UsageError("refine needs --similarity or --embeddings");
    const auto emb = io::embeddings_from_json(run.input("embeddings", a.embeddings));
    if (!a.votes.empty()) validate_bundle(io::votes_from_csv(run.input("votes", a.votes)), emb, std::nullopt, TaskConfig{});
    sim = cosine_matrix(emb);
  } else if (a.source == "agreement") {
    if (a.votes.empty()) throw UsageError("--source agreement needs --votes or --similarity");
    sim = agreement_matrix(io::votes_from_csv(run.input("votes", a.votes)));
  } else {
    throw UsageError("--source must be cosine or agreement");
  }

  RefineParams params;
  if (a.removal_rate) {
    params.removal_rate = a.removal_rate;
    run.param("removal_rate", *a.removal_rate);
  } else {
    params.removal_count = a.m_r.value_or(0);
    run.param("m_r", *params.removal_count);
  }
  if (a.edge_rate) {
    params.edge_rate = a.edge_rate;
    run.param("edge_rate", *a.edge_rate);
  } else {
    params.edge_count = a.m_e.value_or(0);
    run.param("m_e", *params.edge_count);
  }
  run.param("source", to_string(sim->kind()));

  const std::size_t m = sim->m();
  const std::size_t m_r = params.resolve_removals(m);
  hyperparameter_warnings(run, m, m_r, params.resolve_edges(m - m_r));

  const auto structure = sim->kind() == SimilarityKind::agreement ? empirical_structure(*sim, params)
                                                                   : refine_pipeline(*sim, params);
  run.emit("structure.json", io::structure_to_json(structure));
  run.say("removed " + std::to_string(structure.removed.size()) + " of " + std::to_string(m) + " LFs; " +
          std::to_string(structure.survivors.size()) + " survivors, " + std::to_string(structure.edges.size()) +
          " edges");
}

struct LabelArgs {
  std::string votes, structure, config, mode = "average", method = "triplet";
  double eps = 1e-3;
};

void cmd_label(Run& run, const LabelArgs& a) {
  const auto votes = io::votes_from_csv(run.input("votes", a.votes));
  const auto cfg = load_config(run, a.config);
  const auto structure = a.structure.empty() ? DependencyStructure::independent(votes.m())
                                             : io::structure_from_json(run.input("structure", a.structure));
  structure.validate(votes.m());
  run.param("method", a.method);
  run.param("component_mode", a.mode);
  run.param("eps", a.eps);

  PosteriorLabels posteriors;
  if (a.method == "majority") {
    posteriors = majority_vote(votes, structure.survivors, cfg);
  } else if (a.method == "triplet") {
    FitOptions options;
    options.eps = a.eps;
    options.mode = component_mode_from(a.mode);
    const auto params = fit(votes, structure, cfg, options);
    run.emit("params.json", io::params_to_json(params, votes.lf_names()));
    posteriors = predict(params, votes, options.mode);
  } else {
    throw UsageError("--method must be triplet or majority");
  }
  run.emit("posteriors.csv", io::posteriors_to_csv(posteriors));
  const auto positives = std::count(posteriors.hard.begin(), posteriors.hard.end(), kPositive);
  run.say("labeled " + std::to_string(votes.n()) + " examples (" + std::to_string(positives) + " positive)");
}

struct EvalArgs {
  std::string posteriors, gold, config, votes, structure;
};

void cmd_eval(Run& run, const EvalArgs& a) {
  const auto posteriors = io::posteriors_from_csv(run.input("posteriors", a.posteriors));
  const auto gold = io::gold_from_csv(run.input("gold", a.gold));
  const auto cfg = load_config(run, a.config);
  Scores scores;
  if (!a.votes.empty()) {
    const auto votes = io::votes_from_csv(run.input("votes", a.votes));
    std::vector<std::size_t> columns;
    if (!a.structure.empty()) columns = io::structure_from_json(run.input("structure", a.structure)).survivors;
    scores = score(posteriors, gold, cfg, votes, columns);
  } else {
    scores = score(posteriors, gold, cfg);
  }
  const auto& fmt = run.globals().format;
  const std::string content = fmt == "csv" ? scores_to_csv(scores)
                              : fmt == "md" ? scores_to_markdown(scores, cfg)
                                            : scores_to_json(scores, cfg, "ingested");
  run.emit(with_format("scores", fmt), content);
  run.say(to_string(cfg.metric) + " = " + io::format_double(scores.metric(cfg.metric)) + " on " +
          std::to_string(scores.scored) + " labeled examples");
}

struct SweepArgs {
  BundlePaths bundle;
  std::vector<double> removal_rates{0.0, 0.1, 0.3, 0.5, 0.7};
  std::vector<double> edge_rates{0.0, 0.05, 0.25};
  std::string source = "cosine", mode = "average", provenance = "ingested";
  int timing_runs = 3;
  bool no_timing = false;
};

void cmd_sweep(Run& run, const SweepArgs& a) {
  const auto bundle = load_bundle(run, a.bundle);
  if (!bundle.gold) throw ValidationError("sweep needs --gold for scoring");
  SweepOptions options;
  options.removal_rates = a.removal_rates;
  options.edge_rates = a.edge_rates;
  options.source = structure_source_from_string(a.source);
  options.fit.mode = component_mode_from(a.mode);
  options.timing_runs = a.timing_runs;
  options.measure_runtime = !a.no_timing;
  options.provenance = a.provenance;
  if (options.source == StructureSource::cosine && a.bundle.embeddings.empty()) {
    throw UsageError("--source cosine needs --embeddings");
  }
  run.param("removal_rates", a.removal_rates);
  run.param("edge_rates", a.edge_rates);
  run.param("source", a.source);
  run.param("component_mode", a.mode);
  run.param("provenance", a.provenance);
  run.param("timing_runs", a.timing_runs);
  run.param("timing", !a.no_timing);

  const auto table = sweep(bundle, options);
  run.emit("sweep.csv", sweep_to_csv(table));
  run.emit("sweep.json", sweep_to_json(table));
  run.emit("sweep.md", sweep_to_markdown(table));
  if (options.measure_runtime) run.emit("sweep_timing.csv", sweep_timing_to_csv(table), false);
  const auto& best = table.best();
  run.say("best " + to_string(table.metric) + " " + io::format_double(best.metric) + " at removal rate " +
          io::format_double(best.removal_rate) + ", edge rate " + io::format_double(best.edge_rate) +
          " (reference " + io::format_double(table.rows.front().metric) + ")");
}

struct SynthArgs {
  std::string spec;
  std::size_t copies = 0;
  double sigma = 0.01, tau = 0.05;
};

void cmd_synth(Run& run, const SynthArgs& a, bool seed_given) {
  auto spec = io::synth_spec_from_json(run.input("spec", a.spec));
  if (seed_given) spec.seed = run.globals().seed;
  run.param("effective_seed", spec.seed);
  run.param("copies", a.copies);
  if (a.copies > 0) {
    run.param("sigma", a.sigma);
    run.param("tau", a.tau);
  }
  const auto data = generate(spec);
  TaskConfig cfg{"synthetic", {"negative", "positive"}, spec.class_prior, Metric::accuracy};

  VoteMatrix votes = data.votes;
  EmbeddingSet emb = data.embeddings;
  if (a.copies > 0) {
    auto red = inject_redundancy(data.embeddings, data.votes, a.copies, a.sigma, a.tau, spec.seed);
    json provenance = json::array();
    for (const auto& s : red.source_of) provenance.push_back(s ? json(*s) : json(nullptr));
    run.emit("provenance.json", json{{"source_of", provenance}}.dump(2) + "\n");
    votes = std::move(red.votes);
    emb = std::move(red.embeddings);
  }
  run.emit("votes.csv", io::votes_to_csv(votes));
  run.emit("gold.csv", io::gold_to_csv(data.gold));
  run.emit("embeddings.json", io::embeddings_to_json(emb));
  run.emit("config.json", io::config_to_json(cfg));
  run.emit("planted_structure.json", io::structure_to_json(data.planted));
  json planted = {{"accuracy_moments", data.accuracy_moments}, {"group_of", data.group_of}};
  run.emit("planted_accuracy.json", planted.dump(2) + "\n");
  run.say("generated " + std::to_string(votes.n()) + " examples x " + std::to_string(votes.m()) + " LFs (seed " +
          std::to_string(spec.seed) + ")");
}

struct SavingsArgs {
  std::uint64_t removed = 0, n = 0;
  std::vector<std::size_t> removed_lfs;
  std::vector<std::string> tokens;
};

void cmd_savings(Run& run, const SavingsArgs& a) {
  run.param("removed", a.removed);
  run.param("n", a.n);
  json doc = {{"removed", a.removed}, {"n", a.n}, {"prompts_saved", prompts_saved(a.removed, a.n)}};
  if (!a.tokens.empty() || !a.removed_lfs.empty()) {
    std::vector<std::optional<double>> tokens;
    for (const auto& t : a.tokens) {
      if (t.empty() || t == "-") {
        tokens.emplace_back();
        continue;
      }
      try {
        std::size_t used = 0;
        tokens.emplace_back(std::stod(t, &used));
        if (used != t.size()) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw ValidationError("token count '" + t + "' is not a number");
      }
    }
    run.param("removed_lfs", a.removed_lfs);
    run.param("tokens_per_lf", a.tokens);
    doc["tokens_saved"] = tokens_saved(a.removed_lfs, tokens, a.n);
  }
  const auto& fmt = run.globals().format;
  std::string content;
  if (fmt == "json") {
    content = doc.dump(2) + "\n";
  } else if (fmt == "csv") {
    content = "removed,n,prompts_saved,tokens_saved\n" + std::to_string(a.removed) + "," + std::to_string(a.n) + "," +
              std::to_string(prompts_saved(a.removed, a.n)) + "," +
              (doc.contains("tokens_saved") ? io::format_double(doc["tokens_saved"].get<double>()) : "") + "\n";
  } else {
    content = "| removed | n | prompts saved | tokens saved |\n|---|---|---|---|\n| " + std::to_string(a.removed) +
              " | " + std::to_string(a.n) + " | " + std::to_string(prompts_saved(a.removed, a.n)) + " | " +
              (doc.contains("tokens_saved") ? io::format_double(doc["tokens_saved"].get<double>()) : "-") + " |\n";
  }
  run.emit(with_format("savings", fmt), content);
  run.say("prompts saved: " + std::to_string(prompts_saved(a.removed, a.n)));
}

struct ToyArgs {
  BundlePaths bundle;
  std::string mode = "average";
};

void cmd_toy(Run& run, const ToyArgs& a) {
  const auto bundle = load_bundle(run, a.bundle);
  FitOptions options;
  options.mode = component_mode_from(a.mode);
  run.param("component_mode", a.mode);
  const auto report = remove_one_toy(bundle, options);
  const auto& fmt = run.globals().format;
  const std::string content = fmt == "csv" ? toy_to_csv(report) : fmt == "md" ? toy_to_markdown(report) : toy_to_json(report);
  run.emit(with_format("toy", fmt), content);
  if (report.low_confidence) {
    run.warn("low_confidence", "most similar pair has cosine " + io::format_double(report.top_similarity) +
                                   ", below " + io::format_double(kToyConfidenceThreshold));
  }
  for (const auto& row : report.rows) run.say(row.label + ": " + io::format_double(row.metric));
}

struct ReportArgs {
  std::string from;
};

// Collects the artifacts of earlier runs in a directory into one report.
void cmd_report(Run& run, const ReportArgs& a) {
  const fs::path dir = a.from.empty() ? run.out_dir() : fs::path(a.from);
  if (!fs::is_directory(dir)) throw ValidationError("report source '" + dir.string() + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.rfind("report.", 0) == 0 || name == "report.manifest.json") continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  run.param("from", dir.filename().string());

  json artifacts = json::array();
  std::string md = "# lfrefine report\n\n| artifact | sha256 |\n|---|---|\n";
  for (const auto& name : names) {
    const std::string content = io::read_file(dir / name);
    // Timings and manifests that list them are measurements, not results.
    const bool measured = name == "sweep_timing.csv";
    const std::string hash = measured ? "-" : sha256_hex(content);
    artifacts.push_back({{"file", name}, {"sha256", measured ? json(nullptr) : json(hash)}});
    md += "| " + name + " | " + hash + " |\n";
  }
  json sections = json::object();
  for (const char* section : {"scores.md", "sweep.md", "toy.md"}) {
    if (std::find(names.begin(), names.end(), section) == names.end()) continue;
    const std::string content = io::read_file(dir / section);
    md += "\n" + content;
    sections[section] = content;
  }
  for (const char* structured : {"structure.json", "rank_correlation.json", "savings.json"}) {
    if (std::find(names.begin(), names.end(), structured) == names.end()) continue;
    sections[structured] = json::parse(io::read_file(dir / structured));
    md += "\n## " + std::string(structured) + "\n\n```json\n" + sections[structured].dump(2) + "\n```\n";
  }
  const auto& fmt = run.globals().format;
  if (fmt == "json") {
    run.emit("report.json", json{{"artifacts", artifacts}, {"sections", sections}}.dump(2) + "\n");
  } else if (fmt == "csv") {
    std::string csv = "file,sha256\n";
    for (const auto& item : artifacts) {
      csv += item["file"].get<std::string>() + "," +
             (item["sha256"].is_null() ? std::string() : item["sha256"].get<std::string>()) + "\n";
    }
    run.emit("report.csv", csv);
  } else {
    run.emit("report.md", md);
  }
  run.say("report over " + std::to_string(names.size()) + " artifacts");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color) {
  CLI::App app{"lfrefine: structure refinement for prompted labeling functions", "lfrefine"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals globals;
  auto* seed_opt = app.add_option("--seed", globals.seed, "Seed for all randomness (default 0)");
  app.add_option("--out-dir", globals.out_dir, "Directory for outputs and the run manifest")->capture_default_str();
  app.add_option("--format", globals.format, "Report format")
      ->check(CLI::IsMember({"json", "csv", "md"}))
      ->capture_default_str();
  app.add_flag("--quiet", globals.quiet, "Suppress progress output and warnings");
  app.add_option("--threads", globals.threads, "Worker threads (0 = all cores); outputs do not depend on it");

  EmbedArgs embed;
  auto* s_embed = app.add_subcommand("embed", "Embed prompted LF templates via a file or HTTP provider");
  s_embed->add_option("--lfs", embed.lfs, "Prompted LF JSON")->required();
  s_embed->add_option("--provider", embed.provider, "file:<path> or http:<url>")->required();
  s_embed->add_option("--auth-env", embed.auth_env, "Environment variable holding the bearer token");
  s_embed->add_option("--pooling", embed.pooling, "mean|first|last")->capture_default_str();
  s_embed->add_option("--batch-size", embed.batch_size)->capture_default_str();
  s_embed->add_option("--max-concurrent", embed.max_concurrent)->capture_default_str();
  s_embed->add_option("--timeout", embed.timeout, "Per-request timeout in seconds")->capture_default_str();

  SimilarityArgs similarity;
  auto* s_sim = app.add_subcommand("similarity", "Compute an LF-by-LF similarity matrix");
  s_sim->add_option("--embeddings", similarity.embeddings);
  s_sim->add_option("--votes", similarity.votes);
  s_sim->add_option("--gold", similarity.gold);
  s_sim->add_option("--kind", similarity.kind)
      ->check(CLI::IsMember({"cosine", "agreement", "double_fault"}))
      ->capture_default_str();
  s_sim->add_option("--df-norm", similarity.df_norm)->check(CLI::IsMember({"examples", "covotes"}))->capture_default_str();
  s_sim->add_flag("--compare", similarity.compare, "Also report Spearman(cosine, double fault)");

  RefineArgs refine;
  auto* s_refine = app.add_subcommand("refine", "Remove redundant LFs (LaRe) and add dependency edges (CosGen)");
  s_refine->add_option("--similarity", refine.similarity, "Similarity JSON");
  s_refine->add_option("--embeddings", refine.embeddings, "Embeddings JSON (cosine source)");
  s_refine->add_option("--votes", refine.votes, "Votes CSV (agreement source, or alignment check)");
  s_refine->add_option("--source", refine.source)->check(CLI::IsMember({"cosine", "agreement"}))->capture_default_str();
  auto* o_mr = s_refine->add_option("--m-r", refine.m_r, "Number of LFs to remove");
  auto* o_rr = s_refine->add_option("--removal-rate", refine.removal_rate, "Fraction of LFs to remove");
  auto* o_me = s_refine->add_option("--m-e", refine.m_e, "Number of dependency edges");
  auto* o_er = s_refine->add_option("--edge-rate", refine.edge_rate, "Fraction of admissible edges");
  o_mr->excludes(o_rr);
  o_me->excludes(o_er);

  LabelArgs label;
  auto* s_label = app.add_subcommand("label", "Fit the label model and write posteriors");
  s_label->add_option("--votes", label.votes)->required();
  s_label->add_option("--structure", label.structure, "Structure JSON (default: all LFs, no edges)");
  s_label->add_option("--config", label.config);
  s_label->add_option("--method", label.method)->check(CLI::IsMember({"triplet", "majority"}))->capture_default_str();
  s_label->add_option("--component-mode", label.mode)->check(CLI::IsMember({"average", "best"}))->capture_default_str();
  s_label->add_option("--eps", label.eps)->capture_default_str();

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Score posteriors against gold labels");
  s_eval->add_option("--posteriors", eval.posteriors)->required();
  s_eval->add_option("--gold", eval.gold)->required();
  s_eval->add_option("--config", eval.config);
  s_eval->add_option("--votes", eval.votes, "Votes CSV for coverage");
  s_eval->add_option("--structure", eval.structure, "Restrict coverage to the structure's survivors");

  SweepArgs sweep_args;
  auto* s_sweep = app.add_subcommand("sweep", "Removal-rate x edge-rate sweep");
  add_bundle_options(s_sweep, sweep_args.bundle, false, true);
  s_sweep->add_option("--removal-rates", sweep_args.removal_rates)->delimiter(',')->capture_default_str();
  s_sweep->add_option("--edge-rates", sweep_args.edge_rates)->delimiter(',')->capture_default_str();
  s_sweep->add_option("--source", sweep_args.source)->check(CLI::IsMember({"cosine", "agreement"}))->capture_default_str();
  s_sweep->add_option("--component-mode", sweep_args.mode)->check(CLI::IsMember({"average", "best"}))->capture_default_str();
  s_sweep->add_option("--provenance", sweep_args.provenance, "Provenance column value")->capture_default_str();
  s_sweep->add_option("--timing-runs", sweep_args.timing_runs)->check(CLI::PositiveNumber)->capture_default_str();
  s_sweep->add_flag("--no-timing", sweep_args.no_timing, "Skip runtime measurement");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic bundle with planted structure");
  s_synth->add_option("--spec", synth.spec)->required();
  s_synth->add_option("--copies", synth.copies, "Near-duplicate copies per LF")->capture_default_str();
  s_synth->add_option("--sigma", synth.sigma, "Copy embedding noise")->capture_default_str();
  s_synth->add_option("--tau", synth.tau, "Copy vote flip probability")->capture_default_str();

  SavingsArgs savings;
  auto* s_savings = app.add_subcommand("savings", "Prompts and tokens saved by removing LFs");
  s_savings->add_option("--removed", savings.removed)->required();
  s_savings->add_option("--n", savings.n, "Number of examples")->required();
  s_savings->add_option("--removed-lfs", savings.removed_lfs, "Removed LF indices")->delimiter(',');
  s_savings->add_option("--tokens-per-lf", savings.tokens, "Average prompt tokens per LF ('-' = unknown)")
      ->delimiter(',');

  ToyArgs toy;
  auto* s_toy = app.add_subcommand("toy-remove-one", "Remove either member of the most similar pair");
  add_bundle_options(s_toy, toy.bundle, true, true);
  s_toy->add_option("--component-mode", toy.mode)->check(CLI::IsMember({"average", "best"}))->capture_default_str();

  ReportArgs report;
  auto* s_report = app.add_subcommand("report", "Summarize the artifacts in a run directory");
  s_report->add_option("--from", report.from, "Directory to summarize (default: --out-dir)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << record("error", "usage", e.what(), kUsage) << "\n" << app.help();
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  set_thread_count(globals.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : globals.threads);

  Run ctx(command, globals, out, err, color);
  ctx.param("seed", globals.seed);
  ctx.param("format", globals.format);
  try {
    if (command == "embed") cmd_embed(ctx, embed);
    else if (command == "similarity") cmd_similarity(ctx, similarity);
    else if (command == "refine") cmd_refine(ctx, refine);
    else if (command == "label") cmd_label(ctx, label);
    else if (command == "eval") cmd_eval(ctx, eval);
    else if (command == "sweep") cmd_sweep(ctx, sweep_args);
    else if (command == "synth") cmd_synth(ctx, synth, seed_opt->count() > 0);
    else if (command == "savings") cmd_savings(ctx, savings);
    else if (command == "toy-remove-one") cmd_toy(ctx, toy);
    else if (command == "report") cmd_report(ctx, report);
    ctx.write_manifest();
  } catch (const UsageError& e) {
    err << record("error", "usage", e.what(), kUsage) << "\n" << sub->help();
    return kUsage;
  } catch (const ValidationError& e) {
    err << record("error", "validation", e.what(), kValidation) << "\n";
    return kValidation;
  } catch (const ProviderError& e) {
    err << record("error", "provider", e.what(), kRuntime) << "\n";
    return kRuntime;
  } catch (const RuntimeError& e) {
    err << record("error", "runtime", e.what(), kRuntime) << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << record("error", "runtime", e.what(), kRuntime) << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace lfrefine::cli
