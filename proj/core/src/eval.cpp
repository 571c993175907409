#include "lfrefine/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "lfrefine/io.hpp"
#include "lfrefine/similarity.hpp"

namespace lfrefine {

namespace {

using nlohmann::json;
using io::format_double;

std::string fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

double coverage_of(const VoteMatrix& votes, const std::vector<std::size_t>& columns) {
  if (votes.n() == 0) return 0.0;
  std::size_t covered = 0;
  for (std::size_t x = 0; x < votes.n(); ++x) {
    const auto row = votes.row(x);
    const bool any = columns.empty()
                         ? std::any_of(row.begin(), row.end(), [](Vote v) { return v != kAbstain; })
                         : std::any_of(columns.begin(), columns.end(),
                                       [&](std::size_t c) { return row[c] != kAbstain; });
    covered += any;
  }
  return static_cast<double>(covered) / static_cast<double>(votes.n());
}

json scores_json(const Scores& s) {
  return {{"accuracy", s.accuracy},   {"precision", s.precision}, {"recall", s.recall},
          {"f1_positive", s.f1_positive}, {"coverage", s.coverage}, {"scored", s.scored}};
}

DependencyStructure drop_one(std::size_t m, std::size_t removed) {
  DependencyStructure s;
  s.removed = {removed};
  for (std::size_t i = 0; i < m; ++i) {
    if (i != removed) s.survivors.push_back(i);
  }
  return s;
}

}  // namespace

Scores score(const PosteriorLabels& predictions, const GoldLabels& gold, const TaskConfig& config) {
  config.validate();
  gold.validate();
  if (predictions.size() != gold.size()) {
    throw ValidationError("dimension mismatch (example axis): " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(gold.size()) + " gold labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0, scored = 0;
  for (std::size_t x = 0; x < gold.size(); ++x) {
    if (!gold.present[x]) continue;
    ++scored;
    const Vote y = gold.labels[x];
    const Vote yhat = predictions.hard[x];
    correct += y == yhat;
    tp += y == kPositive && yhat == kPositive;
    fp += y == kNegative && yhat == kPositive;
    fn += y == kPositive && yhat == kNegative;
  }
  if (scored == 0) throw ValidationError("no gold labels to score against");
  Scores s;
  s.scored = scored;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1_positive = s.precision + s.recall > 0.0
                      ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                      : 0.0;
  return s;
}

Scores score(const PosteriorLabels& predictions, const GoldLabels& gold, const TaskConfig& config,
             const VoteMatrix& votes, const std::vector<std::size_t>& columns) {
  Scores s = score(predictions, gold, config);
  s.coverage = coverage_of(votes, columns);
  return s;
}

std::uint64_t prompts_saved(std::uint64_t removed, std::uint64_t n) { return removed * n; }

double tokens_saved(const std::vector<std::size_t>& removed,
                    const std::vector<std::optional<double>>& avg_tokens_per_lf, std::uint64_t n) {
  double total = 0.0;
  for (auto i : removed) {
    if (i >= avg_tokens_per_lf.size() || !avg_tokens_per_lf[i]) {
      throw ValidationError("missing token count for removed LF " + std::to_string(i));
    }
    total += *avg_tokens_per_lf[i];
  }
  return static_cast<double>(n) * total;
}

StructureSource structure_source_from_string(const std::string& name) {
  if (name == "cosine") return StructureSource::cosine;
  if (name == "agreement") return StructureSource::agreement;
  throw ValidationError("structure source must be cosine or agreement, got '" + name + "'");
}

std::string to_string(StructureSource source) {
  return source == StructureSource::cosine ? "cosine" : "agreement";
}

const SweepRow& SweepTable::best() const {
  if (rows.empty()) throw RuntimeError("empty sweep table");
  // First row wins ties, so the reference row is best unless strictly beaten.
  return *std::max_element(rows.begin(), rows.end(),
                           [](const SweepRow& a, const SweepRow& b) { return a.metric < b.metric; });
}

DependencyStructure structure_for(const Bundle& bundle, double removal_rate, double edge_rate,
                                  StructureSource source) {
  const std::size_t m = bundle.votes.m();
  const std::size_t m_r = resolve_removal_count(removal_rate, m);
  if (!(edge_rate >= 0.0 && edge_rate <= 1.0)) throw ValidationError("edge rate must lie in [0, 1]");
  const std::size_t limit = max_edges(m - std::min(m, m_r));
  std::size_t m_e = RefineParams::rates(0.0, edge_rate).resolve_edges(m - std::min(m, m_r));
  if (edge_rate > 0.0 && m_e == 0 && limit > 0) m_e = 1;
  const auto params = RefineParams::counts(m_r, m_e);
  if (source == StructureSource::cosine) return refine_pipeline(cosine_matrix(bundle.embeddings), params);
  return empirical_structure(agreement_matrix(bundle.votes), params);
}

SweepRow run_grid_point(const Bundle& bundle, double removal_rate, double edge_rate,
                        const SweepOptions& options) {
  if (!bundle.gold) throw ValidationError("sweep needs gold labels for scoring");
  const auto structure = structure_for(bundle, removal_rate, edge_rate, options.source);
  const auto params = fit(bundle.votes, structure, bundle.config, options.fit);
  const auto posteriors = predict(params, bundle.votes, options.fit.mode);

  SweepRow row;
  row.removal_rate = removal_rate;
  row.edge_rate = edge_rate;
  row.removed = structure.removed.size();
  row.edges = structure.edges.size();
  row.scores = score(posteriors, *bundle.gold, bundle.config, bundle.votes, structure.survivors);
  row.metric = row.scores.metric(bundle.config.metric);
  row.prompts_saved = prompts_saved(row.removed, bundle.votes.n());
  if (options.measure_runtime) {
    row.runtime_seconds = fit_timer(bundle.votes, structure, bundle.config, options.timing_runs);
  }
  return row;
}

SweepTable sweep(const Bundle& bundle, const SweepOptions& options) {
  SweepTable table;
  table.task_name = bundle.config.task_name;
  table.metric = bundle.config.metric;
  table.provenance = options.provenance;

  std::vector<std::pair<double, double>> grid{{0.0, 0.0}};
  for (double rate : options.removal_rates) {
    for (double edge : options.edge_rates) {
      if (std::find(grid.begin(), grid.end(), std::pair{rate, edge}) == grid.end()) {
        grid.emplace_back(rate, edge);
      }
    }
  }
  for (const auto& [rate, edge] : grid) {
    table.rows.push_back(run_grid_point(bundle, rate, edge, options));
  }
  return table;
}

ToyReport remove_one_toy(const Bundle& bundle, const FitOptions& options) {
  if (!bundle.gold) throw ValidationError("remove-one experiment needs gold labels");
  const std::size_t m = bundle.votes.m();
  if (m < 4) {
    throw ValidationError("remove-one experiment needs m >= 4 so each run keeps 3 LFs, got m = " +
                          std::to_string(m));
  }
  const auto cosine = cosine_matrix(bundle.embeddings);
  // LaRe's first step picks exactly the top pair.
  const auto first = lare(cosine, 1);
  ToyReport report;
  report.task_name = bundle.config.task_name;
  report.metric = bundle.config.metric;
  std::size_t top_i = 0;
  const std::size_t top_j = first.removed.front();
  double top = -2.0;
  for (std::size_t i = 0; i < top_j; ++i) {
    if (cosine(i, top_j) > top) {
      top = cosine(i, top_j);
      top_i = i;
    }
  }
  report.top_pair = {top_i, top_j};
  report.top_similarity = top;
  report.low_confidence = top < kToyConfidenceThreshold;

  auto run = [&](const std::string& label, const DependencyStructure& structure,
                 std::optional<std::size_t> removed) {
    const auto params = fit(bundle.votes, structure, bundle.config, options);
    const auto posteriors = predict(params, bundle.votes, options.mode);
    ToyRow row{label, removed, score(posteriors, *bundle.gold, bundle.config, bundle.votes, structure.survivors), 0.0};
    row.metric = row.scores.metric(bundle.config.metric);
    report.rows.push_back(std::move(row));
  };
  run("baseline", DependencyStructure::independent(m), std::nullopt);
  run("remove " + bundle.votes.lf_names()[top_i], drop_one(m, top_i), top_i);
  run("remove " + bundle.votes.lf_names()[top_j], drop_one(m, top_j), top_j);
  return report;
}

std::string sweep_to_csv(const SweepTable& table) {
  std::string out =
      "provenance,removal_rate,edge_rate,removed,edges,metric,accuracy,precision,recall,f1_positive,"
      "coverage,prompts_saved\n";
  for (const auto& r : table.rows) {
    out += table.provenance + ',' + format_double(r.removal_rate) + ',' + format_double(r.edge_rate) + ',' +
           std::to_string(r.removed) + ',' + std::to_string(r.edges) + ',' + format_double(r.metric) + ',' +
           format_double(r.scores.accuracy) + ',' + format_double(r.scores.precision) + ',' +
           format_double(r.scores.recall) + ',' + format_double(r.scores.f1_positive) + ',' +
           format_double(r.scores.coverage) + ',' + std::to_string(r.prompts_saved) + '\n';
  }
  return out;
}

std::string sweep_timing_to_csv(const SweepTable& table) {
  std::string out = "removal_rate,edge_rate,removed,edges,runtime_seconds\n";
  for (const auto& r : table.rows) {
    out += format_double(r.removal_rate) + ',' + format_double(r.edge_rate) + ',' + std::to_string(r.removed) +
           ',' + std::to_string(r.edges) + ',' + format_double(r.runtime_seconds) + '\n';
  }
  return out;
}

std::string sweep_to_json(const SweepTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"removal_rate", r.removal_rate},
                    {"edge_rate", r.edge_rate},
                    {"removed", r.removed},
                    {"edges", r.edges},
                    {"metric", r.metric},
                    {"scores", scores_json(r.scores)},
                    {"prompts_saved", r.prompts_saved}});
  }
  const auto& best = table.best();
  json doc = {{"task_name", table.task_name},
              {"metric", to_string(table.metric)},
              {"provenance", table.provenance},
              {"rows", std::move(rows)},
              {"best", {{"removal_rate", best.removal_rate}, {"edge_rate", best.edge_rate}, {"metric", best.metric}}}};
  return doc.dump(2) + "\n";
}

std::string sweep_to_markdown(const SweepTable& table) {
  std::string out = "# Sweep: " + table.task_name + "\n\n";
  out += "Metric: " + to_string(table.metric) + " (data: " + table.provenance + ")\n\n";
  out += "| removal rate | edge rate | LFs removed | edges | " + to_string(table.metric) +
         " | coverage | prompts saved |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    out += "| " + fixed(r.removal_rate, 2) + " | " + fixed(r.edge_rate, 2) + " | " + std::to_string(r.removed) +
           " | " + std::to_string(r.edges) + " | " + fixed(r.metric) + " | " + fixed(r.scores.coverage) + " | " +
           std::to_string(r.prompts_saved) + " |\n";
  }
  const auto& best = table.best();
  out += "\nBest grid point: removal rate " + fixed(best.removal_rate, 2) + ", edge rate " +
         fixed(best.edge_rate, 2) + " (" + fixed(best.metric) + " vs reference " + fixed(table.rows.front().metric) +
         ")\n";
  return out;
}

std::string scores_to_json(const Scores& scores, const TaskConfig& config, const std::string& provenance) {
  json doc = {{"task_name", config.task_name},
              {"metric", to_string(config.metric)},
              {"value", scores.metric(config.metric)},
              {"provenance", provenance},
              {"scores", scores_json(scores)}};
  return doc.dump(2) + "\n";
}

std::string scores_to_markdown(const Scores& scores, const TaskConfig& config) {
  std::string out = "# Evaluation: " + config.task_name + "\n\n";
  out += "| metric | value |\n|---|---|\n";
  out += "| accuracy | " + fixed(scores.accuracy) + " |\n";
  out += "| precision | " + fixed(scores.precision) + " |\n";
  out += "| recall | " + fixed(scores.recall) + " |\n";
  out += "| f1 (positive) | " + fixed(scores.f1_positive) + " |\n";
  out += "| coverage | " + fixed(scores.coverage) + " |\n";
  out += "| scored examples | " + std::to_string(scores.scored) + " |\n";
  out += "\nPrimary metric (" + to_string(config.metric) + "): " + fixed(scores.metric(config.metric)) + "\n";
  return out;
}

std::string scores_to_csv(const Scores& scores) {
  return "accuracy,precision,recall,f1_positive,coverage,scored\n" + format_double(scores.accuracy) + ',' +
         format_double(scores.precision) + ',' + format_double(scores.recall) + ',' +
         format_double(scores.f1_positive) + ',' + format_double(scores.coverage) + ',' +
         std::to_string(scores.scored) + '\n';
}

std::string toy_to_json(const ToyReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"run", r.label},
                    {"removed_lf", r.removed_lf ? json(*r.removed_lf) : json(nullptr)},
                    {"metric", r.metric},
                    {"scores", scores_json(r.scores)}});
  }
  json doc = {{"task_name", report.task_name},
              {"metric", to_string(report.metric)},
              {"top_pair", {report.top_pair.first, report.top_pair.second}},
              {"top_similarity", report.top_similarity},
              {"low_confidence", report.low_confidence},
              {"rows", std::move(rows)}};
  return doc.dump(2) + "\n";
}

std::string toy_to_markdown(const ToyReport& report) {
  std::string out = "# Remove-one experiment: " + report.task_name + "\n\n";
  out += "Most similar pair: (" + std::to_string(report.top_pair.first) + ", " +
         std::to_string(report.top_pair.second) + "), cosine " + fixed(report.top_similarity) + "\n";
  if (report.low_confidence) {
    out += "\n**Low confidence:** the most similar pair is below cosine " + fixed(kToyConfidenceThreshold, 2) +
           ", so no LF pair looks redundant.\n";
  }
  out += "\n| run | " + to_string(report.metric) + " | accuracy | f1 (positive) |\n|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    out += "| " + r.label + " | " + fixed(r.metric) + " | " + fixed(r.scores.accuracy) + " | " +
           fixed(r.scores.f1_positive) + " |\n";
  }
  return out;
}

std::string toy_to_csv(const ToyReport& report) {
  std::string out = "run,removed_lf,metric,accuracy,f1_positive,low_confidence\n";
  for (const auto& r : report.rows) {
    out += r.label + ',' + (r.removed_lf ? std::to_string(*r.removed_lf) : std::string()) + ',' +
           format_double(r.metric) + ',' + format_double(r.scores.accuracy) + ',' +
           format_double(r.scores.f1_positive) + ',' + (report.low_confidence ? "true" : "false") + '\n';
  }
  return out;
}

}  // namespace lfrefine
