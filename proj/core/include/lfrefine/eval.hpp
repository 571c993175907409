#pragma once

// Metrics, prompt/token savings, removal-rate sweeps and the remove-one toy
// experiment.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfrefine/labelmodel.hpp"
#include "lfrefine/refine.hpp"
#include "lfrefine/types.hpp"

namespace lfrefine {

struct Scores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1_positive = 0.0;
  double coverage = 0.0;  // fraction of examples with at least one vote
  std::size_t scored = 0;  // examples with a gold label

  double metric(Metric metric) const {
    return metric == Metric::accuracy ? accuracy : f1_positive;
  }
};

// Scores predictions on the gold-labeled examples. Coverage is computed over
// `columns` of `votes` (all columns when empty).
Scores score(const PosteriorLabels& predictions, const GoldLabels& gold, const TaskConfig& config,
             const VoteMatrix& votes, const std::vector<std::size_t>& columns = {});

// Scores without vote coverage information (coverage left at 0).
Scores score(const PosteriorLabels& predictions, const GoldLabels& gold, const TaskConfig& config);

// Prompts no longer issued: one per removed LF per example.
std::uint64_t prompts_saved(std::uint64_t removed, std::uint64_t n);

// n * sum of average prompt tokens over removed LFs.
double tokens_saved(const std::vector<std::size_t>& removed,
                    const std::vector<std::optional<double>>& avg_tokens_per_lf, std::uint64_t n);

enum class StructureSource { cosine, agreement };

StructureSource structure_source_from_string(const std::string& name);
std::string to_string(StructureSource source);

struct SweepOptions {
  std::vector<double> removal_rates{0.0, 0.1, 0.3, 0.5, 0.7};
  // Edge counts are given as fractions of max_edges(survivors); a nonzero
  // fraction resolving to 0 edges is raised to 1 when any edge fits.
  std::vector<double> edge_rates{0.0, 0.05, 0.25};
  StructureSource source = StructureSource::cosine;
  FitOptions fit;
  int timing_runs = 3;
  bool measure_runtime = true;
  std::string provenance = "ingested";
};

struct SweepRow {
  double removal_rate = 0.0;
  double edge_rate = 0.0;
  std::size_t removed = 0;
  std::size_t edges = 0;
  Scores scores;
  double metric = 0.0;
  double runtime_seconds = 0.0;  // 0 when timing is disabled
  std::uint64_t prompts_saved = 0;
};

struct SweepTable {
  std::string task_name;
  Metric metric = Metric::accuracy;
  std::string provenance;
  std::vector<SweepRow> rows;  // row 0 is always the (0, 0) reference

  const SweepRow& best() const;
};

// Structure for one grid point; shared by sweep() and single-point reruns.
DependencyStructure structure_for(const Bundle& bundle, double removal_rate, double edge_rate,
                                  StructureSource source);

SweepRow run_grid_point(const Bundle& bundle, double removal_rate, double edge_rate,
                        const SweepOptions& options);

SweepTable sweep(const Bundle& bundle, const SweepOptions& options = {});

struct ToyRow {
  std::string label;
  std::optional<std::size_t> removed_lf;
  Scores scores;
  double metric = 0.0;
};

struct ToyReport {
  std::string task_name;
  Metric metric = Metric::accuracy;
  Edge top_pair;
  double top_similarity = 0.0;
  bool low_confidence = false;  // top pair similarity below the threshold
  std::vector<ToyRow> rows;     // baseline, remove i, remove j
};

inline constexpr double kToyConfidenceThreshold = 0.5;

ToyReport remove_one_toy(const Bundle& bundle, const FitOptions& options = {});

// Report emitters.
std::string sweep_to_csv(const SweepTable& table);
std::string sweep_timing_to_csv(const SweepTable& table);
std::string sweep_to_json(const SweepTable& table);
std::string sweep_to_markdown(const SweepTable& table);

std::string scores_to_json(const Scores& scores, const TaskConfig& config,
                           const std::string& provenance);
std::string scores_to_markdown(const Scores& scores, const TaskConfig& config);
std::string scores_to_csv(const Scores& scores);

std::string toy_to_json(const ToyReport& report);
std::string toy_to_markdown(const ToyReport& report);
std::string toy_to_csv(const ToyReport& report);

}  // namespace lfrefine
