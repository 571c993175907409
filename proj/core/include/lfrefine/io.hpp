#pragma once

// File formats. Every reader validates and throws ValidationError on malformed
// input; missing files raise RuntimeError. Doubles are written in shortest
// round-trip form so that read(write(x)) == x.

#include <filesystem>
#include <string>
#include <string_view>

#include "lfrefine/embedding.hpp"
#include "lfrefine/labelmodel.hpp"
#include "lfrefine/synth.hpp"
#include "lfrefine/types.hpp"

namespace lfrefine::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Votes: header row of LF names, one row per example, cells in {-1,0,1}.
VoteMatrix votes_from_csv(std::string_view text);
std::string votes_to_csv(const VoteMatrix& votes);

// Gold: single column `y`; a blank cell marks an unlabeled example.
GoldLabels gold_from_csv(std::string_view text);
std::string gold_to_csv(const GoldLabels& gold);

// {"lf_names": [...], "dim": d, "vectors": [[...], ...]}
EmbeddingSet embeddings_from_json(std::string_view text);
std::string embeddings_to_json(const EmbeddingSet& embeddings);

// {"task_name", "label_names": [neg, pos], "class_prior", "metric"}
TaskConfig config_from_json(std::string_view text);
std::string config_to_json(const TaskConfig& config);

// {"kind": ..., "m": ..., "rows": [[...]]}
SimilarityMatrix similarity_from_json(std::string_view text);
std::string similarity_to_json(const SimilarityMatrix& matrix);
// Heatmap-ready long format: row,col,row_name,col_name,value
std::string similarity_to_heatmap_csv(const SimilarityMatrix& matrix,
                                      const std::vector<std::string>& lf_names);

// {"removed": [...], "survivors": [...], "anchors": [i,j] | null, "edges": [[i,j], ...]}
DependencyStructure structure_from_json(std::string_view text);
std::string structure_to_json(const DependencyStructure& structure);

std::string params_to_json(const LabelModelParams& params, const std::vector<std::string>& lf_names);
LabelModelParams params_from_json(std::string_view text);

// p_pos,hard_label,score
std::string posteriors_to_csv(const PosteriorLabels& posteriors);
PosteriorLabels posteriors_from_csv(std::string_view text);

SynthSpec synth_spec_from_json(std::string_view text);
std::string synth_spec_to_json(const SynthSpec& spec);

std::vector<PromptedLF> prompted_lfs_from_json(std::string_view text);

// Convenience loaders over read_file.
VoteMatrix load_votes(const std::filesystem::path& path);
GoldLabels load_gold(const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
TaskConfig load_config(const std::filesystem::path& path);
SimilarityMatrix load_similarity(const std::filesystem::path& path);
DependencyStructure load_structure(const std::filesystem::path& path);

}  // namespace lfrefine::io
