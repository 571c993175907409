#include "lfrefine/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lfrefine::io {

namespace {

using nlohmann::json;

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

template <typename T>
T field(const json& node, const char* key, const char* what) {
  if (!node.is_object() || !node.contains(key)) {
    throw ValidationError(std::string(what) + " JSON is missing \"" + key + "\"");
  }
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " field \"" + key + "\": " + e.what());
  }
}

// Blank rows are data in the gold format, so trimming is optional: with
// trim_blank false only the piece after a final newline is dropped.
std::vector<std::string> split_lines(std::string_view text, bool trim_blank = true) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  if (trim_blank) {
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  } else if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') {
    lines.pop_back();
  }
  return lines;
}

std::string unquote(std::string cell) {
  if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
    cell = cell.substr(1, cell.size() - 2);
    std::string out;
    for (std::size_t k = 0; k < cell.size(); ++k) {
      out.push_back(cell[k]);
      if (cell[k] == '"' && k + 1 < cell.size() && cell[k + 1] == '"') ++k;
    }
    return out;
  }
  return cell;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      cells.push_back(unquote(std::move(cell)));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(unquote(std::move(cell)));
  return cells;
}

std::string quote_if_needed(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

int parse_int(const std::string& cell, std::size_t line) {
  int value = 0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("line " + std::to_string(line) + ": '" + cell + "' is not an integer");
  }
  return value;
}

double parse_double(const std::string& cell, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ValidationError("line " + std::to_string(line) + ": '" + cell + "' is not a number");
  }
  return value;
}

json edge_json(const Edge& e) { return json::array({e.first, e.second}); }

Edge edge_from(const json& node) {
  if (!node.is_array() || node.size() != 2) throw ValidationError("edge must be a pair [i, j]");
  auto a = node[0].get<std::size_t>();
  auto b = node[1].get<std::size_t>();
  if (a > b) std::swap(a, b);
  return {a, b};
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw RuntimeError("cannot format double");
  return std::string(buf, ptr);
}

VoteMatrix votes_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ValidationError("votes CSV is empty");
  auto names = split_cells(lines[0]);
  const std::size_t m = names.size();
  std::vector<Vote> cells;
  cells.reserve((lines.size() - 1) * m);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto row = split_cells(lines[l]);
    if (row.size() != m) {
      throw ValidationError("dimension mismatch: votes CSV line " + std::to_string(l + 1) + " has " +
                            std::to_string(row.size()) + " cells, header has " + std::to_string(m));
    }
    for (const auto& cell : row) {
      const int v = parse_int(cell, l + 1);
      if (v < -1 || v > 1) {
        throw ValidationError("out-of-range vote " + cell + " on line " + std::to_string(l + 1));
      }
      cells.push_back(static_cast<Vote>(v));
    }
  }
  return VoteMatrix(lines.size() - 1, std::move(names), std::move(cells));
}

std::string votes_to_csv(const VoteMatrix& votes) {
  std::string out;
  for (std::size_t i = 0; i < votes.m(); ++i) {
    if (i) out += ',';
    out += quote_if_needed(votes.lf_names()[i]);
  }
  out += '\n';
  for (std::size_t x = 0; x < votes.n(); ++x) {
    for (std::size_t i = 0; i < votes.m(); ++i) {
      if (i) out += ',';
      out += std::to_string(int{votes(x, i)});
    }
    out += '\n';
  }
  return out;
}

GoldLabels gold_from_csv(std::string_view text) {
  const auto lines = split_lines(text, false);
  if (lines.empty() || split_cells(lines[0]) != std::vector<std::string>{"y"}) {
    throw ValidationError("gold CSV must have a single header column 'y'");
  }
  GoldLabels gold;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto& cell = lines[l];
    if (cell.empty()) {
      gold.labels.push_back(0);
      gold.present.push_back(false);
      continue;
    }
    const int v = parse_int(cell, l + 1);
    if (v != -1 && v != 1) throw ValidationError("gold label on line " + std::to_string(l + 1) + " must be -1 or 1");
    gold.labels.push_back(static_cast<Vote>(v));
    gold.present.push_back(true);
  }
  return gold;
}

std::string gold_to_csv(const GoldLabels& gold) {
  std::string out = "y\n";
  for (std::size_t x = 0; x < gold.size(); ++x) {
    if (gold.present[x]) out += std::to_string(int{gold.labels[x]});
    out += '\n';
  }
  return out;
}

EmbeddingSet embeddings_from_json(std::string_view text) {
  const json doc = parse_json(text, "embeddings");
  auto names = field<std::vector<std::string>>(doc, "lf_names", "embeddings");
  auto vectors = field<std::vector<std::vector<double>>>(doc, "vectors", "embeddings");
  const auto dim = field<std::size_t>(doc, "dim", "embeddings");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw ValidationError("dimension mismatch: vector " + std::to_string(i) + " has " +
                            std::to_string(vectors[i].size()) + " entries, dim is " + std::to_string(dim));
    }
  }
  return EmbeddingSet(std::move(names), std::move(vectors));
}

std::string embeddings_to_json(const EmbeddingSet& embeddings) {
  json doc;
  doc["lf_names"] = embeddings.lf_names();
  doc["dim"] = embeddings.dim();
  doc["vectors"] = embeddings.vectors();
  return doc.dump(1) + "\n";
}

TaskConfig config_from_json(std::string_view text) {
  const json doc = parse_json(text, "task config");
  TaskConfig config;
  config.task_name = field<std::string>(doc, "task_name", "task config");
  const auto labels = field<std::vector<std::string>>(doc, "label_names", "task config");
  if (labels.size() != 2) throw ValidationError("label_names must hold exactly two names");
  config.label_names = {labels[0], labels[1]};
  config.class_prior = doc.contains("class_prior") ? field<double>(doc, "class_prior", "task config") : 0.5;
  config.metric = metric_from_string(doc.contains("metric") ? field<std::string>(doc, "metric", "task config")
                                                            : "accuracy");
  config.validate();
  return config;
}

std::string config_to_json(const TaskConfig& config) {
  json doc;
  doc["task_name"] = config.task_name;
  doc["label_names"] = {config.label_names.first, config.label_names.second};
  doc["class_prior"] = config.class_prior;
  doc["metric"] = to_string(config.metric);
  return doc.dump(2) + "\n";
}

SimilarityMatrix similarity_from_json(std::string_view text) {
  const json doc = parse_json(text, "similarity");
  const auto kind = similarity_kind_from_string(field<std::string>(doc, "kind", "similarity"));
  const auto m = field<std::size_t>(doc, "m", "similarity");
  const auto rows = field<std::vector<std::vector<double>>>(doc, "rows", "similarity");
  if (rows.size() != m) throw ValidationError("similarity JSON: rows do not match m");
  Matrix values(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i].size() != m) throw ValidationError("similarity JSON: row " + std::to_string(i) + " is not length m");
    for (std::size_t j = 0; j < m; ++j) values(i, j) = rows[i][j];
  }
  return SimilarityMatrix(kind, std::move(values));
}

std::string similarity_to_json(const SimilarityMatrix& matrix) {
  json rows = json::array();
  for (std::size_t i = 0; i < matrix.m(); ++i) {
    const auto r = matrix.values().row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json doc;
  doc["kind"] = to_string(matrix.kind());
  doc["m"] = matrix.m();
  doc["rows"] = std::move(rows);
  return doc.dump() + "\n";
}

std::string similarity_to_heatmap_csv(const SimilarityMatrix& matrix,
                                      const std::vector<std::string>& lf_names) {
  std::string out = "row,col,row_name,col_name,value\n";
  for (std::size_t i = 0; i < matrix.m(); ++i) {
    for (std::size_t j = 0; j < matrix.m(); ++j) {
      out += std::to_string(i) + ',' + std::to_string(j) + ',';
      out += quote_if_needed(i < lf_names.size() ? lf_names[i] : "") + ',';
      out += quote_if_needed(j < lf_names.size() ? lf_names[j] : "") + ',';
      out += format_double(matrix(i, j)) + '\n';
    }
  }
  return out;
}

DependencyStructure structure_from_json(std::string_view text) {
  const json doc = parse_json(text, "structure");
  DependencyStructure s;
  s.removed = field<std::vector<std::size_t>>(doc, "removed", "structure");
  s.survivors = field<std::vector<std::size_t>>(doc, "survivors", "structure");
  if (doc.contains("anchors") && !doc["anchors"].is_null()) {
    try {
      s.anchors = edge_from(doc["anchors"]);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("structure anchors: ") + e.what());
    }
  }
  if (!doc.contains("edges") || !doc["edges"].is_array()) throw ValidationError("structure JSON is missing \"edges\"");
  try {
    for (const auto& e : doc["edges"]) s.edges.push_back(edge_from(e));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("structure edges: ") + e.what());
  }
  s.validate(s.removed.size() + s.survivors.size());
  return s;
}

std::string structure_to_json(const DependencyStructure& structure) {
  json doc;
  doc["removed"] = structure.removed;
  doc["survivors"] = structure.survivors;
  doc["anchors"] = structure.anchors ? edge_json(*structure.anchors) : json(nullptr);
  json edges = json::array();
  for (const auto& e : structure.edges) edges.push_back(edge_json(e));
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

std::string params_to_json(const LabelModelParams& params, const std::vector<std::string>& lf_names) {
  json lfs = json::array();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto idx = params.survivors[k];
    lfs.push_back({{"index", idx},
                   {"name", idx < lf_names.size() ? lf_names[idx] : ""},
                   {"accuracy_moment", params.accuracy_moment[k]},
                   {"propensity", params.propensity[k]},
                   {"conditional_accuracy", params.conditional_accuracy[k]},
                   {"weight", params.weight[k]}});
  }
  json doc;
  doc["class_prior"] = params.class_prior;
  doc["lfs"] = std::move(lfs);
  doc["components"] = params.components;
  return doc.dump(2) + "\n";
}

LabelModelParams params_from_json(std::string_view text) {
  const json doc = parse_json(text, "label model params");
  LabelModelParams p;
  p.class_prior = field<double>(doc, "class_prior", "label model params");
  p.components = field<std::vector<std::vector<std::size_t>>>(doc, "components", "label model params");
  if (!doc.contains("lfs") || !doc["lfs"].is_array()) throw ValidationError("label model params JSON is missing \"lfs\"");
  for (const auto& lf : doc["lfs"]) {
    p.survivors.push_back(field<std::size_t>(lf, "index", "lf"));
    p.accuracy_moment.push_back(field<double>(lf, "accuracy_moment", "lf"));
    p.propensity.push_back(field<double>(lf, "propensity", "lf"));
    p.conditional_accuracy.push_back(field<double>(lf, "conditional_accuracy", "lf"));
    p.weight.push_back(field<double>(lf, "weight", "lf"));
  }
  return p;
}

std::string posteriors_to_csv(const PosteriorLabels& posteriors) {
  std::string out = "p_pos,hard_label,score\n";
  for (std::size_t x = 0; x < posteriors.size(); ++x) {
    out += format_double(posteriors.p_positive[x]) + ',' + std::to_string(int{posteriors.hard[x]}) + ',' +
           format_double(posteriors.score[x]) + '\n';
  }
  return out;
}

PosteriorLabels posteriors_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "p_pos,hard_label,score") {
    throw ValidationError("posterior CSV must start with header p_pos,hard_label,score");
  }
  PosteriorLabels out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = split_cells(lines[l]);
    if (cells.size() != 3) throw ValidationError("posterior CSV line " + std::to_string(l + 1) + " needs 3 cells");
    const double p = parse_double(cells[0], l + 1);
    const int hard = parse_int(cells[1], l + 1);
    if (!(p >= 0.0 && p <= 1.0) || (hard != -1 && hard != 1)) {
      throw ValidationError("posterior CSV line " + std::to_string(l + 1) + " out of range");
    }
    out.p_positive.push_back(p);
    out.hard.push_back(static_cast<Vote>(hard));
    out.score.push_back(parse_double(cells[2], l + 1));
  }
  return out;
}

SynthSpec synth_spec_from_json(std::string_view text) {
  const json doc = parse_json(text, "synth spec");
  SynthSpec spec;
  spec.n = field<std::size_t>(doc, "n", "synth spec");
  if (doc.contains("class_prior")) spec.class_prior = field<double>(doc, "class_prior", "synth spec");
  if (doc.contains("dim")) spec.dim = field<std::size_t>(doc, "dim", "synth spec");
  if (doc.contains("seed")) spec.seed = field<std::uint64_t>(doc, "seed", "synth spec");
  if (!doc.contains("groups") || !doc["groups"].is_array()) throw ValidationError("synth spec JSON is missing \"groups\"");
  for (const auto& g : doc["groups"]) {
    SynthGroup group;
    group.size = field<std::size_t>(g, "size", "synth group");
    group.accuracy = field<double>(g, "accuracy", "synth group");
    if (g.contains("coverage")) group.coverage = field<double>(g, "coverage", "synth group");
    if (g.contains("rho")) group.rho = field<double>(g, "rho", "synth group");
    if (g.contains("center")) group.center = field<std::vector<double>>(g, "center", "synth group");
    if (g.contains("embedding_noise")) group.embedding_noise = field<double>(g, "embedding_noise", "synth group");
    spec.groups.push_back(std::move(group));
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json groups = json::array();
  for (const auto& g : spec.groups) {
    json node = {{"size", g.size},
                 {"accuracy", g.accuracy},
                 {"coverage", g.coverage},
                 {"rho", g.rho},
                 {"embedding_noise", g.embedding_noise}};
    if (!g.center.empty()) node["center"] = g.center;
    groups.push_back(std::move(node));
  }
  json doc = {{"n", spec.n},
              {"class_prior", spec.class_prior},
              {"dim", spec.dim},
              {"seed", spec.seed},
              {"groups", std::move(groups)}};
  return doc.dump(2) + "\n";
}

std::vector<PromptedLF> prompted_lfs_from_json(std::string_view text) {
  const json doc = parse_json(text, "prompted LF");
  const json& list = doc.is_object() && doc.contains("lfs") ? doc["lfs"] : doc;
  if (!list.is_array()) throw ValidationError("prompted LF JSON must be an array or {\"lfs\": [...]}");
  std::vector<PromptedLF> lfs;
  for (const auto& node : list) {
    PromptedLF lf;
    lf.name = field<std::string>(node, "name", "prompted LF");
    lf.template_text = field<std::string>(node, "template", "prompted LF");
    lf.target_label = static_cast<Vote>(field<int>(node, "target_label", "prompted LF"));
    const auto answers = field<std::vector<std::string>>(node, "positive_answers", "prompted LF");
    lf.positive_answers.insert(answers.begin(), answers.end());
    lf.validate();
    lfs.push_back(std::move(lf));
  }
  return lfs;
}

VoteMatrix load_votes(const std::filesystem::path& path) { return votes_from_csv(read_file(path)); }
GoldLabels load_gold(const std::filesystem::path& path) { return gold_from_csv(read_file(path)); }
EmbeddingSet load_embeddings(const std::filesystem::path& path) { return embeddings_from_json(read_file(path)); }
TaskConfig load_config(const std::filesystem::path& path) { return config_from_json(read_file(path)); }
SimilarityMatrix load_similarity(const std::filesystem::path& path) { return similarity_from_json(read_file(path)); }
DependencyStructure load_structure(const std::filesystem::path& path) { return structure_from_json(read_file(path)); }

}  // namespace lfrefine::io
