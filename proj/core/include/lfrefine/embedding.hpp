#pragma once

// Embedding providers: produce one vector per prompted LF.
//
// The file provider reads a precomputed embeddings JSON and returns vectors
// verbatim, matched to the requested LFs by name. The HTTP provider POSTs
// {"texts": [...]} and expects {"embeddings": [...]} back, where each entry is
// either a single vector or a list of per-token vectors that gets pooled.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lfrefine/types.hpp"

namespace lfrefine {

class ProviderError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

struct PromptedLF {
  std::string name;
  std::string template_text;  // contains [TEXT], optionally [PERSON1]/[PERSON2]
  Vote target_label = kPositive;
  std::set<std::string> positive_answers;  // answers mapped to target_label

  void validate() const;
  // Label map: answers in positive_answers vote target_label, anything else abstains.
  Vote map_answer(const std::string& answer) const;
};

struct RenderedPrompt {
  std::string text;
  bool missing_placeholder = false;  // template had no [TEXT]; returned unchanged
};

inline constexpr const char* kTextPlaceholder = "[TEXT]";
inline constexpr const char* kPerson1Placeholder = "[PERSON1]";
inline constexpr const char* kPerson2Placeholder = "[PERSON2]";

RenderedPrompt render_prompt(const PromptedLF& lf, const std::string& text,
                             const std::optional<std::string>& person1 = std::nullopt,
                             const std::optional<std::string>& person2 = std::nullopt);

enum class Pooling { mean, first, last };

Pooling pooling_from_string(const std::string& name);

struct ProviderConfig {
  enum class Kind { file, http };

  Kind kind = Kind::file;
  std::string location;  // file path or http(s) URL
  std::optional<std::string> auth_header_env_var;
  Pooling pooling = Pooling::mean;
  double timeout_seconds = 30.0;
  std::size_t batch_size = 32;
  std::size_t max_concurrent_requests = 4;

  // Parses "file:<path>" or "http:<url>" / "https:<url>".
  static ProviderConfig from_spec(const std::string& spec);
  void validate() const;
};

// Text sent to the HTTP provider for each LF: the raw template, placeholders
// left in place.
std::string embedding_text(const PromptedLF& lf);

EmbeddingSet embed_prompts(const std::vector<PromptedLF>& lfs, const ProviderConfig& config);

// Reduces per-token vectors to one vector.
std::vector<double> pool_tokens(const std::vector<std::vector<double>>& tokens, Pooling pooling);

}  // namespace lfrefine
