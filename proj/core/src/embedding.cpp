#include "lfrefine/embedding.hpp"

#include <cstdlib>
#include <future>
#include <unordered_map>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "lfrefine/io.hpp"

namespace lfrefine {

namespace {

using nlohmann::json;

bool replace_all(std::string& text, const std::string& token, const std::string& value) {
  bool found = false;
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    text.replace(pos, token.size(), value);
    pos += value.size();
    found = true;
  }
  return found;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("HTTP provider URL needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<double> as_vector(const json& node) {
  std::vector<double> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number()) throw ProviderError("malformed payload: non-numeric embedding entry");
    out.push_back(v.get<double>());
  }
  return out;
}

// Decodes one "embeddings" entry: a flat vector or a list of token vectors.
std::vector<double> decode_entry(const json& entry, Pooling pooling) {
  if (!entry.is_array() || entry.empty()) throw ProviderError("malformed payload: empty embedding");
  if (entry.front().is_array()) {
    std::vector<std::vector<double>> tokens;
    for (const auto& t : entry) {
      if (!t.is_array()) throw ProviderError("malformed payload: mixed token and scalar entries");
      tokens.push_back(as_vector(t));
    }
    return pool_tokens(tokens, pooling);
  }
  return as_vector(entry);
}

std::vector<std::vector<double>> fetch_batch(const ProviderConfig& config, const Endpoint& endpoint,
                                             const std::vector<std::string>& texts,
                                             const std::string& token) {
  httplib::Client client(endpoint.origin);
  const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(micros);
  client.set_read_timeout(micros);
  client.set_write_timeout(micros);

  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  const json body = {{"texts", texts}};
  auto result = client.Post(endpoint.path, headers, body.dump(), "application/json");
  if (!result) {
    const auto err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw ProviderError("timeout: embedding service did not answer within " +
                          std::to_string(config.timeout_seconds) + " s");
    }
    throw ProviderError("embedding request failed: " + httplib::to_string(err));
  }
  if (result->status >= 400) {
    throw ProviderError("embedding service returned HTTP status " + std::to_string(result->status));
  }
  json payload;
  try {
    payload = json::parse(result->body);
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed payload: ") + e.what());
  }
  if (!payload.is_object() || !payload.contains("embeddings") || !payload["embeddings"].is_array()) {
    throw ProviderError("malformed payload: missing \"embeddings\" array");
  }
  const auto& entries = payload["embeddings"];
  if (entries.size() != texts.size()) {
    throw ProviderError("malformed payload: " + std::to_string(entries.size()) +
                        " embeddings for " + std::to_string(texts.size()) + " texts");
  }
  std::vector<std::vector<double>> out;
  for (const auto& entry : entries) out.push_back(decode_entry(entry, config.pooling));
  return out;
}

EmbeddingSet embed_from_file(const std::vector<PromptedLF>& lfs, const ProviderConfig& config) {
  std::string text;
  try {
    text = io::read_file(config.location);
  } catch (const RuntimeError& e) {
    throw ProviderError(e.what());
  }
  const EmbeddingSet stored = io::embeddings_from_json(text);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < stored.m(); ++i) index.emplace(stored.lf_names()[i], i);
  std::vector<std::size_t> picks;
  for (const auto& lf : lfs) {
    auto it = index.find(lf.name);
    if (it == index.end()) {
      throw ProviderError("embedding file '" + config.location + "' has no vector for LF '" + lf.name + "'");
    }
    picks.push_back(it->second);
  }
  return stored.select(picks);
}

EmbeddingSet embed_over_http(const std::vector<PromptedLF>& lfs, const ProviderConfig& config) {
  const Endpoint endpoint = split_url(config.location);
  std::string token;
  if (config.auth_header_env_var) {
    const char* value = std::getenv(config.auth_header_env_var->c_str());
    if (value == nullptr) {
      throw ProviderError("auth environment variable '" + *config.auth_header_env_var + "' is not set");
    }
    token = value;
  }

  std::vector<std::vector<std::string>> batches;
  for (std::size_t start = 0; start < lfs.size(); start += config.batch_size) {
    std::vector<std::string> texts;
    for (std::size_t i = start; i < std::min(lfs.size(), start + config.batch_size); ++i) {
      texts.push_back(embedding_text(lfs[i]));
    }
    batches.push_back(std::move(texts));
  }

  // Waves of concurrent requests; results land in their batch slot.
  std::vector<std::vector<std::vector<double>>> results(batches.size());
  const std::size_t width = std::max<std::size_t>(1, config.max_concurrent_requests);
  for (std::size_t wave = 0; wave < batches.size(); wave += width) {
    std::vector<std::future<std::vector<std::vector<double>>>> pending;
    const std::size_t end = std::min(batches.size(), wave + width);
    for (std::size_t b = wave; b < end; ++b) {
      pending.push_back(std::async(std::launch::async, fetch_batch, std::cref(config),
                                   std::cref(endpoint), std::cref(batches[b]), std::cref(token)));
    }
    for (std::size_t b = wave; b < end; ++b) results[b] = pending[b - wave].get();
  }

  std::vector<std::vector<double>> vectors;
  for (auto& batch : results) {
    for (auto& v : batch) vectors.push_back(std::move(v));
  }
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != vectors[0].size()) {
      throw ProviderError("dimension disagreement: LF '" + lfs[i].name + "' has dimension " +
                          std::to_string(vectors[i].size()) + ", LF '" + lfs[0].name + "' has " +
                          std::to_string(vectors[0].size()));
    }
  }
  std::vector<std::string> names;
  for (const auto& lf : lfs) names.push_back(lf.name);
  try {
    return EmbeddingSet(std::move(names), std::move(vectors));
  } catch (const ValidationError& e) {
    throw ProviderError(std::string("malformed payload: ") + e.what());
  }
}

}  // namespace

void PromptedLF::validate() const {
  if (template_text.find(kTextPlaceholder) == std::string::npos &&
      template_text.find(kPerson1Placeholder) == std::string::npos &&
      template_text.find(kPerson2Placeholder) == std::string::npos) {
    throw ValidationError("prompt template for '" + name + "' has no placeholder token");
  }
  if (positive_answers.empty()) throw ValidationError("LF '" + name + "' needs at least one mapped answer");
  if (target_label != kPositive && target_label != kNegative) {
    throw ValidationError("LF '" + name + "' target label must be -1 or 1");
  }
}

Vote PromptedLF::map_answer(const std::string& answer) const {
  return positive_answers.count(answer) ? target_label : kAbstain;
}

RenderedPrompt render_prompt(const PromptedLF& lf, const std::string& text,
                             const std::optional<std::string>& person1,
                             const std::optional<std::string>& person2) {
  RenderedPrompt out{lf.template_text, false};
  if (person1) replace_all(out.text, kPerson1Placeholder, *person1);
  if (person2) replace_all(out.text, kPerson2Placeholder, *person2);
  out.missing_placeholder = !replace_all(out.text, kTextPlaceholder, text);
  return out;
}

Pooling pooling_from_string(const std::string& name) {
  if (name == "mean") return Pooling::mean;
  if (name == "first") return Pooling::first;
  if (name == "last") return Pooling::last;
  throw ValidationError("unknown pooling '" + name + "' (expected mean, first or last)");
}

ProviderConfig ProviderConfig::from_spec(const std::string& spec) {
  ProviderConfig config;
  if (spec.rfind("file:", 0) == 0) {
    config.kind = Kind::file;
    config.location = spec.substr(5);
  } else if (spec.rfind("http:", 0) == 0 || spec.rfind("https:", 0) == 0) {
    config.kind = Kind::http;
    // Accept both "http:<url>" and a bare "http://..." URL.
    const auto rest = spec.substr(spec.find(':') + 1);
    config.location = rest.rfind("http://", 0) == 0 || rest.rfind("https://", 0) == 0 ? rest : spec;
  } else {
    throw ValidationError("provider must be file:<path> or http:<url>, got '" + spec + "'");
  }
  if (config.location.empty()) throw ValidationError("provider location is empty");
  return config;
}

void ProviderConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(timeout_seconds > 0.0)) throw ValidationError("timeout_seconds must be positive");
  if (location.empty()) throw ValidationError("provider location is empty");
}

std::string embedding_text(const PromptedLF& lf) { return lf.template_text; }

std::vector<double> pool_tokens(const std::vector<std::vector<double>>& tokens, Pooling pooling) {
  if (tokens.empty()) throw ProviderError("malformed payload: no token vectors to pool");
  const std::size_t d = tokens.front().size();
  for (const auto& t : tokens) {
    if (t.size() != d) throw ProviderError("dimension disagreement between token vectors");
  }
  switch (pooling) {
    case Pooling::first: return tokens.front();
    case Pooling::last: return tokens.back();
    case Pooling::mean: break;
  }
  std::vector<double> out(d, 0.0);
  for (const auto& t : tokens) {
    for (std::size_t k = 0; k < d; ++k) out[k] += t[k];
  }
  for (auto& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

EmbeddingSet embed_prompts(const std::vector<PromptedLF>& lfs, const ProviderConfig& config) {
  if (lfs.empty()) throw ValidationError("embed_prompts needs at least one LF");
  config.validate();
  return config.kind == ProviderConfig::Kind::file ? embed_from_file(lfs, config)
                                                   : embed_over_http(lfs, config);
}

}  // namespace lfrefine
