#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "lfrefine/embedding.hpp"
#include "lfrefine/io.hpp"
#include "test_util.hpp"

using namespace lfrefine;
using nlohmann::json;

namespace {

PromptedLF make_lf(std::string name, std::string tmpl, Vote label = kPositive) {
  return PromptedLF{std::move(name), std::move(tmpl), label, {"Yes"}};
}

// Prompt templates of the relation-extraction task (11 LFs).
std::vector<PromptedLF> spouse_lfs() {
  const std::vector<std::pair<std::string, Vote>> templates = {
      {"Context: [TEXT]\n\nAre [PERSON1] and [PERSON2] family members?", kNegative},
      {"Context: [TEXT]\n\nIs [PERSON1] said to be a family member?", kNegative},
      {"Context: [TEXT]\n\nIs [PERSON2] said to be a family member?", kNegative},
      {"Context: [TEXT]\n\nAre [PERSON1] and [PERSON2] dating?", kNegative},
      {"Context: [TEXT]\n\nAre [PERSON1] and [PERSON2] co-workers?", kNegative},
      {"Context: [TEXT]\n\nIs there any mention of \"spouse\" between the entities [PERSON1] and [PERSON2]?", kPositive},
      {"Context: [TEXT]\n\nIs there any mention of \"spouse\" before the entity [PERSON1]?", kPositive},
      {"Context: [TEXT]\n\nIs there any mention of \"spouse\" before the entity [PERSON2]?", kPositive},
      {"Context: [TEXT]\n\nDo [PERSON1] and [PERSON2] have the same last name?", kPositive},
      {"Context: [TEXT]\n\nDid [PERSON1] and [PERSON2] get married?", kPositive},
      {"Context: [TEXT]\n\nAre [PERSON1] and [PERSON2] married?", kPositive},
  };
  std::vector<PromptedLF> out;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    out.push_back(make_lf("spouse_" + std::to_string(i), templates[i].first, templates[i].second));
  }
  return out;
}

// Deterministic fake embedding of a text.
std::vector<double> fake_vector(const std::string& text, std::size_t dim) {
  std::vector<double> v(dim);
  const auto h = std::hash<std::string>{}(text);
  for (std::size_t k = 0; k < dim; ++k) v[k] = static_cast<double>((h >> (k % 60)) % 97) + 1.0 + 0.25 * k;
  return v;
}

std::string naive_replace(std::string s, const std::string& from, const std::string& to) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, from.size(), from) == 0) {
      out += to;
      i += from.size();
    } else {
      out += s[i++];
    }
  }
  return out;
}

class FakeService {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeService(Handler handler) {
    server_.Post("/embed", [this, handler](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        ++requests_;
        last_auth_ = req.get_header_value("Authorization");
      }
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::string last_auth() const {
    std::lock_guard lock(mutex_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  int requests_ = 0;
  std::string last_auth_;
};

void answer_vectors(const httplib::Request& req, httplib::Response& res, std::size_t dim) {
  const auto body = json::parse(req.body);
  json embeddings = json::array();
  for (const auto& t : body["texts"]) embeddings.push_back(fake_vector(t.get<std::string>(), dim));
  res.set_content(json{{"embeddings", embeddings}}.dump(), "application/json");
}

ProviderConfig http_config(const std::string& url) {
  auto cfg = ProviderConfig::from_spec("http:" + url);
  cfg.timeout_seconds = 5.0;
  return cfg;
}

}  // namespace

TEST_CASE("render_prompt substitutes [TEXT] byte-exactly") {
  const auto lf = make_lf("a", "Does X?\n\n[TEXT]");
  const auto r = render_prompt(lf, "hi");
  CHECK(r.text == "Does X?\n\nhi");
  CHECK_FALSE(r.missing_placeholder);
  CHECK(render_prompt(lf, "").text == "Does X?\n\n");
  CHECK(render_prompt(lf, "\t\xc3\xa9 [x]\r\n").text == "Does X?\n\n\t\xc3\xa9 [x]\r\n");
}

TEST_CASE("render_prompt fills person placeholders like a naive search-and-replace") {
  for (const auto& lf : spouse_lfs()) {
    const std::string text = "Alice married Bob in 1990.";
    const auto r = render_prompt(lf, text, std::string("Alice"), std::string("Bob"));
    std::string expected = naive_replace(lf.template_text, "[PERSON1]", "Alice");
    expected = naive_replace(expected, "[PERSON2]", "Bob");
    expected = naive_replace(expected, "[TEXT]", text);
    CHECK(r.text == expected);
    CHECK(r.text.find('[') == std::string::npos);
  }
}

TEST_CASE("render_prompt flags a template without [TEXT]") {
  PromptedLF lf{"p", "Is [PERSON1] here?", kPositive, {"Yes"}};
  const auto r = render_prompt(lf, "ignored");
  CHECK(r.missing_placeholder);
  CHECK(r.text == "Is [PERSON1] here?");
}

TEST_CASE("PromptedLF invariants and label map") {
  CHECK_THROWS_AS(make_lf("a", "no placeholder").validate(), ValidationError);
  PromptedLF empty{"b", "[TEXT]", kPositive, {}};
  CHECK_THROWS_AS(empty.validate(), ValidationError);
  const auto lf = make_lf("c", "[TEXT]", kNegative);
  CHECK(lf.map_answer("Yes") == kNegative);
  CHECK(lf.map_answer("No") == kAbstain);
}

TEST_CASE("ProviderConfig parsing") {
  const auto f = ProviderConfig::from_spec("file:/tmp/x.json");
  CHECK(f.kind == ProviderConfig::Kind::file);
  CHECK(f.location == "/tmp/x.json");
  const auto h = ProviderConfig::from_spec("http:http://localhost:1/e");
  CHECK(h.kind == ProviderConfig::Kind::http);
  CHECK(h.location == "http://localhost:1/e");
  CHECK(ProviderConfig::from_spec("http://localhost:1/e").location == "http://localhost:1/e");
  CHECK_THROWS_AS(ProviderConfig::from_spec("ftp:x"), ValidationError);
  auto bad = f;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = f;
  bad.timeout_seconds = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("pool_tokens") {
  const std::vector<std::vector<double>> tokens{{1, 2}, {3, 4}, {5, 9}};
  CHECK(pool_tokens(tokens, Pooling::mean) == std::vector<double>{3, 5});
  CHECK(pool_tokens(tokens, Pooling::first) == std::vector<double>{1, 2});
  CHECK(pool_tokens(tokens, Pooling::last) == std::vector<double>{5, 9});
}

TEST_CASE("file provider returns stored vectors verbatim and in request order") {
  testutil::TempDir dir("embed_file");
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  std::vector<std::string> names;
  std::vector<std::vector<double>> vecs;
  for (int i = 0; i < 10; ++i) {
    names.push_back("lf" + std::to_string(i));
    std::vector<double> v(7);
    for (auto& x : v) x = normal(gen) * 1e-3;  // unnormalized, tiny values
    vecs.push_back(v);
  }
  const EmbeddingSet stored(names, vecs);
  io::write_file(dir / "emb.json", io::embeddings_to_json(stored));

  std::vector<PromptedLF> lfs;
  for (const auto& n : names) lfs.push_back(make_lf(n, "[TEXT]"));
  const auto cfg = ProviderConfig::from_spec("file:" + (dir / "emb.json").string());
  const auto out = embed_prompts(lfs, cfg);
  CHECK(out.m() == 10);
  CHECK(out == stored);  // bit-identical, no normalization

  // Permuting the request permutes the result identically.
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<PromptedLF> shuffled;
    for (auto p : perm) shuffled.push_back(lfs[p]);
    const auto permuted = embed_prompts(shuffled, cfg);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      CHECK(permuted.lf_names()[k] == names[perm[k]]);
      CHECK(permuted.vector(k) == vecs[perm[k]]);
    }
  }

  std::vector<PromptedLF> unknown{make_lf("missing", "[TEXT]")};
  CHECK_THROWS_AS(embed_prompts(unknown, cfg), ProviderError);
  CHECK_THROWS_AS(embed_prompts(lfs, ProviderConfig::from_spec("file:" + (dir / "nope.json").string())),
                  ProviderError);
  CHECK_THROWS_AS(embed_prompts({}, cfg), ValidationError);
}

TEST_CASE("http provider embeds the 11 relation templates") {
  FakeService service([](const httplib::Request& req, httplib::Response& res) { answer_vectors(req, res, 8); });
  auto cfg = http_config(service.url());
  cfg.batch_size = 3;
  const auto lfs = spouse_lfs();
  const auto out = embed_prompts(lfs, cfg);
  REQUIRE(out.m() == 11);
  CHECK(service.requests() == 4);  // ceil(11 / 3)
  for (std::size_t i = 0; i < lfs.size(); ++i) {
    CHECK(out.lf_names()[i] == lfs[i].name);
    // Raw templates (placeholders kept) are what gets embedded.
    CHECK(out.vector(i) == fake_vector(lfs[i].template_text, 8));
  }
}

TEST_CASE("http provider output is independent of batching and concurrency") {
  FakeService service([](const httplib::Request& req, httplib::Response& res) {
    // Jitter so concurrent batches finish out of order.
    std::this_thread::sleep_for(std::chrono::milliseconds(std::hash<std::string>{}(req.body) % 20));
    answer_vectors(req, res, 5);
  });
  const auto lfs = spouse_lfs();
  auto cfg = http_config(service.url());
  cfg.batch_size = 11;
  cfg.max_concurrent_requests = 1;
  const auto reference = embed_prompts(lfs, cfg);
  for (std::size_t batch : {1, 2, 4}) {
    for (std::size_t width : {1, 3, 8}) {
      cfg.batch_size = batch;
      cfg.max_concurrent_requests = width;
      CHECK(embed_prompts(lfs, cfg) == reference);
    }
  }
}

TEST_CASE("http provider pools per-token vectors") {
  FakeService service([](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json embeddings = json::array();
    for (std::size_t i = 0; i < body["texts"].size(); ++i) {
      const double base = static_cast<double>(i);
      embeddings.push_back(json::array({{base + 1, 2.0}, {base + 3, 4.0}}));
    }
    res.set_content(json{{"embeddings", embeddings}}.dump(), "application/json");
  });
  std::vector<PromptedLF> lfs{make_lf("a", "[TEXT] a"), make_lf("b", "[TEXT] b")};
  auto cfg = http_config(service.url());
  cfg.batch_size = 2;
  CHECK(embed_prompts(lfs, cfg).vector(1) == std::vector<double>{3.0, 3.0});
  cfg.pooling = Pooling::first;
  CHECK(embed_prompts(lfs, cfg).vector(1) == std::vector<double>{2.0, 2.0});
  cfg.pooling = Pooling::last;
  CHECK(embed_prompts(lfs, cfg).vector(0) == std::vector<double>{3.0, 4.0});
}

TEST_CASE("http provider sends the bearer token from the configured env var") {
  FakeService service([](const httplib::Request& req, httplib::Response& res) { answer_vectors(req, res, 3); });
  ::setenv("LFREFINE_TEST_TOKEN", "s3cret", 1);
  auto cfg = http_config(service.url());
  cfg.auth_header_env_var = "LFREFINE_TEST_TOKEN";
  embed_prompts({make_lf("a", "[TEXT]")}, cfg);
  CHECK(service.last_auth() == "Bearer s3cret");
  cfg.auth_header_env_var = "LFREFINE_TEST_TOKEN_UNSET";
  ::unsetenv("LFREFINE_TEST_TOKEN_UNSET");
  CHECK_THROWS_AS(embed_prompts({make_lf("a", "[TEXT]")}, cfg), ProviderError);
}

TEST_CASE("http provider errors") {
  const auto lfs = spouse_lfs();

  SUBCASE("mixed dimensions") {
    FakeService service([](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json embeddings = json::array();
      for (std::size_t i = 0; i < body["texts"].size(); ++i) {
        embeddings.push_back(std::vector<double>(i % 2 ? 4 : 3, 1.0));
      }
      res.set_content(json{{"embeddings", embeddings}}.dump(), "application/json");
    });
    CHECK_THROWS_WITH_AS(embed_prompts(lfs, http_config(service.url())),
                         doctest::Contains("dimension disagreement"), ProviderError);
  }
  SUBCASE("status >= 400") {
    FakeService service([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    CHECK_THROWS_WITH_AS(embed_prompts(lfs, http_config(service.url())), doctest::Contains("503"), ProviderError);
  }
  SUBCASE("malformed payload") {
    FakeService service([](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"vectors\": []}", "application/json");
    });
    CHECK_THROWS_WITH_AS(embed_prompts(lfs, http_config(service.url())), doctest::Contains("malformed payload"),
                         ProviderError);
  }
  SUBCASE("wrong count") {
    FakeService service([](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"embeddings\": [[1.0]]}", "application/json");
    });
    CHECK_THROWS_WITH_AS(embed_prompts(lfs, http_config(service.url())), doctest::Contains("malformed payload"),
                         ProviderError);
  }
  SUBCASE("timeout") {
    FakeService service([](const httplib::Request& req, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      answer_vectors(req, res, 3);
    });
    auto cfg = http_config(service.url());
    cfg.timeout_seconds = 0.2;
    CHECK_THROWS_WITH_AS(embed_prompts(lfs, cfg), doctest::Contains("timeout"), ProviderError);
  }
  SUBCASE("connection refused") {
    auto cfg = http_config("http://127.0.0.1:1/embed");
    CHECK_THROWS_AS(embed_prompts(lfs, cfg), ProviderError);
  }
}
