// C API, command line and HTTP front ends over one small trained pipeline.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "http_server.hpp"
#include "semspace/semspace.h"

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// One shared directory of artifacts, trained on first use.
struct Pipeline {
  std::filesystem::path dir;
  std::string corpus, text, visual, index;

  Pipeline() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "semspace_if_XXXXXX").string();
    if (!mkdtemp(pattern.data())) std::abort();
    dir = pattern;
    corpus = file("corpus.jsonl");
    text = file("text.bin");
    visual = file("visual.bin");
    index = file("index.bin");
    REQUIRE(cli("gen-synthetic --out " + corpus +
                " --concepts 6 --words 20 --docs 600 --features 16 --sigma 0.1")
                .code == 0);
    REQUIRE(cli("train-text --corpus " + corpus + " --out " + text + " --dim 16").code == 0);
    REQUIRE(cli("train-visual --corpus " + corpus + " --text-model " + text + " --out " +
                visual + " --lr 0.5 --iterations 400 --hidden 32")
                .code == 0);
    REQUIRE(cli("build-index --corpus " + corpus + " --visual-model " + visual +
                " --out " + index)
                .code == 0);
  }
  ~Pipeline() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }

  std::string file(const std::string& name) const { return (dir / name).string(); }

  std::string paths() const {
    return " --corpus " + corpus + " --text-model " + text + " --visual-model " + visual +
           " --index " + index;
  }

  Run cli(const std::string& args) const {
    const auto out = file("stdout.txt"), err = file("stderr.txt");
    const std::string command =
        std::string(SEMSPACE_CLI) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(command.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  semspace_tools::EngineSource source() const {
    return {corpus, text, visual, index, SS_AGG_MEAN};
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

struct EngineGuard {
  ss_engine* engine = nullptr;
  explicit EngineGuard(const Pipeline& p) {
    ss_engine_paths paths{p.corpus.c_str(), p.text.c_str(), p.visual.c_str(),
                          p.index.c_str(), SS_AGG_MEAN};
    REQUIRE(ss_engine_open(&paths, &engine) == SS_OK);
  }
  ~EngineGuard() { ss_engine_free(engine); }
};

}  // namespace

TEST_CASE("C API status reporting") {
  CHECK(std::string(ss_status_name(SS_ERR_DEGENERATE_QUERY)) == "degenerate_query");
  CHECK(std::string(ss_status_name(SS_ERR_UNEMBEDDABLE)) == "unembeddable_query");
  CHECK(std::strlen(ss_version()) > 0);

  ss_corpus* corpus = nullptr;
  CHECK(ss_corpus_load("/nonexistent/corpus.jsonl", &corpus) == SS_ERR_IO);
  CHECK(corpus == nullptr);
  CHECK(std::string(ss_last_error()).find("/nonexistent/corpus.jsonl") != std::string::npos);
  CHECK(ss_corpus_load(nullptr, &corpus) == SS_ERR_USAGE);

  ss_method method;
  CHECK(ss_method_parse("glove", &method) == SS_OK);
  CHECK(method == SS_METHOD_GLOVE);
  CHECK(ss_method_parse("bert", &method) == SS_ERR_CONFIG);
  ss_protocol protocol;
  CHECK(ss_protocol_parse("nope", &protocol) == SS_ERR_USAGE);
}

TEST_CASE("C API query paths agree") {
  auto& p = pipeline();
  EngineGuard g(p);
  ss_ranking* by_string = nullptr;
  REQUIRE(ss_engine_query_string(g.engine, "snow car:0.5", 5, &by_string) == SS_OK);
  const ss_query_term terms[] = {{SS_TERM_TEXT, "snow", 1.0}, {SS_TERM_TEXT, "car", 0.5}};
  ss_ranking* by_terms = nullptr;
  REQUIRE(ss_engine_query(g.engine, terms, 2, 5, &by_terms) == SS_OK);
  REQUIRE(ss_ranking_size(by_string) == 5);
  REQUIRE(ss_ranking_size(by_terms) == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(std::string(ss_ranking_id(by_string, i)) == ss_ranking_id(by_terms, i));
    CHECK(ss_ranking_score(by_string, i) == ss_ranking_score(by_terms, i));
  }
  ss_ranking_free(by_string);
  ss_ranking_free(by_terms);

  ss_ranking* r = nullptr;
  CHECK(ss_engine_query_string(g.engine, "snow -snow", 5, &r) == SS_ERR_DEGENERATE_QUERY);
  CHECK(ss_engine_query_string(g.engine, "qqqq", 5, &r) == SS_ERR_UNEMBEDDABLE);
  CHECK(ss_engine_query_string(g.engine, "@nosuchimage", 5, &r) == SS_ERR_NOT_FOUND);
  CHECK(ss_engine_query_string(g.engine, "snow", 0, &r) == SS_ERR_USAGE);
  CHECK(r == nullptr);
}

TEST_CASE("command line exit codes and output") {
  auto& p = pipeline();
  CHECK(p.cli("train-text --corpus /nonexistent.jsonl --out " + p.file("x.bin")).code == 3);
  CHECK(p.cli("eval nonsense" + p.paths()).code == 2);
  CHECK(p.cli("no-such-command").code == 2);
  const auto degenerate = p.cli("query 'snow -snow'" + p.paths());
  CHECK(degenerate.code == 9);
  CHECK(degenerate.err.find("degenerate_query") != std::string::npos);

  const auto q = p.cli("query snow -k 5" + p.paths());
  REQUIRE(q.code == 0);
  std::istringstream lines(q.out);
  std::string line;
  int count = 0;
  const std::regex row(R"([^\t]+\t-?[01]\.\d{6})");
  while (std::getline(lines, line)) {
    CHECK(std::regex_match(line, row));
    ++count;
  }
  CHECK(count == 5);
}

TEST_CASE("text training is byte-identical for a fixed seed") {
  auto& p = pipeline();
  const auto a = p.file("a.bin"), b = p.file("b.bin");
  REQUIRE(p.cli("--seed 9 train-text --corpus " + p.corpus + " --dim 8 --out " + a).code == 0);
  REQUIRE(p.cli("--seed 9 train-text --corpus " + p.corpus + " --dim 8 --out " + b).code == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(p.cli("--seed 10 train-text --corpus " + p.corpus + " --dim 8 --out " + b).code == 0);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("command line evaluation matches the library") {
  auto& p = pipeline();
  const auto pairs = p.file("pairs.csv");
  REQUIRE(p.cli("eval corr --pairs 100 --pairs-csv " + pairs + p.paths()).code == 0);
  const auto csv = slurp(pairs);
  CHECK(csv.rfind("text_dist,image_dist,shared_tags\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);

  const auto fixture = std::string(SEMSPACE_DATA_DIR) + "/p5_queries.json";
  const auto run = p.cli("eval p5 --queries " + fixture + p.paths());
  REQUIRE(run.code == 0);
  const auto from_cli = json::parse(run.out);

  EngineGuard g(p);
  ss_eval_options opts;
  ss_eval_options_default(&opts);
  opts.queries_path = fixture.c_str();
  ss_report* report = nullptr;
  REQUIRE(ss_engine_eval(g.engine, SS_EVAL_P5, &opts, &report) == SS_OK);
  const auto from_lib = json::parse(ss_report_json(report));
  CHECK(from_cli == from_lib);
  double simple = -1;
  CHECK(ss_report_aggregate(report, "simple", &simple) == SS_OK);
  CHECK(from_cli["aggregates"]["simple"].get<double>() == simple);
  CHECK(ss_report_write(report, nullptr, nullptr, pairs.c_str()) == SS_ERR_USAGE);
  ss_report_free(report);
}

TEST_CASE("HTTP API") {
  auto& p = pipeline();
  semspace_tools::ServerOptions options;
  options.port = 0;
  semspace_tools::QueryServer server(p.source(), options);
  server.bind();
  server.start();
  REQUIRE(server.port() > 0);
  httplib::Client client("127.0.0.1", server.port());

  SUBCASE("health") {
    auto res = client.Get("/api/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["status"] == "ok");
  }

  SUBCASE("query returns k results, identical to the command line") {
    auto res = client.Post("/api/query", R"({"query":"snow","k":5})", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body["results"].size() == 5);
    const auto cli = p.cli("query snow -k 5 --json" + p.paths());
    REQUIRE(cli.code == 0);
    CHECK(json::parse(cli.out) == body);

    auto terms = client.Post(
        "/api/query", R"({"terms":[{"text":"snow","weight":1.0}],"k":5})", "application/json");
    REQUIRE(terms);
    CHECK(json::parse(terms->body) == body);
  }

  SUBCASE("errors map to statuses") {
    auto res = client.Post("/api/query", R"({"query":"snow -snow"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    CHECK(json::parse(res->body)["error"]["reason"] == "degenerate_query");
    res = client.Post("/api/query", R"({"query":"snow","k":0})", "application/json");
    CHECK(res->status == 400);
    res = client.Post("/api/query", "not json", "application/json");
    CHECK(res->status == 400);
    res = client.Post("/api/query", R"({"query":"qqqq"})", "application/json");
    CHECK(res->status == 422);
    CHECK(json::parse(res->body)["error"]["reason"] == "unembeddable_query");
    res = client.Get("/api/items/nope");
    CHECK(res->status == 404);
  }

  SUBCASE("concurrent identical queries") {
    const std::string body = R"({"query":"snow car","k":10})";
    const auto expected = client.Post("/api/query", body, "application/json")->body;
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 100; ++i) {
      futures.push_back(std::async(std::launch::async, [&] {
        httplib::Client c("127.0.0.1", server.port());
        auto r = c.Post("/api/query", body, "application/json");
        return r && r->status == 200 ? r->body : std::string("failed");
      }));
    }
    int same = 0;
    for (auto& f : futures) same += f.get() == expected;
    CHECK(same == 100);
  }

  SUBCASE("items, vocabulary and reload") {
    auto q = json::parse(
        client.Post("/api/query", R"({"query":"snow","k":1})", "application/json")->body);
    const auto id = q["results"][0]["id"].get<std::string>();
    auto item = client.Get("/api/items/" + id);
    REQUIRE(item->status == 200);
    const auto body = json::parse(item->body);
    CHECK(body["id"] == id);
    CHECK(body["indexed"] == true);
    CHECK(body["split"] == "test");

    auto vocab = client.Get("/api/vocab?prefix=sno&limit=3");
    REQUIRE(vocab->status == 200);
    const auto words = json::parse(vocab->body);
    CHECK(words.size() <= 3);
    CHECK(!words.empty());
    for (const auto& w : words) CHECK(w.get<std::string>().rfind("sno", 0) == 0);

    auto reload = client.Post("/api/reload", "", "application/json");
    CHECK(reload->status == 200);
    auto after = client.Post("/api/query", R"({"query":"snow","k":1})", "application/json");
    CHECK(json::parse(after->body) == q);
  }

  SUBCASE("busy port") {
    semspace_tools::ServerOptions busy = options;
    busy.port = server.port();
    semspace_tools::QueryServer second(p.source(), busy);
    bool failed = false;
    try {
      second.bind();
    } catch (const semspace_tools::StatusError& e) {
      failed = true;
      CHECK(e.status() == SS_ERR_IO);
    }
    CHECK(failed);
  }

  server.stop();
}
