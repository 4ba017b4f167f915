#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "mandi/service.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace mandi;
using namespace mandi::testing;

namespace {

constexpr const char* kTokenEnv = "MANDI_TEST_ADMIN_TOKEN";

struct ServiceFixture {
    TempDir dir;
    SyntheticData data = small_market_data(201);
    Date day1 = add_days(data.start_date, 199);
    Date day2 = add_days(data.start_date, 200);
    MemorySource source{data.rows};
    PipelineConfig config = light_pipeline_config();
    Store writer{dir.path()};
    Store reader{dir.path()};
    Api api{reader, ApiConfig{kTokenEnv, [this](Date d) { return run_daily(d, writer, {&source}, {}, config); }}};

    ServiceFixture() {
        seed_store(writer, data, day1);
        REQUIRE(run_daily(day1, writer, {&source}, {}, config).ok());
    }

    ApiResponse get(const std::string& path, std::map<std::string, std::string> query = {}) const {
        return api.handle({"GET", path, std::move(query), {}});
    }
};

std::string error_code(const ApiResponse& r) { return nlohmann::json::parse(r.body)["error"]["code"]; }

}  // namespace

TEST_CASE("service: forecast payload matches the stored records byte for byte") {
    ServiceFixture f;
    const auto id = *f.reader.published_id();
    const auto stored = nlohmann::json::parse(read_file(f.dir.path() / "snapshots" / id / "forecasts.json"));

    nlohmann::json expected = nlohmann::json::array();
    std::string generated_at;
    for (const auto& r : stored) {
        if (r["market_id"] != "M001" || r["produce"] != "tomato") continue;
        auto interval = r["interval"];
        interval.erase("fallback");
        expected.push_back({{"q", r["q"]},
                            {"direction", r["direction"]},
                            {"posterior", r["posterior"]},
                            {"predicted_price_rs_per_quintal", r["predicted_price_rs_per_quintal"]},
                            {"interval", interval},
                            {"model_version", r["model_version"]}});
        generated_at = r["generated_at"];
    }
    REQUIRE(expected.size() == 3);

    const auto response = f.get("/api/v1/forecast/M001/tomato");
    REQUIRE(response.status == 200);
    const auto body = nlohmann::json::parse(response.body);
    CHECK(body["horizons"].dump() == expected.dump());
    CHECK(body["generated_at"] == generated_at);
    CHECK(body["as_of"] == format_date(f.day1));
    for (const auto& h : body["horizons"]) {
        const double sum = h["posterior"]["down"].get<double>() + h["posterior"]["flat"].get<double>() +
                           h["posterior"]["up"].get<double>();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("service: not-found and method errors carry machine-readable codes") {
    ServiceFixture f;
    auto r = f.get("/api/v1/forecast/NOPE/tomato");
    CHECK(r.status == 404);
    CHECK(error_code(r) == "unknown_market");
    r = f.get("/api/v1/forecast/M001/onion");
    CHECK(r.status == 404);
    CHECK(error_code(r) == "unknown_produce");
    r = f.get("/api/v1/nothing");
    CHECK(r.status == 404);
    CHECK(error_code(r) == "not_found");
    r = f.get("/elsewhere");
    CHECK(r.status == 404);
    r = f.api.handle({"DELETE", "/api/v1/markets", {}, {}});
    CHECK(r.status == 405);
    CHECK(error_code(r) == "method_not_allowed");
}

TEST_CASE("service: markets, produce and healthz") {
    ServiceFixture f;
    auto markets = nlohmann::json::parse(f.get("/api/v1/markets").body);
    REQUIRE(markets.size() == 3);
    CHECK(markets[0]["market_id"] == "M000");
    CHECK(markets[0]["latitude"].is_number());
    CHECK(nlohmann::json::parse(f.get("/api/v1/produce").body) == nlohmann::json{"tomato"});
    const auto health = nlohmann::json::parse(f.get("/api/v1/healthz").body);
    CHECK(health["status"] == "ok");
    CHECK(health["last_run_date"] == format_date(f.day1));
    CHECK(health["last_run_ok"] == true);
}

TEST_CASE("service: evidence defaults to the shortest horizon") {
    ServiceFixture f;
    auto r = f.get("/api/v1/evidence/M000/tomato");
    REQUIRE(r.status == 200);
    auto body = nlohmann::json::parse(r.body);
    CHECK(body["q"] == 1);
    CHECK(body["evidence"].size() == kEvidenceTopN);

    r = f.get("/api/v1/evidence/M000/tomato", {{"q", "7"}});
    REQUIRE(r.status == 200);
    body = nlohmann::json::parse(r.body);
    CHECK(body["q"] == 7);
    const auto snap = f.reader.published();
    for (const auto* rec : snap->forecasts_for("M000", "tomato")) {
        if (rec->q == 7) CHECK(body["evidence"] == rec->evidence);
    }

    r = f.get("/api/v1/evidence/M000/tomato", {{"q", "28"}});
    CHECK(r.status == 404);
    CHECK(error_code(r) == "no_forecast");
    CHECK(f.get("/api/v1/evidence/M000/tomato", {{"q", "x"}}).status == 400);
}

TEST_CASE("service: history returns raw and imputed prices") {
    ServiceFixture f;
    const auto r = f.get("/api/v1/history/M002/tomato", {{"days", "10"}});
    REQUIRE(r.status == 200);
    const auto body = nlohmann::json::parse(r.body);
    const auto& prices = body["prices"];
    REQUIRE(prices.size() == 10);
    CHECK(prices.back()["date"] == format_date(f.day1));
    const auto& hist = f.reader.published()->history.at("tomato");
    for (std::size_t i = 0; i < 10; ++i) {
        const std::size_t t = 190 + i;
        const auto& raw = hist.raw_price.values(2, t);
        CHECK(prices[i]["raw_price"] == (raw ? nlohmann::json(*raw) : nlohmann::json()));
        CHECK(prices[i]["imputed_price"].get<double>() == hist.imputed_price.values(2, static_cast<Eigen::Index>(t)));
    }
    CHECK(nlohmann::json::parse(f.get("/api/v1/history/M002/tomato").body)["prices"].size() == 90);
    CHECK(f.get("/api/v1/history/M002/tomato", {{"days", "0"}}).status == 400);
}

TEST_CASE("service: admin run requires the bearer token") {
    ServiceFixture f;
    ::unsetenv(kTokenEnv);
    const ApiRequest request{"POST", "/api/v1/admin/run", {{"date", format_date(f.day2)}}, "Bearer s3cret"};
    CHECK(f.api.handle(request).status == 403);

    ::setenv(kTokenEnv, "s3cret", 1);
    auto wrong = request;
    wrong.authorization = "Bearer nope";
    CHECK(f.api.handle(wrong).status == 401);
    auto bad_date = request;
    bad_date.query["date"] = "yesterday";
    CHECK(f.api.handle(bad_date).status == 400);
    {
        auto lease = f.writer.acquire_lease("other");
        const auto busy = f.api.handle(request);
        CHECK(busy.status == 409);
        CHECK(error_code(busy) == "busy");
    }
    const auto r = f.api.handle(request);
    REQUIRE(r.status == 200);
    const auto report = nlohmann::json::parse(r.body);
    CHECK(report["ok"] == true);
    CHECK(report["run_date"] == format_date(f.day2));
    CHECK(nlohmann::json::parse(f.get("/api/v1/forecast/M001/tomato").body)["as_of"] == format_date(f.day2));
    ::unsetenv(kTokenEnv);
}

TEST_CASE("service: a read burst during a run sees one whole snapshot per response") {
    TempDir dir;
    auto data = small_market_data(201);
    const auto day1 = add_days(data.start_date, 199);
    const auto day2 = add_days(data.start_date, 200);
    MemorySource source{data.rows};
    const auto config = light_pipeline_config();

    constexpr int kRequests = 100;
    std::atomic<int> done{0};
    std::atomic<bool> published{false};
    auto wait_for = [](auto&& pred) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
        while (!pred() && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    };
    StoreHooks hooks;
    std::atomic<bool> armed{false};
    hooks.on_write = [&](const std::string& event) {
        if (!armed) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        // Hold the run between archiving and publishing until half the burst has been served.
        if (event == "archive:rename") wait_for([&] { return done.load() >= kRequests / 2; });
        if (event == "publish") published = true;
    };
    Store writer(dir.path(), hooks);
    seed_store(writer, data, day1);
    REQUIRE(run_daily(day1, writer, {&source}, {}, config).ok());

    Store reader(dir.path());
    Api api(reader, {});
    HttpServer server(api);
    const int port = server.bind("127.0.0.1", 0);
    std::thread serving([&] { server.listen(); });

    const std::string forecast_path = "/api/v1/forecast/M001/tomato";
    const std::string history_path = "/api/v1/history/M001/tomato?days=30";
    const auto old_forecast = api.handle({"GET", forecast_path, {}, {}}).body;
    const auto old_history = api.handle({"GET", "/api/v1/history/M001/tomato", {{"days", "30"}}, {}}).body;

    armed = true;
    std::thread run([&] { CHECK(run_daily(day2, writer, {&source}, {}, config).ok()); });

    std::vector<std::pair<std::string, std::string>> bodies(kRequests);
    std::vector<int> statuses(kRequests, 0);
    std::vector<std::thread> clients;
    std::atomic<int> next{0};
    for (int c = 0; c < 4; ++c) {
        clients.emplace_back([&] {
            httplib::Client client("127.0.0.1", port);
            for (int i = next++; i < kRequests; i = next++) {
                if (i >= kRequests / 2) wait_for([&] { return published.load(); });
                const auto& path = i % 2 == 0 ? forecast_path : history_path;
                if (auto res = client.Get(path)) {
                    statuses[i] = res->status;
                    bodies[i] = {path, res->body};
                }
                ++done;
            }
        });
    }
    for (auto& t : clients) t.join();
    run.join();
    server.stop();
    serving.join();

    const auto new_forecast = api.handle({"GET", forecast_path, {}, {}}).body;
    const auto new_history = api.handle({"GET", "/api/v1/history/M001/tomato", {{"days", "30"}}, {}}).body;
    REQUIRE(new_forecast != old_forecast);
    REQUIRE(new_history != old_history);

    int old_seen = 0;
    int new_seen = 0;
    for (int i = 0; i < kRequests; ++i) {
        REQUIRE(statuses[i] == 200);
        const auto& [path, body] = bodies[i];
        const auto& old_body = path == forecast_path ? old_forecast : old_history;
        const auto& new_body = path == forecast_path ? new_forecast : new_history;
        CHECK((body == old_body || body == new_body));
        old_seen += body == old_body;
        new_seen += body == new_body;
    }
    CHECK(old_seen + new_seen == kRequests);
    CHECK(old_seen >= kRequests / 2);
    CHECK(new_seen >= 1);
}
