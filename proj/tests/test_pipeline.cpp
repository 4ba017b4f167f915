#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mandi/pipeline.hpp"
#include "test_support.hpp"

using namespace mandi;
using namespace mandi::testing;

namespace {

std::string snapshot_json(const Snapshot& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : s.forecasts) arr.push_back(to_json(r));
    return arr.dump();
}

struct Fixture {
    TempDir dir;
    SyntheticData data = small_market_data();
    Date last = add_days(data.start_date, 199);
    Store store{dir.path()};
    MemorySource source{data.rows};
    PipelineConfig config = light_pipeline_config();

    Fixture() { seed_store(store, data, last); }
    RunReport run() { return run_daily(last, store, {&source}, {}, config); }
};

}  // namespace

TEST_CASE("store: registry and observations round-trip, merge is last-wins") {
    TempDir dir;
    Store store(dir.path());
    auto data = small_market_data(20);
    store.put_markets(data.registry);
    CHECK(store.markets().size() == 3);

    auto stats = store.merge_observations(data.rows);
    CHECK(stats.added == data.rows.size());
    CHECK(stats.replaced == 0);

    auto changed = data.rows.front();
    changed.modal_price = 4321.0;
    stats = store.merge_observations({changed});
    CHECK(stats.added == 0);
    CHECK(stats.replaced == 1);
    const auto rows = store.observations();
    CHECK(rows.size() == data.rows.size());
    CHECK(std::count(rows.begin(), rows.end(), changed) == 1);
}

TEST_CASE("store: snapshots publish atomically and runs append") {
    TempDir dir;
    Store store(dir.path());
    CHECK_FALSE(store.published_id());
    CHECK(store.published() == nullptr);

    Snapshot s;
    s.id = "2020-01-01.1";
    s.run_date = parse_date("2020-01-01");
    CHECK(store.archive_snapshot(s) == s.id);
    CHECK_THROWS(store.publish("2020-01-02.1"));
    store.publish(s.id);
    REQUIRE(store.published());
    CHECK(store.published()->id == s.id);

    CHECK(store.next_attempt(s.run_date) == 1);
    store.append_run({{"run_date", "2020-01-01"}, {"attempt", 1}});
    store.append_run({{"run_date", "2020-01-01"}, {"attempt", 2}});
    CHECK(store.runs().size() == 2);
    CHECK(store.next_attempt(s.run_date) == 3);
    CHECK(store.next_attempt(parse_date("2020-01-02")) == 1);
}

TEST_CASE("store: the writer lease is exclusive") {
    TempDir dir;
    Store store(dir.path());
    {
        auto lease = store.acquire_lease("first");
        CHECK_THROWS_AS(store.acquire_lease("second"), StoreBusy);
    }
    CHECK_NOTHROW(store.acquire_lease("third"));
}

TEST_CASE("forecast: model and record survive JSON round-trips") {
    auto data = small_market_data(120);
    const auto panels = prepare_panels(data.rows, data.registry, "tomato", data.start_date,
                                       add_days(data.start_date, 119), ImputeConfig{.max_rank = 2, .max_iters = 40});
    const auto qp = quantize_ending_at_last_day(panels.price, 7);
    const auto qv = quantize_ending_at_last_day(panels.volume, 7);
    TrainSettings settings{5, {2, 2, 1.0, 8}, 3, 1, 0.8, 0.2};
    const auto model = fit_market_model(qp, qv, data.registry, "M001", settings);
    REQUIRE(model);

    const auto back = model_from_json(model_to_json(*model));
    CHECK(back.meta == model->meta);
    CHECK(forest_to_json(back.forest) == forest_to_json(model->forest));

    const auto as_of = add_days(data.start_date, 119);
    const auto r = make_forecast(*model, qp, qv, as_of, "t");
    CHECK(r.target_start == add_days(as_of, 1));
    CHECK(r.target_end == add_days(as_of, 7));
    CHECK(r.posterior[0] + r.posterior[1] + r.posterior[2] == doctest::Approx(1.0));
    CHECK(r.interval.lower <= r.interval.upper);
    CHECK(r.evidence.size() <= kEvidenceTopN);
    CHECK(to_json(forecast_from_json(to_json(r))) == to_json(r));

    CHECK_THROWS(make_forecast(*model, qp, qv, add_days(as_of, 1), "t"));
}

TEST_CASE("forecast: a panel with too few steps yields no model") {
    auto data = small_market_data(60);
    const auto panels = prepare_panels(data.rows, data.registry, "tomato", data.start_date,
                                       add_days(data.start_date, 59), ImputeConfig{.max_rank = 2, .max_iters = 40});
    const auto qp = quantize_ending_at_last_day(panels.price, 7);  // 8 steps
    const auto qv = quantize_ending_at_last_day(panels.volume, 7);
    TrainSettings settings{8, {2, 2, 1.0, 8}, 3, 1, 0.8, 0.2};
    CHECK_FALSE(fit_market_model(qp, qv, data.registry, "M001", settings));
}

TEST_CASE("pipeline: a daily run writes and publishes every servable forecast") {
    Fixture f;
    const auto report = f.run();
    CHECK(report.ok());
    for (const auto& s : report.stages) CHECK_MESSAGE(s.status == StageStatus::Ok, s.name << ": " << s.error);
    // 200 days: q = 28 gives 7 steps, fewer than tau + 1.
    CHECK(report.forecasts_written == 9);
    CHECK(report.insufficient_history == 3);
    CHECK(report.rows_acquired == 3);
    CHECK(report.attempt == 1);
    CHECK(report.published);

    const auto snap = f.store.published();
    REQUIRE(snap);
    CHECK(snap->id == report.snapshot_id);
    CHECK(snap->forecasts.size() == 9);
    CHECK(snap->run_date == f.last);
    for (const auto& r : snap->forecasts) {
        CHECK(r.as_of == f.last);
        CHECK(r.model_version == 0);
        CHECK(r.q != 28);
    }
    const auto runs = f.store.runs();
    REQUIRE(runs.size() == 1);
    CHECK(runs[0]["ok"] == true);
}

TEST_CASE("pipeline: evidence refers to rows of the archived panels") {
    Fixture f;
    REQUIRE(f.run().ok());
    const auto snap = f.store.published();
    REQUIRE(snap);
    const auto& hist = snap->history.at("tomato");
    CHECK(hist.raw_price.num_days == 200);
    for (const auto& r : snap->forecasts) {
        REQUIRE_FALSE(r.evidence.empty());
        for (const auto& e : r.evidence) {
            const auto& markets = hist.raw_price.markets;
            CHECK(std::find(markets.begin(), markets.end(), e["market_id"].get<std::string>()) != markets.end());
            const auto start = parse_date(e["step_start_date"].get<std::string>());
            const auto end = parse_date(e["step_end_date"].get<std::string>());
            CHECK(start >= hist.raw_price.start_date);
            CHECK(end <= f.last);
            CHECK(days_between(start, end) + 1 == r.q);
        }
    }
}

TEST_CASE("pipeline: a failed acquire skips later stages and keeps the published snapshot") {
    Fixture f;
    REQUIRE(f.run().ok());
    const auto before = f.store.published_id();

    FailingSource failing;
    const auto report = run_daily(f.last, f.store, {&failing}, {}, f.config);
    CHECK_FALSE(report.ok());
    CHECK(report.stage("acquire").status == StageStatus::Failed);
    CHECK(report.stage("acquire").error.find("upstream unavailable") != std::string::npos);
    for (const char* name : {"clean", "predict", "archive", "check", "report"}) {
        CHECK(report.stage(name).status == StageStatus::Skipped);
    }
    CHECK(f.store.published_id() == before);
    const auto runs = f.store.runs();
    REQUIRE(runs.size() == 2);
    CHECK(runs[1]["ok"] == false);
    CHECK(runs[1]["attempt"] == 2);
}

TEST_CASE("pipeline: rerunning a day republishes identical forecasts") {
    Fixture f;
    REQUIRE(f.run().ok());
    const auto first = f.store.published();
    const auto rows_before = f.store.observations().size();
    const auto second_report = f.run();
    REQUIRE(second_report.ok());
    CHECK(second_report.attempt == 2);
    CHECK(second_report.rows_acquired == 3);
    CHECK(f.store.observations().size() == rows_before);
    const auto second = f.store.published();
    CHECK(second->id != first->id);
    CHECK(snapshot_json(*second) == snapshot_json(*first));
}

TEST_CASE("pipeline: the run holds the lease") {
    Fixture f;
    auto lease = f.store.acquire_lease("someone else");
    CHECK_THROWS_AS(f.run(), StoreBusy);
}

TEST_CASE("pipeline: report sinks receive the run report") {
    Fixture f;
    const auto path = f.dir.path() / "last-report.json";
    FileReportSink file(path);
    std::ostringstream log;
    LogReportSink logger(log);
    const auto report = run_daily(f.last, f.store, {&f.source}, {&file, &logger}, f.config);
    REQUIRE(report.ok());
    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["snapshot_id"] == report.snapshot_id);
    CHECK(j["forecasts_written"] == 9);
    CHECK(nlohmann::json::parse(log.str())["report"]["ok"] == true);
}

TEST_CASE("retrain: deterministic, versioned, and used by later runs") {
    Fixture f;
    RetrainConfig rc;
    rc.tau = 10;
    rc.q = 7;
    rc.grid.max_rank = {3};
    rc.grid.k = {2};
    rc.grid.num_trees = {10};
    rc.impute = f.config.impute;
    rc.seed = 12;
    rc.jobs = 1;

    const auto a = retrain("tomato", "M002", f.store, rc);
    REQUIRE(a.model_version);
    CHECK(*a.model_version == 1);
    CHECK_FALSE(a.flagged);
    const auto b = retrain("tomato", "M002", f.store, rc);
    REQUIRE(b.model_version);
    CHECK(*b.model_version == 2);
    CHECK(f.store.current_model_version("tomato", "M002", 7) == 2);

    const auto m1 = f.store.load_model("tomato", "M002", 7, 1);
    const auto m2 = f.store.load_model("tomato", "M002", 7, 2);
    CHECK(forest_to_json(m1.forest) == forest_to_json(m2.forest));
    CHECK(m1.meta.l == m2.meta.l);

    // The next run forecasts q = 7 for M002 from the stored model.
    REQUIRE(f.run().ok());
    const auto snap = f.store.published();
    bool found = false;
    for (const auto* r : snap->forecasts_for("M002", "tomato")) {
        if (r->q == 7) {
            CHECK(r->model_version == 2);
            found = true;
        } else {
            CHECK(r->model_version == 0);
        }
    }
    CHECK(found);
}

TEST_CASE("retrain: too little history is flagged and keeps the current version") {
    Fixture f;
    RetrainConfig rc;
    rc.q = 7;
    rc.grid.max_rank = {3};
    rc.grid.k = {2};
    rc.grid.num_trees = {10};
    rc.impute = f.config.impute;
    rc.jobs = 1;
    rc.tau = 10;
    REQUIRE(retrain("tomato", "M001", f.store, rc).model_version == 1);

    // 199 archived days give 28 steps of 7; tau = 28 leaves S = tau.
    rc.tau = 28;
    const auto r = retrain("tomato", "M001", f.store, rc);
    CHECK(r.flagged);
    CHECK_FALSE(r.model_version);
    CHECK(r.message.find("insufficient history") != std::string::npos);
    CHECK(f.store.current_model_version("tomato", "M001", 7) == 1);
}

TEST_CASE("forecast_market: forecasts from archived data without a run") {
    Fixture f;
    const auto as_of = add_days(f.last, -1);
    const auto records = forecast_market(f.store, "tomato", "M002", as_of, f.config);
    REQUIRE(records.size() == 3);
    for (const auto& r : records) {
        CHECK(r.market_id == "M002");
        CHECK(r.as_of == as_of);
    }
    CHECK_THROWS_AS(forecast_market(f.store, "tomato", "NOPE", as_of, f.config), std::invalid_argument);
    CHECK_THROWS_AS(forecast_market(f.store, "onion", "M002", as_of, f.config), std::invalid_argument);
}
