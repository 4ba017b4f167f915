#include "mandi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "mandi/parallel.hpp"

namespace mandi {

namespace fs = std::filesystem;

namespace {

// First day of the history window for `produce` ending at `end`, if any row falls on or before it.
std::optional<Date> window_start(const std::vector<ObservationRow>& rows, const std::string& produce, Date end,
                                 int history_days) {
    std::optional<Date> first;
    for (const auto& r : rows) {
        if (r.produce != produce || r.date > end || !r.modal_price) continue;
        if (!first || r.date < *first) first = r.date;
    }
    if (!first) return std::nullopt;
    return std::max(*first, add_days(end, -(history_days - 1)));
}

std::vector<std::string> produce_names(const std::vector<ObservationRow>& rows, Date end) {
    std::set<std::string> names;
    for (const auto& r : rows) {
        if (r.date <= end) names.insert(r.produce);
    }
    return {names.begin(), names.end()};
}

std::vector<std::string> located_markets(const MarketRegistry& registry) {
    std::vector<std::string> out;
    for (const auto& m : registry.markets()) {
        if (m.has_coordinates()) out.push_back(m.market_id);
    }
    return out;
}

struct ProduceForecasts {
    std::vector<ForecastRecord> records;
    std::size_t insufficient = 0;
};

ProduceForecasts forecast_produce(const Store& store, const MarketRegistry& registry, const PreparedPanels& panels,
                                  const std::vector<std::string>& markets, Date as_of, const PipelineConfig& config,
                                  const std::string& stamp) {
    struct Job {
        int q;
        std::string market;
    };
    std::vector<Job> jobs;
    for (int q : config.horizons) {
        for (const auto& m : markets) jobs.push_back({q, m});
    }
    std::map<int, std::pair<QuantizedPanel, QuantizedPanel>> quantized;
    for (int q : config.horizons) {
        if (static_cast<std::size_t>(q) > panels.price.num_days()) continue;
        quantized.emplace(q, std::make_pair(quantize_ending_at_last_day(panels.price, q),
                                            quantize_ending_at_last_day(panels.volume, q)));
    }

    const auto& produce = panels.price.produce;
    std::vector<std::optional<ForecastRecord>> results(jobs.size());
    parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto it = quantized.find(job.q);
        if (it == quantized.end()) return;
        const auto& [qp, qv] = it->second;
        auto model = store.load_current_model(produce, job.market, job.q);
        if (!model) {
            TrainSettings settings;
            settings.tau = config.tau;
            settings.candidate = config.default_candidate;
            settings.seed = config.seed;
            settings.jobs = 1;
            settings.alpha = config.alpha;
            model = fit_market_model(qp, qv, registry, job.market, settings);
            if (!model) return;
        }
        if (qp.num_steps() < model->meta.tau + 1) return;
        results[i] = make_forecast(*model, qp, qv, as_of, stamp, config.evidence_top_n);
    });

    ProduceForecasts out;
    for (auto& r : results) {
        if (r) {
            out.records.push_back(std::move(*r));
        } else {
            ++out.insufficient;
        }
    }
    std::sort(out.records.begin(), out.records.end(), [](const ForecastRecord& a, const ForecastRecord& b) {
        return std::tie(a.market_id, a.q) < std::tie(b.market_id, b.q);
    });
    return out;
}

void check_record(const ForecastRecord& r, const Snapshot& snap) {
    const auto where = r.produce + "/" + r.market_id + "/q" + std::to_string(r.q);
    const double sum = r.posterior[0] + r.posterior[1] + r.posterior[2];
    if (std::abs(sum - 1.0) > 1e-9) throw std::runtime_error(where + ": posterior does not sum to 1");
    if (!(r.interval.lower <= r.interval.upper)) throw std::runtime_error(where + ": interval lower > upper");
    const auto hist = snap.history.find(r.produce);
    if (hist == snap.history.end()) throw std::runtime_error(where + ": produce missing from the archived panels");
    const auto& markets = hist->second.raw_price.markets;
    double previous = 2.0;
    for (const auto& e : r.evidence) {
        const double w = e.at("weight");
        if (w > previous) throw std::runtime_error(where + ": evidence not sorted by weight");
        previous = w;
        if (std::find(markets.begin(), markets.end(), e.at("market_id").get<std::string>()) == markets.end()) {
            throw std::runtime_error(where + ": evidence references a market outside the archived panel");
        }
        if (parse_date(e.at("step_end_date").get<std::string>()) > snap.run_date) {
            throw std::runtime_error(where + ": evidence dated after the run");
        }
    }
}

}  // namespace

std::vector<ObservationRow> CsvDirectorySource::fetch(Date day) {
    const auto path = dir_ / (format_date(day) + ".csv");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("source " + name() + ": no file for " + format_date(day));
    return parse_observations(in);
}

void FileReportSink::emit(const nlohmann::json& report) { write_file_atomic(path_, report.dump(2) + "\n"); }

void LogReportSink::emit(const nlohmann::json& report) {
    out_ << nlohmann::json{{"stage", "report"}, {"event", "run_report"}, {"report", report}}.dump() << std::endl;
}

const char* status_name(StageStatus s) {
    switch (s) {
        case StageStatus::Ok: return "ok";
        case StageStatus::Failed: return "failed";
        case StageStatus::Skipped: return "skipped";
    }
    return "?";
}

bool RunReport::ok() const {
    return std::all_of(stages.begin(), stages.end(), [](const StageResult& s) { return s.status == StageStatus::Ok; });
}

const StageResult& RunReport::stage(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("no stage " + name);
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"name", s.name}, {"status", status_name(s.status)}, {"seconds", s.seconds}, {"error", s.error}});
    }
    return {{"run_date", format_date(r.run_date)},
            {"attempt", r.attempt},
            {"stages", stages},
            {"rows_acquired", r.rows_acquired},
            {"outliers_removed", r.outliers_removed},
            {"forecasts_written", r.forecasts_written},
            {"insufficient_history", r.insufficient_history},
            {"snapshot_id", r.snapshot_id},
            {"published", r.published},
            {"ok", r.ok()}};
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunReport run_daily(Date run_date, Store& store, std::vector<ObservationSource*> sources,
                    const std::vector<ReportSink*>& sinks, const PipelineConfig& config) {
    auto lease = store.acquire_lease("daily-run " + format_date(run_date));
    RunReport report;
    report.run_date = run_date;
    report.attempt = store.next_attempt(run_date);
    for (const char* name : kStageNames) report.stages.push_back({name, StageStatus::Skipped, 0.0, {}});

    bool failed = false;
    auto stage = [&](std::size_t index, auto&& body) {
        auto& s = report.stages[index];
        if (failed) return;
        const auto start = std::chrono::steady_clock::now();
        try {
            body();
            s.status = StageStatus::Ok;
        } catch (const std::exception& e) {
            s.status = StageStatus::Failed;
            s.error = e.what();
            failed = true;
        }
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    const std::string stamp = config.clock ? config.clock() : utc_timestamp();
    MarketRegistry registry;
    std::map<std::string, CleanedPanels> cleaned;
    std::map<std::string, PreparedPanels> prepared;
    Snapshot snapshot;
    snapshot.id = format_date(run_date) + "." + std::to_string(report.attempt);
    snapshot.run_date = run_date;

    stage(0, [&] {
        if (sources.empty()) throw std::runtime_error("no observation source configured");
        std::vector<ObservationRow> rows;
        for (auto* source : sources) {
            auto fetched = source->fetch(run_date);
            rows.insert(rows.end(), std::make_move_iterator(fetched.begin()), std::make_move_iterator(fetched.end()));
        }
        store.merge_observations(rows);
        report.rows_acquired = rows.size();
    });
    stage(1, [&] {
        registry = store.markets();
        if (registry.empty()) throw std::runtime_error("market registry is empty");
        const auto rows = store.observations();
        for (const auto& produce : produce_names(rows, run_date)) {
            const auto start = window_start(rows, produce, run_date, config.history_days);
            if (!start) continue;
            auto c = clean_panels(rows, registry, produce, *start, run_date, config.outliers);
            report.outliers_removed += c.outliers_removed;
            cleaned.emplace(produce, std::move(c));
        }
        if (cleaned.empty()) throw std::runtime_error("no price observations on or before " + format_date(run_date));
    });
    stage(2, [&] {
        const auto markets = located_markets(registry);
        for (auto& [produce, c] : cleaned) {
            auto panels = impute_panels(std::move(c), config.impute);
            auto f = forecast_produce(store, registry, panels, markets, run_date, config, stamp);
            report.insufficient_history += f.insufficient;
            snapshot.forecasts.insert(snapshot.forecasts.end(), std::make_move_iterator(f.records.begin()),
                                      std::make_move_iterator(f.records.end()));
            snapshot.history.emplace(produce, PanelHistory{panels.raw_price, panels.price});
        }
        report.forecasts_written = snapshot.forecasts.size();
    });
    stage(3, [&] { report.snapshot_id = store.archive_snapshot(snapshot); });
    stage(4, [&] {
        const auto stored = store.load_snapshot(report.snapshot_id);
        if (stored->forecasts.size() != snapshot.forecasts.size()) {
            throw std::runtime_error("archived forecast count differs from the run's");
        }
        for (const auto& r : stored->forecasts) check_record(r, *stored);
        store.publish(report.snapshot_id);
        report.published = true;
    });

    auto& rep = report.stages[5];
    rep.status = failed ? StageStatus::Skipped : StageStatus::Ok;
    const auto start = std::chrono::steady_clock::now();
    try {
        store.append_run(to_json(report));
    } catch (const std::exception& e) {
        rep.status = StageStatus::Failed;
        rep.error = e.what();
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto json = to_json(report);
    for (auto* sink : sinks) {
        try {
            sink->emit(json);
        } catch (const std::exception& e) {
            rep.status = StageStatus::Failed;
            rep.error = e.what();
        }
    }
    return report;
}

std::vector<ForecastRecord> forecast_market(const Store& store, const std::string& produce,
                                            const std::string& market_id, Date as_of, const PipelineConfig& config) {
    const auto registry = store.markets();
    if (!registry.index_of(market_id)) throw std::invalid_argument("unknown market " + market_id);
    if (!registry.at(market_id).has_coordinates()) {
        throw std::invalid_argument("market " + market_id + " has no coordinates");
    }
    const auto rows = store.observations();
    const auto start = window_start(rows, produce, as_of, config.history_days);
    if (!start) throw std::invalid_argument("no " + produce + " prices on or before " + format_date(as_of));
    const auto panels = prepare_panels(rows, registry, produce, *start, as_of, config.impute, config.outliers);
    return forecast_produce(store, registry, panels, {market_id}, as_of, config,
                            config.clock ? config.clock() : utc_timestamp())
        .records;
}

RetrainResult retrain(const std::string& produce, const std::string& market_id, Store& store,
                      const RetrainConfig& config) {
    auto lease = store.acquire_lease("retrain " + produce + "/" + market_id);
    RetrainResult out;
    const auto registry = store.markets();
    if (!registry.index_of(market_id)) throw std::invalid_argument("unknown market " + market_id);
    const auto rows = store.observations();
    std::optional<Date> last;
    for (const auto& r : rows) {
        if (r.produce == produce && r.modal_price && (!last || r.date > *last)) last = r.date;
    }
    if (!last) throw std::invalid_argument("no archived " + produce + " prices");
    const auto start = *window_start(rows, produce, *last, config.history_days);
    const auto cleaned = clean_panels(rows, registry, produce, start, *last, config.outliers);

    const auto candidates = config.grid.candidates();
    if (candidates.empty()) throw std::invalid_argument("retrain: empty grid");
    out.candidate = candidates.front();
    if (candidates.size() > 1) {
        CvConfig cv;
        cv.q = config.q;
        cv.tau = config.tau;
        cv.grid = config.grid;
        cv.target_markets = {market_id};
        cv.impute = config.impute;
        cv.seed = config.seed;
        cv.jobs = config.jobs;
        cv.t2 = add_days(*last, -(config.q - 1));
        cv.t1 = std::max(add_days(cv.t2, -(config.validation_days - 1)), start);
        if (cv.t1 < cv.t2) {
            DataBundle bundle{registry, cleaned.price, cleaned.volume};
            out.sweep = sweep(bundle, cv);
            if (!std::isnan(out.sweep->best_score)) out.candidate = out.sweep->best;
        }
    }

    ImputeConfig impute = config.impute;
    impute.max_rank = out.candidate.max_rank;
    const auto panels = impute_panels(cleaned, impute);
    if (static_cast<std::size_t>(config.q) > panels.price.num_days()) {
        out.flagged = true;
        out.message = "insufficient history: fewer days than the step size";
        return out;
    }
    const auto qp = quantize_ending_at_last_day(panels.price, config.q);
    const auto qv = quantize_ending_at_last_day(panels.volume, config.q);
    TrainSettings settings{config.tau, out.candidate, config.seed, config.jobs, config.alpha, 0.2};
    auto model = fit_market_model(qp, qv, registry, market_id, settings);
    if (!model) {
        out.flagged = true;
        out.message = "insufficient history: " + std::to_string(qp.num_steps()) + " steps, need " +
                      std::to_string(config.tau + 1);
        return out;
    }
    out.model_version = store.put_model(std::move(*model));
    out.message = "stored version " + std::to_string(*out.model_version);
    return out;
}

}  // namespace mandi
