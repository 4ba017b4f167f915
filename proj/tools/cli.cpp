#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mandi/pipeline.hpp"
#include "mandi/service.hpp"

namespace mandi::cli {

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class Logger {
public:
    explicit Logger(std::ostream& err) : err_(err) {}
    void operator()(const std::string& level, const std::string& stage, const std::string& event,
                    nlohmann::json fields = nlohmann::json::object()) const {
        fields["ts"] = utc_timestamp();
        fields["level"] = level;
        fields["stage"] = stage;
        fields["event"] = event;
        err_ << fields.dump() << std::endl;
    }

private:
    std::ostream& err_;
};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size() || v < 1) throw std::invalid_argument("not a positive integer: " + item);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

int parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) throw UsageError(key + ": not an integer: " + value);
    return v;
}

void apply_setting(CliConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "store") {
        cfg.store = value;
    } else if (key == "data_dir") {
        cfg.data_dir = value;
    } else if (key == "tau") {
        cfg.tau = parse_int(key, value);
    } else if (key == "horizons") {
        try {
            cfg.horizons = parse_int_list(value);
        } catch (const std::exception& e) {
            throw UsageError("horizons: " + std::string(e.what()));
        }
    } else if (key == "history_days") {
        cfg.history_days = parse_int(key, value);
    } else if (key == "max_rank") {
        cfg.max_rank = parse_int(key, value);
    } else if (key == "admin_token_env") {
        cfg.admin_token_env = value;
    } else if (key == "timezone") {
        cfg.timezone = value;
    } else if (key == "seed") {
        try {
            cfg.seed = std::stoull(value);
        } catch (const std::exception&) {
            throw UsageError("seed: not an integer: " + value);
        }
    } else if (key == "jobs") {
        cfg.jobs = parse_int(key, value);
    } else {
        throw UsageError("unknown config key '" + key + "'");
    }
}

void validate(const CliConfig& cfg) {
    if (cfg.tau < 1) throw UsageError("tau must be at least 1");
    if (cfg.history_days < 1) throw UsageError("history_days must be at least 1");
    if (cfg.max_rank < 1) throw UsageError("max_rank must be at least 1");
    if (cfg.jobs < 0) throw UsageError("jobs must not be negative");
}

Date today_in(const std::string& timezone) {
    ::setenv("TZ", timezone.c_str(), 1);
    ::tzset();
    const auto now = std::time(nullptr);
    std::tm tm{};
    localtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return parse_date(buf);
}

std::optional<Date> last_observed(const std::vector<ObservationRow>& rows, const std::string& produce) {
    std::optional<Date> last;
    for (const auto& r : rows) {
        if (r.produce == produce && r.modal_price && (!last || r.date > *last)) last = r.date;
    }
    return last;
}

std::optional<Date> first_observed(const std::vector<ObservationRow>& rows, const std::string& produce) {
    std::optional<Date> first;
    for (const auto& r : rows) {
        if (r.produce == produce && r.modal_price && (!first || r.date < *first)) first = r.date;
    }
    return first;
}

std::string resolve_produce(const std::vector<ObservationRow>& rows, const std::string& requested) {
    if (!requested.empty()) return requested;
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.produce);
    if (names.size() != 1) throw UsageError("--produce is required when the store holds several produce");
    return *names.begin();
}

ImputeConfig impute_config(const CliConfig& cfg) {
    ImputeConfig impute;
    impute.max_rank = cfg.max_rank;
    impute.rng_seed = cfg.seed;
    return impute;
}

PipelineConfig pipeline_config(const CliConfig& cfg) {
    PipelineConfig p;
    p.horizons = cfg.horizons;
    p.tau = cfg.tau;
    p.history_days = cfg.history_days;
    p.impute = impute_config(cfg);
    p.default_candidate.max_rank = cfg.max_rank;
    p.seed = cfg.seed;
    p.jobs = cfg.jobs;
    return p;
}

void print_evidence_table(std::ostream& err, const ForecastRecord& r) {
    err << r.produce << " " << r.market_id << " q=" << r.q << " " << wire_name(r.direction) << " (down "
        << std::fixed << std::setprecision(2) << 100 * r.posterior[0] << "%, flat " << 100 * r.posterior[1]
        << "%, up " << 100 * r.posterior[2] << "%) predicted " << r.predicted_price << " Rs/quintal, interval ["
        << r.interval.lower << ", " << r.interval.upper << "]\n";
    err << "  " << std::left << std::setw(6) << "rank" << std::setw(12) << "market" << std::setw(24) << "step"
        << std::setw(10) << "weight" << "price\n";
    int rank = 1;
    for (const auto& e : r.evidence) {
        err << "  " << std::setw(6) << rank++ << std::setw(12) << e["market_id"].get<std::string>()
            << std::setw(24)
            << (e["step_start_date"].get<std::string>() + ".." + e["step_end_date"].get<std::string>())
            << std::setw(10) << std::setprecision(4) << e["weight"].get<double>() << std::setprecision(2)
            << e["neighbor_price"].get<double>() << "\n";
    }
    err << std::right << std::defaultfloat;
}

nlohmann::json candidate_json(const Candidate& c) {
    return {{"max_rank", c.max_rank}, {"k", c.k}, {"C", c.C}, {"num_trees", c.num_trees}};
}

CvGrid load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read grid file " + path);
    return parse_grid(in);
}

// Subcommands -------------------------------------------------------------------------------

struct IngestArgs {
    std::string observations;
    std::string markets;
};

int cmd_ingest(const CliConfig& cfg, const IngestArgs& args, std::ostream& out, const Logger& log) {
    Store store(cfg.store);
    if (!args.markets.empty()) {
        std::ifstream in(args.markets);
        if (!in) throw std::runtime_error("cannot read " + args.markets);
        try {
            store.put_markets(parse_markets(in));
        } catch (const ParseError& e) {
            throw std::runtime_error(args.markets + ": " + e.what());
        }
    }
    const auto registry = store.markets();
    if (registry.empty()) throw std::runtime_error("no market registry; pass --markets");

    std::ifstream in(args.observations);
    if (!in) throw std::runtime_error("cannot read " + args.observations);
    std::vector<ObservationRow> rows;
    try {
        rows = parse_observations(in);
    } catch (const ParseError& e) {
        throw std::runtime_error(args.observations + ": " + e.what());
    }
    std::vector<ObservationRow> known;
    std::size_t unknown = 0;
    for (auto& r : rows) {
        if (registry.index_of(r.market_id)) {
            known.push_back(std::move(r));
        } else {
            ++unknown;
        }
    }
    if (unknown > 0) log("warn", "acquire", "unknown_markets_skipped", {{"count", unknown}});
    const auto stats = store.merge_observations(known);
    out << nlohmann::json{{"markets", registry.size()},
                          {"rows_read", rows.size()},
                          {"added", stats.added},
                          {"replaced", stats.replaced},
                          {"skipped_unknown_market", unknown}}
               .dump(2)
        << "\n";
    return kExitOk;
}

struct ImputeArgs {
    std::string produce;
    std::string from;
    std::string to;
    std::string output;
};

int cmd_impute(const CliConfig& cfg, const ImputeArgs& args, std::ostream& out, const Logger& log) {
    Store store(cfg.store);
    const auto rows = store.observations();
    const auto produce = resolve_produce(rows, args.produce);
    const auto last = last_observed(rows, produce);
    if (!last) throw std::runtime_error("no " + produce + " prices in the store");
    const Date end = args.to.empty() ? *last : parse_date(args.to);
    const Date start = args.from.empty() ? std::max(*first_observed(rows, produce), add_days(end, -(cfg.history_days - 1)))
                                         : parse_date(args.from);
    log("info", "clean", "impute_window", {{"produce", produce}, {"start", format_date(start)}, {"end", format_date(end)}});
    const auto panels = prepare_panels(rows, store.markets(), produce, start, end, impute_config(cfg));
    if (!args.output.empty()) {
        std::ostringstream csv;
        csv << "date,market_id,raw_price,imputed_price\n" << std::setprecision(17);
        for (std::size_t m = 0; m < panels.raw_price.num_markets(); ++m) {
            for (std::size_t t = 0; t < panels.raw_price.num_days; ++t) {
                csv << format_date(panels.raw_price.date_of(t)) << "," << panels.raw_price.markets[m] << ",";
                if (const auto& v = panels.raw_price.values(m, t)) csv << *v;
                csv << "," << panels.price.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)) << "\n";
            }
        }
        write_file_atomic(args.output, csv.str());
    }
    auto report = to_json(panels.impute_report);
    report.erase("objective_trace");
    out << nlohmann::json{{"produce", produce},
                          {"start", format_date(start)},
                          {"end", format_date(end)},
                          {"markets", panels.raw_price.num_markets()},
                          {"days", panels.raw_price.num_days},
                          {"observed_cells", panels.raw_price.present_count()},
                          {"outliers_removed", panels.outliers_removed},
                          {"impute", report}}
               .dump(2)
        << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string produce;
    std::string market;
    int q = 7;
    std::string grid;
    int k = 5;
    double C = 1.0;
    int trees = 100;
    int validation_days = 56;
};

int cmd_train(const CliConfig& cfg, const TrainArgs& args, std::ostream& out, const Logger& log) {
    Store store(cfg.store);
    RetrainConfig rc;
    rc.q = args.q;
    rc.tau = cfg.tau;
    rc.history_days = cfg.history_days;
    rc.impute = impute_config(cfg);
    rc.validation_days = args.validation_days;
    rc.seed = cfg.seed;
    rc.jobs = cfg.jobs;
    if (args.grid.empty()) {
        rc.grid.max_rank = {cfg.max_rank};
        rc.grid.k = {args.k};
        rc.grid.C = {args.C};
        rc.grid.num_trees = {args.trees};
    } else {
        rc.grid = load_grid(args.grid);
    }
    const auto produce = resolve_produce(store.observations(), args.produce);
    const auto result = retrain(produce, args.market, store, rc);
    nlohmann::json j{{"produce", produce},
                     {"market_id", args.market},
                     {"q", args.q},
                     {"model_version", result.model_version ? nlohmann::json(*result.model_version) : nlohmann::json()},
                     {"flagged", result.flagged},
                     {"message", result.message},
                     {"candidate", candidate_json(result.candidate)}};
    if (result.sweep) j["best_score"] = result.sweep->best_score;
    out << j.dump(2) << "\n";
    log(result.flagged ? "warn" : "info", "predict", "retrain", {{"message", result.message}});
    return result.flagged ? kExitDomain : kExitOk;
}

struct ForecastArgs {
    std::string produce;
    std::string market;
    int q = 0;
    std::string date;
};

int cmd_forecast(const CliConfig& cfg, const ForecastArgs& args, std::ostream& out, std::ostream& err) {
    Store store(cfg.store);
    const auto rows = store.observations();
    const auto produce = resolve_produce(rows, args.produce);
    auto pc = pipeline_config(cfg);
    if (args.q > 0) pc.horizons = {args.q};
    Date as_of{};
    if (!args.date.empty()) {
        as_of = parse_date(args.date);
    } else if (const auto last = last_observed(rows, produce)) {
        as_of = *last;
    } else {
        throw std::runtime_error("no " + produce + " prices in the store");
    }
    const auto records = forecast_market(store, produce, args.market, as_of, pc);
    if (records.empty()) throw std::runtime_error("insufficient history for every requested horizon");
    for (const auto& r : records) print_evidence_table(err, r);
    if (args.q > 0) {
        out << to_json(records.front()).dump(2) << "\n";
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(to_json(r));
        out << arr.dump(2) << "\n";
    }
    return kExitOk;
}

struct EvaluateArgs {
    std::string from;
    std::string to;
    std::string grid;
    std::string produce;
    int q = 1;
    std::string classifier = "forest";
    std::string targets;
    bool frozen = false;
    std::string output;
};

int cmd_evaluate(const CliConfig& cfg, const EvaluateArgs& args, std::ostream& out, const Logger& log) {
    Store store(cfg.store);
    const auto rows = store.observations();
    const auto produce = resolve_produce(rows, args.produce);
    const auto first = first_observed(rows, produce);
    if (!first) throw std::runtime_error("no " + produce + " prices in the store");
    const auto registry = store.markets();
    const auto cleaned = clean_panels(rows, registry, produce, *first, *last_observed(rows, produce));

    CvConfig cv;
    cv.t1 = parse_date(args.from);
    cv.t2 = parse_date(args.to);
    cv.q = args.q;
    cv.tau = cfg.tau;
    cv.grid = load_grid(args.grid);
    cv.classifier = classifier_from_name(args.classifier);
    cv.frozen_imputation = args.frozen;
    cv.impute = impute_config(cfg);
    cv.seed = cfg.seed;
    cv.jobs = cfg.jobs;
    if (!args.targets.empty()) {
        std::stringstream in(args.targets);
        std::string id;
        while (std::getline(in, id, ',')) cv.target_markets.push_back(trim(id));
    }
    log("info", "predict", "sweep_start", {{"candidates", cv.grid.candidates().size()}, {"produce", produce}});
    const auto result = sweep({registry, cleaned.price, cleaned.volume}, cv);
    if (args.output.empty()) {
        write_score_table(out, result);
    } else {
        std::ostringstream csv;
        write_score_table(csv, result);
        write_file_atomic(args.output, csv.str());
    }
    log("info", "report", "sweep_best", {{"candidate", candidate_json(result.best)}, {"score", result.best_score}});
    return kExitOk;
}

int cmd_daily_run(const CliConfig& cfg, const std::string& date, const std::string& report_path, std::ostream& out,
                  std::ostream& err) {
    Store store(cfg.store);
    CsvDirectorySource source(cfg.data_dir);
    LogReportSink log_sink(err);
    std::optional<FileReportSink> file_sink;
    std::vector<ReportSink*> sinks{&log_sink};
    if (!report_path.empty()) sinks.push_back(&file_sink.emplace(report_path));
    const Date run_date = date.empty() ? today_in(cfg.timezone) : parse_date(date);
    const auto report = run_daily(run_date, store, {&source}, sinks, pipeline_config(cfg));
    out << to_json(report).dump(2) << "\n";
    return report.ok() ? kExitOk : kExitDomain;
}

int cmd_serve(const CliConfig& cfg, const std::string& bind, const Logger& log) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects HOST:PORT");
    const auto host = bind.substr(0, colon);
    const int port = parse_int("--bind", bind.substr(colon + 1));

    Store reader(cfg.store);
    Store writer(cfg.store);
    CsvDirectorySource source(cfg.data_dir);
    const auto pc = pipeline_config(cfg);
    ApiConfig api_config;
    api_config.admin_token_env = cfg.admin_token_env;
    api_config.run = [&](Date d) { return run_daily(d, writer, {&source}, {}, pc); };
    Api api(reader, api_config);
    HttpServer server(api);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    const int bound = server.bind(host, port);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    log("info", "serve", "listening", {{"host", host}, {"port", bound}});
    server.listen();
    // listen() also returns when stopped for another reason; wake the waiter so it can exit.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    log("info", "serve", "stopped");
    return kExitOk;
}

CLI::Validator date_validator() {
    return CLI::Validator(
        [](std::string& s) -> std::string {
            try {
                parse_date(s);
            } catch (const std::exception&) {
                return "not a YYYY-MM-DD date: " + s;
            }
            return {};
        },
        "DATE");
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Produce price forecasting: ingestion, imputation, training, evaluation and serving", "mandi"};
    app.require_subcommand(1);
    app.fallthrough();

    CliConfig cfg;
    std::string config_path;
    std::string store_flag, data_dir_flag, horizons_flag;
    int tau_flag = 0, jobs_flag = 0, max_rank_flag = 0;
    unsigned long long seed_flag = 0;
    app.add_option("--config", config_path, "key=value settings file")->check(CLI::ExistingFile);
    auto* store_opt = app.add_option("--store", store_flag, "store directory");
    auto* data_opt = app.add_option("--data-dir", data_dir_flag, "directory of daily <date>.csv files");
    auto* seed_opt = app.add_option("--seed", seed_flag, "seed for every stochastic component");
    auto* jobs_opt = app.add_option("--jobs", jobs_flag, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    auto* tau_opt = app.add_option("--tau", tau_flag, "feature window in steps")->check(CLI::PositiveNumber);
    auto* rank_opt = app.add_option("--max-rank", max_rank_flag, "imputation rank cap")->check(CLI::PositiveNumber);
    auto* horizons_opt = app.add_option("--horizons", horizons_flag, "comma-separated step sizes");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "merge an observations CSV (and registry) into the store");
    ingest_cmd->add_option("--observations", ingest.observations)->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--markets", ingest.markets)->check(CLI::ExistingFile);

    ImputeArgs impute;
    auto* impute_cmd = app.add_subcommand("impute", "complete the price panel of one produce");
    impute_cmd->add_option("--produce", impute.produce);
    impute_cmd->add_option("--from", impute.from)->check(date_validator());
    impute_cmd->add_option("--to", impute.to)->check(date_validator());
    impute_cmd->add_option("--output", impute.output, "write date,market_id,raw_price,imputed_price CSV");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "sweep, fit and store a model for one market");
    train_cmd->add_option("--produce", train.produce);
    train_cmd->add_option("--market", train.market)->required();
    train_cmd->add_option("--q", train.q)->check(CLI::PositiveNumber);
    train_cmd->add_option("--grid", train.grid, "hyperparameter grid file")->check(CLI::ExistingFile);
    train_cmd->add_option("--k", train.k)->check(CLI::PositiveNumber);
    train_cmd->add_option("--C", train.C)->check(CLI::PositiveNumber);
    train_cmd->add_option("--trees", train.trees)->check(CLI::PositiveNumber);
    train_cmd->add_option("--validation-days", train.validation_days)->check(CLI::PositiveNumber);

    ForecastArgs forecast;
    auto* forecast_cmd = app.add_subcommand("forecast", "forecast one market from archived data");
    forecast_cmd->add_option("--produce", forecast.produce);
    forecast_cmd->add_option("--market", forecast.market)->required();
    forecast_cmd->add_option("--q", forecast.q)->check(CLI::PositiveNumber);
    forecast_cmd->add_option("--date", forecast.date, "as-of date (default: last observed day)")->check(date_validator());

    EvaluateArgs evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "walk-forward grid sweep; prints the score table CSV");
    evaluate_cmd->add_option("--from", evaluate.from)->required()->check(date_validator());
    evaluate_cmd->add_option("--to", evaluate.to)->required()->check(date_validator());
    evaluate_cmd->add_option("--grid", evaluate.grid)->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--produce", evaluate.produce);
    evaluate_cmd->add_option("--q", evaluate.q)->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--classifier", evaluate.classifier)
        ->check(CLI::IsMember({"forest", "logistic", "majority", "random"}));
    evaluate_cmd->add_option("--targets", evaluate.targets, "comma-separated market ids");
    evaluate_cmd->add_flag("--frozen", evaluate.frozen, "impute once on all data (faster, looks ahead)");
    evaluate_cmd->add_option("--output", evaluate.output, "write the CSV here instead of stdout");

    std::string run_date, report_path;
    auto* daily_cmd = app.add_subcommand("daily-run", "run acquire, clean, predict, archive, check and report");
    daily_cmd->add_option("--date", run_date, "run date (default: today in the configured timezone)")
        ->check(date_validator());
    daily_cmd->add_option("--report", report_path, "also write the run report to this file");

    std::string bind = "127.0.0.1:8080";
    auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP API");
    serve_cmd->add_option("--bind", bind, "HOST:PORT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const Logger log(err);
    try {
        if (!config_path.empty()) {
            for (const auto& [key, value] : read_config_file(config_path)) apply_setting(cfg, key, value);
        }
        if (store_opt->count()) cfg.store = store_flag;
        if (data_opt->count()) cfg.data_dir = data_dir_flag;
        if (seed_opt->count()) cfg.seed = seed_flag;
        if (jobs_opt->count()) cfg.jobs = jobs_flag;
        if (tau_opt->count()) cfg.tau = tau_flag;
        if (rank_opt->count()) cfg.max_rank = max_rank_flag;
        if (horizons_opt->count()) apply_setting(cfg, "horizons", horizons_flag);
        validate(cfg);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(cfg, ingest, out, log);
        if (*impute_cmd) return cmd_impute(cfg, impute, out, log);
        if (*train_cmd) return cmd_train(cfg, train, out, log);
        if (*forecast_cmd) return cmd_forecast(cfg, forecast, out, err);
        if (*evaluate_cmd) return cmd_evaluate(cfg, evaluate, out, log);
        if (*daily_cmd) return cmd_daily_run(cfg, run_date, report_path, out, err);
        if (*serve_cmd) return cmd_serve(cfg, bind, log);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        log("error", app.get_subcommands().front()->get_name(), "failed", {{"message", e.what()}});
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace mandi::cli
