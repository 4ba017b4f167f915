#include "mandi/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <vector>

namespace mandi {

namespace {

ApiResponse ok(const nlohmann::json& body) { return {200, body.dump()}; }

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        const auto j = path.find('/', i);
        const auto end = j == std::string::npos ? path.size() : j;
        if (end > i) out.push_back(path.substr(i, end - i));
        i = end + 1;
    }
    return out;
}

std::optional<int> parse_positive(const std::string& s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v < 1) return std::nullopt;
    return v;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

nlohmann::json horizon_json(const ForecastRecord& r) {
    return {{"q", r.q},
            {"direction", wire_name(r.direction)},
            {"posterior", {{"down", r.posterior[0]}, {"flat", r.posterior[1]}, {"up", r.posterior[2]}}},
            {"predicted_price_rs_per_quintal", r.predicted_price},
            {"interval",
             {{"lower", r.interval.lower},
              {"upper", r.interval.upper},
              {"method", method_name(r.interval.method)},
              {"param", r.interval.param}}},
            {"model_version", r.model_version}};
}

ApiResponse Api::handle(const ApiRequest& request) const {
    const std::string prefix = kApiPrefix;
    if (request.path.rfind(prefix, 0) != 0) return error_response(404, "not_found", "unknown path " + request.path);
    const auto parts = split_path(request.path.substr(prefix.size()));
    const auto& method = request.method;

    auto route = [&](const char* allowed, auto&& handler) -> ApiResponse {
        if (method != allowed) return error_response(405, "method_not_allowed", method + " not allowed here");
        return handler();
    };
    try {
        if (parts.size() == 1 && parts[0] == "markets") return route("GET", [&] { return markets(); });
        if (parts.size() == 1 && parts[0] == "produce") return route("GET", [&] { return produce(); });
        if (parts.size() == 1 && parts[0] == "healthz") return route("GET", [&] { return healthz(); });
        if (parts.size() == 2 && parts[0] == "admin" && parts[1] == "run") {
            return route("POST", [&] { return admin_run(request); });
        }
        if (parts.size() == 3 && parts[0] == "forecast") {
            return route("GET", [&] { return forecast(parts[1], parts[2]); });
        }
        if (parts.size() == 3 && parts[0] == "evidence") {
            return route("GET", [&] { return evidence(parts[1], parts[2], request); });
        }
        if (parts.size() == 3 && parts[0] == "history") {
            return route("GET", [&] { return history(parts[1], parts[2], request); });
        }
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
    return error_response(404, "not_found", "unknown path " + request.path);
}

ApiResponse Api::markets() const {
    nlohmann::json out = nlohmann::json::array();
    const auto registry = store_.markets();
    for (const auto& m : registry.markets()) {
        out.push_back({{"market_id", m.market_id},
                       {"name", m.name},
                       {"latitude", optional_json(m.latitude)},
                       {"longitude", optional_json(m.longitude)},
                       {"state", m.state}});
    }
    return ok(out);
}

ApiResponse Api::produce() const {
    const auto snap = store_.published();
    return ok(snap ? nlohmann::json(snap->produce()) : nlohmann::json::array());
}

namespace {

struct Lookup {
    std::shared_ptr<const Snapshot> snapshot;
    std::vector<const ForecastRecord*> records;
    std::optional<ApiResponse> error;
};

Lookup lookup(const Store& store, const std::string& market, const std::string& produce) {
    Lookup out;
    if (!store.markets().index_of(market)) {
        out.error = error_response(404, "unknown_market", "unknown market " + market);
        return out;
    }
    out.snapshot = store.published();
    if (!out.snapshot) {
        out.error = error_response(404, "no_forecast", "no snapshot has been published");
        return out;
    }
    const auto names = out.snapshot->produce();
    if (std::find(names.begin(), names.end(), produce) == names.end()) {
        out.error = error_response(404, "unknown_produce", "unknown produce " + produce);
        return out;
    }
    out.records = out.snapshot->forecasts_for(market, produce);
    return out;
}

}  // namespace

ApiResponse Api::forecast(const std::string& market, const std::string& produce) const {
    auto found = lookup(store_, market, produce);
    if (found.error) return *found.error;
    if (found.records.empty()) {
        return error_response(404, "no_forecast", "no forecast for " + market + "/" + produce);
    }
    nlohmann::json horizons = nlohmann::json::array();
    for (const auto* r : found.records) horizons.push_back(horizon_json(*r));
    const auto& first = *found.records.front();
    return ok({{"generated_at", first.generated_at},
               {"as_of", format_date(first.as_of)},
               {"market_id", market},
               {"produce", produce},
               {"horizons", horizons}});
}

ApiResponse Api::evidence(const std::string& market, const std::string& produce, const ApiRequest& request) const {
    auto found = lookup(store_, market, produce);
    if (found.error) return *found.error;
    if (found.records.empty()) {
        return error_response(404, "no_forecast", "no forecast for " + market + "/" + produce);
    }
    const ForecastRecord* chosen = nullptr;
    if (const auto it = request.query.find("q"); it != request.query.end()) {
        const auto q = parse_positive(it->second);
        if (!q) return error_response(400, "bad_request", "q must be a positive integer");
        for (const auto* r : found.records) {
            if (r->q == *q) chosen = r;
        }
        if (!chosen) {
            return error_response(404, "no_forecast", "no q=" + it->second + " forecast for " + market + "/" + produce);
        }
    } else {
        chosen = *std::min_element(found.records.begin(), found.records.end(),
                                   [](const auto* a, const auto* b) { return a->q < b->q; });
    }
    return ok({{"market_id", market},
               {"produce", produce},
               {"q", chosen->q},
               {"as_of", format_date(chosen->as_of)},
               {"evidence", chosen->evidence}});
}

ApiResponse Api::history(const std::string& market, const std::string& produce, const ApiRequest& request) const {
    auto found = lookup(store_, market, produce);
    if (found.error) return *found.error;
    int days = config_.default_history_days;
    if (const auto it = request.query.find("days"); it != request.query.end()) {
        const auto d = parse_positive(it->second);
        if (!d) return error_response(400, "bad_request", "days must be a positive integer");
        days = *d;
    }
    const auto& hist = found.snapshot->history.at(produce);
    const auto& markets = hist.raw_price.markets;
    const auto row = std::find(markets.begin(), markets.end(), market);
    if (row == markets.end()) {
        return error_response(404, "no_history", "no archived prices for " + market + "/" + produce);
    }
    const auto m = static_cast<std::size_t>(row - markets.begin());
    const auto total = hist.raw_price.num_days;
    const auto first = total > static_cast<std::size_t>(days) ? total - static_cast<std::size_t>(days) : 0;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = first; t < total; ++t) {
        rows.push_back({{"date", format_date(hist.raw_price.date_of(t))},
                        {"raw_price", optional_json(hist.raw_price.values(m, t))},
                        {"imputed_price", hist.imputed_price.values(static_cast<Eigen::Index>(m),
                                                                    static_cast<Eigen::Index>(t))}});
    }
    return ok({{"market_id", market}, {"produce", produce}, {"as_of", format_date(found.snapshot->run_date)},
               {"prices", rows}});
}

ApiResponse Api::admin_run(const ApiRequest& request) const {
    const char* token = std::getenv(config_.admin_token_env.c_str());
    if (!token || !*token || !config_.run) {
        return error_response(403, "admin_disabled", "admin endpoints are disabled");
    }
    if (request.authorization != std::string("Bearer ") + token) {
        return error_response(401, "unauthorized", "missing or wrong bearer token");
    }
    const auto it = request.query.find("date");
    if (it == request.query.end()) return error_response(400, "bad_request", "date is required");
    Date date;
    try {
        date = parse_date(it->second);
    } catch (const std::exception&) {
        return error_response(400, "bad_request", "date must be YYYY-MM-DD");
    }
    try {
        return ok(to_json(config_.run(date)));
    } catch (const StoreBusy& e) {
        return error_response(409, "busy", e.what());
    }
}

ApiResponse Api::healthz() const {
    const auto runs = store_.runs();
    nlohmann::json out{{"status", "ok"}, {"last_run_date", nullptr}, {"last_run_ok", nullptr}};
    if (!runs.empty()) {
        out["last_run_date"] = runs.back().value("run_date", "");
        out["last_run_ok"] = runs.back().value("ok", false);
    }
    return ok(out);
}

}  // namespace mandi
