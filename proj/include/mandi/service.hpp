#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mandi/pipeline.hpp"
#include "mandi/store.hpp"

namespace mandi {

struct ApiRequest {
    std::string method = "GET";
    std::string path;  // including the /api/v1 prefix
    std::map<std::string, std::string> query;
    std::string authorization;  // raw Authorization header, empty if absent
};

struct ApiResponse {
    int status = 200;
    std::string body;
};

struct ApiConfig {
    // Environment variable holding the admin bearer token. Admin calls are refused while it is unset.
    std::string admin_token_env = "MANDI_ADMIN_TOKEN";
    // Executes the daily run for POST /admin/run. Admin calls are refused when empty.
    std::function<RunReport(Date)> run;
    int default_history_days = 90;
};

inline constexpr const char* kApiPrefix = "/api/v1";

/// Transport-independent request handling. Read endpoints take one reference to the published
/// snapshot per request, so each response reflects exactly one snapshot.
class Api {
public:
    Api(const Store& store, ApiConfig config) : store_(store), config_(std::move(config)) {}
    ApiResponse handle(const ApiRequest& request) const;

private:
    ApiResponse markets() const;
    ApiResponse produce() const;
    ApiResponse forecast(const std::string& market, const std::string& produce) const;
    ApiResponse evidence(const std::string& market, const std::string& produce, const ApiRequest& request) const;
    ApiResponse history(const std::string& market, const std::string& produce, const ApiRequest& request) const;
    ApiResponse admin_run(const ApiRequest& request) const;
    ApiResponse healthz() const;

    const Store& store_;
    ApiConfig config_;
};

/// One horizon entry of the forecast payload.
nlohmann::json horizon_json(const ForecastRecord& record);

/// Error body `{"error": {"code", "message"}}`.
ApiResponse error_response(int status, const std::string& code, const std::string& message);

/// HTTP front end for an Api.
class HttpServer {
public:
    explicit HttpServer(const Api& api);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port. Throws on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mandi
