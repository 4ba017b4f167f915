#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/eval.hpp"
#include "mandi/forecast.hpp"
#include "mandi/store.hpp"

namespace mandi {

/// Supplies one day's observation rows. Throws when the day cannot be fetched.
class ObservationSource {
public:
    virtual ~ObservationSource() = default;
    virtual std::string name() const = 0;
    virtual std::vector<ObservationRow> fetch(Date day) = 0;
};

/// Reads `<dir>/<YYYY-MM-DD>.csv` in the ingestion CSV format.
class CsvDirectorySource : public ObservationSource {
public:
    explicit CsvDirectorySource(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::string name() const override { return "csv:" + dir_.string(); }
    std::vector<ObservationRow> fetch(Date day) override;

private:
    std::filesystem::path dir_;
};

class ReportSink {
public:
    virtual ~ReportSink() = default;
    virtual void emit(const nlohmann::json& report) = 0;
};

/// Overwrites a file with the latest report.
class FileReportSink : public ReportSink {
public:
    explicit FileReportSink(std::filesystem::path path) : path_(std::move(path)) {}
    void emit(const nlohmann::json& report) override;

private:
    std::filesystem::path path_;
};

/// Writes the report as one JSON log line.
class LogReportSink : public ReportSink {
public:
    explicit LogReportSink(std::ostream& out) : out_(out) {}
    void emit(const nlohmann::json& report) override;

private:
    std::ostream& out_;
};

enum class StageStatus { Ok, Failed, Skipped };
const char* status_name(StageStatus s);

inline constexpr std::array<const char*, 6> kStageNames{"acquire", "clean", "predict", "archive", "check", "report"};

struct StageResult {
    std::string name;
    StageStatus status = StageStatus::Skipped;
    double seconds = 0.0;
    std::string error;
};

struct RunReport {
    Date run_date{};
    int attempt = 1;
    std::vector<StageResult> stages;  // kStageNames order
    std::size_t rows_acquired = 0;
    std::size_t outliers_removed = 0;
    std::size_t forecasts_written = 0;
    std::size_t insufficient_history = 0;
    std::string snapshot_id;
    bool published = false;

    bool ok() const;
    const StageResult& stage(const std::string& name) const;
};

nlohmann::json to_json(const RunReport& report);

struct PipelineConfig {
    std::vector<int> horizons{1, 7, 14, 28};
    int tau = 10;
    // Days of history (ending at the run date) used for imputation and prediction.
    int history_days = 730;
    ImputeConfig impute;
    OutlierPolicy outliers;
    // Used when a (produce, market, q) has no stored model; such forecasts carry model_version 0.
    Candidate default_candidate{10, 5, 1.0, 50};
    double alpha = 0.8;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::size_t evidence_top_n = kEvidenceTopN;
    // Produces the generated_at stamp. Defaults to the current UTC time.
    std::function<std::string()> clock;
};

/// Runs acquire, clean, predict, archive, check and report for `run_date`. A failed stage skips the
/// rest; the report is persisted regardless. Holds the store lease for the duration.
RunReport run_daily(Date run_date, Store& store, std::vector<ObservationSource*> sources,
                    const std::vector<ReportSink*>& sinks, const PipelineConfig& config);

struct RetrainConfig {
    int q = 7;
    int tau = 10;
    int history_days = 730;
    ImputeConfig impute;
    OutlierPolicy outliers;
    CvGrid grid;
    // Validation window for the sweep, counted back from the last archived day.
    int validation_days = 56;
    double alpha = 0.8;
    std::uint64_t seed = 0;
    int jobs = 0;
};

struct RetrainResult {
    std::optional<int> model_version;  // empty when flagged
    bool flagged = false;
    std::string message;
    Candidate candidate;
    std::optional<SweepResult> sweep;
};

/// Sweeps the grid on archived data, fits and calibrates a model for (produce, market, q) and stores
/// it under a new version. Insufficient history leaves the current version in place and is flagged.
RetrainResult retrain(const std::string& produce, const std::string& market_id, Store& store,
                      const RetrainConfig& config);

/// Forecasts every served horizon for one (produce, market) from the store's archived data,
/// ending on `as_of`. Horizons without enough history are omitted.
std::vector<ForecastRecord> forecast_market(const Store& store, const std::string& produce,
                                            const std::string& market_id, Date as_of, const PipelineConfig& config);

std::string utc_timestamp();

}  // namespace mandi
