#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/data_model.hpp"
#include "mandi/eval.hpp"
#include "mandi/forest.hpp"
#include "mandi/impute.hpp"
#include "mandi/kernel.hpp"
#include "mandi/panel.hpp"

namespace mandi {

/// Cleaned and imputed price/volume panels for one produce.
struct PreparedPanels {
    SparsePanel raw_price;  // after outlier removal
    SparsePanel raw_volume;
    DensePanel price;
    DensePanel volume;
    ImputeReport impute_report;
    std::size_t outliers_removed = 0;
};

struct CleanedPanels {
    SparsePanel price;
    SparsePanel volume;
    std::size_t outliers_removed = 0;
};

/// Days [start, end] of `rows` for one produce with price outliers removed. Throws
/// std::invalid_argument when no price survives.
CleanedPanels clean_panels(const std::vector<ObservationRow>& rows, const MarketRegistry& registry,
                           const std::string& produce, Date start, Date end, const OutlierPolicy& policy = {});

/// Imputes prices (floor 1) and volumes (floor 0). max_rank is clipped to the panel dimensions.
PreparedPanels impute_panels(CleanedPanels cleaned, ImputeConfig impute);

/// clean_panels followed by impute_panels.
PreparedPanels prepare_panels(const std::vector<ObservationRow>& rows, const MarketRegistry& registry,
                              const std::string& produce, Date start, Date end, ImputeConfig impute,
                              const OutlierPolicy& policy = {});

struct ModelMeta {
    std::string produce;
    std::string market_id;
    int q = 1;
    int tau = 10;
    Candidate candidate;
    int version = 0;  // 0 = fitted on demand, never stored
    Date trained_through{};
    std::uint64_t seed = 0;
    double alpha = 0.8;
    // Calibrated top-l interval size.
    int l = 1;
    double calibration_coverage = 0.0;
    bool calibration_flagged = false;

    bool operator==(const ModelMeta&) const = default;
};

struct StoredModel {
    ModelMeta meta;
    ForestModel forest;
};

nlohmann::json model_to_json(const StoredModel& model);
StoredModel model_from_json(const nlohmann::json& j);

struct TrainSettings {
    int tau = 10;
    Candidate candidate;
    std::uint64_t seed = 0;
    int jobs = 0;
    double alpha = 0.8;
    double calibration_fraction = 0.2;
};

/// Fits the forest for `market` on samples pooled over its k nearest markets, then calibrates l
/// with a forest fit on the earlier steps and scored on the most recent ones. Returns nullopt when
/// the quantized panel has fewer than tau + 1 steps.
std::optional<StoredModel> fit_market_model(const QuantizedPanel& price, const QuantizedPanel& volume,
                                            const MarketRegistry& registry, const std::string& market,
                                            const TrainSettings& settings);

struct ForecastRecord {
    std::string generated_at;
    Date as_of{};
    std::string market_id;
    std::string produce;
    int q = 1;
    // Days covered by the forecast step.
    Date target_start{};
    Date target_end{};
    Direction direction = Direction::Flat;
    ClassProbs posterior{};
    double predicted_price = 0.0;  // Rs per 100 kg
    Interval interval;
    nlohmann::json evidence = nlohmann::json::array();  // top entries, descending weight
    int model_version = 0;
};

nlohmann::json to_json(const ForecastRecord& record);
ForecastRecord forecast_from_json(const nlohmann::json& j);

inline constexpr std::size_t kEvidenceTopN = 5;

/// Forecast for the step after the last step of `price` (which must end on `as_of`).
ForecastRecord make_forecast(const StoredModel& model, const QuantizedPanel& price, const QuantizedPanel& volume,
                             Date as_of, std::string generated_at, std::size_t evidence_top_n = kEvidenceTopN);

}  // namespace mandi
