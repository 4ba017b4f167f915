#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mandi/date.hpp"
#include "mandi/grid.hpp"

namespace mandi {

/// Thrown by the CSV readers. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct MarketRecord {
    std::string market_id;
    std::string name;
    // Absent when the registry row leaves the coordinate blank.
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::string state;

    bool has_coordinates() const { return latitude.has_value() && longitude.has_value(); }
};

/// Ordered set of markets with unique ids.
class MarketRegistry {
public:
    MarketRegistry() = default;
    /// Throws std::invalid_argument on duplicate ids or out-of-range coordinates.
    explicit MarketRegistry(std::vector<MarketRecord> markets);

    const std::vector<MarketRecord>& markets() const { return markets_; }
    std::size_t size() const { return markets_.size(); }
    bool empty() const { return markets_.empty(); }

    std::optional<std::size_t> index_of(const std::string& market_id) const;
    const MarketRecord& at(const std::string& market_id) const;
    std::vector<std::string> ids() const;

private:
    std::vector<MarketRecord> markets_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ObservationRow {
    Date date;
    std::string market_id;
    std::string produce;
    std::optional<double> modal_price;  // Rs per 100 kg
    std::optional<double> volume;       // metric tons

    bool operator==(const ObservationRow&) const = default;
};

inline constexpr const char* kObservationHeader =
    "date,market_id,produce,modal_price_rs_per_quintal,volume_tonnes";
inline constexpr const char* kMarketHeader = "market_id,name,latitude,longitude,state";

std::vector<ObservationRow> parse_observations(std::istream& in);
std::vector<ObservationRow> parse_observations_string(const std::string& csv);
void write_observations(std::ostream& out, const std::vector<ObservationRow>& rows);

MarketRegistry parse_markets(std::istream& in);
void write_markets(std::ostream& out, const MarketRegistry& registry);

/// M x T grid of optional values over contiguous days.
struct SparsePanel {
    std::string produce;
    std::vector<std::string> markets;
    Date start_date{};
    std::size_t num_days = 0;
    Grid<std::optional<double>> values;

    std::size_t num_markets() const { return markets.size(); }
    Date date_of(std::size_t day) const { return add_days(start_date, static_cast<long>(day)); }
    std::size_t present_count() const;

    /// Days [first, first + count).
    SparsePanel slice_days(std::size_t first, std::size_t count) const;
};

struct IngestReport {
    std::size_t rows_used = 0;
    std::size_t skipped_unknown_market = 0;
    std::size_t skipped_out_of_range = 0;
    std::size_t duplicates_overwritten = 0;
};

struct PanelPair {
    SparsePanel price;
    SparsePanel volume;
    IngestReport report;
};

/// Rows for other produce are ignored. Duplicate (market, date) rows resolve last-wins.
PanelPair build_panels(const std::vector<ObservationRow>& rows, const std::string& produce,
                       Date start_date, std::size_t num_days, const MarketRegistry& markets);

/// Flattens present cells of a price/volume pair back to rows (one per cell present in either).
std::vector<ObservationRow> flatten_panels(const SparsePanel& price, const SparsePanel& volume);

struct OutlierPolicy {
    double ratio = 10.0;
    std::size_t window_days = 30;
    std::size_t min_support = 3;
};

struct RemovedCell {
    std::string market_id;
    Date date;
    double value;
    double trailing_median;
};

struct CleanReport {
    std::vector<RemovedCell> removed;
};

struct CleanResult {
    SparsePanel panel;
    CleanReport report;
};

/// Drops prices outside [median/ratio, median*ratio] of the trailing window's present prices.
CleanResult clean_outliers(const SparsePanel& panel, const OutlierPolicy& policy = {});

}  // namespace mandi
