#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mandi/data_model.hpp"
#include "mandi/grid.hpp"
#include "mandi/impute.hpp"

namespace mandi {

enum class Direction : std::int8_t { Down = -1, Flat = 0, Up = 1 };

inline int to_int(Direction d) { return static_cast<int>(d); }
/// "down" | "flat" | "up"
const char* wire_name(Direction d);
Direction direction_from_int(int v);

/// Time-quantized dense panel. Steps are numbered 1..S; step s covers days (s-1)q .. sq-1
/// counted from start_date.
struct QuantizedPanel {
    std::string produce;
    std::vector<std::string> markets;
    Date start_date{};
    int q = 1;
    Eigen::MatrixXd values;  // markets x steps, column s-1 holds step s

    std::size_t num_markets() const { return markets.size(); }
    int num_steps() const { return static_cast<int>(values.cols()); }
    double at(std::size_t market, int step) const { return values(static_cast<Eigen::Index>(market), step - 1); }
    Date step_first_day(int step) const { return add_days(start_date, static_cast<long>(step - 1) * q); }
    Date step_last_day(int step) const { return add_days(start_date, static_cast<long>(step) * q - 1); }
};

/// Block means over q days; a trailing partial block is dropped. Throws if q < 1 or T < q.
QuantizedPanel quantize(const DensePanel& dense, int q);

/// Quantizes the most recent floor(T/q)*q days so the last step ends on the panel's last day.
/// Leading remainder days are dropped instead of trailing ones.
QuantizedPanel quantize_ending_at_last_day(const DensePanel& dense, int q);

/// Column 0 is zero; column s holds (Q_s - Q_{s-1}) / Q_{s-1}.
Eigen::MatrixXd relative_changes(const QuantizedPanel& qp);

Direction direction_of(double delta);
Grid<Direction> directions(const Eigen::MatrixXd& delta);

struct NeighborSelection {
    std::vector<std::string> market_ids;  // target first, then by ascending (distance, id)
    std::vector<std::string> excluded_without_coordinates;
};

/// The k markets nearest to `market_id` by plain Euclidean distance on (latitude, longitude) degrees,
/// always including the market itself. Throws std::invalid_argument when the target is unknown or
/// lacks coordinates, or when k is outside [1, registry size].
NeighborSelection neighbor_markets(const MarketRegistry& registry, const std::string& market_id, int k);

struct FeatureConfig {
    int tau = 10;
    int k = 1;
};

/// Calendar span of one sample: the tau-step history window and the labelled step.
struct StepWindow {
    Date window_start{};
    Date window_end{};
    Date step_start{};
    Date step_end{};
    bool operator==(const StepWindow&) const = default;
};

struct Sample {
    std::string market_id;
    int step = 0;
    std::vector<double> features;  // tau relative changes then tau volumes, oldest first
    Direction direction = Direction::Flat;
    double price = 0.0;  // Q at (market, step), Rs per 100 kg
    StepWindow dates;

    /// Latest calendar day whose data enters this sample.
    Date last_day() const { return dates.step_end; }
    bool operator==(const Sample&) const = default;
};

struct SampleSet {
    std::vector<Sample> samples;
    std::vector<std::string> warnings;
};

/// Training samples at steps tau+1..S for every market in `markets`, in market then step order.
SampleSet build_samples_for(const QuantizedPanel& price, const QuantizedPanel& volume,
                            const std::vector<std::string>& markets, int tau);

/// Samples for every market of M_k(target_market).
SampleSet build_samples(const QuantizedPanel& price, const QuantizedPanel& volume, const std::string& target_market,
                        const FeatureConfig& config, const MarketRegistry& registry);

/// Feature vector for predicting `as_of_step` from steps as_of_step - tau .. as_of_step - 1. The step may
/// be S + 1, one past the panel. Throws std::invalid_argument on insufficient history.
std::vector<double> build_test_vector(const QuantizedPanel& price, const QuantizedPanel& volume,
                                      const std::string& market_id, int tau, int as_of_step);

StepWindow step_window(const QuantizedPanel& qp, int step, int tau);

}  // namespace mandi
