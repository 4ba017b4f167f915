#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/forest.hpp"

namespace mandi {

/// One training sample with nonzero learned similarity to a test vector.
struct NeighborWeight {
    std::size_t sample_index = 0;
    std::string market_id;
    int step = 0;
    StepWindow dates;
    double weight = 0.0;
    double neighbor_price = 0.0;  // Q at (market, step), Rs per 100 kg
    Direction label = Direction::Flat;
};

/// K(x_i, x) = (1/B) sum_b inbag_b(i) [leaf_b(x_i) == leaf_b(x)] / inbag count of leaf_b(x).
/// Returns only nonzero weights, ordered by sample index. Throws on feature-length mismatch.
std::vector<NeighborWeight> kernel_weights(const ForestModel& model, std::span<const double> x);

/// Weighted label mass per direction, indexed by class_index().
ClassProbs posterior(std::span<const NeighborWeight> neighbors);

/// Argmax with the shared tie order (flat, up, down).
Direction classify(const ClassProbs& eta);

/// Descending weight, ties by ascending (market_id, step).
std::vector<NeighborWeight> sorted_by_weight(std::span<const NeighborWeight> neighbors);

enum class IntervalMethod { TopL, Threshold };

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    IntervalMethod method = IntervalMethod::TopL;
    double param = 0.0;  // l or omega
    // Threshold selection was empty and fell back to the top-weight neighbor.
    bool fallback = false;

    bool contains(double price) const { return lower <= price && price <= upper; }
};

const char* method_name(IntervalMethod m);

/// Price span of the l largest-weight neighbors. Throws std::invalid_argument on empty input or l < 1.
Interval interval_top_l(std::span<const NeighborWeight> neighbors, int l);

/// Price span of neighbors with weight >= omega.
Interval interval_threshold(std::span<const NeighborWeight> neighbors, double omega);

/// Sum of weight * neighbor_price, summed in sample-index order.
double regress_rfnn(std::span<const NeighborWeight> neighbors);

struct Calibration {
    int l = 1;
    double coverage = 0.0;
    bool flagged = false;  // no l reached alpha
    std::vector<double> coverage_by_l;  // entry l-1
};

/// Smallest l whose top-l interval contains the realized price on a fraction >= alpha of the
/// calibration samples. The search stops at the largest neighbor count over the calibration set.
Calibration calibrate_l(const ForestModel& model, std::span<const Sample> calibration, double alpha);

/// Splits samples into (earlier, calibration) with the most recent `fraction` of each market's
/// steps in the calibration part.
std::pair<std::vector<Sample>, std::vector<Sample>> split_calibration(const std::vector<Sample>& samples,
                                                                      double fraction = 0.2);

/// Evidence array sorted by descending weight.
nlohmann::json evidence_to_json(std::span<const NeighborWeight> neighbors);

}  // namespace mandi
