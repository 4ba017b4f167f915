#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mandi/data_model.hpp"

namespace mandi {

/// Seasonal multi-market price fixture.
struct SyntheticSpec {
    int markets = 20;
    int days = 730;
    std::string produce = "tomato";
    std::string start_date = "2016-01-01";
    double seasonal_amplitude = 0.3;  // relative
    double period_days = 365.0;
    double noise = 0.10;         // relative, Gaussian sd
    double missing = 0.20;       // fraction of cells left blank
    std::uint64_t seed = 1;
};

struct SyntheticData {
    MarketRegistry registry;
    std::vector<ObservationRow> rows;
    Eigen::MatrixXd true_price;   // markets x days, noise included, before masking
    Eigen::MatrixXd true_volume;
    Date start_date{};
};

/// Markets sit on a line of longitudes; nearby markets share similar seasonal phase.
SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Positive rank-r matrix: a constant offset plus r - 1 random outer products.
Eigen::MatrixXd positive_low_rank(int rows, int cols, int rank, std::uint64_t seed);

}  // namespace mandi
