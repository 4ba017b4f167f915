#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mandi/data_model.hpp"

namespace mandi {

/// Thin SVD truncated and soft-thresholded: matrix ~= U * diag(d) * V^T.
struct LowRank {
    Eigen::MatrixXd U;
    Eigen::VectorXd d;
    Eigen::MatrixXd V;

    Eigen::Index rank() const { return d.size(); }
    Eigen::MatrixXd reconstruct() const;
};

/// Singular values become max(sigma - lambda, 0); zeros and components past rank_cap are dropped.
/// Throws std::runtime_error if the SVD fails.
LowRank soft_threshold_svd(const Eigen::MatrixXd& matrix, double lambda, Eigen::Index rank_cap);

struct ImputeConfig {
    int max_rank = 10;
    // Strictly descending; empty selects an automatic log-spaced grid.
    std::vector<double> lambda_grid;
    double rel_tol = 1e-5;
    int max_iters = 200;
    double holdout_fraction = 0.1;
    std::uint64_t rng_seed = 0;
    // Lower clamp on the output. 1 Rs per 100 kg for prices, 0 for volumes.
    double floor = 1.0;
};

struct ImputeReport {
    double lambda = 0.0;
    int rank = 0;
    std::vector<int> iters_per_lambda;
    double holdout_rmse = 0.0;
    std::vector<double> lambda_grid;
    std::vector<double> holdout_rmse_per_lambda;
    // Objective value after every iteration, one trace per lambda (warm start first).
    std::vector<std::vector<double>> objective_trace;

    bool operator==(const ImputeReport&) const = default;
};

nlohmann::json to_json(const ImputeReport& report);

/// Dense completion of a SparsePanel over the same axes.
struct DensePanel {
    std::string produce;
    std::vector<std::string> markets;
    Date start_date{};
    Eigen::MatrixXd values;  // markets x days

    std::size_t num_markets() const { return markets.size(); }
    std::size_t num_days() const { return static_cast<std::size_t>(values.cols()); }
    Date date_of(std::size_t day) const { return add_days(start_date, static_cast<long>(day)); }

    /// Days [first, first + count).
    DensePanel slice_days(std::size_t first, std::size_t count) const;
};

struct ImputeResult {
    DensePanel panel;
    ImputeReport report;
};

/// Nuclear-norm regularized completion, warm-started down the lambda grid with the lambda chosen
/// by RMSE on a seeded holdout of observed entries. Observed entries are passed through unchanged
/// apart from the floor clamp. Throws std::invalid_argument for an empty panel or bad config.
ImputeResult soft_impute(const SparsePanel& panel, const ImputeConfig& config);

}  // namespace mandi
