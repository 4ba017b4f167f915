#include "mandi/impute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mandi {

Eigen::MatrixXd LowRank::reconstruct() const {
    if (d.size() == 0) return Eigen::MatrixXd::Zero(U.rows(), V.rows());
    return U * d.asDiagonal() * V.transpose();
}

LowRank soft_threshold_svd(const Eigen::MatrixXd& matrix, double lambda, Eigen::Index rank_cap) {
    if (!matrix.allFinite()) throw std::invalid_argument("soft_threshold_svd: non-finite input");
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold_svd: lambda must be >= 0");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw std::runtime_error("soft_threshold_svd: SVD did not converge on " + std::to_string(matrix.rows()) +
                                 "x" + std::to_string(matrix.cols()) + " input");
    }
    const Eigen::VectorXd& sigma = svd.singularValues();
    Eigen::Index keep = 0;
    const Eigen::Index limit = std::min<Eigen::Index>(rank_cap, sigma.size());
    while (keep < limit && sigma(keep) - lambda > 0.0) ++keep;

    LowRank out;
    out.U = svd.matrixU().leftCols(keep);
    out.V = svd.matrixV().leftCols(keep);
    out.d = (sigma.head(keep).array() - lambda).matrix();
    return out;
}

nlohmann::json to_json(const ImputeReport& report) {
    return nlohmann::json{{"lambda", report.lambda},
                          {"rank", report.rank},
                          {"iters_per_lambda", report.iters_per_lambda},
                          {"holdout_rmse", report.holdout_rmse},
                          {"lambda_grid", report.lambda_grid}};
}

DensePanel DensePanel::slice_days(std::size_t first, std::size_t count) const {
    if (first + count > num_days()) throw std::out_of_range("DensePanel::slice_days past end");
    DensePanel out{produce, markets, date_of(first), values.middleCols(static_cast<Eigen::Index>(first),
                                                                        static_cast<Eigen::Index>(count))};
    return out;
}

namespace {

struct Entry {
    Eigen::Index row;
    Eigen::Index col;
};

double observed_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const std::vector<Entry>& train,
                          double lambda, double nuclear) {
    double sq = 0.0;
    for (const auto& e : train) {
        const double r = x(e.row, e.col) - z(e.row, e.col);
        sq += r * r;
    }
    return 0.5 * sq + lambda * nuclear;
}

double holdout_rmse(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const std::vector<Entry>& held) {
    if (held.empty()) return 0.0;
    double sq = 0.0;
    for (const auto& e : held) {
        const double r = x(e.row, e.col) - z(e.row, e.col);
        sq += r * r;
    }
    return std::sqrt(sq / static_cast<double>(held.size()));
}

struct FitResult {
    Eigen::MatrixXd z;
    double nuclear = 0.0;
    int rank = 0;
    int iters = 0;
    std::vector<double> trace;
};

// One lambda of the path: Z <- S_lambda(P_train(X) + P_train_perp(Z)) until the relative change is small.
FitResult fit_one_lambda(const Eigen::MatrixXd& x, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& train_mask,
                         const std::vector<Entry>& train, Eigen::MatrixXd z, double warm_nuclear, double lambda,
                         Eigen::Index rank_cap, const ImputeConfig& config) {
    FitResult out;
    out.trace.push_back(observed_objective(x, z, train, lambda, warm_nuclear));
    out.nuclear = warm_nuclear;
    for (int it = 0; it < config.max_iters; ++it) {
        Eigen::MatrixXd filled = train_mask.select(x, z);
        LowRank lr = soft_threshold_svd(filled, lambda, rank_cap);
        Eigen::MatrixXd next = lr.reconstruct();
        const double prev_norm = z.norm();
        const double change = (next - z).norm() / std::max(prev_norm, 1e-300);
        z = std::move(next);
        out.nuclear = lr.d.sum();
        out.rank = static_cast<int>(lr.rank());
        out.trace.push_back(observed_objective(x, z, train, lambda, out.nuclear));
        out.iters = it + 1;
        if (change < config.rel_tol) break;
    }
    out.z = std::move(z);
    return out;
}

void validate(const SparsePanel& panel, const ImputeConfig& config) {
    const auto min_dim = std::min(panel.num_markets(), panel.num_days);
    if (panel.num_markets() == 0 || panel.num_days == 0) throw std::invalid_argument("soft_impute: empty panel");
    if (config.max_rank < 1) throw std::invalid_argument("soft_impute: max_rank must be positive");
    if (static_cast<std::size_t>(config.max_rank) > min_dim) {
        throw std::invalid_argument("soft_impute: max_rank " + std::to_string(config.max_rank) +
                                    " exceeds min(M, T) = " + std::to_string(min_dim));
    }
    if (!(config.rel_tol > 0.0)) throw std::invalid_argument("soft_impute: rel_tol must be positive");
    if (config.max_iters < 1) throw std::invalid_argument("soft_impute: max_iters must be positive");
    if (!(config.holdout_fraction > 0.0 && config.holdout_fraction <= 0.5)) {
        throw std::invalid_argument("soft_impute: holdout_fraction must lie in (0, 0.5]");
    }
    for (std::size_t i = 0; i < config.lambda_grid.size(); ++i) {
        if (config.lambda_grid[i] < 0.0) throw std::invalid_argument("soft_impute: negative lambda");
        if (i > 0 && !(config.lambda_grid[i] < config.lambda_grid[i - 1])) {
            throw std::invalid_argument("soft_impute: lambda_grid must be strictly descending");
        }
    }
}

}  // namespace

ImputeResult soft_impute(const SparsePanel& panel, const ImputeConfig& config) {
    validate(panel, config);
    const auto rows = static_cast<Eigen::Index>(panel.num_markets());
    const auto cols = static_cast<Eigen::Index>(panel.num_days);

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, cols);
    std::vector<Entry> observed;
    for (Eigen::Index m = 0; m < rows; ++m) {
        for (Eigen::Index t = 0; t < cols; ++t) {
            if (const auto& v = panel.values(static_cast<std::size_t>(m), static_cast<std::size_t>(t))) {
                x(m, t) = *v;
                observed.push_back({m, t});
            }
        }
    }
    if (observed.empty()) throw std::invalid_argument("soft_impute: panel has no observed entries");

    std::mt19937_64 rng(config.rng_seed);
    std::vector<Entry> shuffled = observed;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n_hold = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(observed.size())));
    if (n_hold >= observed.size()) n_hold = observed.size() - 1;
    std::vector<Entry> held(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<Entry> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold), shuffled.end());

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_mask =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
    for (const auto& e : observed) observed_mask(e.row, e.col) = true;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> train_mask = observed_mask;
    for (const auto& e : held) train_mask(e.row, e.col) = false;

    const Eigen::Index rank_cap = config.max_rank;
    ImputeReport report;
    report.lambda_grid = config.lambda_grid;
    if (report.lambda_grid.empty()) {
        Eigen::MatrixXd zero_filled = train_mask.select(x, Eigen::MatrixXd::Zero(rows, cols));
        Eigen::BDCSVD<Eigen::MatrixXd> svd(zero_filled);
        const double lambda_max = svd.singularValues()(0);
        constexpr int kGridSize = 10;
        for (int i = 0; i < kGridSize; ++i) {
            report.lambda_grid.push_back(lambda_max * std::pow(0.01, static_cast<double>(i) / (kGridSize - 1)));
        }
    }

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(rows, cols);
    double nuclear = 0.0;
    Eigen::MatrixXd best_z;
    double best_nuclear = 0.0;
    std::size_t best_index = 0;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < report.lambda_grid.size(); ++i) {
        const double lambda = report.lambda_grid[i];
        FitResult fit = fit_one_lambda(x, train_mask, train, z, nuclear, lambda, rank_cap, config);
        const double rmse = holdout_rmse(x, fit.z, held);
        report.iters_per_lambda.push_back(fit.iters);
        report.holdout_rmse_per_lambda.push_back(rmse);
        report.objective_trace.push_back(std::move(fit.trace));
        z = std::move(fit.z);
        nuclear = fit.nuclear;
        if (rmse < best_rmse) {
            best_rmse = rmse;
            best_index = i;
            best_z = z;
            best_nuclear = nuclear;
            report.rank = fit.rank;
        }
    }
    report.lambda = report.lambda_grid[best_index];
    report.holdout_rmse = best_rmse;

    Eigen::MatrixXd completed = std::move(best_z);
    if (!held.empty()) {
        // Refit at the chosen lambda with every observed entry.
        FitResult refit = fit_one_lambda(x, observed_mask, observed, completed, best_nuclear, report.lambda,
                                         rank_cap, config);
        completed = std::move(refit.z);
        report.rank = refit.rank;
    }

    DensePanel dense{panel.produce, panel.markets, panel.start_date, observed_mask.select(x, completed)};
    dense.values = dense.values.cwiseMax(config.floor);
    return ImputeResult{std::move(dense), std::move(report)};
}

}  // namespace mandi
