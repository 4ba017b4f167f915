#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mandi/forest.hpp"

namespace mandi {

struct LogisticOptions {
    double C = 1.0;  // inverse L2 strength
    int max_iters = 500;
    double tol = 1e-6;  // on the gradient norm
};

/// Three-class softmax regression over standardized features.
struct LogisticModel {
    Eigen::MatrixXd weights;     // 3 x p, rows in class_index() order
    Eigen::Vector3d intercepts;  // unpenalized
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;
    double C = 1.0;
    // Set when training saw a single class; the model then always predicts it.
    std::optional<Direction> degenerate_class;
    int iterations = 0;
    // Penalized loss after every accepted step, starting at the initial point.
    std::vector<double> loss_trace;
};

/// Loss: summed cross-entropy + ||W||^2 / (2C), minimized by gradient descent with Armijo backtracking.
LogisticModel fit_logistic(const std::vector<Sample>& samples, const LogisticOptions& options);

ClassProbs logistic_probabilities(const LogisticModel& model, std::span<const double> x);
Direction logistic_predict(const LogisticModel& model, std::span<const double> x);

}  // namespace mandi
