#include "mandi/logistic.hpp"

#include <cmath>
#include <stdexcept>

namespace mandi {

namespace {

struct Objective {
    Eigen::MatrixXd x;  // n x (p + 1), last column is the intercept
    Eigen::MatrixXi onehot;
    double C;
    Eigen::Index p;

    // Loss and gradient over the 3 x (p + 1) parameter block.
    double eval(const Eigen::MatrixXd& theta, Eigen::MatrixXd* grad) const {
        Eigen::MatrixXd logits = x * theta.transpose();  // n x 3
        double loss = 0.0;
        Eigen::MatrixXd resid(logits.rows(), 3);
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double mx = logits.row(i).maxCoeff();
            Eigen::RowVector3d e = (logits.row(i).array() - mx).exp().matrix();
            const double z = e.sum();
            const double log_z = mx + std::log(z);
            for (int c = 0; c < 3; ++c) {
                const double prob = e(c) / z;
                resid(i, c) = prob - onehot(i, c);
                if (onehot(i, c)) loss += log_z - logits(i, c);
            }
        }
        const auto w = theta.leftCols(p);
        loss += w.squaredNorm() / (2.0 * C);
        if (grad) {
            *grad = resid.transpose() * x;
            grad->leftCols(p) += w / C;
        }
        return loss;
    }
};

}  // namespace

LogisticModel fit_logistic(const std::vector<Sample>& samples, const LogisticOptions& options) {
    if (samples.empty()) throw std::invalid_argument("fit_logistic: no samples");
    if (!(options.C > 0.0)) throw std::invalid_argument("fit_logistic: C must be positive");
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto p = static_cast<Eigen::Index>(samples.front().features.size());

    LogisticModel model;
    model.C = options.C;
    Eigen::MatrixXd raw(n, p);
    Eigen::MatrixXi onehot = Eigen::MatrixXi::Zero(n, 3);
    std::array<int, kNumClasses> class_counts{};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(s.features.size()) != p) {
            throw std::invalid_argument("fit_logistic: inconsistent feature lengths");
        }
        raw.row(i) = Eigen::Map<const Eigen::RowVectorXd>(s.features.data(), p);
        const auto c = class_index(s.direction);
        onehot(i, static_cast<Eigen::Index>(c)) = 1;
        ++class_counts[c];
    }

    model.feature_mean = raw.colwise().mean().transpose();
    model.feature_scale = ((raw.rowwise() - model.feature_mean.transpose()).array().square().colwise().sum() /
                           static_cast<double>(n))
                              .sqrt()
                              .transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(model.feature_scale(j) > 0.0)) model.feature_scale(j) = 1.0;
    }
    model.weights = Eigen::MatrixXd::Zero(3, p);
    model.intercepts = Eigen::Vector3d::Zero();

    const int present = static_cast<int>(std::count_if(class_counts.begin(), class_counts.end(), [](int c) { return c > 0; }));
    if (present == 1) {
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            if (class_counts[c] > 0) model.degenerate_class = class_direction(c);
        }
        return model;
    }

    Objective obj;
    obj.x.resize(n, p + 1);
    obj.x.leftCols(p) = (raw.rowwise() - model.feature_mean.transpose()).array().rowwise() /
                        model.feature_scale.transpose().array();
    obj.x.col(p).setOnes();
    obj.onehot = std::move(onehot);
    obj.C = options.C;
    obj.p = p;

    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(3, p + 1);
    Eigen::MatrixXd grad;
    double loss = obj.eval(theta, &grad);
    model.loss_trace.push_back(loss);
    double step = 1.0;
    for (int it = 0; it < options.max_iters; ++it) {
        const double gnorm2 = grad.squaredNorm();
        if (std::sqrt(gnorm2) < options.tol) break;
        // Armijo backtracking; try a larger step first after every success.
        step *= 2.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings) {
            Eigen::MatrixXd trial = theta - step * grad;
            const double trial_loss = obj.eval(trial, nullptr);
            if (trial_loss <= loss - 0.5 * step * gnorm2) {
                theta = std::move(trial);
                loss = obj.eval(theta, &grad);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        model.loss_trace.push_back(loss);
        model.iterations = it + 1;
    }
    model.weights = theta.leftCols(p);
    model.intercepts = theta.col(p);
    return model;
}

ClassProbs logistic_probabilities(const LogisticModel& model, std::span<const double> x) {
    const auto p = model.feature_mean.size();
    if (static_cast<Eigen::Index>(x.size()) != p) throw std::invalid_argument("logistic: feature length mismatch");
    ClassProbs out{};
    if (model.degenerate_class) {
        out[class_index(*model.degenerate_class)] = 1.0;
        return out;
    }
    Eigen::VectorXd z = (Eigen::Map<const Eigen::VectorXd>(x.data(), p) - model.feature_mean).cwiseQuotient(model.feature_scale);
    Eigen::Vector3d logits = model.weights * z + model.intercepts;
    logits.array() -= logits.maxCoeff();
    Eigen::Vector3d e = logits.array().exp();
    e /= e.sum();
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = e(static_cast<Eigen::Index>(c));
    return out;
}

Direction logistic_predict(const LogisticModel& model, std::span<const double> x) {
    return argmax_direction(logistic_probabilities(model, x));
}

}  // namespace mandi
