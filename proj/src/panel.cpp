#include "mandi/panel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mandi {

const char* wire_name(Direction d) {
    switch (d) {
        case Direction::Down: return "down";
        case Direction::Flat: return "flat";
        case Direction::Up: return "up";
    }
    return "flat";
}

Direction direction_from_int(int v) {
    if (v < -1 || v > 1) throw std::invalid_argument("direction must be -1, 0 or 1");
    return static_cast<Direction>(v);
}

QuantizedPanel quantize(const DensePanel& dense, int q) {
    if (q < 1) throw std::invalid_argument("quantize: q must be >= 1");
    const auto t = static_cast<Eigen::Index>(dense.num_days());
    if (t < q) {
        throw std::invalid_argument("quantize: " + std::to_string(t) + " days is shorter than q = " + std::to_string(q));
    }
    const Eigen::Index steps = t / q;
    QuantizedPanel out{dense.produce, dense.markets, dense.start_date, q,
                       Eigen::MatrixXd(dense.values.rows(), steps)};
    for (Eigen::Index s = 0; s < steps; ++s) {
        out.values.col(s) = dense.values.middleCols(s * q, q).rowwise().sum() / static_cast<double>(q);
    }
    return out;
}

QuantizedPanel quantize_ending_at_last_day(const DensePanel& dense, int q) {
    if (q < 1) throw std::invalid_argument("quantize: q must be >= 1");
    const std::size_t t = dense.num_days();
    if (t < static_cast<std::size_t>(q)) return quantize(dense, q);  // throws
    const std::size_t lead = t % static_cast<std::size_t>(q);
    return quantize(dense.slice_days(lead, t - lead), q);
}

Eigen::MatrixXd relative_changes(const QuantizedPanel& qp) {
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(qp.values.rows(), qp.values.cols());
    for (Eigen::Index s = 1; s < qp.values.cols(); ++s) {
        delta.col(s) = (qp.values.col(s) - qp.values.col(s - 1)).cwiseQuotient(qp.values.col(s - 1));
    }
    return delta;
}

Direction direction_of(double delta) {
    if (delta < 0.0) return Direction::Down;
    if (delta > 0.0) return Direction::Up;
    return Direction::Flat;
}

Grid<Direction> directions(const Eigen::MatrixXd& delta) {
    Grid<Direction> out(static_cast<std::size_t>(delta.rows()), static_cast<std::size_t>(delta.cols()));
    for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        for (Eigen::Index c = 0; c < delta.cols(); ++c) {
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = direction_of(delta(r, c));
        }
    }
    return out;
}

NeighborSelection neighbor_markets(const MarketRegistry& registry, const std::string& market_id, int k) {
    const auto& target = registry.at(market_id);
    if (k < 1 || static_cast<std::size_t>(k) > registry.size()) {
        throw std::invalid_argument("neighbor_markets: k = " + std::to_string(k) + " outside [1, " +
                                    std::to_string(registry.size()) + "]");
    }
    if (!target.has_coordinates()) {
        throw std::invalid_argument("neighbor_markets: market " + market_id + " has no coordinates");
    }

    struct Candidate {
        double distance;
        const std::string* id;
    };
    NeighborSelection out;
    std::vector<Candidate> candidates;
    for (const auto& m : registry.markets()) {
        if (m.market_id == market_id) continue;
        if (!m.has_coordinates()) {
            out.excluded_without_coordinates.push_back(m.market_id);
            continue;
        }
        const double dlat = *m.latitude - *target.latitude;
        const double dlon = *m.longitude - *target.longitude;
        candidates.push_back({std::sqrt(dlat * dlat + dlon * dlon), &m.market_id});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return *a.id < *b.id;
    });
    out.market_ids.push_back(market_id);
    for (std::size_t i = 0; i < candidates.size() && out.market_ids.size() < static_cast<std::size_t>(k); ++i) {
        out.market_ids.push_back(*candidates[i].id);
    }
    return out;
}

StepWindow step_window(const QuantizedPanel& qp, int step, int tau) {
    return StepWindow{qp.step_first_day(step - tau), qp.step_last_day(step - 1), qp.step_first_day(step),
                      qp.step_last_day(step)};
}

namespace {

std::size_t market_index(const QuantizedPanel& qp, const std::string& id) {
    auto it = std::find(qp.markets.begin(), qp.markets.end(), id);
    if (it == qp.markets.end()) throw std::invalid_argument("market " + id + " not in panel");
    return static_cast<std::size_t>(it - qp.markets.begin());
}

void check_compatible(const QuantizedPanel& price, const QuantizedPanel& volume) {
    if (price.markets != volume.markets || price.q != volume.q || price.start_date != volume.start_date ||
        price.num_steps() != volume.num_steps()) {
        throw std::invalid_argument("price and volume panels do not share axes");
    }
}

std::vector<double> features_at(const QuantizedPanel& volume, const Eigen::MatrixXd& delta, std::size_t m, int step,
                                int tau) {
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(2 * tau));
    const auto row = static_cast<Eigen::Index>(m);
    for (int s = step - tau; s < step; ++s) x.push_back(delta(row, s - 1));
    for (int s = step - tau; s < step; ++s) x.push_back(volume.at(m, s));
    return x;
}

}  // namespace

SampleSet build_samples_for(const QuantizedPanel& price, const QuantizedPanel& volume,
                            const std::vector<std::string>& markets, int tau) {
    if (tau < 1) throw std::invalid_argument("build_samples: tau must be >= 1");
    check_compatible(price, volume);
    SampleSet out;
    const int steps = price.num_steps();
    if (steps <= tau) {
        out.warnings.push_back("only " + std::to_string(steps) + " steps, need more than tau = " + std::to_string(tau));
        return out;
    }
    const Eigen::MatrixXd delta = relative_changes(price);
    for (const auto& id : markets) {
        const std::size_t m = market_index(price, id);
        const auto row = static_cast<Eigen::Index>(m);
        for (int s = tau + 1; s <= steps; ++s) {
            out.samples.push_back(Sample{id, s, features_at(volume, delta, m, s, tau), direction_of(delta(row, s - 1)),
                                         price.at(m, s), step_window(price, s, tau)});
        }
    }
    return out;
}

SampleSet build_samples(const QuantizedPanel& price, const QuantizedPanel& volume, const std::string& target_market,
                        const FeatureConfig& config, const MarketRegistry& registry) {
    if (config.tau < 1) throw std::invalid_argument("build_samples: tau must be >= 1");
    auto selection = neighbor_markets(registry, target_market, config.k);
    SampleSet out = build_samples_for(price, volume, selection.market_ids, config.tau);
    for (const auto& id : selection.excluded_without_coordinates) {
        out.warnings.push_back("market " + id + " has no coordinates and was not considered as a neighbor");
    }
    return out;
}

std::vector<double> build_test_vector(const QuantizedPanel& price, const QuantizedPanel& volume,
                                      const std::string& market_id, int tau, int as_of_step) {
    if (tau < 1) throw std::invalid_argument("build_test_vector: tau must be >= 1");
    check_compatible(price, volume);
    if (as_of_step < tau + 1 || as_of_step > price.num_steps() + 1) {
        throw std::invalid_argument("build_test_vector: step " + std::to_string(as_of_step) +
                                    " needs history in steps [1, " + std::to_string(price.num_steps()) +
                                    "] with tau = " + std::to_string(tau));
    }
    return features_at(volume, relative_changes(price), market_index(price, market_id), as_of_step, tau);
}

}  // namespace mandi
