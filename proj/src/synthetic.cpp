#include "mandi/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mandi {

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.markets < 1 || spec.days < 1) throw std::invalid_argument("make_synthetic: empty fixture");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SyntheticData out;
    out.start_date = parse_date(spec.start_date);
    std::vector<MarketRecord> markets;
    std::vector<double> base(static_cast<std::size_t>(spec.markets));
    std::vector<double> phase(base.size());
    std::vector<double> vbase(base.size());
    for (int m = 0; m < spec.markets; ++m) {
        char id[16];
        std::snprintf(id, sizeof id, "M%03d", m);
        const double lon = 72.0 + 0.5 * m;
        const double lat = 19.0 + 0.3 * unit(rng);
        markets.push_back({id, std::string("Market ") + id, lat, lon, "MH"});
        base[static_cast<std::size_t>(m)] = 800.0 + 1200.0 * unit(rng);
        phase[static_cast<std::size_t>(m)] = 0.15 * m + 0.2 * unit(rng);
        vbase[static_cast<std::size_t>(m)] = 5.0 + 20.0 * unit(rng);
    }
    out.registry = MarketRegistry(std::move(markets));

    out.true_price.resize(spec.markets, spec.days);
    out.true_volume.resize(spec.markets, spec.days);
    const double omega = 2.0 * std::numbers::pi / spec.period_days;
    for (int m = 0; m < spec.markets; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        for (int t = 0; t < spec.days; ++t) {
            const double season = std::sin(omega * t + phase[mi]);
            const double p = base[mi] * (1.0 + spec.seasonal_amplitude * season) * (1.0 + spec.noise * gauss(rng));
            // Arrivals run opposite to prices.
            const double v = vbase[mi] * (1.0 - 0.5 * spec.seasonal_amplitude * season) * (1.0 + spec.noise * gauss(rng));
            out.true_price(m, t) = std::max(p, 1.0);
            out.true_volume(m, t) = std::max(v, 0.0);
        }
    }

    const std::string& produce = spec.produce;
    for (int t = 0; t < spec.days; ++t) {
        const Date day = add_days(out.start_date, t);
        for (int m = 0; m < spec.markets; ++m) {
            ObservationRow row{day, out.registry.markets()[static_cast<std::size_t>(m)].market_id, produce, {}, {}};
            if (unit(rng) >= spec.missing) row.modal_price = std::round(out.true_price(m, t) * 100.0) / 100.0;
            if (unit(rng) >= spec.missing) row.volume = std::round(out.true_volume(m, t) * 1000.0) / 1000.0;
            if (row.modal_price || row.volume) out.rows.push_back(std::move(row));
        }
    }
    return out;
}

Eigen::MatrixXd positive_low_rank(int rows, int cols, int rank, std::uint64_t seed) {
    if (rank < 1) throw std::invalid_argument("positive_low_rank: rank must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd u0(rows), v0(cols);
    for (int i = 0; i < rows; ++i) u0(i) = 1.0 + unit(rng);
    for (int j = 0; j < cols; ++j) v0(j) = 1.0 + unit(rng);
    a += 10.0 * u0 * v0.transpose();
    for (int r = 1; r < rank; ++r) {
        Eigen::VectorXd u(rows), v(cols);
        for (int i = 0; i < rows; ++i) u(i) = unit(rng) - 0.5;
        for (int j = 0; j < cols; ++j) v(j) = unit(rng) - 0.5;
        a += 4.0 * u * v.transpose();
    }
    // Entries stay above 10 - (rank - 1).
    return a;
}

}  // namespace mandi
