#include "mandi/forecast.hpp"

#include <algorithm>
#include <stdexcept>

namespace mandi {

namespace {

IntervalMethod method_from_name(const std::string& name) {
    for (auto m : {IntervalMethod::TopL, IntervalMethod::Threshold}) {
        if (name == method_name(m)) return m;
    }
    throw std::invalid_argument("unknown interval method '" + name + "'");
}

Direction direction_from_wire(const std::string& name) {
    for (auto d : {Direction::Down, Direction::Flat, Direction::Up}) {
        if (name == wire_name(d)) return d;
    }
    throw std::invalid_argument("unknown direction '" + name + "'");
}

DensePanel zeros_like(const SparsePanel& p) {
    DensePanel d;
    d.produce = p.produce;
    d.markets = p.markets;
    d.start_date = p.start_date;
    d.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.num_markets()), static_cast<Eigen::Index>(p.num_days));
    return d;
}

}  // namespace

CleanedPanels clean_panels(const std::vector<ObservationRow>& rows, const MarketRegistry& registry,
                           const std::string& produce, Date start, Date end, const OutlierPolicy& policy) {
    if (end < start) throw std::invalid_argument("clean_panels: end precedes start");
    const auto num_days = static_cast<std::size_t>(days_between(start, end) + 1);
    auto panels = build_panels(rows, produce, start, num_days, registry);
    auto cleaned = clean_outliers(panels.price, policy);
    if (cleaned.panel.present_count() == 0) {
        throw std::invalid_argument("no prices for " + produce + " between " + format_date(start) + " and " +
                                    format_date(end));
    }
    return {std::move(cleaned.panel), std::move(panels.volume), cleaned.report.removed.size()};
}

PreparedPanels impute_panels(CleanedPanels cleaned, ImputeConfig impute) {
    PreparedPanels out;
    out.outliers_removed = cleaned.outliers_removed;
    impute.max_rank = std::max(1, std::min({impute.max_rank, static_cast<int>(cleaned.price.num_markets()),
                                            static_cast<int>(cleaned.price.num_days)}));
    impute.floor = 1.0;
    auto price = soft_impute(cleaned.price, impute);
    out.price = std::move(price.panel);
    out.impute_report = std::move(price.report);
    if (cleaned.volume.present_count() == 0) {
        out.volume = zeros_like(cleaned.volume);
    } else {
        impute.floor = 0.0;
        out.volume = soft_impute(cleaned.volume, impute).panel;
    }
    out.raw_price = std::move(cleaned.price);
    out.raw_volume = std::move(cleaned.volume);
    return out;
}

PreparedPanels prepare_panels(const std::vector<ObservationRow>& rows, const MarketRegistry& registry,
                              const std::string& produce, Date start, Date end, ImputeConfig impute,
                              const OutlierPolicy& policy) {
    return impute_panels(clean_panels(rows, registry, produce, start, end, policy), std::move(impute));
}

nlohmann::json model_to_json(const StoredModel& model) {
    const auto& m = model.meta;
    return {{"format", "mandi-model"},
            {"meta",
             {{"produce", m.produce},
              {"market_id", m.market_id},
              {"q", m.q},
              {"tau", m.tau},
              {"max_rank", m.candidate.max_rank},
              {"k", m.candidate.k},
              {"C", m.candidate.C},
              {"num_trees", m.candidate.num_trees},
              {"version", m.version},
              {"trained_through", format_date(m.trained_through)},
              {"seed", m.seed},
              {"alpha", m.alpha},
              {"l", m.l},
              {"calibration_coverage", m.calibration_coverage},
              {"calibration_flagged", m.calibration_flagged}}},
            {"forest", forest_to_json(model.forest)}};
}

StoredModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mandi-model") throw std::invalid_argument("model_from_json: not a model document");
    const auto& m = j.at("meta");
    StoredModel out;
    out.meta.produce = m.at("produce");
    out.meta.market_id = m.at("market_id");
    out.meta.q = m.at("q");
    out.meta.tau = m.at("tau");
    out.meta.candidate = {m.at("max_rank"), m.at("k"), m.at("C"), m.at("num_trees")};
    out.meta.version = m.at("version");
    out.meta.trained_through = parse_date(m.at("trained_through").get<std::string>());
    out.meta.seed = m.at("seed");
    out.meta.alpha = m.at("alpha");
    out.meta.l = m.at("l");
    out.meta.calibration_coverage = m.at("calibration_coverage");
    out.meta.calibration_flagged = m.at("calibration_flagged");
    out.forest = forest_from_json(j.at("forest"));
    return out;
}

std::optional<StoredModel> fit_market_model(const QuantizedPanel& price, const QuantizedPanel& volume,
                                            const MarketRegistry& registry, const std::string& market,
                                            const TrainSettings& settings) {
    if (price.num_steps() < settings.tau + 1) return std::nullopt;
    std::size_t located = 0;
    for (const auto& m : registry.markets()) located += m.has_coordinates();
    Candidate candidate = settings.candidate;
    candidate.k = std::clamp(candidate.k, 1, static_cast<int>(located));
    auto samples = build_samples(price, volume, market, {settings.tau, candidate.k}, registry).samples;
    if (samples.empty()) return std::nullopt;

    ForestParams params;
    params.num_trees = candidate.num_trees;
    params.rng_seed = settings.seed;
    params.jobs = settings.jobs;

    StoredModel out;
    auto& meta = out.meta;
    meta.produce = price.produce;
    meta.market_id = market;
    meta.q = price.q;
    meta.tau = settings.tau;
    meta.candidate = candidate;
    meta.trained_through = price.step_last_day(price.num_steps());
    meta.seed = settings.seed;
    meta.alpha = settings.alpha;

    auto [earlier, calibration] = split_calibration(samples, settings.calibration_fraction);
    if (earlier.size() >= 2 && !calibration.empty()) {
        const auto cal = calibrate_l(fit_forest(std::move(earlier), params), calibration, settings.alpha);
        meta.l = cal.l;
        meta.calibration_coverage = cal.coverage;
        meta.calibration_flagged = cal.flagged;
    } else {
        meta.calibration_flagged = true;
    }
    out.forest = fit_forest(std::move(samples), params);
    return out;
}

nlohmann::json to_json(const ForecastRecord& r) {
    return {{"generated_at", r.generated_at},
            {"as_of", format_date(r.as_of)},
            {"market_id", r.market_id},
            {"produce", r.produce},
            {"q", r.q},
            {"target_start", format_date(r.target_start)},
            {"target_end", format_date(r.target_end)},
            {"direction", wire_name(r.direction)},
            {"posterior", {{"down", r.posterior[0]}, {"flat", r.posterior[1]}, {"up", r.posterior[2]}}},
            {"predicted_price_rs_per_quintal", r.predicted_price},
            {"interval",
             {{"lower", r.interval.lower},
              {"upper", r.interval.upper},
              {"method", method_name(r.interval.method)},
              {"param", r.interval.param},
              {"fallback", r.interval.fallback}}},
            {"evidence", r.evidence},
            {"model_version", r.model_version}};
}

ForecastRecord forecast_from_json(const nlohmann::json& j) {
    ForecastRecord r;
    r.generated_at = j.at("generated_at");
    r.as_of = parse_date(j.at("as_of").get<std::string>());
    r.market_id = j.at("market_id");
    r.produce = j.at("produce");
    r.q = j.at("q");
    r.target_start = parse_date(j.at("target_start").get<std::string>());
    r.target_end = parse_date(j.at("target_end").get<std::string>());
    r.direction = direction_from_wire(j.at("direction"));
    const auto& p = j.at("posterior");
    r.posterior = {p.at("down"), p.at("flat"), p.at("up")};
    r.predicted_price = j.at("predicted_price_rs_per_quintal");
    const auto& iv = j.at("interval");
    r.interval.lower = iv.at("lower");
    r.interval.upper = iv.at("upper");
    r.interval.method = method_from_name(iv.at("method"));
    r.interval.param = iv.at("param");
    r.interval.fallback = iv.at("fallback");
    r.evidence = j.at("evidence");
    r.model_version = j.at("model_version");
    return r;
}

ForecastRecord make_forecast(const StoredModel& model, const QuantizedPanel& price, const QuantizedPanel& volume,
                             Date as_of, std::string generated_at, std::size_t evidence_top_n) {
    const int S = price.num_steps();
    if (price.step_last_day(S) != as_of) {
        throw std::invalid_argument("make_forecast: panel must end on the as-of date " + format_date(as_of));
    }
    if (price.q != model.meta.q) throw std::invalid_argument("make_forecast: step size differs from the model's");
    const auto x = build_test_vector(price, volume, model.meta.market_id, model.meta.tau, S + 1);
    const auto weights = kernel_weights(model.forest, x);

    ForecastRecord r;
    r.generated_at = std::move(generated_at);
    r.as_of = as_of;
    r.market_id = model.meta.market_id;
    r.produce = model.meta.produce;
    r.q = model.meta.q;
    r.target_start = add_days(as_of, 1);
    r.target_end = add_days(as_of, model.meta.q);
    r.posterior = posterior(weights);
    r.direction = classify(r.posterior);
    r.predicted_price = regress_rfnn(weights);
    r.interval = interval_top_l(weights, model.meta.l);
    auto top = sorted_by_weight(weights);
    if (top.size() > evidence_top_n) top.resize(evidence_top_n);
    r.evidence = evidence_to_json(top);
    r.model_version = model.meta.version;
    return r;
}

}  // namespace mandi
