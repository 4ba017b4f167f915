// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers to run a subset.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "mandi/eval.hpp"
#include "mandi/forest.hpp"
#include "mandi/impute.hpp"
#include "mandi/kernel.hpp"
#include "mandi/logistic.hpp"
#include "mandi/panel.hpp"
#include "mandi/pipeline.hpp"
#include "mandi/service.hpp"
#include "mandi/synthetic.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace mandi;

namespace {

// Pinned tolerances.
constexpr double kWeightSumTol = 1e-9;
constexpr double kRecoveryRmse = 0.05;
constexpr double kObjectiveSlack = 1e-12;  // relative, for floating-point noise in the objective
constexpr double kSkillMargin = 0.05;
constexpr double kCoverageTarget = 0.8;
constexpr double kReconstructionTol = 1e-9;
constexpr double kRfnnEqualityTol = 1e-9;
constexpr double kRfnnSlack = 0.10;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (!pass) detail << "; ";
            pass = false;
            detail << "violated: " << what;
        }
    }
};

// ----------------------------------------------------------------------------------------------
// Fixtures

std::vector<Sample> three_class_samples(int n, int dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.market_id = "M" + std::to_string(i % 5);
        s.step = i / 5 + 1;
        s.features.resize(static_cast<std::size_t>(dims));
        for (auto& v : s.features) v = g(rng);
        const double score = s.features[0] + 0.5 * s.features[1] * s.features[(dims > 2) ? 2 : 0] + 0.4 * g(rng);
        s.direction = score < -0.4 ? Direction::Down : score > 0.4 ? Direction::Up : Direction::Flat;
        s.price = 1500.0 + 300.0 * s.features[0] + 50.0 * g(rng);
        out.push_back(std::move(s));
    }
    return out;
}

// The 20-market, 730-day seasonal fixture, imputed, quantized at q = 1, with one forest per target
// market trained on the earliest 80% of steps.
struct MarketSplit {
    std::string market;
    std::vector<Sample> train;
    std::vector<Sample> test;  // target market only, steps after the split
    ForestModel forest;
    LogisticModel logistic;
    Direction majority = Direction::Flat;
};

struct SyntheticContext {
    SyntheticData data;
    QuantizedPanel price;
    QuantizedPanel volume;
    int split_step = 0;
    std::vector<MarketSplit> markets;
    double build_seconds = 0.0;
};

const SyntheticContext& synthetic_context() {
    static const SyntheticContext ctx = [] {
        const auto start = std::chrono::steady_clock::now();
        SyntheticContext c;
        SyntheticSpec spec;  // 20 markets x 730 days, 30% seasonal amplitude, 10% noise, 20% missing
        spec.seed = 1;
        c.data = make_synthetic(spec);
        auto panels = build_panels(c.data.rows, spec.produce, c.data.start_date, static_cast<std::size_t>(spec.days),
                                   c.data.registry);
        ImputeConfig impute;
        impute.max_rank = 5;
        impute.rng_seed = 1;
        const auto price = soft_impute(panels.price, impute).panel;
        impute.floor = 0.0;
        const auto volume = soft_impute(panels.volume, impute).panel;
        c.price = quantize(price, 1);
        c.volume = quantize(volume, 1);
        c.split_step = static_cast<int>(c.price.num_steps() * 0.8);
        for (const auto& id : c.data.registry.ids()) {
            MarketSplit m;
            m.market = id;
            for (auto& s : build_samples(c.price, c.volume, id, {10, 5}, c.data.registry).samples) {
                if (s.step <= c.split_step) {
                    m.train.push_back(std::move(s));
                } else if (s.market_id == id) {
                    m.test.push_back(std::move(s));
                }
            }
            m.forest = fit_forest(m.train, {.num_trees = 100, .rng_seed = 7});
            m.logistic = fit_logistic(m.train, {.C = 1.0});
            std::array<int, 3> counts{};
            for (const auto& s : m.train) ++counts[class_index(s.direction)];
            m.majority = argmax_direction({double(counts[0]), double(counts[1]), double(counts[2])});
            c.markets.push_back(std::move(m));
        }
        c.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return c;
    }();
    return ctx;
}

// ----------------------------------------------------------------------------------------------
// Criteria

Outcome kernel_identity() {
    Outcome o;
    const auto samples = three_class_samples(300, 6, 11);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.3);
    int vectors = 0, mismatches = 0;
    double worst_sum = 0.0;
    for (int trees = 1; trees <= 50; ++trees) {
        const auto model = fit_forest(samples, {.num_trees = trees, .rng_seed = static_cast<std::uint64_t>(trees)});
        for (int i = 0; i < 10; ++i, ++vectors) {
            std::vector<double> x(6);
            for (auto& v : x) v = g(rng);
            const auto w = kernel_weights(model, x);
            double sum = 0.0;
            for (const auto& n : w) sum += n.weight;
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            mismatches += classify(posterior(w)) != forest_predict(model, x).direction;
        }
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " kernel/forest disagreements");
    o.require(worst_sum <= kWeightSumTol, "weight sum off by more than 1e-9");
    o.detail << (o.pass ? "" : " | ") << vectors << " vectors, forests of 1..50 trees, " << mismatches
             << " disagreements, max |sum w - 1| = " << worst_sum;
    return o;
}

Outcome imputation_recovery() {
    Outcome o;
    const Eigen::MatrixXd truth = positive_low_rank(50, 200, 3, 42);
    SparsePanel panel;
    panel.produce = "x";
    for (int m = 0; m < 50; ++m) panel.markets.push_back("m" + std::to_string(m));
    panel.start_date = parse_date("2017-01-01");
    panel.num_days = 200;
    panel.values = Grid<std::optional<double>>(50, 200);
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t m = 0; m < 50; ++m) {
        for (std::size_t t = 0; t < 200; ++t) {
            if (u(rng) >= 0.7) panel.values(m, t) = truth(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t));
        }
    }
    ImputeConfig cfg;
    cfg.max_rank = 10;
    cfg.rng_seed = 44;
    const auto result = soft_impute(panel, cfg);
    double err = 0.0, norm = 0.0;
    for (std::size_t m = 0; m < 50; ++m) {
        for (std::size_t t = 0; t < 200; ++t) {
            if (panel.values(m, t)) continue;
            const auto i = static_cast<Eigen::Index>(m), j = static_cast<Eigen::Index>(t);
            err += std::pow(truth(i, j) - result.panel.values(i, j), 2);
            norm += truth(i, j) * truth(i, j);
        }
    }
    const double rel = std::sqrt(err / norm);
    double worst_rise = 0.0;
    for (const auto& trace : result.report.objective_trace) {
        for (std::size_t i = 1; i < trace.size(); ++i) {
            worst_rise = std::max(worst_rise, (trace[i] - trace[i - 1]) / std::abs(trace[i - 1]));
        }
    }
    o.require(rel < kRecoveryRmse, "held-out relative RMSE >= 0.05");
    o.require(worst_rise <= kObjectiveSlack, "objective increased within a lambda");
    o.detail << (o.pass ? "" : " | ") << "held-out relative RMSE " << rel << " (< 0.05), "
             << result.report.objective_trace.size() << " lambda traces, max relative objective rise " << worst_rise;
    return o;
}

Outcome forecast_skill() {
    Outcome o;
    const auto& ctx = synthetic_context();
    std::vector<Direction> truth, forest, logistic, majority;
    for (const auto& m : ctx.markets) {
        for (const auto& s : m.test) {
            truth.push_back(s.direction);
            forest.push_back(forest_predict(m.forest, s.features).direction);
            logistic.push_back(logistic_predict(m.logistic, s.features));
            majority.push_back(m.majority);
        }
    }
    const double forest_raw = raw_accuracy(truth, forest);
    const double majority_raw = raw_accuracy(truth, majority);
    const double forest_bal = balanced_accuracy(truth, forest);
    const double logistic_bal = balanced_accuracy(truth, logistic);
    o.require(forest_raw - majority_raw >= kSkillMargin, "forest raw accuracy not 5pp above majority");
    o.require(forest_bal > logistic_bal, "forest balanced accuracy does not exceed logistic");
    o.detail << (o.pass ? "" : " | ") << truth.size() << " test steps; raw accuracy forest " << forest_raw
             << " vs majority " << majority_raw << " (+" << 100 * (forest_raw - majority_raw)
             << "pp, need >= 5); balanced accuracy forest " << forest_bal << " vs logistic " << logistic_bal
             << " (need >)";
    return o;
}

Outcome interval_behavior() {
    Outcome o;
    const auto& ctx = synthetic_context();
    std::vector<int> hits(30, 0);
    int samples = 0, nesting_violations = 0, uncalibrated = 0;
    double worst_cal = 1.0;
    for (const auto& m : ctx.markets) {
        for (const auto& s : m.test) {
            const auto w = kernel_weights(m.forest, s.features);
            Interval prev{};
            for (int l = 1; l <= 30; ++l) {
                const auto iv = interval_top_l(w, l);
                if (l > 1 && (iv.lower > prev.lower || iv.upper < prev.upper)) ++nesting_violations;
                hits[static_cast<std::size_t>(l - 1)] += iv.contains(s.price);
                prev = iv;
            }
            ++samples;
        }
        // The calibration split is the market's most recent 20% of steps, held out from the forest.
        const auto cal = calibrate_l(m.forest, m.test, kCoverageTarget);
        if (cal.flagged || cal.coverage < kCoverageTarget) ++uncalibrated;
        worst_cal = std::min(worst_cal, cal.coverage);
    }
    bool monotone = true;
    for (std::size_t l = 1; l < hits.size(); ++l) monotone &= hits[l] >= hits[l - 1];
    o.require(nesting_violations == 0, std::to_string(nesting_violations) + " non-nested interval pairs");
    o.require(monotone, "coverage decreased in l");
    o.require(uncalibrated == 0, std::to_string(uncalibrated) + " markets below the calibration target");
    o.detail << (o.pass ? "" : " | ") << samples << " held-out steps; coverage l=1 " << double(hits[0]) / samples
             << ", l=10 " << double(hits[9]) / samples << ", l=30 " << double(hits[29]) / samples
             << "; nesting violations " << nesting_violations << "; min calibrated coverage over "
             << ctx.markets.size() << " markets " << worst_cal << " (>= 0.8)";
    return o;
}

Outcome quantization_algebra() {
    Outcome o;
    // Block means on exact values; the 7th day forms a partial block and is dropped.
    DensePanel d;
    d.produce = "x";
    d.markets = {"A", "B"};
    d.start_date = parse_date("2017-01-01");
    d.values.resize(2, 7);
    d.values << 1, 2, 3, 10, 20, 30, 999,  //
        4, 4, 4, 0.5, 1.5, 1.0, -7;
    const auto q = quantize(d, 3);
    o.require(q.num_steps() == 2, "trailing partial block kept");
    o.require(q.at(0, 1) == 2.0 && q.at(0, 2) == 20.0 && q.at(1, 1) == 4.0 && q.at(1, 2) == 1.0, "block means");
    d.values(0, 6) = -123;
    o.require(quantize(d, 3).values == q.values, "dropped day influenced the result");
    o.require(q.step_first_day(2) == parse_date("2017-01-04") && q.step_last_day(2) == parse_date("2017-01-06"),
              "block calendar");

    // Reconstruction identity and sign mapping on the seasonal fixture.
    const auto syn = make_synthetic(SyntheticSpec{.markets = 20, .days = 730, .missing = 0.0, .seed = 3});
    DensePanel full;
    full.produce = "tomato";
    full.markets = syn.registry.ids();
    full.start_date = syn.start_date;
    full.values = syn.true_price;
    double worst = 0.0;
    int sign_errors = 0;
    for (int qq : {1, 7, 14, 28}) {
        const auto qp = quantize(full, qq);
        const auto delta = relative_changes(qp);
        const auto dirs = directions(delta);
        for (Eigen::Index m = 0; m < qp.values.rows(); ++m) {
            o.require(delta(m, 0) == 0.0, "first delta not zero");
            for (Eigen::Index s = 1; s < qp.values.cols(); ++s) {
                const double rebuilt = qp.values(m, s - 1) * (1.0 + delta(m, s));
                worst = std::max(worst, std::abs(rebuilt - qp.values(m, s)) / std::abs(qp.values(m, s)));
                const double dv = delta(m, s);
                const Direction expect = dv > 0 ? Direction::Up : dv < 0 ? Direction::Down : Direction::Flat;
                sign_errors += dirs(static_cast<std::size_t>(m), static_cast<std::size_t>(s)) != expect;
            }
        }
    }
    o.require(worst <= kReconstructionTol, "reconstruction error above 1e-9");
    o.require(sign_errors == 0, "sign mapping");
    o.require(direction_of(0.0) == Direction::Flat && direction_of(-1e-300) == Direction::Down &&
                  direction_of(1e-300) == Direction::Up,
              "sign mapping at zero");

    // Sample counts |M_k(m)| * (S - tau).
    const auto qp = quantize(full, 7);
    DensePanel vol = full;
    vol.values = syn.true_volume;
    const auto qv = quantize(vol, 7);
    int count_errors = 0, checked = 0;
    for (int k : {1, 3, 5, 20}) {
        for (int tau : {1, 5, 10, 103}) {
            for (const auto& id : {"M000", "M007", "M019"}) {
                const auto set = build_samples(qp, qv, id, {tau, k}, syn.registry);
                const auto nk = neighbor_markets(syn.registry, id, k).market_ids.size();
                count_errors += set.samples.size() != nk * static_cast<std::size_t>(std::max(0, qp.num_steps() - tau));
                ++checked;
            }
        }
    }
    o.require(count_errors == 0, std::to_string(count_errors) + " sample-count mismatches");
    o.detail << (o.pass ? "" : " | ") << "block means exact, partial block dropped; max reconstruction error "
             << worst << " (<= 1e-9) over q in {1,7,14,28}; sign errors " << sign_errors << "; " << checked
             << " sample-count checks";
    return o;
}

Outcome no_lookahead_cv() {
    Outcome o;
    SyntheticSpec spec;
    spec.seed = 2;
    const auto syn = make_synthetic(spec);
    auto panels = build_panels(syn.rows, spec.produce, syn.start_date, static_cast<std::size_t>(spec.days), syn.registry);
    const DataBundle data{syn.registry, panels.price, panels.volume};
    CvConfig cv;
    cv.q = 7;
    cv.tau = 10;
    cv.t2 = data.price.date_of(static_cast<std::size_t>(spec.days - 7));
    cv.t1 = add_days(cv.t2, -7 * 5);
    cv.grid.max_rank = {5};
    cv.grid.k = {3, 5};
    cv.grid.num_trees = {20};
    cv.target_markets = {"M003", "M011"};
    cv.impute.max_iters = 100;
    cv.seed = 5;

    int folds = 0, violations = 0;
    try {
        const auto result = sweep(data, cv);
        for (const auto& row : result.table) {
            for (const auto& f : row.folds) {
                if (!f.used) continue;
                ++folds;
                violations += !f.latest_training_day || *f.latest_training_day >= f.date;
            }
        }
    } catch (const LookaheadError& e) {
        o.require(false, std::string("clean sweep raised: ") + e.what());
    }
    o.require(folds > 0, "no fold was evaluated");
    o.require(violations == 0, std::to_string(violations) + " folds trained on days >= the validation date");

    bool tripped = false;
    auto leaky = cv;
    leaky.leak_future_days = 1;
    leaky.grid.k = {3};
    leaky.t1 = add_days(cv.t2, -7);
    try {
        time_series_cv(data, leaky, leaky.grid.candidates().front());
    } catch (const LookaheadError&) {
        tripped = true;
    }
    o.require(tripped, "leaking one future day did not trip the assertion");
    o.detail << (o.pass ? "" : " | ") << folds << " used folds over a 2-candidate sweep, all trained strictly before "
             << "their validation date; one-day leak " << (tripped ? "tripped" : "did not trip") << " the assertion";
    return o;
}

Outcome rfnn_regression() {
    Outcome o;
    // Convex combinations on 500 fixtures.
    const auto samples = three_class_samples(250, 5, 21);
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g(0.0, 1.2);
    int convex_failures = 0;
    ForestModel model;
    for (int i = 0; i < 500; ++i) {
        // Ten forests of growing size, fifty query vectors each.
        if (i % 50 == 0) model = fit_forest(samples, {.num_trees = 1 + i / 10, .rng_seed = static_cast<std::uint64_t>(i)});
        std::vector<double> x(5);
        for (auto& v : x) v = g(rng);
        const auto w = kernel_weights(model, x);
        double lo = INFINITY, hi = -INFINITY, sum = 0.0;
        bool nonneg = true;
        for (const auto& n : w) {
            lo = std::min(lo, n.neighbor_price);
            hi = std::max(hi, n.neighbor_price);
            sum += n.weight;
            nonneg &= n.weight >= 0.0;
        }
        const double p = regress_rfnn(w);
        convex_failures += !(nonneg && std::abs(sum - 1.0) <= kWeightSumTol && p >= lo * (1 - 1e-12) &&
                             p <= hi * (1 + 1e-12));
    }
    o.require(convex_failures == 0, std::to_string(convex_failures) + " non-convex predictions");

    // Synthetic panel: RFNN against a brute-force leaf-sharing oracle that does not use kernel_weights.
    const auto& ctx = synthetic_context();
    std::vector<double> truth, rfnn, oracle;
    double worst_gap = 0.0;
    for (const auto& m : ctx.markets) {
        const auto& f = m.forest;
        const auto n = f.training_samples.size();
        std::vector<std::vector<int>> train_leaf(f.num_trees(), std::vector<int>(n));
        for (std::size_t b = 0; b < f.num_trees(); ++b) {
            for (std::size_t i = 0; i < n; ++i) train_leaf[b][i] = f.trees[b].leaf_of(f.training_samples[i].features);
        }
        for (const auto& s : m.test) {
            double est = 0.0;
            for (std::size_t b = 0; b < f.num_trees(); ++b) {
                const int leaf = f.trees[b].leaf_of(s.features);
                double mass = 0.0, acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (train_leaf[b][i] != leaf || f.inbag[b][i] == 0) continue;
                    mass += f.inbag[b][i];
                    acc += f.inbag[b][i] * f.training_samples[i].price;
                }
                est += acc / mass;
            }
            est /= static_cast<double>(f.num_trees());
            const double r = regress_rfnn(kernel_weights(f, s.features));
            worst_gap = std::max(worst_gap, std::abs(r - est) / std::abs(est));
            truth.push_back(s.price);
            rfnn.push_back(r);
            oracle.push_back(est);
        }
    }
    const double rmse_rfnn = rmse(truth, rfnn);
    const double rmse_oracle = rmse(truth, oracle);
    o.require(std::abs(rmse_rfnn - rmse_oracle) <= kRfnnSlack * rmse_oracle, "RFNN RMSE not within 10% of oracle");
    o.require(worst_gap <= kRfnnEqualityTol, "RFNN differs from the oracle by more than 1e-9 relative");
    o.detail << (o.pass ? "" : " | ") << "500 convex fixtures ok; " << truth.size() << " held-out steps, RMSE "
             << rmse_rfnn << " Rs/kg vs oracle " << rmse_oracle << " Rs/kg, max relative gap " << worst_gap
             << " (<= 1e-9)";
    return o;
}

Outcome pipeline_atomicity() {
    using namespace mandi::testing;
    Outcome o;
    const auto data = small_market_data(201);
    const Date day1 = add_days(data.start_date, 199);
    const Date day2 = add_days(data.start_date, 200);
    MemorySource source(data.rows);
    const auto config = light_pipeline_config();

    TempDir dir;
    constexpr int kRequests = 100;
    std::atomic<bool> armed{false}, published{false};
    std::atomic<int> done{0};
    auto wait_for = [](auto&& pred) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
        while (!pred() && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    };
    StoreHooks hooks;
    hooks.on_write = [&](const std::string& event) {
        if (!armed) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        if (event == "archive:rename") wait_for([&] { return done.load() >= kRequests / 2; });
        if (event == "publish") published = true;
    };
    Store store(dir.path(), hooks);
    seed_store(store, data, day1);

    // Success: 3 markets x 1 produce x 4 horizons, minus q = 28 (7 steps < tau + 1) for each market.
    const auto ok = run_daily(day1, store, {&source}, {}, config);
    bool all_ok = true;
    for (const auto& s : ok.stages) all_ok &= s.status == StageStatus::Ok;
    o.require(all_ok && ok.published, "success run: not 6 x ok");
    o.require(ok.forecasts_written == 9, "success run wrote " + std::to_string(ok.forecasts_written) + " forecasts, expected 9");
    const auto first_id = store.published_id();

    // Acquire failure.
    FailingSource failing;
    const auto failed = run_daily(day1, store, {&failing}, {}, config);
    bool shape = failed.stages[0].status == StageStatus::Failed;
    for (std::size_t i = 1; i < failed.stages.size(); ++i) shape &= failed.stages[i].status == StageStatus::Skipped;
    o.require(shape, "acquire failure: statuses not (failed, skipped x5)");
    o.require(store.published_id() == first_id, "acquire failure moved the published pointer");
    o.require(store.runs().size() == 2, "failed run report not persisted");

    // Rerun of the same date.
    auto to_text = [](const Snapshot& s) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : s.forecasts) arr.push_back(to_json(r));
        return arr.dump();
    };
    const auto before = store.published();
    const auto rerun = run_daily(day1, store, {&source}, {}, config);
    const auto after = store.published();
    o.require(rerun.ok() && rerun.forecasts_written == ok.forecasts_written, "rerun: count changed or run failed");
    o.require(after && before && to_text(*after) == to_text(*before), "rerun: forecasts differ");
    o.require(rerun.attempt == 3, "rerun: attempt counter not advanced");

    // Read burst against the HTTP service while the next day's run publishes.
    Store reader(dir.path());
    Api api(reader, {});
    HttpServer server(api);
    const int port = server.bind("127.0.0.1", 0);
    std::thread serving([&] { server.listen(); });
    const std::string forecast_path = "/api/v1/forecast/M001/tomato";
    const std::string history_path = "/api/v1/history/M001/tomato?days=30";
    auto direct = [&](const std::string& path) {
        ApiRequest req{"GET", path.substr(0, path.find('?')), {}, {}};
        if (path.find("days=") != std::string::npos) req.query["days"] = "30";
        return api.handle(req).body;
    };
    const auto old_forecast = direct(forecast_path);
    const auto old_history = direct(history_path);
    armed = true;
    RunReport next;
    std::thread run([&] { next = run_daily(day2, store, {&source}, {}, config); });
    std::vector<std::string> bodies(kRequests);
    std::atomic<int> cursor{0};
    std::vector<std::thread> clients;
    for (int c = 0; c < 4; ++c) {
        clients.emplace_back([&] {
            httplib::Client client("127.0.0.1", port);
            for (int i = cursor++; i < kRequests; i = cursor++) {
                if (i >= kRequests / 2) wait_for([&] { return published.load(); });
                if (auto res = client.Get(i % 2 == 0 ? forecast_path : history_path)) bodies[i] = res->body;
                ++done;
            }
        });
    }
    for (auto& t : clients) t.join();
    run.join();
    server.stop();
    serving.join();
    const auto new_forecast = direct(forecast_path);
    const auto new_history = direct(history_path);
    int old_seen = 0, new_seen = 0, mixed = 0;
    for (int i = 0; i < kRequests; ++i) {
        const auto& old_body = i % 2 == 0 ? old_forecast : old_history;
        const auto& new_body = i % 2 == 0 ? new_forecast : new_history;
        if (bodies[i] == old_body) {
            ++old_seen;
        } else if (bodies[i] == new_body) {
            ++new_seen;
        } else {
            ++mixed;
        }
    }
    o.require(next.ok(), "burst-time run failed");
    o.require(old_forecast != new_forecast, "the burst-time run did not change the payload");
    o.require(mixed == 0, std::to_string(mixed) + " responses matched neither snapshot");
    o.require(old_seen > 0 && new_seen > 0, "burst did not straddle the publish");
    o.detail << (o.pass ? "" : " | ") << "success 6 x ok with " << ok.forecasts_written
             << " forecasts; acquire failure (failed, skipped x5) kept pointer; rerun identical; burst of "
             << kRequests << ": " << old_seen << " old, " << new_seen << " new, " << mixed << " mixed";
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
    bool uses_synthetic_context = false;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "kernel identity", 30, kernel_identity},
        {2, "imputation recovery", 10, imputation_recovery},
        {3, "end-to-end synthetic forecast skill", 300, forecast_skill, true},
        {4, "interval behavior", 120, interval_behavior, true},
        {5, "quantization and label algebra", 5, quantization_algebra},
        {6, "no-lookahead CV", 120, no_lookahead_cv},
        {7, "RFNN regression", 60, rfnn_regression, true},
        {8, "pipeline atomicity", 60, pipeline_atomicity},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    bool context_built = false;
    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome.require(false, std::string("threw: ") + e.what());
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        // The shared synthetic fixture is charged to whichever criterion built it; later ones add its cost
        // so each timing reflects a standalone run.
        if (c.uses_synthetic_context) {
            if (context_built) seconds += synthetic_context().build_seconds;
            context_built = true;
        }
        if (seconds > c.limit_seconds) {
            outcome.require(false, "runtime " + std::to_string(seconds) + " s over the limit");
        }
        failures += !outcome.pass;
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (outcome.pass ? "PASS" : "FAIL") << " | "
                  << outcome.detail.str() << " | " << std::fixed << std::setprecision(1) << seconds << " s of "
                  << c.limit_seconds << " s" << std::defaultfloat << std::setprecision(6) << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
