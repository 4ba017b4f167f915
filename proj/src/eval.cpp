#include "mandi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "mandi/forest.hpp"
#include "mandi/kernel.hpp"
#include "mandi/logistic.hpp"
#include "mandi/parallel.hpp"

namespace mandi {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
    if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        std::istringstream cell(item);
        T v{};
        if (!(cell >> v) || !cell.eof()) throw std::invalid_argument("grid: bad value '" + item + "' for " + key);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("grid: no values for " + key);
    return out;
}

double block_mean(const Eigen::MatrixXd& values, Eigen::Index market, std::size_t first, int q) {
    return values.row(market).segment(static_cast<Eigen::Index>(first), q).mean();
}

struct FoldContext {
    const DataBundle& data;
    const CvConfig& config;
    const Candidate& candidate;
    ImputationCache& cache;
    std::vector<std::string> targets;
};

ImputationCache::Entry impute_pair(const SparsePanel& price, const SparsePanel& volume, const ImputeConfig& base,
                                   int max_rank) {
    ImputeConfig pc = base;
    pc.max_rank = max_rank;
    pc.floor = 1.0;
    ImputeConfig vc = pc;
    vc.floor = 0.0;
    return {soft_impute(price, pc).panel, soft_impute(volume, vc).panel};
}

std::shared_ptr<const ImputationCache::Entry> full_imputation(const FoldContext& ctx) {
    const auto& d = ctx.data;
    return ctx.cache.get_or_compute(d.price.num_days, ctx.candidate.max_rank, [&] {
        return impute_pair(d.price, d.volume, ctx.config.impute, ctx.candidate.max_rank);
    });
}

Direction predict_one(const FoldContext& ctx, const std::vector<Sample>& train, std::span<const double> x,
                      std::uint64_t salt, std::optional<double>& rfnn_price) {
    switch (ctx.config.classifier) {
        case ClassifierKind::Forest: {
            ForestParams params;
            params.num_trees = ctx.candidate.num_trees;
            params.rng_seed = ctx.config.seed;
            params.jobs = 1;
            const auto model = fit_forest(train, params);
            const auto weights = kernel_weights(model, x);
            rfnn_price = regress_rfnn(weights);
            return classify(posterior(weights));
        }
        case ClassifierKind::Logistic: {
            LogisticOptions opts;
            opts.C = ctx.candidate.C;
            return logistic_predict(fit_logistic(train, opts), x);
        }
        case ClassifierKind::Majority: {
            ClassProbs counts{};
            for (const auto& s : train) counts[class_index(s.direction)] += 1.0;
            return argmax_direction(counts);
        }
        case ClassifierKind::UniformRandom: {
            std::mt19937_64 rng(ctx.config.seed ^ (salt * 0x9E3779B97F4A7C15ULL));
            return class_direction(std::uniform_int_distribution<std::size_t>(0, 2)(rng));
        }
    }
    throw std::logic_error("unknown classifier");
}

FoldResult run_fold(const FoldContext& ctx, Date t, std::size_t fold_index) {
    const auto& cfg = ctx.config;
    const auto& data = ctx.data;
    FoldResult fold;
    fold.date = t;
    const long t_day = days_between(data.price.start_date, t);
    const auto num_days = static_cast<long>(data.price.num_days);
    const long q = cfg.q;
    if (t_day < q || t_day + q > num_days) {
        fold.skip_reason = "validation step outside the data range";
        return fold;
    }
    const long train_days = std::min(t_day + cfg.leak_future_days, num_days);
    if (train_days < q * (cfg.tau + 1)) {
        fold.skip_reason = "insufficient history";
        return fold;
    }
    if (static_cast<std::size_t>(ctx.candidate.max_rank) >
        std::min<std::size_t>(data.price.num_markets(), static_cast<std::size_t>(train_days))) {
        fold.skip_reason = "max_rank exceeds fold dimensions";
        return fold;
    }

    const auto full = full_imputation(ctx);
    const auto train_n = static_cast<std::size_t>(train_days);
    std::shared_ptr<const ImputationCache::Entry> fold_panels;
    if (cfg.frozen_imputation) {
        fold_panels = std::make_shared<const ImputationCache::Entry>(
            ImputationCache::Entry{full->price.slice_days(0, train_n), full->volume.slice_days(0, train_n)});
    } else {
        const auto price = data.price.slice_days(0, train_n);
        if (price.present_count() == 0) {
            fold.skip_reason = "no observed prices before the validation date";
            return fold;
        }
        fold_panels = ctx.cache.get_or_compute(train_n, ctx.candidate.max_rank, [&] {
            return impute_pair(price, data.volume.slice_days(0, train_n), cfg.impute, ctx.candidate.max_rank);
        });
    }
    const auto qp = quantize_ending_at_last_day(fold_panels->price, cfg.q);
    const auto qv = quantize_ending_at_last_day(fold_panels->volume, cfg.q);

    std::vector<Direction> truth, pred;
    std::vector<double> truth_price, pred_price;
    for (std::size_t ti = 0; ti < ctx.targets.size(); ++ti) {
        const auto& market = ctx.targets[ti];
        const auto samples =
            build_samples(qp, qv, market, {cfg.tau, ctx.candidate.k}, data.registry).samples;
        if (samples.empty()) continue;
        for (const auto& s : samples) {
            if (s.last_day() >= t) {
                throw LookaheadError("training sample " + s.market_id + "@" + std::to_string(s.step) + " uses " +
                                     format_date(s.last_day()) + ", on or after validation date " + format_date(t));
            }
            if (!fold.latest_training_day || s.last_day() > *fold.latest_training_day) {
                fold.latest_training_day = s.last_day();
            }
        }
        fold.training_samples += samples.size();

        const auto x = build_test_vector(qp, qv, market, cfg.tau, qp.num_steps() + 1);
        std::optional<double> rfnn;
        pred.push_back(predict_one(ctx, samples, x, fold_index * 1000003ULL + ti, rfnn));

        const auto m = static_cast<Eigen::Index>(
            std::find(data.price.markets.begin(), data.price.markets.end(), market) - data.price.markets.begin());
        const double before = block_mean(full->price.values, m, static_cast<std::size_t>(t_day - q), cfg.q);
        const double after = block_mean(full->price.values, m, static_cast<std::size_t>(t_day), cfg.q);
        truth.push_back(direction_of((after - before) / before));
        if (rfnn) {
            truth_price.push_back(after);
            pred_price.push_back(*rfnn);
        }
    }
    if (pred.empty()) {
        fold.skip_reason = "no target market has training samples";
        return fold;
    }
    fold.report = evaluate(truth, pred);
    if (!pred_price.empty()) fold.report.rmse = rmse(truth_price, pred_price);
    fold.score = fold.report.raw_accuracy + fold.report.balanced_accuracy;
    fold.used = true;
    return fold;
}

}  // namespace

double raw_accuracy(std::span<const Direction> truth, std::span<const Direction> pred) {
    check_pair(truth.size(), pred.size(), "raw_accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double balanced_accuracy(std::span<const Direction> truth, std::span<const Direction> pred) {
    return evaluate(truth, pred).balanced_accuracy;
}

double rmse(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth.size(), pred.size(), "rmse");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    return std::sqrt(sum / static_cast<double>(truth.size())) / 100.0;
}

EvalReport evaluate(std::span<const Direction> truth, std::span<const Direction> pred) {
    check_pair(truth.size(), pred.size(), "evaluate");
    std::array<std::size_t, 3> total{}, hits{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto c = class_index(truth[i]);
        ++total[c];
        hits[c] += truth[i] == pred[i];
    }
    EvalReport r;
    r.n_predictions = truth.size();
    r.raw_accuracy = raw_accuracy(truth, pred);
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        if (total[c] == 0) continue;
        r.per_class_accuracy[c] = static_cast<double>(hits[c]) / static_cast<double>(total[c]);
        sum += *r.per_class_accuracy[c];
        ++present;
    }
    r.balanced_accuracy = sum / present;
    return r;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < 3; ++c) {
        const char* name = wire_name(class_direction(c));
        per_class[name] = report.per_class_accuracy[c] ? nlohmann::json(*report.per_class_accuracy[c]) : nlohmann::json();
    }
    return {{"raw_accuracy", report.raw_accuracy},
            {"balanced_accuracy", report.balanced_accuracy},
            {"rmse_rs_per_kg", report.rmse ? nlohmann::json(*report.rmse) : nlohmann::json()},
            {"per_class_accuracy", per_class},
            {"n_predictions", report.n_predictions}};
}

const char* classifier_name(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Forest: return "forest";
        case ClassifierKind::Logistic: return "logistic";
        case ClassifierKind::Majority: return "majority";
        case ClassifierKind::UniformRandom: return "random";
    }
    return "?";
}

ClassifierKind classifier_from_name(const std::string& name) {
    for (auto k : {ClassifierKind::Forest, ClassifierKind::Logistic, ClassifierKind::Majority,
                   ClassifierKind::UniformRandom}) {
        if (name == classifier_name(k)) return k;
    }
    throw std::invalid_argument("unknown classifier '" + name + "'");
}

std::vector<Candidate> CvGrid::candidates() const {
    std::vector<Candidate> out;
    for (int r : max_rank)
        for (int kk : k)
            for (double c : C)
                for (int b : num_trees) out.push_back({r, kk, c, b});
    return out;
}

CvGrid parse_grid(std::istream& in) {
    CvGrid grid;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'name = values'");
        const auto key = trim(line.substr(0, eq));
        const auto values = line.substr(eq + 1);
        try {
            if (key == "max_rank") {
                grid.max_rank = parse_list<int>(key, values);
            } else if (key == "k") {
                grid.k = parse_list<int>(key, values);
            } else if (key == "C") {
                grid.C = parse_list<double>(key, values);
            } else if (key == "num_trees") {
                grid.num_trees = parse_list<int>(key, values);
            } else {
                throw std::invalid_argument("unknown grid axis '" + key + "'");
            }
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return grid;
}

std::shared_ptr<const ImputationCache::Entry> ImputationCache::get_or_compute(std::size_t end_day, int max_rank,
                                                                            const std::function<Entry()>& compute) {
    const auto key = std::make_pair(end_day, max_rank);
    {
        std::lock_guard lock(mu_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto entry = std::make_shared<const Entry>(compute());
    std::lock_guard lock(mu_);
    return entries_.try_emplace(key, std::move(entry)).first->second;
}

CvResult time_series_cv(const DataBundle& data, const CvConfig& config, const Candidate& candidate,
                        ImputationCache* cache) {
    if (!(config.t1 < config.t2)) throw std::invalid_argument("time_series_cv: t1 must precede t2");
    if (config.q < 1 || config.tau < 1) throw std::invalid_argument("time_series_cv: q and tau must be >= 1");
    const Date last = data.price.date_of(data.price.num_days - 1);
    if (config.t1 < data.price.start_date || config.t2 > last) {
        throw std::invalid_argument("time_series_cv: validation window outside the data range");
    }
    ImputationCache local;
    FoldContext ctx{data, config, candidate, cache ? *cache : local,
                    config.target_markets.empty() ? data.price.markets : config.target_markets};

    std::vector<Date> dates;
    for (Date t = config.t1; t <= config.t2; t = add_days(t, config.q)) dates.push_back(t);

    CvResult result;
    result.candidate = candidate;
    result.approximate = config.frozen_imputation;
    result.folds.resize(dates.size());
    // Shared before fanning out so folds do not race to compute it.
    full_imputation(ctx);
    parallel_for(dates.size(), config.jobs, [&](std::size_t i) { result.folds[i] = run_fold(ctx, dates[i], i); });

    double total = 0.0;
    for (const auto& f : result.folds) {
        if (f.used) {
            total += f.score;
            ++result.n_dates_used;
        } else {
            ++result.n_dates_skipped;
        }
    }
    result.mean_score =
        result.n_dates_used > 0 ? total / result.n_dates_used : std::numeric_limits<double>::quiet_NaN();
    return result;
}

SweepResult sweep(const DataBundle& data, const CvConfig& config) {
    const auto candidates = config.grid.candidates();
    if (candidates.empty()) throw std::invalid_argument("sweep: empty grid");
    ImputationCache cache;
    SweepResult out;
    std::optional<std::size_t> best;
    for (const auto& c : candidates) {
        out.table.push_back(time_series_cv(data, config, c, &cache));
        const auto& row = out.table.back();
        if (row.n_dates_used > 0 && (!best || row.mean_score > out.table[*best].mean_score)) {
            best = out.table.size() - 1;
        }
    }
    if (best) {
        out.best = out.table[*best].candidate;
        out.best_score = out.table[*best].mean_score;
    } else {
        out.best = candidates.front();
        out.best_score = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

void write_score_table(std::ostream& out, const SweepResult& result) {
    out << kScoreTableHeader << '\n';
    const auto flags = out.flags();
    const auto precision = out.precision(17);
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& row = result.table[i];
        const auto& c = row.candidate;
        out << i << ',' << c.max_rank << ',' << c.k << ',' << c.C << ',' << c.num_trees << ',' << row.mean_score << ','
            << row.n_dates_used << '\n';
    }
    out.precision(precision);
    out.flags(flags);
}

}  // namespace mandi
