#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/data_model.hpp"
#include "mandi/impute.hpp"
#include "mandi/panel.hpp"

namespace mandi {

/// Fraction of positions where pred matches truth. Throws std::invalid_argument on empty or
/// mismatched input.
double raw_accuracy(std::span<const Direction> truth, std::span<const Direction> pred);

/// Mean per-class accuracy over the classes present in truth.
double balanced_accuracy(std::span<const Direction> truth, std::span<const Direction> pred);

/// Root mean squared error of prices given in Rs per 100 kg, reported in Rs per kg.
double rmse(std::span<const double> truth, std::span<const double> pred);

struct EvalReport {
    double raw_accuracy = 0.0;
    double balanced_accuracy = 0.0;
    std::optional<double> rmse;  // Rs per kg
    // Indexed by class_index(); empty when the class is absent from truth.
    std::array<std::optional<double>, 3> per_class_accuracy;
    std::size_t n_predictions = 0;
};

EvalReport evaluate(std::span<const Direction> truth, std::span<const Direction> pred);
nlohmann::json to_json(const EvalReport& report);

/// Cleaned sparse panels for one produce plus the market registry used for neighbor pooling.
struct DataBundle {
    MarketRegistry registry;
    SparsePanel price;
    SparsePanel volume;
};

enum class ClassifierKind { Forest, Logistic, Majority, UniformRandom };

const char* classifier_name(ClassifierKind kind);
ClassifierKind classifier_from_name(const std::string& name);

struct Candidate {
    int max_rank = 10;
    int k = 1;
    double C = 1.0;
    int num_trees = 100;

    bool operator==(const Candidate&) const = default;
};

struct CvGrid {
    std::vector<int> max_rank{10};
    std::vector<int> k{1};
    std::vector<double> C{1.0};
    std::vector<int> num_trees{100};

    /// Cartesian product, max_rank outermost and num_trees innermost.
    std::vector<Candidate> candidates() const;
};

/// Grid file: one `name = v1, v2, ...` line per axis; `#` starts a comment.
CvGrid parse_grid(std::istream& in);

struct CvConfig {
    Date t1{};
    Date t2{};
    int q = 1;
    int tau = 10;
    CvGrid grid;
    ClassifierKind classifier = ClassifierKind::Forest;
    // Markets predicted at every validation date; empty means all panel markets.
    std::vector<std::string> target_markets;
    // Impute once on all data instead of per fold. Faster but approximate: imputed values before t
    // can borrow strength from observations after t.
    bool frozen_imputation = false;
    // Base settings; max_rank comes from the candidate.
    ImputeConfig impute;
    std::uint64_t seed = 0;
    int jobs = 0;
    // Test-only: extends each fold's training data this many days past the validation date.
    int leak_future_days = 0;
};

/// Raised when a training sample draws on data from the validation date or later.
class LookaheadError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct FoldResult {
    Date date{};
    bool used = false;
    std::string skip_reason;
    EvalReport report;
    double score = 0.0;  // raw + balanced accuracy
    std::optional<Date> latest_training_day;
    std::size_t training_samples = 0;
};

struct CvResult {
    Candidate candidate;
    double mean_score = 0.0;
    int n_dates_used = 0;
    int n_dates_skipped = 0;
    bool approximate = false;
    std::vector<FoldResult> folds;
};

/// Imputed fold panels keyed by (fold end day, max_rank), shared across candidates.
class ImputationCache {
public:
    struct Entry {
        DensePanel price;
        DensePanel volume;
    };

    std::shared_ptr<const Entry> get_or_compute(std::size_t end_day, int max_rank,
                                                const std::function<Entry()>& compute);

private:
    std::mutex mu_;
    std::map<std::pair<std::size_t, int>, std::shared_ptr<const Entry>> entries_;
};

/// Walk-forward validation: for each date t = t1, t1 + q, ... <= t2, imputes and trains on days
/// strictly before t and scores the step [t, t + q) across the target markets. Throws
/// LookaheadError if any training sample's latest day is on or after t.
CvResult time_series_cv(const DataBundle& data, const CvConfig& config, const Candidate& candidate,
                        ImputationCache* cache = nullptr);

struct SweepResult {
    Candidate best;
    double best_score = 0.0;
    std::vector<CvResult> table;  // grid order
};

/// Exhaustive grid search. The best candidate has the highest mean score, first in grid order on
/// ties; candidates with no usable dates are never best.
SweepResult sweep(const DataBundle& data, const CvConfig& config);

inline constexpr const char* kScoreTableHeader = "candidate_id,max_rank,k,C,num_trees,mean_score,n_dates_used";

void write_score_table(std::ostream& out, const SweepResult& result);

}  // namespace mandi
