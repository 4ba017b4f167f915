#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/panel.hpp"

namespace mandi {

inline constexpr std::size_t kNumClasses = 3;
/// Class probabilities indexed by class_index(): down, flat, up.
using ClassProbs = std::array<double, kNumClasses>;

inline std::size_t class_index(Direction d) { return static_cast<std::size_t>(to_int(d) + 1); }
inline Direction class_direction(std::size_t index) { return static_cast<Direction>(static_cast<int>(index) - 1); }

/// Probabilities closer than this are treated as tied.
inline constexpr double kTieTolerance = 1e-12;

/// Argmax over directions. Ties prefer flat, then up, then down.
Direction argmax_direction(const ClassProbs& probs);

struct ForestParams {
    int num_trees = 100;
    std::optional<int> max_depth;
    int min_samples_leaf = 1;
    // 0 selects ceil(sqrt(num_features)).
    int features_per_split = 0;
    std::uint64_t rng_seed = 0;
    // Worker threads for tree fitting; 0 uses the hardware concurrency.
    int jobs = 0;

    bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    // In-bag class counts with bootstrap multiplicity, indexed by class_index().
    std::array<int, kNumClasses> counts{};

    bool is_leaf() const { return feature < 0; }
    int total() const { return counts[0] + counts[1] + counts[2]; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root at 0

    /// Index of the leaf node reached by x. Goes left when x[feature] <= threshold.
    int leaf_of(std::span<const double> x) const;
    bool operator==(const DecisionTree&) const = default;
};

struct LeafMember {
    int sample;
    int multiplicity;
};

struct ForestModel {
    ForestParams params;
    std::size_t num_features = 0;
    std::vector<DecisionTree> trees;
    // inbag[b][i]: times training sample i was drawn for tree b.
    std::vector<std::vector<int>> inbag;
    std::vector<Sample> training_samples;
    // leaf_members[b][node]: in-bag samples resting in that leaf. Derived from the fields above.
    std::vector<std::vector<std::vector<LeafMember>>> leaf_members;

    std::size_t num_trees() const { return trees.size(); }
    /// Rebuilds leaf_members by routing every in-bag sample.
    void index_leaves();
};

ForestModel fit_forest(std::vector<Sample> samples, const ForestParams& params);

struct ForestPrediction {
    Direction direction = Direction::Flat;
    ClassProbs probabilities{};
};

/// Soft vote: average over trees of the in-bag class proportions of the leaf x reaches.
ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x);

inline constexpr int kForestFormatVersion = 1;

nlohmann::json forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& j);

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

}  // namespace mandi
