#include "mandi/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mandi/parallel.hpp"

namespace mandi {

Direction argmax_direction(const ClassProbs& probs) {
    // Preference order on ties.
    constexpr std::array<Direction, 3> order{Direction::Flat, Direction::Up, Direction::Down};
    Direction best = order[0];
    double best_p = probs[class_index(best)];
    for (std::size_t i = 1; i < order.size(); ++i) {
        const double p = probs[class_index(order[i])];
        if (p > best_p + kTieTolerance) {
            best = order[i];
            best_p = p;
        }
    }
    return best;
}

int DecisionTree::leaf_of(std::span<const double> x) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return node;
}

void ForestModel::index_leaves() {
    leaf_members.assign(trees.size(), {});
    for (std::size_t b = 0; b < trees.size(); ++b) {
        auto& members = leaf_members[b];
        members.assign(trees[b].nodes.size(), {});
        for (std::size_t i = 0; i < training_samples.size(); ++i) {
            const int mult = inbag[b][i];
            if (mult == 0) continue;
            members[static_cast<std::size_t>(trees[b].leaf_of(training_samples[i].features))].push_back(
                LeafMember{static_cast<int>(i), mult});
        }
    }
}

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();  // weighted child Gini * n
};

double gini_mass(const std::array<int, kNumClasses>& c, int n) {
    if (n == 0) return 0.0;
    double sq = 0.0;
    for (int v : c) sq += static_cast<double>(v) * v;
    // n * (1 - sum p^2)
    return static_cast<double>(n) - sq / n;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<Sample>& samples, const ForestParams& params, std::size_t num_features,
                int mtry, std::uint64_t seed)
        : samples_(samples), params_(params), num_features_(num_features), mtry_(mtry), rng_(seed) {}

    DecisionTree build(std::vector<int> draws) {
        DecisionTree tree;
        grow(tree, draws, 0);
        return tree;
    }

private:
    int grow(DecisionTree& tree, std::vector<int>& draws, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::array<int, kNumClasses> counts{};
        for (int i : draws) ++counts[class_index(samples_[static_cast<std::size_t>(i)].direction)];
        tree.nodes.back().counts = counts;

        const int n = static_cast<int>(draws.size());
        const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
        const bool depth_done = params_.max_depth && depth >= *params_.max_depth;
        if (pure || depth_done || n < 2 * params_.min_samples_leaf) return id;

        SplitChoice split = choose_split(draws, counts);
        if (split.feature < 0) return id;

        auto mid = std::partition(draws.begin(), draws.end(), [&](int i) {
            return samples_[static_cast<std::size_t>(i)].features[static_cast<std::size_t>(split.feature)] <=
                   split.threshold;
        });
        std::vector<int> left(draws.begin(), mid);
        std::vector<int> right(mid, draws.end());
        draws.clear();
        draws.shrink_to_fit();

        const int l = grow(tree, left, depth + 1);
        const int r = grow(tree, right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Features are visited in a random order; at least mtry are evaluated, more only while no
    // valid split has been found.
    SplitChoice choose_split(const std::vector<int>& draws, const std::array<int, kNumClasses>& parent) {
        std::vector<int> order(num_features_);
        std::iota(order.begin(), order.end(), 0);
        SplitChoice best;
        std::vector<std::pair<double, int>> sorted(draws.size());
        for (std::size_t visited = 0; visited < num_features_; ++visited) {
            std::uniform_int_distribution<std::size_t> pick(visited, num_features_ - 1);
            std::swap(order[visited], order[pick(rng_)]);
            if (static_cast<int>(visited) >= mtry_ && best.feature >= 0) break;
            evaluate_feature(order[visited], draws, parent, sorted, best);
        }
        return best;
    }

    void evaluate_feature(int f, const std::vector<int>& draws, const std::array<int, kNumClasses>& parent,
                          std::vector<std::pair<double, int>>& sorted, SplitChoice& best) const {
        for (std::size_t j = 0; j < draws.size(); ++j) {
            const int i = draws[j];
            sorted[j] = {samples_[static_cast<std::size_t>(i)].features[static_cast<std::size_t>(f)], i};
        }
        std::sort(sorted.begin(), sorted.end());
        const int n = static_cast<int>(sorted.size());
        std::array<int, kNumClasses> left{};
        for (int j = 0; j + 1 < n; ++j) {
            ++left[class_index(samples_[static_cast<std::size_t>(sorted[static_cast<std::size_t>(j)].second)].direction)];
            const double lo = sorted[static_cast<std::size_t>(j)].first;
            const double hi = sorted[static_cast<std::size_t>(j) + 1].first;
            if (!(lo < hi)) continue;
            const int nl = j + 1;
            const int nr = n - nl;
            if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
            std::array<int, kNumClasses> right{};
            for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = parent[c] - left[c];
            const double score = gini_mass(left, nl) + gini_mass(right, nr);
            if (score < best.score) {
                double threshold = lo + (hi - lo) / 2.0;
                // Midpoint of adjacent doubles can round up to hi.
                if (!(threshold < hi)) threshold = lo;
                best = SplitChoice{f, threshold, score};
            }
        }
    }

    const std::vector<Sample>& samples_;
    const ForestParams& params_;
    std::size_t num_features_;
    int mtry_;
    std::mt19937_64 rng_;
};

}  // namespace

ForestModel fit_forest(std::vector<Sample> samples, const ForestParams& params) {
    if (samples.empty()) throw std::invalid_argument("fit_forest: no samples");
    if (params.num_trees < 1) throw std::invalid_argument("fit_forest: num_trees must be >= 1");
    if (params.min_samples_leaf < 1) throw std::invalid_argument("fit_forest: min_samples_leaf must be >= 1");
    if (params.max_depth && *params.max_depth < 0) throw std::invalid_argument("fit_forest: negative max_depth");
    const std::size_t p = samples.front().features.size();
    if (p == 0) throw std::invalid_argument("fit_forest: empty feature vectors");
    for (const auto& s : samples) {
        if (s.features.size() != p) throw std::invalid_argument("fit_forest: inconsistent feature lengths");
    }
    int mtry = params.features_per_split;
    if (mtry == 0) mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    if (mtry < 1 || static_cast<std::size_t>(mtry) > p) {
        throw std::invalid_argument("fit_forest: features_per_split must lie in [1, " + std::to_string(p) + "]");
    }

    ForestModel model;
    model.params = params;
    model.num_features = p;
    model.training_samples = std::move(samples);
    const std::size_t n = model.training_samples.size();
    const auto trees = static_cast<std::size_t>(params.num_trees);
    model.trees.resize(trees);
    model.inbag.assign(trees, std::vector<int>(n, 0));

    parallel_for(trees, params.jobs, [&](std::size_t b) {
        const std::uint64_t seed = params.rng_seed + b;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<int> draws(n);
        for (auto& d : draws) {
            d = static_cast<int>(draw(rng));
            ++model.inbag[b][static_cast<std::size_t>(d)];
        }
        std::sort(draws.begin(), draws.end());
        TreeBuilder builder(model.training_samples, params, p, mtry, seed ^ 0x9E3779B97F4A7C15ull);
        model.trees[b] = builder.build(std::move(draws));
    });
    model.index_leaves();
    return model;
}

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x) {
    if (x.size() != model.num_features) {
        throw std::invalid_argument("forest_predict: expected " + std::to_string(model.num_features) +
                                    " features, got " + std::to_string(x.size()));
    }
    ForestPrediction out;
    for (const auto& tree : model.trees) {
        const auto& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_of(x))];
        const double total = leaf.total();
        for (std::size_t c = 0; c < kNumClasses; ++c) out.probabilities[c] += leaf.counts[c] / total;
    }
    for (auto& p : out.probabilities) p /= static_cast<double>(model.trees.size());
    out.direction = argmax_direction(out.probabilities);
    return out;
}

nlohmann::json sample_to_json(const Sample& s) {
    return nlohmann::json{{"market_id", s.market_id},
                          {"step", s.step},
                          {"features", s.features},
                          {"direction", to_int(s.direction)},
                          {"price", s.price},
                          {"window_start", format_date(s.dates.window_start)},
                          {"window_end", format_date(s.dates.window_end)},
                          {"step_start", format_date(s.dates.step_start)},
                          {"step_end", format_date(s.dates.step_end)}};
}

Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    s.market_id = j.at("market_id").get<std::string>();
    s.step = j.at("step").get<int>();
    s.features = j.at("features").get<std::vector<double>>();
    s.direction = direction_from_int(j.at("direction").get<int>());
    s.price = j.at("price").get<double>();
    s.dates = StepWindow{parse_date(j.at("window_start").get<std::string>()),
                         parse_date(j.at("window_end").get<std::string>()),
                         parse_date(j.at("step_start").get<std::string>()),
                         parse_date(j.at("step_end").get<std::string>())};
    return s;
}

nlohmann::json forest_to_json(const ForestModel& model) {
    nlohmann::json params{{"num_trees", model.params.num_trees},
                          {"min_samples_leaf", model.params.min_samples_leaf},
                          {"features_per_split", model.params.features_per_split},
                          {"rng_seed", model.params.rng_seed}};
    params["max_depth"] = model.params.max_depth ? nlohmann::json(*model.params.max_depth) : nlohmann::json(nullptr);

    nlohmann::json trees = nlohmann::json::array();
    for (std::size_t b = 0; b < model.trees.size(); ++b) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : model.trees[b].nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts});
        }
        // Sparse in-bag multiset as [sample, multiplicity] pairs.
        nlohmann::json inbag = nlohmann::json::array();
        for (std::size_t i = 0; i < model.inbag[b].size(); ++i) {
            if (model.inbag[b][i] > 0) inbag.push_back({i, model.inbag[b][i]});
        }
        trees.push_back({{"nodes", std::move(nodes)}, {"inbag", std::move(inbag)}});
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : model.training_samples) samples.push_back(sample_to_json(s));
    return nlohmann::json{{"format", "mandi-forest"},
                          {"version", kForestFormatVersion},
                          {"params", std::move(params)},
                          {"num_features", model.num_features},
                          {"trees", std::move(trees)},
                          {"training_samples", std::move(samples)}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
    if (j.at("format") != "mandi-forest") throw std::invalid_argument("not a forest model document");
    if (j.at("version").get<int>() != kForestFormatVersion) {
        throw std::invalid_argument("unsupported forest format version " + j.at("version").dump());
    }
    ForestModel model;
    const auto& params = j.at("params");
    model.params.num_trees = params.at("num_trees").get<int>();
    model.params.min_samples_leaf = params.at("min_samples_leaf").get<int>();
    model.params.features_per_split = params.at("features_per_split").get<int>();
    model.params.rng_seed = params.at("rng_seed").get<std::uint64_t>();
    if (!params.at("max_depth").is_null()) model.params.max_depth = params.at("max_depth").get<int>();
    model.num_features = j.at("num_features").get<std::size_t>();
    for (const auto& s : j.at("training_samples")) model.training_samples.push_back(sample_from_json(s));

    const std::size_t n = model.training_samples.size();
    for (const auto& t : j.at("trees")) {
        DecisionTree tree;
        for (const auto& node : t.at("nodes")) {
            TreeNode tn;
            tn.feature = node.at(0).get<int>();
            tn.threshold = node.at(1).get<double>();
            tn.left = node.at(2).get<int>();
            tn.right = node.at(3).get<int>();
            tn.counts = node.at(4).get<std::array<int, kNumClasses>>();
            tree.nodes.push_back(tn);
        }
        std::vector<int> inbag(n, 0);
        for (const auto& pair : t.at("inbag")) {
            const auto i = pair.at(0).get<std::size_t>();
            if (i >= n) throw std::invalid_argument("in-bag index out of range");
            inbag[i] = pair.at(1).get<int>();
        }
        model.trees.push_back(std::move(tree));
        model.inbag.push_back(std::move(inbag));
    }
    model.index_leaves();
    return model;
}

}  // namespace mandi
