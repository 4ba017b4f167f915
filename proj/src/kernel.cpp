#include "mandi/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mandi {

std::vector<NeighborWeight> kernel_weights(const ForestModel& model, std::span<const double> x) {
    if (x.size() != model.num_features) {
        throw std::invalid_argument("kernel_weights: expected " + std::to_string(model.num_features) +
                                    " features, got " + std::to_string(x.size()));
    }
    if (model.leaf_members.size() != model.trees.size()) {
        throw std::logic_error("kernel_weights: model leaves are not indexed");
    }
    std::vector<double> weight(model.training_samples.size(), 0.0);
    const double inv_trees = 1.0 / static_cast<double>(model.trees.size());
    for (std::size_t b = 0; b < model.trees.size(); ++b) {
        const auto leaf = static_cast<std::size_t>(model.trees[b].leaf_of(x));
        const auto& members = model.leaf_members[b][leaf];
        int total = 0;
        for (const auto& m : members) total += m.multiplicity;
        for (const auto& m : members) {
            weight[static_cast<std::size_t>(m.sample)] += inv_trees * m.multiplicity / static_cast<double>(total);
        }
    }
    std::vector<NeighborWeight> out;
    for (std::size_t i = 0; i < weight.size(); ++i) {
        if (weight[i] <= 0.0) continue;
        const auto& s = model.training_samples[i];
        out.push_back(NeighborWeight{i, s.market_id, s.step, s.dates, weight[i], s.price, s.direction});
    }
    return out;
}

ClassProbs posterior(std::span<const NeighborWeight> neighbors) {
    ClassProbs eta{};
    for (const auto& n : neighbors) eta[class_index(n.label)] += n.weight;
    return eta;
}

Direction classify(const ClassProbs& eta) { return argmax_direction(eta); }

std::vector<NeighborWeight> sorted_by_weight(std::span<const NeighborWeight> neighbors) {
    std::vector<NeighborWeight> out(neighbors.begin(), neighbors.end());
    std::stable_sort(out.begin(), out.end(), [](const NeighborWeight& a, const NeighborWeight& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.market_id != b.market_id) return a.market_id < b.market_id;
        return a.step < b.step;
    });
    return out;
}

const char* method_name(IntervalMethod m) { return m == IntervalMethod::TopL ? "top_l" : "threshold"; }

Interval interval_top_l(std::span<const NeighborWeight> neighbors, int l) {
    if (neighbors.empty()) throw std::invalid_argument("interval_top_l: no neighbors");
    if (l < 1) throw std::invalid_argument("interval_top_l: l must be >= 1");
    const auto ranked = sorted_by_weight(neighbors);
    const std::size_t take = std::min(static_cast<std::size_t>(l), ranked.size());
    Interval out{ranked[0].neighbor_price, ranked[0].neighbor_price, IntervalMethod::TopL, static_cast<double>(l)};
    for (std::size_t i = 1; i < take; ++i) {
        out.lower = std::min(out.lower, ranked[i].neighbor_price);
        out.upper = std::max(out.upper, ranked[i].neighbor_price);
    }
    return out;
}

Interval interval_threshold(std::span<const NeighborWeight> neighbors, double omega) {
    if (neighbors.empty()) throw std::invalid_argument("interval_threshold: no neighbors");
    if (!(omega > 0.0)) throw std::invalid_argument("interval_threshold: omega must be positive");
    Interval out{0.0, 0.0, IntervalMethod::Threshold, omega};
    bool any = false;
    for (const auto& n : neighbors) {
        if (n.weight < omega) continue;
        out.lower = any ? std::min(out.lower, n.neighbor_price) : n.neighbor_price;
        out.upper = any ? std::max(out.upper, n.neighbor_price) : n.neighbor_price;
        any = true;
    }
    if (!any) {
        const auto top = sorted_by_weight(neighbors).front();
        out.lower = out.upper = top.neighbor_price;
        out.fallback = true;
    }
    return out;
}

double regress_rfnn(std::span<const NeighborWeight> neighbors) {
    std::vector<const NeighborWeight*> order;
    order.reserve(neighbors.size());
    for (const auto& n : neighbors) order.push_back(&n);
    std::sort(order.begin(), order.end(), [](const NeighborWeight* a, const NeighborWeight* b) {
        return a->sample_index < b->sample_index;
    });
    double price = 0.0;
    for (const auto* n : order) price += n->weight * n->neighbor_price;
    return price;
}

Calibration calibrate_l(const ForestModel& model, std::span<const Sample> calibration, double alpha) {
    if (calibration.empty()) throw std::invalid_argument("calibrate_l: empty calibration set");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("calibrate_l: alpha must lie in [0, 1]");

    // For each calibration point, the l at which the interval first covers the truth.
    // Top-l intervals are nested in l, so coverage(l) counts points with first_cover <= l.
    std::vector<std::size_t> first_cover;
    std::size_t max_neighbors = 0;
    for (const auto& s : calibration) {
        const auto ranked = sorted_by_weight(kernel_weights(model, s.features));
        max_neighbors = std::max(max_neighbors, ranked.size());
        double lo = ranked[0].neighbor_price;
        double hi = lo;
        std::size_t hit = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            lo = std::min(lo, ranked[i].neighbor_price);
            hi = std::max(hi, ranked[i].neighbor_price);
            if (lo <= s.price && s.price <= hi) {
                hit = i + 1;
                break;
            }
        }
        first_cover.push_back(hit);  // 0: never covered
    }

    Calibration out;
    const double n = static_cast<double>(calibration.size());
    for (std::size_t l = 1; l <= max_neighbors; ++l) {
        const auto covered = std::count_if(first_cover.begin(), first_cover.end(),
                                           [l](std::size_t h) { return h != 0 && h <= l; });
        out.coverage_by_l.push_back(static_cast<double>(covered) / n);
    }
    for (std::size_t l = 1; l <= max_neighbors; ++l) {
        if (out.coverage_by_l[l - 1] >= alpha) {
            out.l = static_cast<int>(l);
            out.coverage = out.coverage_by_l[l - 1];
            return out;
        }
    }
    out.l = static_cast<int>(max_neighbors);
    out.coverage = out.coverage_by_l.back();
    out.flagged = true;
    return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_calibration(const std::vector<Sample>& samples,
                                                                      double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split_calibration: fraction in (0, 1)");
    std::map<std::string, std::pair<int, int>> step_range;  // market -> (min, max)
    for (const auto& s : samples) {
        auto [it, inserted] = step_range.try_emplace(s.market_id, s.step, s.step);
        if (!inserted) {
            it->second.first = std::min(it->second.first, s.step);
            it->second.second = std::max(it->second.second, s.step);
        }
    }
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (const auto& s : samples) {
        const auto [lo, hi] = step_range.at(s.market_id);
        const int span = hi - lo + 1;
        const int calib_steps = std::max(1, static_cast<int>(std::ceil(fraction * span)));
        if (s.step > hi - calib_steps) {
            out.second.push_back(s);
        } else {
            out.first.push_back(s);
        }
    }
    return out;
}

nlohmann::json evidence_to_json(std::span<const NeighborWeight> neighbors) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : sorted_by_weight(neighbors)) {
        arr.push_back({{"market_id", n.market_id},
                       {"step_start_date", format_date(n.dates.step_start)},
                       {"step_end_date", format_date(n.dates.step_end)},
                       {"window_start_date", format_date(n.dates.window_start)},
                       {"window_end_date", format_date(n.dates.window_end)},
                       {"weight", n.weight},
                       {"neighbor_price", n.neighbor_price}});
    }
    return arr;
}

}  // namespace mandi
