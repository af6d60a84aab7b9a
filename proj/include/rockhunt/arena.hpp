// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "rockhunt/graph.hpp"

namespace rockhunt {

/// Lifetime of one arena tensor in execution steps. Step 0 materializes the
/// graph inputs; the layer at topological position k runs at step k + 1.
struct LivenessInterval {
    TensorId tensor = 0;
    std::size_t first = 0; // producing step
    std::size_t last = 0;  // last consuming step
    std::size_t bytes = 0;

    bool overlaps(const LivenessInterval& o) const noexcept { return first <= o.last && o.first <= last; }

    bool operator==(const LivenessInterval&) const = default;
};

/// One interval per non-constant tensor, in tensor-table order. Graph inputs
/// start at step 0, graph outputs stay live through the final layer.
/// Constants live in ROM and are not listed.
inline std::vector<LivenessInterval> liveness(const ModelGraph& g) {
    std::unordered_map<TensorId, std::size_t> step_of_producer;
    for (std::size_t k = 0; k < g.order.size(); ++k) step_of_producer[g.layers[g.order[k]].output] = k + 1;
    std::unordered_map<TensorId, std::size_t> last_use;
    for (std::size_t k = 0; k < g.order.size(); ++k)
        for (auto id : g.layers[g.order[k]].inputs) last_use[id] = k + 1;
    const std::size_t final_step = g.order.size();

    std::vector<LivenessInterval> out;
    for (const auto& t : g.tensors) {
        if (t.is_constant()) continue;
        LivenessInterval iv;
        iv.tensor = t.id;
        auto p = step_of_producer.find(t.id);
        iv.first = p == step_of_producer.end() ? 0 : p->second;
        auto u = last_use.find(t.id);
        iv.last = std::max(iv.first, u == last_use.end() ? iv.first : u->second);
        if (std::find(g.outputs.begin(), g.outputs.end(), t.id) != g.outputs.end())
            iv.last = std::max(iv.last, final_step);
        iv.bytes = static_cast<std::size_t>(t.byte_size());
        out.push_back(iv);
    }
    return out;
}

struct ArenaPlan {
    std::vector<LivenessInterval> intervals;
    std::map<TensorId, std::size_t> offsets;
    std::size_t peak_bytes = 0;
    std::size_t alignment = 16;

    bool operator==(const ArenaPlan&) const = default;
};

inline constexpr std::size_t kArenaAlignment = 16;

inline std::size_t align_up(std::size_t v, std::size_t a) noexcept { return (v + a - 1) / a * a; }

/// Largest total size of simultaneously live tensors; no valid placement can
/// peak below it.
inline std::size_t live_bytes_lower_bound(std::span<const LivenessInterval> intervals) {
    std::size_t steps = 0;
    for (const auto& iv : intervals) steps = std::max(steps, iv.last + 1);
    std::vector<std::size_t> live(steps, 0);
    for (const auto& iv : intervals)
        for (std::size_t s = iv.first; s <= iv.last; ++s) live[s] += iv.bytes;
    return live.empty() ? 0 : *std::max_element(live.begin(), live.end());
}

namespace detail {

struct Placement {
    std::vector<std::size_t> offsets; // by interval index
    std::size_t peak = 0;
};

/// Best-fit in the given order: each tensor takes the smallest aligned gap
/// between already-placed tensors whose lifetimes overlap its own, or goes
/// above all of them.
inline Placement best_fit(const std::vector<LivenessInterval>& iv, const std::vector<std::size_t>& order,
                          std::size_t alignment) {
    Placement out;
    out.offsets.assign(iv.size(), 0);
    std::vector<bool> placed(iv.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> conflicts; // [begin, end)
    for (auto i : order) {
        conflicts.clear();
        for (std::size_t j = 0; j < iv.size(); ++j)
            if (placed[j] && iv[j].overlaps(iv[i])) conflicts.emplace_back(out.offsets[j], out.offsets[j] + iv[j].bytes);
        std::sort(conflicts.begin(), conflicts.end());

        std::size_t best = 0, best_gap = 0, cursor = 0;
        bool found = false;
        for (const auto& [begin, end] : conflicts) {
            const std::size_t start = align_up(cursor, alignment);
            if (begin >= start + iv[i].bytes && (!found || begin - start < best_gap)) {
                best = start;
                best_gap = begin - start;
                found = true;
            }
            cursor = std::max(cursor, end);
        }
        if (!found) best = align_up(cursor, alignment);
        out.offsets[i] = best;
        placed[i] = true;
        out.peak = std::max(out.peak, best + iv[i].bytes);
    }
    return out;
}

/// First-improvement hill climb over the placement order: move one tensor
/// earlier, or swap two, while the peak drops. Stops at a local optimum,
/// at `floor`, or after `budget` placements.
inline Placement climb(const std::vector<LivenessInterval>& iv, std::vector<std::size_t> order, std::size_t alignment,
                       std::size_t floor, std::size_t budget) {
    auto best = best_fit(iv, order, alignment);
    const std::size_t n = order.size();
    bool improved = true;
    while (improved && best.peak > floor && budget > 0) {
        improved = false;
        const auto attempt = [&](std::vector<std::size_t>&& candidate) {
            --budget;
            auto p = best_fit(iv, candidate, alignment);
            if (p.peak < best.peak) {
                best = std::move(p);
                order = std::move(candidate);
                improved = true;
            }
        };
        for (std::size_t j = 1; j < n && !improved && budget > 0; ++j)
            for (std::size_t i = 0; i < j && !improved && budget > 0; ++i) {
                auto o = order;
                std::rotate(o.begin() + static_cast<long>(i), o.begin() + static_cast<long>(j),
                            o.begin() + static_cast<long>(j) + 1);
                attempt(std::move(o));
            }
        for (std::size_t j = 1; j < n && !improved && budget > 0; ++j)
            for (std::size_t i = 0; i < j && !improved && budget > 0; ++i) {
                auto o = order;
                std::swap(o[i], o[j]);
                attempt(std::move(o));
            }
    }
    return best;
}

} // namespace detail

/// Placements tried per starting order before the planner settles.
inline constexpr std::size_t kPlannerBudget = 4096;

/// Greedy best-fit, refined. Tensors are first placed by decreasing size
/// (ties: lower tensor id first), then by decreasing size x lifetime; from
/// each start a bounded hill climb over the placement order keeps any
/// reordering that lowers the peak. The lower of the two results wins, the
/// size-ordered one on ties. Deterministic.
inline ArenaPlan plan_intervals(std::vector<LivenessInterval> intervals, std::size_t alignment = kArenaAlignment) {
    if (alignment == 0) throw ArgumentError("arena alignment must be positive");
    const auto span_of = [&](std::size_t i) { return intervals[i].last - intervals[i].first + 1; };
    std::vector<std::size_t> by_size(intervals.size());
    for (std::size_t i = 0; i < by_size.size(); ++i) by_size[i] = i;
    auto by_area = by_size;
    std::sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
        if (intervals[a].bytes != intervals[b].bytes) return intervals[a].bytes > intervals[b].bytes;
        return intervals[a].tensor < intervals[b].tensor;
    });
    std::sort(by_area.begin(), by_area.end(), [&](std::size_t a, std::size_t b) {
        const auto sa = intervals[a].bytes * span_of(a), sb = intervals[b].bytes * span_of(b);
        if (sa != sb) return sa > sb;
        return intervals[a].tensor < intervals[b].tensor;
    });

    const std::size_t floor = live_bytes_lower_bound(intervals);
    auto best = detail::climb(intervals, by_size, alignment, floor, kPlannerBudget);
    if (best.peak > floor) {
        auto alt = detail::climb(intervals, by_area, alignment, floor, kPlannerBudget);
        if (alt.peak < best.peak) best = std::move(alt);
    }

    ArenaPlan plan;
    plan.alignment = alignment;
    plan.peak_bytes = best.peak;
    for (std::size_t i = 0; i < intervals.size(); ++i) plan.offsets[intervals[i].tensor] = best.offsets[i];
    plan.intervals = std::move(intervals);
    return plan;
}

/// Static arena layout for every non-constant tensor of `g`; peak_bytes is
/// the reported peak RAM. Graph inputs count as arena tensors.
inline ArenaPlan plan_arena(const ModelGraph& g, std::size_t alignment = kArenaAlignment) {
    return plan_intervals(liveness(g), alignment);
}

/// Human-readable problems with a plan; empty when it is valid.
inline std::vector<std::string> plan_violations(const ArenaPlan& plan) {
    std::vector<std::string> v;
    std::size_t top = 0;
    for (const auto& iv : plan.intervals) {
        auto it = plan.offsets.find(iv.tensor);
        if (it == plan.offsets.end()) {
            v.push_back("tensor " + std::to_string(iv.tensor) + " not placed");
            continue;
        }
        if (it->second % plan.alignment != 0) v.push_back("tensor " + std::to_string(iv.tensor) + " misaligned");
        top = std::max(top, it->second + iv.bytes);
    }
    for (std::size_t i = 0; i < plan.intervals.size(); ++i)
        for (std::size_t j = i + 1; j < plan.intervals.size(); ++j) {
            const auto& a = plan.intervals[i];
            const auto& b = plan.intervals[j];
            if (!a.overlaps(b) || !plan.offsets.count(a.tensor) || !plan.offsets.count(b.tensor)) continue;
            const auto oa = plan.offsets.at(a.tensor), ob = plan.offsets.at(b.tensor);
            if (oa < ob + b.bytes && ob < oa + a.bytes)
                v.push_back("tensors " + std::to_string(a.tensor) + " and " + std::to_string(b.tensor) +
                            " overlap in time and memory");
        }
    if (top != plan.peak_bytes) v.push_back("peak_bytes does not equal the highest placed byte");
    if (plan.peak_bytes < live_bytes_lower_bound(plan.intervals)) v.push_back("peak below live-bytes lower bound");
    return v;
}

/// Text table of the plan: tensor id, offset, size, live interval.
inline std::string dump_plan(const ArenaPlan& plan) {
    std::ostringstream os;
    os << std::left << std::setw(8) << "tensor" << std::right << std::setw(12) << "offset" << std::setw(12) << "size"
       << "  live\n";
    auto rows = plan.intervals;
    std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
        const auto oa = plan.offsets.at(a.tensor), ob = plan.offsets.at(b.tensor);
        return oa < ob || (oa == ob && a.tensor < b.tensor);
    });
    for (const auto& iv : rows)
        os << std::left << std::setw(8) << iv.tensor << std::right << std::setw(12) << plan.offsets.at(iv.tensor)
           << std::setw(12) << iv.bytes << "  [" << iv.first << ", " << iv.last << "]\n";
    os << "peak " << plan.peak_bytes << " bytes (alignment " << plan.alignment << ")\n";
    return os.str();
}

} // namespace rockhunt
