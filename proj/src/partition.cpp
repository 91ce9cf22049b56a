#include "styleflow/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "styleflow/error.hpp"

namespace styleflow {

void Partition::validate() const {
    std::vector<int> seen(extent, 0);
    for (const auto* side : {&content, &style}) {
        for (std::size_t i : *side) {
            if (i >= extent) throw ContractError("partition index " + std::to_string(i) + " out of range");
            ++seen[i];
        }
    }
    for (std::size_t i = 0; i < extent; ++i) {
        if (seen[i] != 1) throw ContractError("partition does not cover position " + std::to_string(i) + " exactly once");
    }
    if (style.empty()) throw ContractError("partition has an empty style side");
    if (axis == SplitAxis::tokens && content.empty()) throw ContractError("partition has an empty content side");
}

Partition Partition::from_style(SplitAxis axis, std::size_t extent, std::vector<std::size_t> style) {
    Partition p;
    p.axis = axis;
    p.extent = extent;
    std::sort(style.begin(), style.end());
    std::vector<bool> is_style(extent, false);
    for (std::size_t i : style) {
        if (i >= extent) throw ContractError("style index out of range");
        is_style[i] = true;
    }
    for (std::size_t i = 0; i < extent; ++i) {
        if (!is_style[i]) p.content.push_back(i);
    }
    p.style = std::move(style);
    return p;
}

Partition attention_split(const std::vector<double>& weights, double rho, const std::vector<bool>& padding,
                          std::optional<std::size_t> tie_parity) {
    if (!(rho > 0.0 && rho < 1.0)) throw ContractError("style fraction must lie in (0, 1)");
    if (!padding.empty() && padding.size() != weights.size()) {
        throw ContractError("padding mask length does not match weights");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (padding.empty() || !padding[i]) candidates.push_back(i);
    }
    const std::size_t n = candidates.size();
    if (n < 2) throw ContractError("attention split needs at least 2 non-padding tokens, got " + std::to_string(n));
    auto k = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n - 1);

    auto parity_rank = [&](std::size_t i) -> int {
        if (!tie_parity) return 0;
        return (i % 2) == (*tie_parity % 2) ? 0 : 1;
    };
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        if (parity_rank(a) != parity_rank(b)) return parity_rank(a) < parity_rank(b);
        return a < b;
    });
    candidates.resize(k);
    return Partition::from_style(SplitAxis::tokens, weights.size(), std::move(candidates));
}

Partition parity_split(std::size_t length, std::size_t parity) {
    if (length < 2) throw ContractError("parity split needs at least 2 tokens");
    std::vector<std::size_t> style;
    for (std::size_t i = parity % 2; i < length; i += 2) style.push_back(i);
    return Partition::from_style(SplitAxis::tokens, length, std::move(style));
}

Partition channel_split(std::size_t channels, std::size_t layer) {
    if (channels == 0) throw ContractError("channel split of zero channels");
    const std::size_t half = (channels + 1) / 2;
    std::vector<std::size_t> style;
    if (layer % 2 == 0 || channels == 1) {
        for (std::size_t i = 0; i < half; ++i) style.push_back(i);
    } else {
        for (std::size_t i = half; i < channels; ++i) style.push_back(i);
    }
    return Partition::from_style(SplitAxis::channels, channels, std::move(style));
}

}  // namespace styleflow
