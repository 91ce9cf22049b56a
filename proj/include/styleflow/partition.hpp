#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace styleflow {

enum class SplitAxis { tokens, channels };

/// Disjoint split of token positions (or channels) into an unchanged content
/// side and a transformed style side. Index lists are ascending and 0-based.
struct Partition {
    SplitAxis axis = SplitAxis::tokens;
    std::size_t extent = 0;
    std::vector<std::size_t> content;
    std::vector<std::size_t> style;

    /// Throws ContractError unless the sides are disjoint, nonempty (style
    /// side; content may only be empty on the channel axis) and cover [0, extent).
    void validate() const;

    static Partition from_style(SplitAxis axis, std::size_t extent, std::vector<std::size_t> style);

    friend bool operator==(const Partition&, const Partition&) = default;
};

/// Top-fraction split: the ceil(rho * n) highest-weighted non-padding
/// positions (n = non-padding count, capped to [1, n-1]) become style.
/// Exact ties go to positions whose parity matches `tie_parity` first, then to
/// the smaller index. Padding positions are always content.
Partition attention_split(const std::vector<double>& weights, double rho,
                          const std::vector<bool>& padding = {},
                          std::optional<std::size_t> tie_parity = std::nullopt);

/// Every other token position, starting at `parity`.
Partition parity_split(std::size_t length, std::size_t parity);

/// One half of the channels is transformed: [0, ceil(d/2)) for even layers,
/// the rest for odd layers.
Partition channel_split(std::size_t channels, std::size_t layer);

}  // namespace styleflow
