#pragma once

#include "treedual/market_tree.hpp"

namespace treedual::testing {

/// Brute-force one-period arbitrage detection at a single node: searches the
/// candidate direction set (constraint angles and arc midpoints, exhaustive
/// for d <= 2) for holdings h with h . dS >= 0 against every child and > 0
/// against at least one. Entirely independent of the LP machinery.
bool node_has_arbitrage(const MarketModel& model, int node);

/// A finite event tree admits an arbitrage iff some one-period submarket
/// does; this scans all non-terminal nodes.
bool has_arbitrage(const MarketModel& model);

}  // namespace treedual::testing
