#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "pw/vec3.hpp"

namespace pw {

// One directed edge of a radius graph. rel = x[sender] - x[receiver].
struct RadiusGraphEdge {
    int receiver = 0;
    int sender = 0;
    Vec3 rel;
    double length = 0.0;
};

// Symmetric directed neighbor graph: (i,j) is an edge iff i != j and
// |x_i - x_j| <= radius. Edges are ordered by (receiver, sender).
struct RadiusGraph {
    int node_count = 0;
    double radius = 0.0;
    std::vector<RadiusGraphEdge> edges;
};

// Throws ParameterError if the set is empty or contains non-finite coordinates.
void validate_point_set(const PointSet& points, std::string_view name);

// Greedy farthest point sampling. result[0] == start_index; each following
// index maximizes the minimum distance to the already-selected set, ties
// broken by lowest index.
std::vector<int> farthest_point_sample(const PointSet& points, int k, int start_index);

// Neighbor search over a uniform spatial hash grid with cell size == radius.
// Boundary is inclusive.
RadiusGraph build_radius_graph(const PointSet& points, double radius);

// Mean squared nearest-neighbor distance, both directions:
//   (1/|A|) sum_a min_b |a-b|^2 + (1/|B|) sum_b min_a |b-a|^2
double chamfer_distance(const PointSet& a, const PointSet& b);

// Mean cost of the optimal bijection under unsquared Euclidean cost, via an
// exact assignment solve. Requires |A| == |B|.
double earth_movers_distance(const PointSet& a, const PointSet& b);

// Mean of |a_i - b_i|^2 under index correspondence. Requires |A| == |B|.
double mse_paired(const PointSet& a, const PointSet& b);

// Exact O(n^3) min-cost assignment on a square cost matrix (row-major).
// Returns the column assigned to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

}  // namespace pw
