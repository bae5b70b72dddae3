#include "pw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "pw/error.hpp"

namespace pw {

void validate_point_set(const PointSet& points, std::string_view name) {
    if (points.empty())
        throw ParameterError(std::string(name) + ": point set must contain at least one point");
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!points[i].finite())
            throw ParameterError(std::string(name) + ": non-finite coordinate at index " +
                                 std::to_string(i));
}

std::vector<int> farthest_point_sample(const PointSet& points, int k, int start_index) {
    validate_point_set(points, "farthest_point_sample");
    const int n = static_cast<int>(points.size());
    if (k < 1 || k > n)
        throw ParameterError("farthest_point_sample: k=" + std::to_string(k) +
                             " out of range [1, " + std::to_string(n) + "]");
    if (start_index < 0 || start_index >= n)
        throw ParameterError("farthest_point_sample: start_index out of range");

    std::vector<int> selected;
    selected.reserve(k);
    selected.push_back(start_index);

    // min_dist2[i] = squared distance from point i to the selected set.
    std::vector<double> min_dist2(n, std::numeric_limits<double>::infinity());
    int last = start_index;
    for (int round = 1; round < k; ++round) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = (points[i] - points[last]).norm2();
            if (d2 < min_dist2[i]) min_dist2[i] = d2;
            if (min_dist2[i] > best_d2) {  // strict > keeps the lowest index on ties
                best_d2 = min_dist2[i];
                best = i;
            }
        }
        selected.push_back(best);
        last = best;
    }
    return selected;
}

namespace {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::int64_t v : {k.x, k.y, k.z}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

RadiusGraph build_radius_graph(const PointSet& points, double radius) {
    validate_point_set(points, "build_radius_graph");
    if (!(radius > 0.0)) throw ParameterError("build_radius_graph: radius must be positive");

    const int n = static_cast<int>(points.size());
    RadiusGraph graph;
    graph.node_count = n;
    graph.radius = radius;

    const double inv = 1.0 / radius;
    auto cell_of = [&](const Vec3& p) {
        return CellKey{static_cast<std::int64_t>(std::floor(p.x * inv)),
                       static_cast<std::int64_t>(std::floor(p.y * inv)),
                       static_cast<std::int64_t>(std::floor(p.z * inv))};
    };

    std::unordered_map<CellKey, std::vector<int>, CellKeyHash> grid;
    grid.reserve(static_cast<std::size_t>(n) * 2);
    for (int i = 0; i < n; ++i) grid[cell_of(points[i])].push_back(i);

    const double r2 = radius * radius;
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i) {
        const CellKey c = cell_of(points[i]);
        candidates.clear();
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (int j : it->second)
                        if (j != i) candidates.push_back(j);
                }
        std::sort(candidates.begin(), candidates.end());
        for (int j : candidates) {
            const Vec3 rel = points[j] - points[i];
            const double d2 = rel.norm2();
            if (d2 <= r2)
                graph.edges.push_back({i, j, rel, std::sqrt(d2)});
        }
    }
    return graph;
}

double chamfer_distance(const PointSet& a, const PointSet& b) {
    validate_point_set(a, "chamfer_distance(a)");
    validate_point_set(b, "chamfer_distance(b)");
    auto one_sided = [](const PointSet& from, const PointSet& to) {
        double sum = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, (p - q).norm2());
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    return one_sided(a, b) + one_sided(b, a);
}

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
    if (n <= 0) throw ParameterError("solve_assignment: n must be positive");
    if (static_cast<int>(cost.size()) != n * n)
        throw ParameterError("solve_assignment: cost matrix size mismatch");

    // Shortest augmenting path with potentials (Jonker-Volgenant style),
    // 1-based with a dummy row/column 0.
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

double earth_movers_distance(const PointSet& a, const PointSet& b) {
    validate_point_set(a, "earth_movers_distance(a)");
    validate_point_set(b, "earth_movers_distance(b)");
    if (a.size() != b.size())
        throw ParameterError("earth_movers_distance: sets must have equal cardinality (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    const int n = static_cast<int>(a.size());
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[i * n + j] = (a[i] - b[j]).norm();
    const std::vector<int> assign = solve_assignment(cost, n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[i * n + assign[i]];
    return total / static_cast<double>(n);
}

double mse_paired(const PointSet& a, const PointSet& b) {
    validate_point_set(a, "mse_paired(a)");
    validate_point_set(b, "mse_paired(b)");
    if (a.size() != b.size())
        throw ParameterError("mse_paired: sets must have equal cardinality (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm2();
    return sum / static_cast<double>(a.size());
}

}  // namespace pw
