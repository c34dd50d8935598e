#include <limits>
#include <random>

#include "dtnarrate/analytics.hpp"

namespace dtnarrate::analytics {

namespace {

double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t nearest(const Point& p, const std::vector<Point>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double wcss_of(const std::vector<Point>& points, const std::vector<std::size_t>& a,
               const std::vector<Point>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += sq_dist(points[i], centroids[a[i]]);
  return s;
}

std::vector<Point> plus_plus_seed(const std::vector<Point>& points, std::size_t k, std::mt19937_64& rng) {
  std::vector<Point> centroids;
  centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = sq_dist(points[i], centroids[nearest(points[i], centroids)]);
      total += d2[i];
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng);
    } else {
      pick = std::discrete_distribution<std::size_t>(d2.begin(), d2.end())(rng);
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

// One seeded Lloyd run.
KMeansResult lloyd(const std::vector<Point>& points, std::size_t k, std::size_t max_iterations,
                   std::mt19937_64& rng) {
  const std::size_t dim = points.front().size();
  KMeansResult r;
  r.centroids = plus_plus_seed(points, k, rng);
  r.assignments.assign(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) r.assignments[i] = nearest(points[i], r.centroids);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    // Update step; an empty cluster takes the point farthest from its centroid.
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : r.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = points.size();
      double far_d = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (sizes[r.assignments[i]] < 2) continue;
        const double d = sq_dist(points[i], r.centroids[r.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == points.size()) continue;
      --sizes[r.assignments[far]];
      r.assignments[far] = c;
      sizes[c] = 1;
    }
    std::vector<Point> sums(k, Point(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) sums[r.assignments[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) r.centroids[c][j] = sums[c][j] / static_cast<double>(sizes[c]);
    }
    r.wcss_history.push_back(wcss_of(points, r.assignments, r.centroids));
    r.iterations = iter + 1;

    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t a = nearest(points[i], r.centroids);
      if (a != r.assignments[i] &&
          sq_dist(points[i], r.centroids[a]) < sq_dist(points[i], r.centroids[r.assignments[i]])) {
        r.assignments[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
  }
  r.wcss = wcss_of(points, r.assignments, r.centroids);
  return r;
}

void renumber(KMeansResult& r) {
  const std::size_t k = r.centroids.size();
  std::vector<std::size_t> map(k, k);
  std::size_t next = 0;
  for (std::size_t a : r.assignments) {
    if (map[a] == k) map[a] = next++;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (map[c] == k) map[c] = next++;
  }
  std::vector<Point> centroids(k);
  for (std::size_t c = 0; c < k; ++c) centroids[map[c]] = r.centroids[c];
  r.centroids = std::move(centroids);
  for (auto& a : r.assignments) a = map[a];
}

}  // namespace

KMeansResult kmeans(const std::vector<Point>& points, const KMeansOptions& options) {
  if (points.empty()) throw ValidationError("k-means needs at least one point");
  if (options.k < 1) throw ValidationError("k must be at least 1");
  if (options.k > points.size()) {
    throw ValidationError("k = " + std::to_string(options.k) + " exceeds the " + std::to_string(points.size()) +
                          " points");
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw ValidationError("points differ in dimension");
  }
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(splitmix64(options.seed + r));
    KMeansResult run = lloyd(points, options.k, options.max_iterations, rng);
    if (!have || run.wcss < best.wcss) {
      best = std::move(run);
      have = true;
    }
  }
  renumber(best);
  return best;
}

double silhouette(const std::vector<Point>& points, const std::vector<std::size_t>& assignments) {
  if (points.size() != assignments.size()) throw ValidationError("assignment count does not match points");
  if (points.empty()) return 0.0;
  std::size_t k = 0;
  for (std::size_t a : assignments) k = std::max(k, a + 1);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignments) ++sizes[a];

  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (sizes[assignments[i]] < 2) continue;
    std::vector<double> mean_d(k, 0.0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j != i) mean_d[assignments[j]] += std::sqrt(sq_dist(points[i], points[j]));
    }
    const double a = mean_d[assignments[i]] / static_cast<double>(sizes[assignments[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != assignments[i] && sizes[c] > 0) b = std::min(b, mean_d[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(points.size());
}

}  // namespace dtnarrate::analytics
