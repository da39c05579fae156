#pragma once

// Independent reference implementations used by the unit and acceptance
// suites: exhaustive path enumeration, exhaustive integer allocation, and
// central finite differences.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pclab/mlp.hpp"
#include "pclab/network.hpp"

namespace oracle {

using pclab::LinkId;

struct PathResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<LinkId> path;
};

/// Every link-simple path from origin to destination, keeping the minimum
/// under (cost, hops, link sequence). Costs are summed in path order.
inline PathResult brute_force_route(const pclab::Network& net, LinkId origin, LinkId destination,
                                    std::span<const double> costs) {
  PathResult best;
  std::vector<LinkId> path{origin};
  std::vector<char> used(net.links().size(), 0);
  used[static_cast<std::size_t>(origin)] = 1;
  auto better = [](double c, const std::vector<LinkId>& p, const PathResult& b) {
    if (c != b.cost) return c < b.cost;
    if (p.size() != b.path.size()) return p.size() < b.path.size();
    return p < b.path;
  };
  std::function<void(double)> dfs = [&](double cost) {
    // Costs are positive, so a prefix already above the best cannot win.
    if (cost > best.cost) return;
    const LinkId at = path.back();
    if (at == destination) {
      if (better(cost, path, best)) best = {cost, path};
      return;
    }
    for (auto m : net.movements_from(at)) {
      const LinkId next = net.movement(m).to_link;
      if (used[static_cast<std::size_t>(next)]) continue;
      used[static_cast<std::size_t>(next)] = 1;
      path.push_back(next);
      dfs(cost + costs[static_cast<std::size_t>(next)]);
      path.pop_back();
      used[static_cast<std::size_t>(next)] = 0;
    }
  };
  dfs(costs[static_cast<std::size_t>(origin)]);
  return best;
}

/// Exact objective sum ((w_i - x_i) / C_i)^2 scaled by prod C_j^2.
inline __int128 scaled_objective(const std::vector<int>& x, const std::vector<int>& w, const std::vector<int>& c) {
  __int128 total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    __int128 term = static_cast<__int128>(w[i] - x[i]) * (w[i] - x[i]);
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) term *= static_cast<__int128>(c[j]) * c[j];
    total += term;
  }
  return total;
}

/// Enumerates every integer allocation with 0 <= x_i <= min(w_i, q_max_i)
/// summing to min(q_total, sum of caps). Ties resolve to the lexicographically
/// largest vector.
inline std::vector<int> brute_force_distribution(int q_total, const std::vector<int>& w, const std::vector<int>& q_max,
                                                 const std::vector<int>& c) {
  const std::size_t n = w.size();
  std::vector<int> cap(n);
  int cap_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cap[i] = std::min(w[i], q_max[i]);
    cap_sum += cap[i];
  }
  const int target = std::min(std::max(q_total, 0), cap_sum);
  std::vector<int> x(n, 0), best;
  __int128 best_obj = 0;
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == n) {
      if (left != 0) return;
      const auto obj = scaled_objective(x, w, c);
      if (best.empty() || obj < best_obj || (obj == best_obj && x > best)) {
        best = x;
        best_obj = obj;
      }
      return;
    }
    for (int v = 0; v <= std::min(cap[i], left); ++v) {
      x[i] = v;
      rec(i + 1, left - v);
    }
    x[i] = 0;
  };
  rec(0, target);
  return best;
}

/// Pre-activation signs of every hidden unit for one input.
inline std::vector<bool> relu_pattern(const pclab::Mlp& net, std::span<const double> x) {
  std::vector<bool> pattern;
  std::vector<double> a(x.begin(), x.end());
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(layers[l].out));
    for (int o = 0; o < layers[l].out; ++o) {
      double s = layers[l].b[static_cast<std::size_t>(o)];
      for (int i = 0; i < layers[l].in; ++i) s += layers[l].at(o, i) * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = s;
    }
    if (l + 1 < layers.size()) {
      for (auto& v : z) {
        pattern.push_back(v > 0);
        v = v > 0 ? v : 0.0;
      }
    }
    a = std::move(z);
  }
  return pattern;
}

struct GradientProbe {
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

inline double& parameter(pclab::Mlp& net, std::size_t layer, bool bias, std::size_t index) {
  auto& l = net.layers()[layer];
  return bias ? l.b[index] : l.w[index];
}

/// Central difference on one parameter. Returns nullopt when the perturbation
/// moves any sample across a ReLU kink, where the loss is not differentiable.
inline std::optional<GradientProbe> probe_gradient(pclab::Mlp net, std::span<const pclab::Sample> batch,
                                                   std::size_t layer, bool bias, std::size_t index, double h = 1e-5) {
  const auto grad = net.gradient(batch);
  const double analytic = bias ? grad[layer].b[index] : grad[layer].w[index];
  double& p = parameter(net, layer, bias, index);
  const double p0 = p;
  std::vector<std::vector<bool>> base;
  for (const auto& s : batch) base.push_back(relu_pattern(net, s.state));
  auto same_pattern = [&] {
    for (std::size_t k = 0; k < batch.size(); ++k)
      if (relu_pattern(net, batch[k].state) != base[k]) return false;
    return true;
  };
  p = p0 + h;
  if (!same_pattern()) return std::nullopt;
  const double up = net.loss(batch);
  p = p0 - h;
  if (!same_pattern()) return std::nullopt;
  const double down = net.loss(batch);
  p = p0;
  const double numeric = (up - down) / (2 * h);
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return GradientProbe{analytic, numeric, std::abs(analytic - numeric) / scale};
}

}  // namespace oracle
