#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

namespace {

constexpr double kDt = 0.1;
constexpr double kAccel = 5.0;
constexpr double kDamping = 0.25;
constexpr double kMaxSpeed = 1.0;
constexpr double kBound = 1.5;
constexpr double kCollide = 0.3;  // two radii of 0.15
constexpr double kPushZone = 0.3;
constexpr double kCapture = 0.25;
constexpr double kPreyStep = 0.08;

double dist(P2 a, P2 b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

double coverage(const World& w) {
  double total = 0.0;
  for (const P2& l : w.landmarks) {
    double best = std::numeric_limits<double>::infinity();
    for (const Body& a : w.agents) best = std::min(best, dist(a.p, l));
    total += best;
  }
  return total;
}

int collisions(const World& w) {
  int n = 0;
  for (std::size_t i = 0; i < w.agents.size(); ++i)
    for (std::size_t j = i + 1; j < w.agents.size(); ++j)
      if (dist(w.agents[i].p, w.agents[j].p) < kCollide) ++n;
  return n;
}

}  // namespace

World integrate(const World& w, const std::vector<P2>& actions) {
  World out = w;
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const Body& a = w.agents[i];
    double ux = clampd(actions[i][0], -1.0, 1.0);
    double uy = clampd(actions[i][1], -1.0, 1.0);
    double vx = (1.0 - kDamping) * a.v[0] + (kAccel * kDt) * ux;
    double vy = (1.0 - kDamping) * a.v[1] + (kAccel * kDt) * uy;
    double sp = std::sqrt(vx * vx + vy * vy);
    if (sp > kMaxSpeed) {
      vx = (kMaxSpeed / sp) * vx;
      vy = (kMaxSpeed / sp) * vy;
    }
    Body& b = out.agents[i];
    b.acc = {(1.0 / kDt) * (vx - a.v[0]), (1.0 / kDt) * (vy - a.v[1])};
    b.v = {vx, vy};
    b.p = {clampd(a.p[0] + kDt * vx, -kBound, kBound), clampd(a.p[1] + kDt * vy, -kBound, kBound)};
  }
  return out;
}

double cn_v1(const World& next) { return -coverage(next) - 1.0 * collisions(next); }

double cn_v2(const World& next) {
  double r = -coverage(next) - 1.0 * collisions(next);
  // min agent distance per landmark
  std::vector<double> md;
  for (const P2& l : next.landmarks) {
    double best = 1e300;
    for (const Body& a : next.agents) best = std::min(best, dist(a.p, l));
    md.push_back(best);
  }
  const std::size_t closer = md[1] < md[0] ? 1 : 0;
  int at_closer = 0;
  for (const Body& a : next.agents) {
    const std::size_t nearest = dist(a.p, next.landmarks[1]) < dist(a.p, next.landmarks[0]) ? 1 : 0;
    if (nearest == closer) ++at_closer;
  }
  if (at_closer <= 1) r -= 10.0;
  return r;
}

double pf(const World& prev, const World& next, bool* pushed) {
  bool all_right = true;
  for (std::size_t i = 0; i < prev.agents.size(); ++i) all_right = all_right && next.agents[i].p[0] > prev.agents[i].p[0];
  // brute force over the 6 assignments of 3 agents to 3 landmarks
  bool distinct = false;
  std::vector<int> perm{0, 1, 2};
  do {
    bool ok = true;
    for (int i = 0; i < 3; ++i) ok = ok && dist(prev.agents[i].p, prev.landmarks[perm[i]]) <= kPushZone;
    distinct = distinct || ok;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const bool fire = all_right && distinct;
  if (pushed) *pushed = fire;
  return (fire ? 10.0 : 0.0) - coverage(next) - 1.0 * collisions(next);
}

double pp(const World& next) {
  double bonus = 0.0;
  for (const P2& l : next.landmarks) {
    bool all = true;
    for (const Body& a : next.agents) all = all && dist(a.p, l) <= kCapture;
    if (all) bonus += 10.0;
  }
  return bonus - coverage(next) - 1.0 * collisions(next);
}

std::vector<P2> prey(const World& w) {
  std::vector<P2> pred;
  for (const Body& a : w.agents) {
    pred.push_back({a.p[0] + kDt * a.v[0] + 0.5 * kDt * kDt * a.acc[0], a.p[1] + kDt * a.v[1] + 0.5 * kDt * kDt * a.acc[1]});
  }
  std::vector<P2> out;
  for (const P2& l : w.landmarks) {
    P2 best = l;
    double best_score = -1e300;
    for (int k = 0; k < 16; ++k) {
      const double ang = 2.0 * M_PI * k / 16.0;
      const P2 c{l[0] + kPreyStep * std::cos(ang), l[1] + kPreyStep * std::sin(ang)};
      if (std::fabs(c[0]) > kBound || std::fabs(c[1]) > kBound) continue;
      double s = 0.0;
      for (const P2& p : pred) s += dist(c, p);
      if (s > best_score + 1e-12) {
        best_score = s;
        best = c;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<double> mlp(const std::vector<Layer>& layers, std::vector<double> x) {
  for (const Layer& L : layers) {
    std::vector<double> y(L.b.size());
    for (std::size_t o = 0; o < y.size(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += L.w[o][i] * x[i];
      acc += L.b[o];
      if (L.act == "relu") acc = acc > 0 ? acc : 0.0;
      else if (L.act == "tanh") acc = std::tanh(acc);
      else if (L.act == "softplus") acc = std::log1p(std::exp(-std::fabs(acc))) + std::max(acc, 0.0);
      y[o] = acc;
    }
    x = std::move(y);
  }
  return x;
}

std::vector<double> adam_scalar(double x, const std::vector<double>& grads, double lr, double b1, double b2,
                                double eps) {
  double m = 0.0, v = 0.0;
  std::vector<double> out;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    x -= lr * mh / (std::sqrt(vh) + eps);
    out.push_back(x);
  }
  return out;
}

std::vector<std::vector<double>> value_iteration(const std::vector<std::vector<int>>& next,
                                                 const std::vector<std::vector<double>>& reward, double gamma,
                                                 int sweeps) {
  const std::size_t S = next.size(), A = next[0].size();
  std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));
  for (int it = 0; it < sweeps; ++it) {
    auto nq = q;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const auto& row = q[static_cast<std::size_t>(next[s][a])];
        nq[s][a] = reward[s][a] + gamma * *std::max_element(row.begin(), row.end());
      }
    q = nq;
  }
  return q;
}

double distill_loss(const std::vector<std::vector<std::vector<double>>>& teacher,
                    const std::vector<std::vector<std::vector<double>>>& student) {
  double total = 0.0;
  const std::size_t rows = teacher.at(0).size();
  for (std::size_t i = 0; i < teacher.size(); ++i)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t d = 0; d < teacher[i][r].size(); ++d) {
        const double e = teacher[i][r][d] - student[i][r][d];
        total += e * e;
      }
  return total / static_cast<double>(rows);
}

}  // namespace oracle
