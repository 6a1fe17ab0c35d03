#pragma once

// Central finite-difference check of analytic parameter gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "topparse/neural/graph.hpp"

namespace topparse::neural {

struct GradCheckEntry {
  std::string param;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::string worst_param;
  bool passed = true;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Values with |analytic| and |numeric| both under this are compared absolutely.
  double floor = 1e-6;
  // 0 checks every entry; otherwise a seeded sample per parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t sample_seed = 0;
  // Negative control: perturbs analytic gradients before comparing.
  bool corrupt = false;
};

inline double relative_error(double analytic, double numeric, double floor) {
  double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

// `build_loss` must construct a scalar loss on the graph it is given and be
// deterministic (no dropout).
inline GradCheckReport grad_check(ParamStore<double>& store,
                                  const std::function<Expr(Graph<double>&)>& build_loss,
                                  const GradCheckOptions& opt = {}) {
  store.zero_grad();
  {
    Graph<double> g(store);
    Expr loss = build_loss(g);
    g.backward(loss);
  }
  std::vector<Mat<double>> analytic;
  for (const auto& p : store.params()) analytic.push_back(p.grad);
  if (opt.corrupt)
    for (auto& a : analytic) a = a * 1.5 + Mat<double>::Constant(a.rows(), a.cols(), 1e-2);

  auto eval = [&]() {
    Graph<double> g(store);
    return g.scalar(build_loss(g));
  };

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  std::mt19937_64 rng(opt.sample_seed);
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& p = store.params()[k];
    GradCheckEntry e;
    e.param = p.name;
    std::vector<std::size_t> idx(p.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_entries_per_param && idx.size() > opt.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_entries_per_param);
    }
    double* data = p.value.data();
    for (std::size_t i : idx) {
      double saved = data[i];
      data[i] = saved + opt.step;
      double up = eval();
      data[i] = saved - opt.step;
      double down = eval();
      data[i] = saved;
      double numeric = (up - down) / (2.0 * opt.step);
      double a = analytic[k].data()[i];
      double err = relative_error(a, numeric, opt.floor);
      ++e.checked;
      if (err >= e.max_rel_error) {
        e.max_rel_error = err;
        e.worst_index = i;
        e.analytic = a;
        e.numeric = numeric;
      }
    }
    if (e.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = e.max_rel_error;
      report.worst_param = e.param;
    }
    report.entries.push_back(e);
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace topparse::neural
